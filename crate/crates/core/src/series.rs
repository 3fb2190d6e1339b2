//! Aggregated power time series and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const POWER_CSV_HEADER: &str = "time_hours,power_kw,source";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesSource {
    Mc,
    Pde,
}

impl SeriesSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            SeriesSource::Mc => "mc",
            SeriesSource::Pde => "pde",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(SeriesSource::Mc),
            "pde" => Ok(SeriesSource::Pde),
            other => Err(Error::Parse(format!("unknown series source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub loads: usize,
    pub seed: Option<u64>,
    pub clusters: Option<usize>,
}

/// Time-stamped aggregated power, kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub source: SeriesSource,
    pub meta: SeriesMeta,
}

impl PowerSeries {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        source: SeriesSource,
        meta: SeriesMeta,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Mismatch(format!(
                "series has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Mismatch(
                "series times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            times,
            values,
            source,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear interpolation; clamps outside the series span.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 0 {
            return f64::NAN;
        }
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let k = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Mean of the samples with `from <= t <= to`.
    pub fn mean_over(&self, from: f64, to: f64) -> Option<f64> {
        let (sum, count) = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= from && **t <= to)
            .fold((0.0, 0usize), |(s, c), (_, v)| (s + v, c + 1));
        (count > 0).then(|| sum / count as f64)
    }

    /// Samples from `origin` on, with times measured from `origin`.
    pub fn rebased(&self, origin: f64) -> Self {
        if origin == 0.0 {
            return self.clone();
        }
        let tol = 1e-9 * (1.0 + origin.abs());
        let (times, values) = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= origin - tol)
            .map(|(t, v)| ((t - origin).max(0.0), *v))
            .unzip();
        Self {
            times,
            values,
            source: self.source,
            meta: self.meta.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.len() + 1));
        out.push_str(POWER_CSV_HEADER);
        out.push('\n');
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_sig6(*t),
                fmt_sig6(*v),
                self.source.as_str()
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == POWER_CSV_HEADER => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header `{POWER_CSV_HEADER}`, got {other:?}"
                )))
            }
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut source = None;
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut cols = line.split(',');
            let mut next = |what: &str| {
                cols.next()
                    .ok_or_else(|| Error::Parse(format!("line {}: missing {what}", n + 2)))
            };
            let t = parse_f64(next("time")?, n)?;
            let v = parse_f64(next("power")?, n)?;
            let s = SeriesSource::parse(next("source")?.trim())?;
            if source.is_some_and(|prev| prev != s) {
                return Err(Error::Parse("mixed sources in one series".into()));
            }
            source = Some(s);
            times.push(t);
            values.push(v);
        }
        Self::new(
            times,
            values,
            source.unwrap_or(SeriesSource::Mc),
            SeriesMeta::default(),
        )
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {}: bad number `{s}`", line + 2)))
}

/// Formats with six significant digits, `%g` style.
pub fn fmt_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-4..6).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let fixed = format!("{:.*}", (5 - exp) as usize, v);
    trim_zeros(&fixed).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
