use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::PowerSeries;

/// Error of a candidate series against a reference over a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub window: (f64, f64),
    pub samples: usize,
    pub rms_relative_error: f64,
    pub max_relative_error: f64,
    /// Relative errors are divided by `max(|reference|, floor)`.
    pub floor: f64,
}

/// Compares `candidate` with `reference` on the sample times of whichever
/// series is coarser inside `window`; the other is linearly interpolated.
pub fn compare_series(
    candidate: &PowerSeries,
    reference: &PowerSeries,
    window: (f64, f64),
) -> Result<ComparisonReport> {
    let (from, to) = window;
    let inside = |s: &PowerSeries| -> Vec<f64> {
        s.times
            .iter()
            .copied()
            .filter(|t| *t >= from && *t <= to)
            .collect()
    };
    let (tc, tr) = (inside(candidate), inside(reference));
    let times = if tc.len() < tr.len() { tc } else { tr };
    if times.is_empty() || candidate.is_empty() || reference.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let span = |s: &PowerSeries| (s.times[0], s.times[s.len() - 1]);
    for s in [candidate, reference] {
        let (a, b) = span(s);
        if from < a - 1e-9 || to > b + 1e-9 {
            return Err(Error::Mismatch(format!(
                "window [{from}, {to}] is outside the series span [{a}, {b}]"
            )));
        }
    }
    let refs: Vec<f64> = times.iter().map(|t| reference.value_at(*t)).collect();
    let mean = refs.iter().sum::<f64>() / refs.len() as f64;
    let floor = 0.01 * mean.abs();
    let mut sum_sq = 0.0;
    let mut max = 0.0f64;
    for (t, r) in times.iter().zip(&refs) {
        let denom = r.abs().max(floor);
        let diff = (candidate.value_at(*t) - r).abs();
        let e = if denom > 0.0 {
            diff / denom
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        sum_sq += e * e;
        max = max.max(e);
    }
    Ok(ComparisonReport {
        window,
        samples: times.len(),
        rms_relative_error: (sum_sq / times.len() as f64).sqrt(),
        max_relative_error: max,
        floor,
    })
}

/// Samples with `from < t <= to`.
fn restrict(series: &PowerSeries, from: f64, to: f64) -> Option<PowerSeries> {
    let keep: Vec<usize> = (0..series.len())
        .filter(|&k| series.times[k] > from && series.times[k] <= to)
        .collect();
    if keep.is_empty() {
        return None;
    }
    Some(PowerSeries {
        times: keep.iter().map(|&k| series.times[k]).collect(),
        values: keep.iter().map(|&k| series.values[k]).collect(),
        source: series.source,
        meta: series.meta.clone(),
    })
}

/// Centred moving average over a window of `width` hours.
pub fn smooth(series: &PowerSeries, width: f64) -> Vec<f64> {
    let n = series.len();
    if width <= 0.0 || n == 0 {
        return series.values.clone();
    }
    let mut prefix = vec![0.0; n + 1];
    for (k, v) in series.values.iter().enumerate() {
        prefix[k + 1] = prefix[k] + v;
    }
    let (mut lo, mut hi) = (0usize, 0usize);
    (0..n)
        .map(|k| {
            let t = series.times[k];
            while series.times[lo] < t - 0.5 * width {
                lo += 1;
            }
            while hi < n && series.times[hi] <= t + 0.5 * width {
                hi += 1;
            }
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Minimum prominence of a rebound peak, relative to the mean of the series
/// over the interval.
pub const PEAK_PROMINENCE: f64 = 0.05;

/// Local maxima in `(from, to]` of the series smoothed within that interval
/// whose topographic prominence is at least [`PEAK_PROMINENCE`] of the
/// interval mean.
pub fn rebound_peaks(series: &PowerSeries, from: f64, to: f64, width: f64) -> Vec<(f64, f64)> {
    let Some(part) = restrict(series, from, to) else {
        return Vec::new();
    };
    let v = smooth(&part, width);
    if v.len() < 3 {
        return Vec::new();
    }
    let mean = part.values.iter().sum::<f64>() / part.len() as f64;
    let threshold = PEAK_PROMINENCE * mean.abs();
    if !(threshold > 0.0) {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    for k in 1..v.len() - 1 {
        if !(v[k] > v[k - 1] && v[k] >= v[k + 1]) {
            continue;
        }
        let mut left = v[k];
        for j in (0..k).rev() {
            if v[j] > v[k] {
                break;
            }
            left = left.min(v[j]);
        }
        let mut right = v[k];
        for &x in &v[k + 1..] {
            if x > v[k] {
                break;
            }
            right = right.min(x);
        }
        if v[k] - left.max(right) >= threshold {
            peaks.push((part.times[k], v[k]));
        }
    }
    peaks
}

/// Spacing of the first two rebound peaks in `(from, to]`.
pub fn rebound_period(series: &PowerSeries, from: f64, to: f64, width: f64) -> Option<f64> {
    let peaks = rebound_peaks(series, from, to, width);
    (peaks.len() >= 2).then(|| peaks[1].0 - peaks[0].0)
}

/// Response of one series to one control event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventResponse {
    pub time: f64,
    /// Mean over the interval preceding the event (from the previous event or
    /// the window start).
    pub before: f64,
    /// Mean over `[time + settle, next]`.
    pub settled: f64,
    /// Largest value in `(time, next]` of the series smoothed within that
    /// interval.
    pub peak: f64,
    pub period: Option<f64>,
}

/// Per-event responses; `next` is the following event or the window end.
pub fn event_responses(
    series: &PowerSeries,
    events: &[f64],
    window: (f64, f64),
    settle: f64,
    width: f64,
) -> Result<Vec<EventResponse>> {
    let mut prev = window.0;
    let mut out = Vec::new();
    for (i, &time) in events.iter().enumerate() {
        let next = events.get(i + 1).copied().unwrap_or(window.1);
        let before = series.mean_over(prev, time).ok_or(Error::EmptyWindow)?;
        let settled = series
            .mean_over((time + settle).min(next), next)
            .ok_or(Error::EmptyWindow)?;
        let peak = restrict(series, time, next)
            .map(|part| {
                smooth(&part, width)
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .ok_or(Error::EmptyWindow)?;
        out.push(EventResponse {
            time,
            before,
            settled,
            peak,
            period: rebound_period(series, time, next, width),
        });
        prev = time;
    }
    Ok(out)
}
