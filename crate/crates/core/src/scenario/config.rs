use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hetero::HvacPopulation;
use crate::model::{ControlEvent, ControlSchedule, HouseParameters};
use crate::pde::{GridSpec, Truncation};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Control values are setpoint changes in °F.
    Setback,
    /// Control values are price deviations mapped through `[price]`.
    PriceResponse,
    Pev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub sampling: u64,
    pub clustering: u64,
    pub simulation: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            sampling: 1,
            clustering: 2,
            simulation: 3,
        }
    }
}

impl Seeds {
    /// Replaces every seed by one derived from `k`.
    pub fn overridden(k: u64) -> Self {
        Self {
            sampling: k,
            clustering: k,
            simulation: k.wrapping_add(1),
        }
    }
}

/// Initial states relative to each load's own setpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HvacInit {
    pub on_fraction: f64,
    pub air_offset: (f64, f64),
    pub mass_offset: (f64, f64),
}

impl Default for HvacInit {
    fn default() -> Self {
        Self {
            on_fraction: 0.5,
            air_offset: (-1.0, 1.0),
            mass_offset: (-1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HvacSection {
    #[serde(default)]
    pub house: HouseParameters,
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default = "default_setpoints")]
    pub setpoint_range: (f64, f64),
    #[serde(default = "default_deadband")]
    pub deadband: f64,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub hazard: [f64; 2],
    #[serde(default)]
    pub init: HvacInit,
}

fn default_spread() -> f64 {
    HouseParameters::SPREAD
}
fn default_setpoints() -> (f64, f64) {
    (70.0, 78.0)
}
fn default_deadband() -> f64 {
    1.0
}

impl Default for HvacSection {
    fn default() -> Self {
        Self {
            house: HouseParameters::default(),
            spread: default_spread(),
            setpoint_range: default_setpoints(),
            deadband: default_deadband(),
            noise: 0.0,
            hazard: [0.0; 2],
            init: HvacInit::default(),
        }
    }
}

impl HvacSection {
    pub fn population(&self) -> HvacPopulation {
        HvacPopulation {
            house: self.house,
            spread: self.spread,
            setpoint_range: self.setpoint_range,
            deadband: self.deadband,
            noise: self.noise,
        }
    }
}

/// Saturated linear price-to-setpoint map `slope * clamp(v, -bound, bound)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceSection {
    pub slope: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PevInit {
    pub mode: usize,
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PevSection {
    pub charge_kw: f64,
    pub deadline_slack: f64,
    #[serde(default)]
    pub hazard: [f64; 3],
    pub init: PevInit,
    pub max_remaining: f64,
    pub max_slack: f64,
    pub completed_span: f64,
    #[serde(default = "default_strip")]
    pub strip: f64,
}

fn default_strip() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub cells_per_interval: Option<[usize; 2]>,
    #[serde(default)]
    pub cell_width: Option<[f64; 2]>,
    /// HVAC truncation beyond the thresholds, °F (air and mass).
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_tol_mass")]
    pub tol_mass: f64,
    #[serde(default = "default_tol_small")]
    pub max_escaped: f64,
    #[serde(default = "default_tol_small")]
    pub max_clipped: f64,
}

fn default_margin() -> f64 {
    6.0
}
fn default_tol_mass() -> f64 {
    1e-3
}
fn default_tol_small() -> f64 {
    1e-6
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            cells_per_interval: None,
            cell_width: None,
            margin: default_margin(),
            tol_mass: default_tol_mass(),
            max_escaped: default_tol_small(),
            max_clipped: default_tol_small(),
        }
    }
}

impl GridSection {
    pub fn spec(&self) -> Result<GridSpec> {
        match (self.cells_per_interval, self.cell_width) {
            (Some(_), Some(_)) => Err(Error::config(
                "grid",
                "give either cells_per_interval or cell_width, not both",
            )),
            (Some(n), None) => Ok(GridSpec::CellsPerInterval(n)),
            (None, Some(w)) => Ok(GridSpec::CellWidth(w)),
            (None, None) => Ok(GridSpec::default()),
        }
    }
}

/// Comparison window, smoothing and the tolerances that decide the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Defaults to `[burn_in, horizon]`.
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    /// Width of the centred moving average used for peaks, hours.
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
    /// Time after an event excluded from its settled mean, hours.
    #[serde(default = "default_settle")]
    pub settle: f64,
    #[serde(default)]
    pub max_rms_relative_error: Option<f64>,
    #[serde(default)]
    pub max_period_mismatch: Option<f64>,
}

fn default_smoothing() -> f64 {
    0.1
}
fn default_settle() -> f64 {
    1.0
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            window: None,
            smoothing: default_smoothing(),
            settle: default_settle(),
            max_rms_relative_error: None,
            max_period_mismatch: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Times at which MC snapshots and PDE densities are written, hours.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub directory: Option<String>,
}

/// One demand-response experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub kind: ScenarioKind,
    /// Hours.
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub population: usize,
    #[serde(default = "default_clusters")]
    pub clusters: usize,
    /// Initial period excluded from the default comparison window, hours.
    #[serde(default)]
    pub burn_in: f64,
    /// Hours simulated under the initial control before `t = 0`; nothing is
    /// recorded during the warm-up.
    #[serde(default)]
    pub warmup: f64,
    #[serde(default = "default_output_interval")]
    pub output_interval: f64,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub events: Vec<ControlEvent>,
    #[serde(default)]
    pub hvac: Option<HvacSection>,
    #[serde(default)]
    pub price: Option<PriceSection>,
    #[serde(default)]
    pub pev: Option<PevSection>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_clusters() -> usize {
    1
}
fn default_output_interval() -> f64 {
    0.01
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let value: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        match value.get("schema_version") {
            None => return Err(Error::config("schema_version", "missing")),
            Some(v) if v.as_integer() != Some(SCHEMA_VERSION as i64) => {
                return Err(Error::config(
                    "schema_version",
                    format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
                ))
            }
            _ => {}
        }
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::config("horizon", "must be positive"));
        }
        if !(self.dt > 0.0) || self.dt > self.horizon {
            return Err(Error::config("dt", "must lie in (0, horizon]"));
        }
        if !(self.output_interval >= self.dt) {
            return Err(Error::config("output_interval", "must be at least dt"));
        }
        if self.population == 0 {
            return Err(Error::config("population", "must be at least 1"));
        }
        if self.clusters == 0 {
            return Err(Error::config("clusters", "must be at least 1"));
        }
        if self.clusters > self.population {
            return Err(Error::config("clusters", "must not exceed population"));
        }
        if !(0.0..self.horizon).contains(&self.burn_in) {
            return Err(Error::config("burn_in", "must lie in [0, horizon)"));
        }
        if !(self.warmup >= 0.0) || !self.warmup.is_finite() {
            return Err(Error::config("warmup", "must be finite and nonnegative"));
        }
        for (i, e) in self.events.iter().enumerate() {
            if !(e.time >= 0.0 && e.time <= self.horizon) || !e.value.is_finite() {
                return Err(Error::config(
                    format!("events[{i}]"),
                    "time must lie in [0, horizon] and value be finite",
                ));
            }
            if i > 0 && !(e.time > self.events[i - 1].time) {
                return Err(Error::config(
                    format!("events[{i}].time"),
                    "events must be strictly time-ordered",
                ));
            }
        }
        if let Some((a, b)) = self.compare.window {
            if !(a >= 0.0 && b <= self.horizon && b > a) {
                return Err(Error::config(
                    "compare.window",
                    "must be an interval inside [0, horizon]",
                ));
            }
        }
        if !(self.compare.smoothing >= 0.0) || !(self.compare.settle >= 0.0) {
            return Err(Error::config(
                "compare",
                "smoothing and settle must be nonnegative",
            ));
        }
        self.grid.spec()?;
        if !(self.grid.margin > 0.0) {
            return Err(Error::config("grid.margin", "must be positive"));
        }
        match self.kind {
            ScenarioKind::Setback | ScenarioKind::PriceResponse => {
                let hvac = self
                    .hvac
                    .as_ref()
                    .ok_or_else(|| Error::config("hvac", "section required"))?;
                let (lo, hi) = hvac.init.air_offset;
                if !(lo >= -hvac.deadband && hi <= hvac.deadband && hi > lo) {
                    return Err(Error::config(
                        "hvac.init.air_offset",
                        "must be a nonempty interval inside the deadband",
                    ));
                }
                let (lo, hi) = hvac.init.mass_offset;
                if !(hi > lo) {
                    return Err(Error::config(
                        "hvac.init.mass_offset",
                        "must be a nonempty interval",
                    ));
                }
                if !(0.0..=1.0).contains(&hvac.init.on_fraction) {
                    return Err(Error::config("hvac.init.on_fraction", "must lie in [0, 1]"));
                }
                if hvac.hazard.iter().any(|h| !(*h >= 0.0)) {
                    return Err(Error::config("hvac.hazard", "must be nonnegative"));
                }
                hvac.population().distribution()?;
                if self.kind == ScenarioKind::PriceResponse && self.price.is_none() {
                    return Err(Error::config(
                        "price",
                        "section required for price_response",
                    ));
                }
            }
            ScenarioKind::Pev => {
                let pev = self
                    .pev
                    .as_ref()
                    .ok_or_else(|| Error::config("pev", "section required"))?;
                if pev.init.mode > 2 {
                    return Err(Error::config("pev.init.mode", "must be 0, 1 or 2"));
                }
                if !(pev.init.x1.1 > pev.init.x1.0 && pev.init.x2.1 > pev.init.x2.0) {
                    return Err(Error::config(
                        "pev.init",
                        "x1 and x2 must be nonempty intervals",
                    ));
                }
                if self.clusters != 1 {
                    return Err(Error::config(
                        "clusters",
                        "PEV scenarios are homogeneous; use 1",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<ControlSchedule> {
        ControlSchedule::new(self.events.clone())
    }

    /// Schedule on the simulation clock, which starts `warmup` hours early.
    pub fn run_schedule(&self) -> Result<ControlSchedule> {
        Ok(self.schedule()?.shifted(self.warmup))
    }

    /// Simulated hours including the warm-up.
    pub fn run_horizon(&self) -> f64 {
        self.horizon + self.warmup
    }

    /// Snapshot times on the simulation clock.
    pub fn run_snapshot_times(&self) -> Vec<f64> {
        self.output
            .snapshot_times
            .iter()
            .map(|t| t + self.warmup)
            .collect()
    }

    pub fn window(&self) -> (f64, f64) {
        self.compare.window.unwrap_or((self.burn_in, self.horizon))
    }

    pub fn truncation_pev(&self) -> Option<Truncation> {
        self.pev.as_ref().map(|p| Truncation::Pev {
            max_remaining: p.max_remaining,
            max_slack: p.max_slack,
            completed_span: p.completed_span,
            strip: p.strip,
        })
    }

    /// MC power is recorded every this many steps.
    pub fn output_every(&self) -> usize {
        ((self.output_interval / self.dt).round() as usize).max(1)
    }
}
