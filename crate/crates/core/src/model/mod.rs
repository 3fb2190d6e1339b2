//! Hybrid-system abstraction of a single responsive load.
//!
//! A load evolves a continuous state `x` under a mode-dependent vector field
//! until the state reaches the outflow surface of its mode domain, where the
//! mode switches deterministically while `x` is carried over unchanged. An
//! optional hazard rate adds random switches between guard crossings.
//!
//! Every shipped family has a two-dimensional continuous state and a
//! two-dimensional noise input, so states are [`Vector2`] values.

mod etp;
mod pev;
mod schedule;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use etp::{EtpParameters, HouseParameters, HvacModel, SetpointResponse, BTU_PER_KWH};
pub use pev::PevModel;
pub use schedule::{ControlEvent, ControlSchedule};

/// Continuous state dimension of every shipped model family.
pub const STATE_DIM: usize = 2;

pub mod hvac_mode {
    pub const OFF: usize = 0;
    pub const ON: usize = 1;
}

pub mod pev_mode {
    pub const WAITING: usize = 0;
    pub const CHARGING: usize = 1;
    pub const COMPLETED: usize = 2;
}

/// Discrete mode plus continuous state of one load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub mode: usize,
    pub x: Vector2<f64>,
}

impl HybridState {
    pub fn new(mode: usize, x1: f64, x2: f64) -> Self {
        Self {
            mode,
            x: Vector2::new(x1, x2),
        }
    }
}

/// `sigma` maps the noise input to the state; `big_sigma = sigma * sigma^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionMatrix {
    pub sigma: Matrix2<f64>,
    pub big_sigma: Matrix2<f64>,
}

impl DiffusionMatrix {
    pub fn from_sigma(sigma: Matrix2<f64>) -> Self {
        Self {
            sigma,
            big_sigma: sigma * sigma.transpose(),
        }
    }

    pub fn zero() -> Self {
        Self::from_sigma(Matrix2::zeros())
    }

    pub fn is_zero(&self) -> bool {
        self.sigma.iter().all(|&s| s == 0.0)
    }
}

/// Load parameters split into the physical part (θ) and the control part (α).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadParameters {
    pub theta: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// A fully parameterized load. Immutable once built and cheap to share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LoadModel {
    Hvac(HvacModel),
    Pev(PevModel),
}

/// ETP thermostat model with `Q = {0 (OFF), 1 (ON)}`.
pub fn make_hvac_etp(params: EtpParameters) -> Result<LoadModel> {
    HvacModel::new(params, SetpointResponse::Direct).map(LoadModel::Hvac)
}

/// Three-mode PEV charging job (waiting, charging, completed).
pub fn make_pev(charge_rate_kw: f64, deadline_slack_h: f64) -> Result<LoadModel> {
    PevModel::new(charge_rate_kw, deadline_slack_h).map(LoadModel::Pev)
}

/// Wraps an HVAC model so the control signal is a price deviation mapped to a
/// setpoint change by the saturated linear rule `a * clamp(v, -b, b)`.
pub fn make_price_responsive(base: LoadModel, slope: f64, bound: f64) -> Result<LoadModel> {
    let LoadModel::Hvac(hvac) = base else {
        return Err(Error::param(
            "base",
            "price response applies to HVAC models only",
        ));
    };
    if !(bound > 0.0) {
        return Err(Error::param("b", format!("must be > 0, got {bound}")));
    }
    if !slope.is_finite() {
        return Err(Error::param("a", "must be finite"));
    }
    Ok(LoadModel::Hvac(HvacModel {
        response: SetpointResponse::SaturatedLinear { slope, bound },
        ..hvac
    }))
}

impl LoadModel {
    pub fn modes(&self) -> &'static [usize] {
        match self {
            LoadModel::Hvac(_) => &[hvac_mode::OFF, hvac_mode::ON],
            LoadModel::Pev(_) => &[pev_mode::WAITING, pev_mode::CHARGING, pev_mode::COMPLETED],
        }
    }

    pub fn mode_count(&self) -> usize {
        self.modes().len()
    }

    pub fn dim(&self) -> usize {
        STATE_DIM
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.mode_count() {
            Ok(())
        } else {
            Err(Error::UnknownMode { mode })
        }
    }

    /// Vector field `f(q, x; θ)`. `mode` must be valid.
    #[inline]
    pub fn drift(&self, mode: usize, x: &Vector2<f64>) -> Vector2<f64> {
        match self {
            LoadModel::Hvac(m) => m.drift(mode, x),
            LoadModel::Pev(m) => m.drift(mode),
        }
    }

    #[inline]
    pub fn diffusion(&self, mode: usize, _x: &Vector2<f64>) -> DiffusionMatrix {
        match self {
            LoadModel::Hvac(m) => m.diffusion(),
            LoadModel::Pev(_) => {
                let _ = mode;
                DiffusionMatrix::zero()
            }
        }
    }

    /// Signed domain indicator: positive inside `X_q`, zero on its boundary.
    #[inline]
    pub fn guard(&self, mode: usize, x: &Vector2<f64>, control: f64) -> f64 {
        match self {
            LoadModel::Hvac(m) => m.guard(mode, x, control),
            LoadModel::Pev(_) => PevModel::guard(mode, x),
        }
    }

    pub fn successor(&self, mode: usize) -> Option<usize> {
        match self {
            LoadModel::Hvac(_) => Some(1 - mode),
            LoadModel::Pev(_) => match mode {
                pev_mode::WAITING => Some(pev_mode::CHARGING),
                pev_mode::CHARGING => Some(pev_mode::COMPLETED),
                _ => None,
            },
        }
    }

    pub fn predecessor(&self, mode: usize) -> Option<usize> {
        match self {
            LoadModel::Hvac(_) => Some(1 - mode),
            LoadModel::Pev(_) => match mode {
                pev_mode::CHARGING => Some(pev_mode::WAITING),
                pev_mode::COMPLETED => Some(pev_mode::CHARGING),
                _ => None,
            },
        }
    }

    /// Mode transition map: at or beyond the outflow surface the load moves to
    /// its successor mode; inside the domain the mode is kept.
    pub fn transition(&self, mode: usize, x: &Vector2<f64>, control: f64) -> usize {
        match self.successor(mode) {
            Some(next) if self.guard(mode, x, control) <= 0.0 => next,
            _ => mode,
        }
    }

    /// Raw per-mode hazard rate (per hour).
    #[inline]
    pub fn hazard(&self, mode: usize, _x: &Vector2<f64>) -> f64 {
        match self {
            LoadModel::Hvac(m) => m.hazard[mode],
            LoadModel::Pev(m) => m.hazard[mode],
        }
    }

    /// Hazard actually acting on the load: random jumps may only land inside
    /// the successor's domain, so the rate is zero wherever they would not.
    #[inline]
    pub fn effective_hazard(&self, mode: usize, x: &Vector2<f64>, control: f64) -> f64 {
        let rate = self.hazard(mode, x);
        if rate == 0.0 {
            return 0.0;
        }
        match self.successor(mode) {
            Some(next) if self.guard(next, x, control) > 0.0 => rate,
            _ => 0.0,
        }
    }

    pub fn max_hazard(&self) -> f64 {
        match self {
            LoadModel::Hvac(m) => m.hazard.iter().copied().fold(0.0, f64::max),
            LoadModel::Pev(m) => m.hazard.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Power drawn in `mode`, kW.
    pub fn output(&self, mode: usize) -> f64 {
        match self {
            LoadModel::Hvac(m) => {
                if mode == hvac_mode::ON {
                    m.params.rated_kw
                } else {
                    0.0
                }
            }
            LoadModel::Pev(m) => {
                if mode == pev_mode::CHARGING {
                    m.charge_kw
                } else {
                    0.0
                }
            }
        }
    }

    /// Replaces the per-mode hazard rates.
    pub fn with_hazard(self, rates: &[f64]) -> Result<Self> {
        if rates.len() != self.mode_count() {
            return Err(Error::param(
                "hazard",
                format!("expected {} rates, got {}", self.mode_count(), rates.len()),
            ));
        }
        if let Some(r) = rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return Err(Error::ModelContract(format!(
                "hazard rates must be finite and nonnegative, got {r}"
            )));
        }
        Ok(match self {
            LoadModel::Hvac(mut m) => {
                m.hazard.copy_from_slice(rates);
                LoadModel::Hvac(m)
            }
            LoadModel::Pev(mut m) => {
                m.hazard.copy_from_slice(rates);
                LoadModel::Pev(m)
            }
        })
    }

    pub fn parameters(&self) -> LoadParameters {
        match self {
            LoadModel::Hvac(m) => m.parameters(),
            LoadModel::Pev(m) => LoadParameters {
                theta: vec![m.charge_kw],
                alpha: vec![m.deadline_slack_h],
            },
        }
    }

    pub fn as_hvac(&self) -> Option<&HvacModel> {
        match self {
            LoadModel::Hvac(m) => Some(m),
            LoadModel::Pev(_) => None,
        }
    }
}

/// Checked accessor: `f(q, x; θ)`.
pub fn evaluate_drift(model: &LoadModel, state: &HybridState) -> Result<Vector2<f64>> {
    model.check_mode(state.mode)?;
    Ok(model.drift(state.mode, &state.x))
}

/// Checked accessor: `Σ(q, x) = σ σ^T`.
pub fn evaluate_big_sigma(model: &LoadModel, state: &HybridState) -> Result<Matrix2<f64>> {
    model.check_mode(state.mode)?;
    Ok(model.diffusion(state.mode, &state.x).big_sigma)
}

/// Checked accessor: `h(q; θ)` in kW.
pub fn evaluate_output(model: &LoadModel, mode: usize) -> Result<f64> {
    model.check_mode(mode)?;
    Ok(model.output(mode))
}
