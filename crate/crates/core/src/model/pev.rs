use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::pev_mode::{CHARGING, COMPLETED, WAITING};
use crate::error::{Error, Result};

/// Timing dynamics of a PEV charging job.
///
/// `x1` is the remaining charging time and `x2` the remaining time the job
/// can still be deferred, both in hours. Waiting burns slack, charging burns
/// remaining time; a negative `x1` in the completed mode means the job
/// finished `-x1` hours ago.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PevModel {
    pub charge_kw: f64,
    /// Nominal deferral slack at plug-in, hours.
    pub deadline_slack_h: f64,
    pub hazard: [f64; 3],
}

impl PevModel {
    pub fn new(charge_kw: f64, deadline_slack_h: f64) -> Result<Self> {
        if !(charge_kw > 0.0) || !charge_kw.is_finite() {
            return Err(Error::param(
                "charge_rate",
                format!("must be > 0, got {charge_kw}"),
            ));
        }
        if !(deadline_slack_h >= 0.0) {
            return Err(Error::param("deadline_slack", "must be nonnegative"));
        }
        Ok(Self {
            charge_kw,
            deadline_slack_h,
            hazard: [0.0; 3],
        })
    }

    #[inline]
    pub fn drift(&self, mode: usize) -> Vector2<f64> {
        if mode == WAITING {
            Vector2::new(0.0, -1.0)
        } else {
            Vector2::new(-1.0, 0.0)
        }
    }

    /// `X_0 = {x2 > 0}` (with `x1 >= 0`), `X_1 = {x1 > 0}`, `X_2 = {x1 <= 0}`.
    #[inline]
    pub fn guard(mode: usize, x: &Vector2<f64>) -> f64 {
        match mode {
            WAITING => x[1],
            CHARGING => x[0],
            COMPLETED => -x[0],
            _ => f64::NAN,
        }
    }
}
