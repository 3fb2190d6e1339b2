use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::{hvac_mode, DiffusionMatrix, LoadParameters};
use crate::error::{Error, Result};

pub const BTU_PER_KWH: f64 = 3412.14;

/// Physical house description for the two-node ETP model.
///
/// Units are BTU, hours and °F. `air_gain` is the heat flux into the air node
/// from internal and solar gains; the mass node receives no direct gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HouseParameters {
    /// Air heat capacity `C_a`, BTU/°F.
    pub air_capacity: f64,
    /// Solid-mass heat capacity `C_m`, BTU/°F.
    pub mass_capacity: f64,
    /// Envelope conductance `U_a`, BTU/(h·°F).
    pub envelope_conductance: f64,
    /// Air-to-mass conductance `H_m`, BTU/(h·°F).
    pub mass_conductance: f64,
    /// Heat flux into the air `Q_a`, BTU/h.
    pub air_gain: f64,
    pub outdoor_temp: f64,
    /// Thermal cooling capacity while ON, BTU/h.
    pub cooling_capacity: f64,
    pub cop: f64,
}

impl Default for HouseParameters {
    fn default() -> Self {
        Self {
            air_capacity: 1000.0,
            mass_capacity: 7000.0,
            envelope_conductance: 450.0,
            mass_conductance: 2500.0,
            air_gain: 500.0,
            outdoor_temp: 84.0,
            cooling_capacity: 12000.0,
            cop: 3.0,
        }
    }
}

impl HouseParameters {
    /// Relative half-width of the uniform spread applied to the heterogeneous
    /// house parameters (`C_a`, `C_m`, `U_a`, `H_m`, `Q_a`).
    pub const SPREAD: f64 = 0.2;

    /// Electrical power drawn while cooling, kW.
    pub fn rated_kw(&self) -> f64 {
        self.cooling_capacity / (BTU_PER_KWH * self.cop)
    }

    /// Builds `x' = A x + B_q` for air (`x1`) and mass (`x2`) temperatures.
    pub fn to_etp(&self, setpoint: f64, deadband: f64, noise: f64) -> EtpParameters {
        let ca = self.air_capacity;
        let cm = self.mass_capacity;
        let ua = self.envelope_conductance;
        let hm = self.mass_conductance;
        let a = Matrix2::new(-(ua + hm) / ca, hm / ca, hm / cm, -hm / cm);
        let b_off = Vector2::new((ua * self.outdoor_temp + self.air_gain) / ca, 0.0);
        let b_on = Vector2::new(
            (ua * self.outdoor_temp + self.air_gain - self.cooling_capacity) / ca,
            0.0,
        );
        EtpParameters {
            a,
            b_off,
            b_on,
            setpoint,
            deadband,
            rated_kw: self.rated_kw(),
            noise,
        }
    }
}

/// Coefficients of one ETP thermostat load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtpParameters {
    pub a: Matrix2<f64>,
    pub b_off: Vector2<f64>,
    pub b_on: Vector2<f64>,
    /// Base setpoint `u_set(0)`, °F.
    pub setpoint: f64,
    /// Deadband half-width `δ`, °F.
    pub deadband: f64,
    /// Power drawn while ON, kW.
    pub rated_kw: f64,
    /// Noise intensity on the air temperature, °F/√h.
    pub noise: f64,
}

impl Default for EtpParameters {
    fn default() -> Self {
        HouseParameters::default().to_etp(74.0, 1.0, 0.0)
    }
}

impl EtpParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.deadband > 0.0) {
            return Err(Error::param(
                "deadband",
                format!("must be > 0, got {}", self.deadband),
            ));
        }
        if !(self.rated_kw >= 0.0) {
            return Err(Error::param("rated_kw", "must be nonnegative"));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::param("noise", "must be nonnegative"));
        }
        let finite = self.a.iter().all(|v| v.is_finite())
            && self.b_off.iter().all(|v| v.is_finite())
            && self.b_on.iter().all(|v| v.is_finite())
            && self.setpoint.is_finite();
        if !finite {
            return Err(Error::param("a", "coefficients must be finite"));
        }
        // Real parts of the eigenvalues of a 2x2 matrix are all negative iff
        // trace < 0 and det > 0.
        if !(self.a.trace() < 0.0 && self.a.determinant() > 0.0) {
            return Err(Error::param(
                "a",
                "thermal matrix must have eigenvalues with negative real parts",
            ));
        }
        Ok(())
    }

    /// Clustering features: entries of `A`, `B_0`, `B_1` and the setpoint.
    pub fn dynamics_features(&self) -> [f64; 9] {
        [
            self.a[(0, 0)],
            self.a[(0, 1)],
            self.a[(1, 0)],
            self.a[(1, 1)],
            self.b_off[0],
            self.b_off[1],
            self.b_on[0],
            self.b_on[1],
            self.setpoint,
        ]
    }

    pub fn from_dynamics_features(
        features: &[f64],
        deadband: f64,
        rated_kw: f64,
        noise: f64,
    ) -> Result<Self> {
        let [a00, a01, a10, a11, b00, b01, b10, b11, setpoint] = features else {
            return Err(Error::Mismatch(format!(
                "expected 9 ETP features, got {}",
                features.len()
            )));
        };
        let params = Self {
            a: Matrix2::new(*a00, *a01, *a10, *a11),
            b_off: Vector2::new(*b00, *b01),
            b_on: Vector2::new(*b10, *b11),
            setpoint: *setpoint,
            deadband,
            rated_kw,
            noise,
        };
        params.validate()?;
        Ok(params)
    }
}

/// How the shared control signal moves the thermostat setpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetpointResponse {
    /// The signal is the commanded setpoint change in °F.
    Direct,
    /// The signal is a price deviation; the change is `a * v` saturated at `±a * b`.
    SaturatedLinear { slope: f64, bound: f64 },
}

impl SetpointResponse {
    pub fn setpoint_change(&self, control: f64) -> f64 {
        match *self {
            SetpointResponse::Direct => control,
            SetpointResponse::SaturatedLinear { slope, bound } => {
                if control.abs() <= bound {
                    slope * control
                } else {
                    slope * bound * control.signum()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HvacModel {
    pub params: EtpParameters,
    pub response: SetpointResponse,
    pub hazard: [f64; 2],
}

impl HvacModel {
    pub fn new(params: EtpParameters, response: SetpointResponse) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            response,
            hazard: [0.0; 2],
        })
    }

    #[inline]
    pub fn drift(&self, mode: usize, x: &Vector2<f64>) -> Vector2<f64> {
        let b = if mode == hvac_mode::ON {
            &self.params.b_on
        } else {
            &self.params.b_off
        };
        self.params.a * x + b
    }

    pub fn diffusion(&self) -> DiffusionMatrix {
        DiffusionMatrix::from_sigma(Matrix2::new(self.params.noise, 0.0, 0.0, 0.0))
    }

    /// Effective setpoint under control signal `control`.
    #[inline]
    pub fn setpoint(&self, control: f64) -> f64 {
        self.params.setpoint + self.response.setpoint_change(control)
    }

    /// Lower and upper thermostat thresholds under `control`.
    pub fn thresholds(&self, control: f64) -> (f64, f64) {
        let u = self.setpoint(control);
        (u - self.params.deadband, u + self.params.deadband)
    }

    #[inline]
    pub fn guard(&self, mode: usize, x: &Vector2<f64>, control: f64) -> f64 {
        let u = self.setpoint(control);
        if mode == hvac_mode::ON {
            x[0] - (u - self.params.deadband)
        } else {
            (u + self.params.deadband) - x[0]
        }
    }

    pub fn parameters(&self) -> LoadParameters {
        let p = &self.params;
        let mut theta: Vec<f64> = p.a.iter().copied().collect();
        theta.extend(p.b_off.iter());
        theta.extend(p.b_on.iter());
        theta.push(p.rated_kw);
        theta.push(p.noise);
        let mut alpha = vec![p.setpoint, p.deadband];
        if let SetpointResponse::SaturatedLinear { slope, bound } = self.response {
            alpha.push(slope);
            alpha.push(bound);
        }
        LoadParameters { theta, alpha }
    }
}
