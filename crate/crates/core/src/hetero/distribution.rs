use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marginal law of one parameter coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoordinateSpec {
    Uniform {
        low: f64,
        high: f64,
    },
    PointMass {
        value: f64,
    },
    /// Draws uniformly from an explicit list of values.
    Samples {
        values: Vec<f64>,
    },
}

impl CoordinateSpec {
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            CoordinateSpec::Uniform { low, high } => (*low, *high),
            CoordinateSpec::PointMass { value } => (*value, *value),
            CoordinateSpec::Samples { values } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                    (a.min(*v), b.max(*v))
                }),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let bad = |reason: &str| Err(Error::config(name, reason));
        match self {
            CoordinateSpec::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return bad("uniform bounds must be finite and ordered");
                }
            }
            CoordinateSpec::PointMass { value } => {
                if !value.is_finite() {
                    return bad("point mass must be finite");
                }
            }
            CoordinateSpec::Samples { values } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return bad("sample list must be nonempty and finite");
                }
            }
        }
        Ok(())
    }

    fn is_point(&self) -> bool {
        let (a, b) = self.bounds();
        a == b
    }
}

/// Independent per-coordinate parameter distribution on a compact box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDistribution {
    pub coordinates: Vec<(String, CoordinateSpec)>,
}

impl ParameterDistribution {
    pub fn new(coordinates: Vec<(String, CoordinateSpec)>) -> Result<Self> {
        let d = Self { coordinates };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coordinates.is_empty() {
            return Err(Error::config(
                "distribution",
                "needs at least one coordinate",
            ));
        }
        for (name, spec) in &self.coordinates {
            spec.validate(name)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.coordinates.iter().map(|(_, s)| s.bounds()).collect()
    }

    /// True when every coordinate is degenerate.
    pub fn is_point_mass(&self) -> bool {
        self.coordinates.iter().all(|(_, s)| s.is_point())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coordinates.iter().position(|(n, _)| n == name)
    }
}

/// `n` independent draws, reproducible from `seed`.
pub fn sample_parameters(
    dist: &ParameterDistribution,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    dist.validate()?;
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            dist.coordinates
                .iter()
                .map(|(_, spec)| match spec {
                    CoordinateSpec::Uniform { low, high } => {
                        low + (high - low) * rng.random::<f64>()
                    }
                    CoordinateSpec::PointMass { value } => *value,
                    CoordinateSpec::Samples { values } => {
                        *values.choose(&mut rng).expect("nonempty")
                    }
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setpoints() -> ParameterDistribution {
        ParameterDistribution::new(vec![(
            "setpoint".into(),
            CoordinateSpec::Uniform {
                low: 70.0,
                high: 78.0,
            },
        )])
        .unwrap()
    }

    #[test]
    fn point_mass_gives_identical_samples() {
        let d = ParameterDistribution::new(vec![(
            "x".into(),
            CoordinateSpec::PointMass { value: 3.0 },
        )])
        .unwrap();
        assert!(d.is_point_mass());
        let s = sample_parameters(&d, 5, 1).unwrap();
        assert!(s.iter().all(|v| v == &vec![3.0]));
    }

    #[test]
    fn uniform_sample_mean_is_within_four_sigma() {
        let n = 10_000;
        let s = sample_parameters(&setpoints(), n, 7).unwrap();
        let mean = s.iter().map(|v| v[0]).sum::<f64>() / n as f64;
        let sd = 8.0 / 12f64.sqrt();
        assert!((mean - 74.0).abs() < 4.0 * sd / (n as f64).sqrt());
        assert!(s.iter().all(|v| (70.0..=78.0).contains(&v[0])));
    }

    #[test]
    fn seeds_reproduce_samples() {
        assert_eq!(
            sample_parameters(&setpoints(), 50, 3).unwrap(),
            sample_parameters(&setpoints(), 50, 3).unwrap()
        );
        assert_ne!(
            sample_parameters(&setpoints(), 50, 3).unwrap(),
            sample_parameters(&setpoints(), 50, 4).unwrap()
        );
    }

    #[test]
    fn rejects_unordered_bounds() {
        let r = ParameterDistribution::new(vec![(
            "setpoint".into(),
            CoordinateSpec::Uniform {
                low: 2.0,
                high: 1.0,
            },
        )]);
        assert!(matches!(r, Err(Error::Config { .. })));
    }

    #[test]
    fn sample_list_draws_members() {
        let d = ParameterDistribution::new(vec![(
            "x".into(),
            CoordinateSpec::Samples {
                values: vec![1.0, 2.0],
            },
        )])
        .unwrap();
        let s = sample_parameters(&d, 100, 0).unwrap();
        assert!(s.iter().all(|v| v[0] == 1.0 || v[0] == 2.0));
        assert!(s.iter().any(|v| v[0] == 1.0) && s.iter().any(|v| v[0] == 2.0));
        assert_eq!(d.bounds(), vec![(1.0, 2.0)]);
    }
}
