use serde::{Deserialize, Serialize};

use super::distribution::{sample_parameters, CoordinateSpec, ParameterDistribution};
use super::kmeans::{kmeans, ClusterSet};
use crate::error::{Error, Result};
use crate::model::{EtpParameters, HouseParameters};

/// Heterogeneous HVAC population: house parameters spread uniformly by
/// `±spread` around `house`, setpoints uniform on `setpoint_range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HvacPopulation {
    pub house: HouseParameters,
    pub spread: f64,
    pub setpoint_range: (f64, f64),
    pub deadband: f64,
    pub noise: f64,
}

impl Default for HvacPopulation {
    fn default() -> Self {
        Self {
            house: HouseParameters::default(),
            spread: HouseParameters::SPREAD,
            setpoint_range: (70.0, 78.0),
            deadband: 1.0,
            noise: 0.0,
        }
    }
}

const COORDINATES: [&str; 6] = [
    "air_capacity",
    "mass_capacity",
    "envelope_conductance",
    "mass_conductance",
    "air_gain",
    "setpoint",
];

impl HvacPopulation {
    /// A population whose every load has exactly these parameters.
    pub fn homogeneous(house: HouseParameters, setpoint: f64, deadband: f64, noise: f64) -> Self {
        Self {
            house,
            spread: 0.0,
            setpoint_range: (setpoint, setpoint),
            deadband,
            noise,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.spread == 0.0 && self.setpoint_range.0 == self.setpoint_range.1
    }

    pub fn distribution(&self) -> Result<ParameterDistribution> {
        if !(0.0..1.0).contains(&self.spread) {
            return Err(Error::config("spread", "must lie in [0, 1)"));
        }
        let h = &self.house;
        let nominal = [
            h.air_capacity,
            h.mass_capacity,
            h.envelope_conductance,
            h.mass_conductance,
            h.air_gain,
        ];
        let mut coordinates: Vec<(String, CoordinateSpec)> = COORDINATES[..5]
            .iter()
            .zip(nominal)
            .map(|(name, v)| {
                let spec = if self.spread == 0.0 {
                    CoordinateSpec::PointMass { value: v }
                } else {
                    let (a, b) = (v * (1.0 - self.spread), v * (1.0 + self.spread));
                    CoordinateSpec::Uniform {
                        low: a.min(b),
                        high: a.max(b),
                    }
                };
                (name.to_string(), spec)
            })
            .collect();
        let (lo, hi) = self.setpoint_range;
        coordinates.push((
            COORDINATES[5].to_string(),
            if lo == hi {
                CoordinateSpec::PointMass { value: lo }
            } else {
                CoordinateSpec::Uniform { low: lo, high: hi }
            },
        ));
        ParameterDistribution::new(coordinates)
    }

    /// Converts one sample of [`HvacPopulation::distribution`] to ETP form.
    pub fn etp_from_sample(&self, sample: &[f64]) -> Result<EtpParameters> {
        let [ca, cm, ua, hm, qa, setpoint] = sample else {
            return Err(Error::Mismatch(format!(
                "expected {} HVAC sample coordinates, got {}",
                COORDINATES.len(),
                sample.len()
            )));
        };
        let house = HouseParameters {
            air_capacity: *ca,
            mass_capacity: *cm,
            envelope_conductance: *ua,
            mass_conductance: *hm,
            air_gain: *qa,
            ..self.house
        };
        let params = house.to_etp(*setpoint, self.deadband, self.noise);
        params.validate()?;
        Ok(params)
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<EtpParameters>> {
        sample_parameters(&self.distribution()?, n, seed)?
            .iter()
            .map(|s| self.etp_from_sample(s))
            .collect()
    }
}

/// Clusters ETP loads on their dynamics coefficients and setpoint.
///
/// Returns the cluster set (ratings are member means of `rated_kw`) and one
/// representative load per cluster.
pub fn cluster_hvac(
    loads: &[EtpParameters],
    n_clusters: usize,
    seed: u64,
) -> Result<(ClusterSet, Vec<EtpParameters>)> {
    if loads.is_empty() {
        return Err(Error::param("loads", "nothing to cluster"));
    }
    let features: Vec<Vec<f64>> = loads
        .iter()
        .map(|p| p.dynamics_features().to_vec())
        .collect();
    let mut set = kmeans(&features, n_clusters, seed)?;
    let rated: Vec<f64> = loads.iter().map(|p| p.rated_kw).collect();
    set.ratings = set.member_means(&rated)?;
    let deadband = set.member_means(&loads.iter().map(|p| p.deadband).collect::<Vec<_>>())?;
    let noise = set.member_means(&loads.iter().map(|p| p.noise).collect::<Vec<_>>())?;
    let bounds: Vec<(f64, f64)> = (0..features[0].len())
        .map(|k| {
            features
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), f| {
                    (a.min(f[k]), b.max(f[k]))
                })
        })
        .collect();
    set.validate(Some(&bounds))?;
    let representatives = set
        .centers
        .iter()
        .enumerate()
        .map(|(k, c)| {
            EtpParameters::from_dynamics_features(c, deadband[k], set.ratings[k], noise[k])
        })
        .collect::<Result<_>>()?;
    Ok((set, representatives))
}

/// Representative loads of an imported cluster set.
pub fn cluster_representatives(
    set: &ClusterSet,
    deadband: f64,
    noise: f64,
) -> Result<Vec<EtpParameters>> {
    if set.ratings.len() != set.len() {
        return Err(Error::Mismatch(
            "cluster set carries no per-cluster ratings".into(),
        ));
    }
    set.centers
        .iter()
        .zip(&set.ratings)
        .map(|(c, r)| EtpParameters::from_dynamics_features(c, deadband, *r, noise))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_population_clusters_to_its_single_load() {
        let pop = HvacPopulation::homogeneous(HouseParameters::default(), 74.0, 1.0, 0.1);
        let loads = pop.sample(50, 3).unwrap();
        let (set, reps) = cluster_hvac(&loads, 1, 0).unwrap();
        assert_eq!(set.weights, vec![1.0]);
        assert_eq!(set.within_cluster_distance, 0.0);
        assert_eq!(reps[0], loads[0]);
    }

    #[test]
    fn default_population_spans_the_setpoint_range() {
        let loads = HvacPopulation::default().sample(400, 9).unwrap();
        let (lo, hi) = loads
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
                (a.min(p.setpoint), b.max(p.setpoint))
            });
        assert!(lo >= 70.0 && hi <= 78.0 && hi - lo > 7.5);
        assert!(loads.iter().all(|p| p.validate().is_ok()));
    }

    #[test]
    fn ten_clusters_have_valid_representatives() {
        let loads = HvacPopulation::default().sample(500, 1).unwrap();
        let (set, reps) = cluster_hvac(&loads, 10, 2).unwrap();
        assert_eq!(reps.len(), 10);
        assert!((set.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let back = cluster_representatives(&set, 1.0, 0.0).unwrap();
        assert_eq!(back, reps);
    }
}
