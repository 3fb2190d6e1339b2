use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;

/// Weighted cluster representatives of a parameter sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub seed: u64,
    /// Cluster centres in the original coordinates.
    pub centers: Vec<Vec<f64>>,
    /// `n_k / n`.
    pub weights: Vec<f64>,
    /// Sum over samples of the standardized distance to their centre.
    pub within_cluster_distance: f64,
    /// Per-cluster power rating, kW (mean over members).
    #[serde(default)]
    pub ratings: Vec<f64>,
    pub iterations: usize,
    #[serde(skip)]
    pub assignments: Vec<usize>,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Mean of `values` over the members of each cluster (exact when the
    /// members agree).
    pub fn member_means(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.assignments.len() {
            return Err(Error::Mismatch(format!(
                "{} values for {} clustered samples",
                values.len(),
                self.assignments.len()
            )));
        }
        let mut sums = vec![0.0; self.len()];
        let mut counts = vec![0usize; self.len()];
        let mut first: Vec<Option<f64>> = vec![None; self.len()];
        let mut constant = vec![true; self.len()];
        for (&k, &v) in self.assignments.iter().zip(values) {
            sums[k] += v;
            counts[k] += 1;
            match first[k] {
                None => first[k] = Some(v),
                Some(f) if f != v => constant[k] = false,
                _ => {}
            }
        }
        Ok((0..self.len())
            .map(|k| match first[k] {
                Some(f) if constant[k] => f,
                Some(_) => sums[k] / counts[k] as f64,
                None => 0.0,
            })
            .collect())
    }

    /// Checks the weight simplex and that centres lie inside `bounds`.
    pub fn validate(&self, bounds: Option<&[(f64, f64)]>) -> Result<()> {
        if self.weights.len() != self.centers.len() {
            return Err(Error::Mismatch("one weight per centre is required".into()));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Mismatch(
                "cluster weights must be nonnegative".into(),
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Mismatch(format!("cluster weights sum to {total}")));
        }
        if !self.ratings.is_empty() && self.ratings.len() != self.centers.len() {
            return Err(Error::Mismatch("one rating per centre is required".into()));
        }
        if let Some(bounds) = bounds {
            for c in &self.centers {
                if c.len() != bounds.len() {
                    return Err(Error::Mismatch(
                        "centre dimension differs from bounds".into(),
                    ));
                }
                for (x, (lo, hi)) in c.iter().zip(bounds) {
                    let tol = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
                    if *x < lo - tol || *x > hi + tol {
                        return Err(Error::Mismatch(format!(
                            "centre coordinate {x} outside [{lo}, {hi}]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let set: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        set.validate(None)?;
        Ok(set)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Per-coordinate mean and scale; constant coordinates map exactly to 0 with scale 1.
fn standardize(samples: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let d = samples[0].len();
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x / n;
        }
    }
    let mut scale = vec![0.0; d];
    for s in samples {
        for ((v, x), m) in scale.iter_mut().zip(s).zip(&mean) {
            *v += (x - m).powi(2) / n;
        }
    }
    for (k, v) in scale.iter_mut().enumerate() {
        if samples.iter().all(|s| s[k] == samples[0][k]) {
            mean[k] = samples[0][k];
            *v = 1.0;
        } else {
            *v = if *v > 0.0 { v.sqrt() } else { 1.0 };
        }
    }
    let z = samples
        .iter()
        .map(|s| {
            s.iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((x, m), sd)| (x - m) / sd)
                .collect()
        })
        .collect();
    (z, mean, scale)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Lloyd's k-means with k-means++ seeding on standardized coordinates.
///
/// An emptied cluster is re-seeded at the sample farthest from its current
/// centre among clusters with more than one member (lowest index on ties).
/// Ties in the assignment step keep the current cluster.
pub fn kmeans(samples: &[Vec<f64>], n_clusters: usize, seed: u64) -> Result<ClusterSet> {
    let n = samples.len();
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::param(
            "n_clusters",
            format!("must lie in 1..={n}, got {n_clusters}"),
        ));
    }
    let d = samples[0].len();
    if samples
        .iter()
        .any(|s| s.len() != d || s.iter().any(|x| !x.is_finite()))
    {
        return Err(Error::Mismatch(
            "samples must be finite with equal dimension".into(),
        ));
    }
    let (z, mean, scale) = standardize(samples);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(n_clusters);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    centers.push(z[first].clone());
    chosen[first] = true;
    let mut nearest: Vec<f64> = z.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < n_clusters {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, w) in nearest.iter().enumerate() {
                if *w > 0.0 {
                    pick = Some(i);
                    if target < *w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total")
        } else {
            chosen.iter().position(|c| !c).expect("n_clusters <= n")
        };
        chosen[pick] = true;
        centers.push(z[pick].clone());
        for (w, p) in nearest.iter_mut().zip(&z) {
            *w = w.min(dist2(p, &z[pick]));
        }
    }

    let mut assignments = vec![usize::MAX; n];
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for (i, p) in z.iter().enumerate() {
            let mut best = (0..n_clusters)
                .min_by(|&a, &b| dist2(p, &centers[a]).total_cmp(&dist2(p, &centers[b])))
                .expect("at least one cluster");
            let current = assignments[i];
            if current < n_clusters && dist2(p, &centers[current]) == dist2(p, &centers[best]) {
                best = current;
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        iterations += 1;
        let mut counts = vec![0usize; n_clusters];
        let mut sums = vec![vec![0.0; d]; n_clusters];
        for (p, &k) in z.iter().zip(&assignments) {
            counts[k] += 1;
            for (s, x) in sums[k].iter_mut().zip(p) {
                *s += x;
            }
        }
        for k in 0..n_clusters {
            if counts[k] == 0 {
                let far = (0..n)
                    .filter(|&a| counts[assignments[a]] > 1)
                    .max_by(|&a, &b| {
                        let da = dist2(&z[a], &centers[assignments[a]]);
                        let db = dist2(&z[b], &centers[assignments[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("nonempty");
                counts[assignments[far]] -= 1;
                for (s, x) in sums[assignments[far]].iter_mut().zip(&z[far]) {
                    *s -= x;
                }
                assignments[far] = k;
                counts[k] = 1;
                sums[k] = z[far].clone();
                changed = true;
            }
        }
        for k in 0..n_clusters {
            centers[k] = sums[k].iter().map(|s| s / counts[k] as f64).collect();
        }
        if !changed || iterations >= MAX_ITERATIONS {
            break;
        }
    }

    let mut counts = vec![0usize; n_clusters];
    let mut epsilon = 0.0;
    for (p, &k) in z.iter().zip(&assignments) {
        counts[k] += 1;
        epsilon += dist2(p, &centers[k]).sqrt();
    }
    let weights = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let centers = centers
        .iter()
        .map(|c| {
            c.iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((x, m), sd)| m + x * sd)
                .collect()
        })
        .collect();
    Ok(ClusterSet {
        seed,
        centers,
        weights,
        within_cluster_distance: epsilon,
        ratings: Vec::new(),
        iterations,
        assignments,
    })
}
