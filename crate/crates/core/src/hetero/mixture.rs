use crate::error::{Error, Result};
use crate::pde::DensityField;
use crate::series::{PowerSeries, SeriesMeta, SeriesSource};

fn check_weights(weights: &[f64], count: usize) -> Result<()> {
    if weights.len() != count {
        return Err(Error::Mismatch(format!(
            "{count} inputs but {} weights",
            weights.len()
        )));
    }
    if count == 0 {
        return Err(Error::Mismatch(
            "mixture needs at least one component".into(),
        ));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Mismatch(
            "mixture weights must be nonnegative".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Mismatch(format!("mixture weights sum to {total}")));
    }
    Ok(())
}

/// Cellwise weighted sum of per-cluster densities on one shared grid.
pub fn mixture_density(fields: &[DensityField], weights: &[f64]) -> Result<DensityField> {
    check_weights(weights, fields.len())?;
    let first = &fields[0];
    if fields.iter().any(|f| f.grid != first.grid) {
        return Err(Error::Mismatch(
            "mixture components use different grids".into(),
        ));
    }
    let mut out = DensityField::zeros(first.grid.clone(), first.time);
    for (f, w) in fields.iter().zip(weights) {
        for (dst, src) in out.values.iter_mut().zip(&f.values) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    Ok(out)
}

/// Population power `N Σ_k w_k W_k a_k(t)` from per-cluster active-mode mass
/// series `a_k` and per-cluster ratings `W_k` (kW).
pub fn mixture_power(
    active_mass: &[PowerSeries],
    weights: &[f64],
    n_loads: usize,
    ratings: &[f64],
) -> Result<PowerSeries> {
    check_weights(weights, active_mass.len())?;
    if ratings.len() != active_mass.len() {
        return Err(Error::Mismatch(format!(
            "{} series but {} ratings",
            active_mass.len(),
            ratings.len()
        )));
    }
    let times = &active_mass[0].times;
    if active_mass.iter().any(|s| &s.times != times) {
        return Err(Error::Mismatch(
            "cluster series use different time grids".into(),
        ));
    }
    let n = n_loads as f64;
    let mut values = vec![0.0; times.len()];
    for ((s, w), rating) in active_mass.iter().zip(weights).zip(ratings) {
        let scale = n * rating;
        for (v, a) in values.iter_mut().zip(&s.values) {
            *v += w * (scale * a);
        }
    }
    PowerSeries::new(
        times.clone(),
        values,
        SeriesSource::Pde,
        SeriesMeta {
            loads: n_loads,
            seed: None,
            clusters: Some(active_mass.len()),
        },
    )
}
