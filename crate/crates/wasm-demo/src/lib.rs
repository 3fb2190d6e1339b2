//! Browser bindings: a thermostat setback population simulated by Monte
//! Carlo and by the clustered density model, plus the cluster weights.
//!
//! Series are returned flattened as `[t0, p0, t1, p1, ...]` (hours, kW).

use loadsim::scenario::{cluster_population, simulate_mc, simulate_pde, ScenarioConfig};
use loadsim::series::PowerSeries;
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setback {
    pub population: usize,
    pub clusters: usize,
    pub seed: u64,
    /// Setpoint increase, °F.
    pub shift: f64,
    pub start: f64,
    pub release: f64,
    pub horizon: f64,
    pub noise: f64,
    pub cells: usize,
}

impl Default for Setback {
    fn default() -> Self {
        Self {
            population: 500,
            clusters: 3,
            seed: 1,
            shift: 1.0,
            start: 1.0,
            release: 3.0,
            horizon: 5.0,
            noise: 0.2,
            cells: 24,
        }
    }
}

impl Setback {
    pub fn config(&self) -> Result<ScenarioConfig, String> {
        let text = format!(
            r#"
schema_version = 1
name = "browser-setback"
kind = "setback"
horizon = {horizon}
population = {population}
clusters = {clusters}
output_interval = 0.02

[seeds]
sampling = {seed}
clustering = {seed}
simulation = {sim}

[[events]]
time = {start}
value = {shift}

[[events]]
time = {release}
value = 0.0

[hvac]
spread = 0.2
setpoint_range = [70.0, 78.0]
noise = {noise}

[grid]
cells_per_interval = [{cells}, {cells}]
"#,
            horizon = self.horizon,
            population = self.population,
            clusters = self.clusters,
            seed = self.seed,
            sim = self.seed + 1,
            start = self.start,
            shift = self.shift,
            release = self.release,
            noise = self.noise,
            cells = self.cells,
        );
        ScenarioConfig::from_toml(&text).map_err(|e| e.to_string())
    }
}

fn flatten(series: &PowerSeries) -> Vec<f64> {
    series
        .times
        .iter()
        .zip(&series.values)
        .flat_map(|(t, v)| [*t, *v])
        .collect()
}

pub fn mc_series(s: &Setback) -> Result<Vec<f64>, String> {
    let out = simulate_mc(&s.config()?).map_err(|e| e.to_string())?;
    Ok(flatten(&out.power))
}

pub fn pde_series(s: &Setback) -> Result<Vec<f64>, String> {
    let out = simulate_pde(&s.config()?, None).map_err(|e| e.to_string())?;
    Ok(flatten(&out.power))
}

pub fn weights(s: &Setback) -> Result<Vec<f64>, String> {
    let (set, _) = cluster_population(&s.config()?).map_err(|e| e.to_string())?;
    Ok(set.weights)
}

#[allow(clippy::too_many_arguments)]
fn setback(
    population: usize,
    clusters: usize,
    seed: u32,
    shift: f64,
    release: f64,
    horizon: f64,
    noise: f64,
    cells: usize,
) -> Setback {
    Setback {
        population,
        clusters,
        seed: u64::from(seed),
        shift,
        release,
        horizon,
        noise,
        cells,
        ..Setback::default()
    }
}

/// Aggregate power of a Monte Carlo population.
#[wasm_bindgen(js_name = simulateMc)]
#[allow(clippy::too_many_arguments)]
pub fn simulate_mc_js(
    population: usize,
    clusters: usize,
    seed: u32,
    shift: f64,
    release: f64,
    horizon: f64,
    noise: f64,
    cells: usize,
) -> Result<Vec<f64>, JsError> {
    mc_series(&setback(
        population, clusters, seed, shift, release, horizon, noise, cells,
    ))
    .map_err(|e| JsError::new(&e))
}

/// Weighted power of the clustered density model.
#[wasm_bindgen(js_name = simulatePde)]
#[allow(clippy::too_many_arguments)]
pub fn simulate_pde_js(
    population: usize,
    clusters: usize,
    seed: u32,
    shift: f64,
    release: f64,
    horizon: f64,
    noise: f64,
    cells: usize,
) -> Result<Vec<f64>, JsError> {
    pde_series(&setback(
        population, clusters, seed, shift, release, horizon, noise, cells,
    ))
    .map_err(|e| JsError::new(&e))
}

/// Population share of each cluster.
#[wasm_bindgen(js_name = clusterWeights)]
pub fn cluster_weights_js(
    population: usize,
    clusters: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    let s = Setback {
        population,
        clusters,
        seed: u64::from(seed),
        ..Setback::default()
    };
    weights(&s).map_err(|e| JsError::new(&e))
}
