use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{step_count, step_end, LoadRunner, McSettings};
use crate::error::{Error, Result};
use crate::model::{ControlSchedule, HybridState, LoadModel};
use crate::series::{fmt_sig6, PowerSeries, SeriesMeta, SeriesSource};

pub const SNAPSHOT_CSV_HEADER: &str = "load_index,time_hours,mode,x1,x2";

/// Independent random stream of load `index` under run seed `seed`.
pub fn load_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Hybrid states of every load at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    pub time: f64,
    pub states: Vec<HybridState>,
}

#[derive(Debug, Clone)]
pub struct PopulationRun {
    pub power: PowerSeries,
    /// Fraction of loads in each mode at every output time.
    pub mode_fractions: Vec<Vec<f64>>,
    pub snapshots: Vec<PopulationState>,
    /// Mean number of jumps per load over the horizon.
    pub mean_jumps: f64,
}

struct LoadRecord {
    modes: Vec<u8>,
    snapshots: Vec<HybridState>,
    jumps: usize,
}

/// Simulates every load independently and sums `h(q_i)` in load order.
///
/// Power is recorded every `output_every` steps; snapshot times are rounded
/// to the nearest step end.
#[allow(clippy::too_many_arguments)]
pub fn simulate_population(
    models: &[LoadModel],
    inits: &[HybridState],
    horizon: f64,
    schedule: &ControlSchedule,
    settings: McSettings,
    output_every: usize,
    snapshot_times: &[f64],
    seed: u64,
) -> Result<PopulationRun> {
    if models.is_empty() {
        return Err(Error::param("models", "population must not be empty"));
    }
    if models.len() != inits.len() {
        return Err(Error::Mismatch(format!(
            "{} models but {} initial states",
            models.len(),
            inits.len()
        )));
    }
    if !(horizon > 0.0) {
        return Err(Error::param("horizon", "must be positive"));
    }
    if output_every == 0 {
        return Err(Error::param("output_every", "must be at least 1"));
    }
    settings.validate()?;
    let steps = step_count(horizon, settings.dt);
    let snapshot_steps: Vec<usize> = snapshot_times
        .iter()
        .map(|t| ((t / settings.dt).round() as usize).min(steps))
        .collect();
    let output_steps: Vec<usize> = (0..=steps)
        .filter(|n| n % output_every == 0 || *n == steps)
        .collect();
    let mode_count = models.iter().map(|m| m.mode_count()).max().unwrap_or(1);

    let records: Vec<LoadRecord> = crate::par::map_indices(models.len(), |i| {
        let (model, init) = (&models[i], &inits[i]);
        let mut rng = load_rng(seed, i);
        let mut runner = LoadRunner::new(model, schedule, settings, i, *init)?;
        let mut modes = Vec::with_capacity(output_steps.len());
        let mut snapshots = vec![*init; snapshot_steps.len()];
        let mut next_out = 0;
        for n in 0..=steps {
            if n > 0 {
                runner.advance_to(step_end(n, settings.dt, horizon), &mut rng, None)?;
            }
            if output_steps.get(next_out) == Some(&n) {
                modes.push(runner.state.mode as u8);
                next_out += 1;
            }
            for (slot, &s) in snapshots.iter_mut().zip(&snapshot_steps) {
                if s == n {
                    *slot = runner.state;
                }
            }
        }
        Ok(LoadRecord {
            modes,
            snapshots,
            jumps: runner.jump_count,
        })
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let n_loads = models.len() as f64;
    let mut values = vec![0.0; output_steps.len()];
    let mut fractions = vec![vec![0.0; mode_count]; output_steps.len()];
    for (model, rec) in models.iter().zip(&records) {
        for (k, &q) in rec.modes.iter().enumerate() {
            values[k] += model.output(q as usize);
            fractions[k][q as usize] += 1.0;
        }
    }
    for f in fractions.iter_mut().flat_map(|row| row.iter_mut()) {
        *f /= n_loads;
    }
    let times = output_steps
        .iter()
        .map(|&n| step_end(n, settings.dt, horizon))
        .collect();
    let power = PowerSeries::new(
        times,
        values,
        SeriesSource::Mc,
        SeriesMeta {
            loads: models.len(),
            seed: Some(seed),
            clusters: None,
        },
    )?;
    let snapshots = snapshot_steps
        .iter()
        .enumerate()
        .map(|(k, &n)| PopulationState {
            time: step_end(n, settings.dt, horizon),
            states: records.iter().map(|r| r.snapshots[k]).collect(),
        })
        .collect();
    let mean_jumps = records.iter().map(|r| r.jumps as f64).sum::<f64>() / n_loads;
    Ok(PopulationRun {
        power,
        mode_fractions: fractions,
        snapshots,
        mean_jumps,
    })
}

/// One CSV record per load: index, time, mode and continuous state.
pub fn snapshot_csv(snapshot: &PopulationState) -> String {
    let mut out = String::new();
    out.push_str(SNAPSHOT_CSV_HEADER);
    out.push('\n');
    for (i, s) in snapshot.states.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{}",
            fmt_sig6(snapshot.time),
            s.mode,
            fmt_sig6(s.x[0]),
            fmt_sig6(s.x[1])
        );
    }
    out
}
