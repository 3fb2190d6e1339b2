use serde::{Deserialize, Serialize};

use super::field::DensityField;
use super::grid::GridSpec;
use super::partition::Truncation;
use super::remap::remap_density;
use super::scheme::{Discretization, INTERFACE_TOLERANCE};
use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::model::{ControlSchedule, LoadModel};
use crate::series::{PowerSeries, SeriesMeta, SeriesSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub grid: GridSpec,
    pub truncation: Truncation,
    /// Spacing of recorded mode masses and power, hours.
    pub output_interval: f64,
    pub tol_mass: f64,
    pub max_escaped: f64,
    pub max_clipped: f64,
    /// Densities below this are flushed to zero (and counted as clipped).
    pub flush_floor: f64,
}

impl SolverSettings {
    pub fn new(grid: GridSpec, truncation: Truncation) -> Self {
        Self {
            grid,
            truncation,
            output_interval: 0.01,
            tol_mass: 1e-3,
            max_escaped: 1e-6,
            max_clipped: 1e-6,
            flush_floor: 1e-200,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.output_interval > 0.0) {
            return Err(Error::param("output_interval", "must be positive"));
        }
        if !(self.tol_mass > 0.0) {
            return Err(Error::param("tol_mass", "must be positive"));
        }
        Ok(())
    }
}

/// Conservation and accuracy log of one solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub steps: usize,
    pub final_mass: f64,
    pub max_mass_drift: f64,
    pub clipped_mass: f64,
    pub escaped_mass: f64,
    pub max_interface_imbalance: f64,
    pub passed: bool,
    pub failures: Vec<String>,
    #[serde(skip)]
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub times: Vec<f64>,
    /// Mass of each mode at every output time.
    pub mode_masses: Vec<Vec<f64>>,
    /// Expected power of one load, kW.
    pub power: PowerSeries,
    pub snapshots: Vec<DensityField>,
    pub report: SolveReport,
}

impl SolveResult {
    /// Mass in modes with nonzero output at every output time.
    pub fn active_fraction(&self, model: &LoadModel) -> Result<PowerSeries> {
        let values = self
            .mode_masses
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(q, _)| model.output(*q) != 0.0)
                    .map(|(_, m)| m)
                    .sum()
            })
            .collect();
        PowerSeries::new(
            self.times.clone(),
            values,
            SeriesSource::Pde,
            self.power.meta.clone(),
        )
    }
}

/// Discretization for the control value in force at `t = 0`.
pub fn initial_discretization(
    model: &LoadModel,
    schedule: &ControlSchedule,
    settings: &SolverSettings,
) -> Result<Discretization> {
    Discretization::new(
        model,
        schedule.value_at(0.0),
        &settings.truncation,
        settings.grid,
    )
}

/// Advances the forward equations from `init` to `horizon`.
///
/// Each step applies the two directional sweeps (order alternating), the
/// interface hand-off and the jump exchange. Control events rebuild the
/// partition and remap the density.
pub fn solve(
    model: &LoadModel,
    init: &DensityField,
    horizon: f64,
    schedule: &ControlSchedule,
    settings: &SolverSettings,
    snapshot_times: &[f64],
) -> Result<SolveResult> {
    let started = Stopwatch::start();
    settings.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::param("horizon", "must be positive"));
    }
    let mut disc = initial_discretization(model, schedule, settings)?;
    disc.check_grid(init)?;
    let mut values = init.values.clone();
    let mut boxes = disc.boxes_for(&values);
    let initial_mass = super::field::total_mass(init);
    if (initial_mass - 1.0).abs() > 1e-9 {
        return Err(Error::param(
            "initial_density",
            format!("must have unit mass, has {initial_mass}"),
        ));
    }

    let tiny = 1e-9 * settings.output_interval;
    let outputs = (horizon / settings.output_interval - 1e-9).ceil() as usize;
    let mut stops: Vec<(f64, Stop)> = (1..=outputs)
        .map(|k| {
            (
                (k as f64 * settings.output_interval).min(horizon),
                Stop::Output,
            )
        })
        .collect();
    stops.extend(
        schedule
            .events()
            .iter()
            .filter(|e| e.time > 0.0 && e.time < horizon)
            .map(|e| (e.time, Stop::Event)),
    );
    stops.extend(
        snapshot_times
            .iter()
            .filter(|t| **t > 0.0 && **t <= horizon)
            .map(|t| (*t, Stop::Snapshot)),
    );
    stops.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut report = SolveReport {
        final_mass: initial_mass,
        ..SolveReport::default()
    };
    let mut times = vec![0.0];
    let mode_mass = |disc: &Discretization, values: &[Vec<f64>]| -> Vec<f64> {
        let f = DensityField {
            time: 0.0,
            grid: disc.grid.clone(),
            values: values.to_vec(),
        };
        f.mode_masses()
    };
    let mut mode_masses = vec![init.mode_masses()];
    let mut snapshots: Vec<DensityField> = snapshot_times
        .iter()
        .filter(|t| **t <= 0.0)
        .map(|_| init.clone())
        .collect();

    let mut scratch = Vec::new();
    let mut pending = Vec::new();
    let mut t = 0.0;
    let mut step = 0usize;
    for (stop, kind) in stops {
        while stop - t > tiny {
            let mut dt = disc.stable_dt(&boxes);
            if t + dt >= stop - tiny {
                dt = stop - t;
            }
            let order = if step.is_multiple_of(2) {
                [0, 1]
            } else {
                [1, 0]
            };
            for axis in order {
                let bal = disc.sweep(
                    axis,
                    &mut values,
                    &mut boxes,
                    dt,
                    &mut scratch,
                    &mut pending,
                );
                report.escaped_mass += bal.escaped;
                report.max_interface_imbalance =
                    report.max_interface_imbalance.max(bal.imbalance());
                if bal.imbalance() > INTERFACE_TOLERANCE {
                    return Err(Error::Partition(format!(
                        "interface flux imbalance {:e} at t = {t} h",
                        bal.imbalance()
                    )));
                }
            }
            disc.jump_exchange(&mut values, &mut boxes, dt, &mut pending);
            let (mass, clipped) = disc.tidy(&mut values, &mut boxes, settings.flush_floor);
            report.clipped_mass += clipped;
            report.final_mass = mass;
            step += 1;
            t = if dt == stop - t { stop } else { t + dt };
            let drift = (mass - 1.0).abs();
            report.max_mass_drift = report.max_mass_drift.max(drift);
            if drift > settings.tol_mass {
                return Err(Error::MassDrift {
                    drift,
                    tolerance: settings.tol_mass,
                    time: t,
                });
            }
        }
        t = stop;
        match kind {
            Stop::Event => {
                let next = Discretization::new(
                    model,
                    schedule.value_at(stop),
                    &settings.truncation,
                    settings.grid,
                )?;
                let field = DensityField {
                    time: t,
                    grid: disc.grid.clone(),
                    values: std::mem::take(&mut values),
                };
                let (moved, escaped) = remap_density(&field, &next)?;
                report.escaped_mass += escaped;
                values = moved.values;
                disc = next;
                boxes = disc.boxes_for(&values);
            }
            Stop::Output => {
                if times.last().is_some_and(|last| stop - last > tiny) {
                    times.push(stop);
                    mode_masses.push(mode_mass(&disc, &values));
                }
            }
            Stop::Snapshot => snapshots.push(DensityField {
                time: stop,
                grid: disc.grid.clone(),
                values: values.clone(),
            }),
        }
    }

    report.steps = step;
    if report.escaped_mass > settings.max_escaped {
        report.failures.push(format!(
            "escaped mass {:e} exceeds {:e}",
            report.escaped_mass, settings.max_escaped
        ));
    }
    if report.clipped_mass > settings.max_clipped {
        report.failures.push(format!(
            "clipped mass {:e} exceeds {:e}",
            report.clipped_mass, settings.max_clipped
        ));
    }
    report.passed = report.failures.is_empty();
    report.runtime_seconds = started.seconds();

    let power_values = mode_masses
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(q, m)| model.output(q) * m)
                .sum()
        })
        .collect();
    let power = PowerSeries::new(
        times.clone(),
        power_values,
        SeriesSource::Pde,
        SeriesMeta {
            loads: 1,
            seed: None,
            clusters: None,
        },
    )?;
    Ok(SolveResult {
        times,
        mode_masses,
        power,
        snapshots,
        report,
    })
}

/// Events are applied before outputs and snapshots at the same instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Stop {
    Event,
    Output,
    Snapshot,
}
