use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::compare::{compare_series, event_responses, ComparisonReport, EventResponse};
use super::config::{ScenarioConfig, ScenarioKind};
use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::hetero::{cluster_hvac, mixture_power, ClusterSet};
use crate::mc::{simulate_population, snapshot_csv, McSettings, PopulationState};
use crate::model::{
    make_hvac_etp, make_pev, make_price_responsive, ControlSchedule, EtpParameters, HybridState,
    LoadModel,
};
use crate::pde::{
    build_partition, export_grid, initial_discretization, solve, DensityField, DomainPartition,
    Region, SolveReport, SolverSettings, Truncation, INTERFACE_TOLERANCE,
};
use crate::series::{fmt_sig6, PowerSeries};

/// Monte Carlo side of a scenario.
#[derive(Debug, Clone)]
pub struct McOutcome {
    pub power: PowerSeries,
    pub snapshots: Vec<PopulationState>,
    pub mean_jumps: f64,
    pub runtime_seconds: f64,
}

/// One solved cluster (or the single homogeneous population).
#[derive(Debug, Clone)]
pub struct ClusterSolve {
    pub model: LoadModel,
    pub truncation: Truncation,
    pub report: SolveReport,
    pub active: PowerSeries,
    /// Density and its partition at each snapshot time.
    pub snapshots: Vec<(DensityField, DomainPartition)>,
    pub grid_description: String,
}

/// Weighted-PDE side of a scenario.
#[derive(Debug, Clone)]
pub struct PdeOutcome {
    pub power: PowerSeries,
    pub clusters: Option<ClusterSet>,
    pub solves: Vec<ClusterSolve>,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub(crate) fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
        }
    }
}

/// Everything a scenario run reports. Wall-clock figures are kept out of the
/// serialized form so reports are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub kind: ScenarioKind,
    pub population: usize,
    pub clusters: usize,
    pub within_cluster_distance: Option<f64>,
    pub comparison: ComparisonReport,
    pub mc_events: Vec<EventResponse>,
    pub pde_events: Vec<EventResponse>,
    pub mc_mean_jumps: f64,
    pub pde: Vec<SolveReport>,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(skip)]
    pub mc_runtime_seconds: f64,
    #[serde(skip)]
    pub pde_runtime_seconds: f64,
}

impl ScenarioReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub mc: McOutcome,
    pub pde: PdeOutcome,
    pub report: ScenarioReport,
}

fn hvac_model(cfg: &ScenarioConfig, params: EtpParameters) -> Result<LoadModel> {
    let hvac = cfg.hvac.as_ref().expect("validated");
    let mut model = make_hvac_etp(params)?.with_hazard(&hvac.hazard)?;
    if cfg.kind == ScenarioKind::PriceResponse {
        let price = cfg.price.expect("validated");
        model = make_price_responsive(model, price.slope, price.bound)?;
    }
    Ok(model)
}

fn pev_model(cfg: &ScenarioConfig) -> Result<LoadModel> {
    let pev = cfg.pev.as_ref().expect("validated");
    make_pev(pev.charge_kw, pev.deadline_slack)?.with_hazard(&pev.hazard)
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Parameters of every load in the population, in load order.
pub fn sample_loads(cfg: &ScenarioConfig) -> Result<Vec<LoadModel>> {
    match cfg.kind {
        ScenarioKind::Pev => Ok(vec![pev_model(cfg)?; cfg.population]),
        _ => {
            let pop = cfg.hvac.as_ref().expect("validated").population();
            pop.sample(cfg.population, cfg.seeds.sampling)?
                .into_iter()
                .map(|p| hvac_model(cfg, p))
                .collect()
        }
    }
}

fn initial_setpoint(model: &LoadModel, schedule: &ControlSchedule) -> f64 {
    model
        .as_hvac()
        .map_or(0.0, |h| h.setpoint(schedule.value_at(0.0)))
}

/// Initial hybrid state of every load, drawn from the configured box.
pub fn initial_states(cfg: &ScenarioConfig, models: &[LoadModel]) -> Result<Vec<HybridState>> {
    let schedule = cfg.run_schedule()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.simulation);
    rng.set_stream(u64::MAX);
    Ok(models
        .iter()
        .map(|m| match cfg.kind {
            ScenarioKind::Pev => {
                let init = cfg.pev.as_ref().expect("validated").init;
                let x1 = uniform(&mut rng, init.x1);
                let x2 = uniform(&mut rng, init.x2);
                HybridState::new(init.mode, x1, x2)
            }
            _ => {
                let init = cfg.hvac.as_ref().expect("validated").init;
                let u = initial_setpoint(m, &schedule);
                let on = rng.random::<f64>() < init.on_fraction;
                let x1 = u + uniform(&mut rng, init.air_offset);
                let x2 = u + uniform(&mut rng, init.mass_offset);
                HybridState::new(usize::from(on), x1, x2)
            }
        })
        .collect())
}

pub fn simulate_mc(cfg: &ScenarioConfig) -> Result<McOutcome> {
    let started = Stopwatch::start();
    let models = sample_loads(cfg)?;
    let inits = initial_states(cfg, &models)?;
    let run = simulate_population(
        &models,
        &inits,
        cfg.run_horizon(),
        &cfg.run_schedule()?,
        McSettings {
            dt: cfg.dt,
            ..McSettings::default()
        },
        cfg.output_every(),
        &cfg.run_snapshot_times(),
        cfg.seeds.simulation,
    )?;
    let snapshots = run
        .snapshots
        .into_iter()
        .map(|mut s| {
            s.time = (s.time - cfg.warmup).max(0.0);
            s
        })
        .collect();
    Ok(McOutcome {
        power: run.power.rebased(cfg.warmup),
        snapshots,
        mean_jumps: run.mean_jumps,
        runtime_seconds: started.seconds(),
    })
}

/// Clusters the sampled HVAC population. A homogeneous population always
/// yields a single cluster.
pub fn cluster_population(cfg: &ScenarioConfig) -> Result<(ClusterSet, Vec<EtpParameters>)> {
    let hvac = cfg
        .hvac
        .as_ref()
        .ok_or_else(|| Error::config("hvac", "clustering needs an HVAC population"))?;
    let pop = hvac.population();
    let loads = pop.sample(cfg.population, cfg.seeds.sampling)?;
    let n_c = if pop.is_homogeneous() {
        1
    } else {
        cfg.clusters
    };
    cluster_hvac(&loads, n_c, cfg.seeds.clustering)
}

fn solver_settings(cfg: &ScenarioConfig, truncation: Truncation) -> Result<SolverSettings> {
    let mut s = SolverSettings::new(cfg.grid.spec()?, truncation);
    s.output_interval = cfg.output_interval;
    s.tol_mass = cfg.grid.tol_mass;
    s.max_escaped = cfg.grid.max_escaped;
    s.max_clipped = cfg.grid.max_clipped;
    Ok(s)
}

fn solve_one(
    cfg: &ScenarioConfig,
    model: LoadModel,
    truncation: Truncation,
) -> Result<ClusterSolve> {
    let schedule = cfg.run_schedule()?;
    let settings = solver_settings(cfg, truncation)?;
    let disc = initial_discretization(&model, &schedule, &settings)?;
    let init = match cfg.kind {
        ScenarioKind::Pev => {
            let init = cfg.pev.as_ref().expect("validated").init;
            let mut weights = [0.0; 3];
            weights[init.mode] = 1.0;
            DensityField::uniform_box(
                disc.grid.clone(),
                0.0,
                &weights,
                Region {
                    x1: init.x1,
                    x2: init.x2,
                },
            )?
        }
        _ => {
            let init = cfg.hvac.as_ref().expect("validated").init;
            let u = initial_setpoint(&model, &schedule);
            let shift = |(a, b): (f64, f64)| (u + a, u + b);
            DensityField::uniform_box(
                disc.grid.clone(),
                0.0,
                &[1.0 - init.on_fraction, init.on_fraction],
                Region {
                    x1: shift(init.air_offset),
                    x2: shift(init.mass_offset),
                },
            )?
        }
    };
    let grid_description = export_grid(&disc.partition, &disc.grid)?;
    let result = solve(
        &model,
        &init,
        cfg.run_horizon(),
        &schedule,
        &settings,
        &cfg.run_snapshot_times(),
    )?;
    let active = result.active_fraction(&model)?.rebased(cfg.warmup);
    let snapshots = result
        .snapshots
        .into_iter()
        .map(|mut f| {
            let part = build_partition(&model, schedule.value_at(f.time), &truncation)?;
            f.time = (f.time - cfg.warmup).max(0.0);
            Ok((f, part))
        })
        .collect::<Result<_>>()?;
    Ok(ClusterSolve {
        model,
        truncation,
        report: result.report,
        active,
        snapshots,
        grid_description,
    })
}

/// Solves every cluster (in parallel) and combines their power by weight.
///
/// `clusters` reuses an imported cluster set instead of re-clustering.
pub fn simulate_pde(cfg: &ScenarioConfig, clusters: Option<ClusterSet>) -> Result<PdeOutcome> {
    let started = Stopwatch::start();
    let schedule = cfg.schedule()?;
    let (set, models): (Option<ClusterSet>, Vec<LoadModel>) = match cfg.kind {
        ScenarioKind::Pev => (None, vec![pev_model(cfg)?]),
        _ => {
            let (set, reps) = match clusters {
                Some(set) => {
                    let hvac = cfg.hvac.as_ref().expect("validated");
                    let reps =
                        crate::hetero::cluster_representatives(&set, hvac.deadband, hvac.noise)?;
                    (set, reps)
                }
                None => cluster_population(cfg)?,
            };
            let models = reps
                .into_iter()
                .map(|p| hvac_model(cfg, p))
                .collect::<Result<_>>()?;
            (Some(set), models)
        }
    };
    let solves: Vec<ClusterSolve> = crate::par::map_indices(models.len(), |k| {
        let model = models[k].clone();
        let truncation = match cfg.kind {
            ScenarioKind::Pev => cfg.truncation_pev().expect("validated"),
            _ => Truncation::hvac_for_schedule(&model, &schedule, cfg.grid.margin)?,
        };
        solve_one(cfg, model, truncation)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let actives: Vec<PowerSeries> = solves.iter().map(|s| s.active.clone()).collect();
    let (weights, ratings) = match &set {
        Some(set) => (set.weights.clone(), set.ratings.clone()),
        None => (vec![1.0], vec![solves[0].model.output(1)]),
    };
    let power = mixture_power(&actives, &weights, cfg.population, &ratings)?;
    Ok(PdeOutcome {
        power,
        clusters: set,
        solves,
        runtime_seconds: started.seconds(),
    })
}

/// Builds the report of a finished MC/PDE pair.
pub fn assess(cfg: &ScenarioConfig, mc: &McOutcome, pde: &PdeOutcome) -> Result<ScenarioReport> {
    let window = cfg.window();
    let comparison = compare_series(&pde.power, &mc.power, window)?;
    let event_times: Vec<f64> = cfg
        .events
        .iter()
        .map(|e| e.time)
        .filter(|t| *t > window.0 && *t < window.1)
        .collect();
    let responses = |s: &PowerSeries| {
        event_responses(
            s,
            &event_times,
            window,
            cfg.compare.settle,
            cfg.compare.smoothing,
        )
    };
    let mc_events = responses(&mc.power)?;
    let pde_events = responses(&pde.power)?;

    let mut checks = Vec::new();
    for (k, s) in pde.solves.iter().enumerate() {
        let r = &s.report;
        checks.push(Check::at_most(
            format!("pde cluster {k} conservation"),
            r.max_mass_drift,
            cfg.grid.tol_mass,
        ));
        checks.push(Check::at_most(
            format!("pde cluster {k} escaped mass"),
            r.escaped_mass,
            cfg.grid.max_escaped,
        ));
        checks.push(Check::at_most(
            format!("pde cluster {k} clipped mass"),
            r.clipped_mass,
            cfg.grid.max_clipped,
        ));
        checks.push(Check::at_most(
            format!("pde cluster {k} interface imbalance"),
            r.max_interface_imbalance,
            INTERFACE_TOLERANCE,
        ));
    }
    if let Some(limit) = cfg.compare.max_rms_relative_error {
        checks.push(Check::at_most(
            "rms relative error",
            comparison.rms_relative_error,
            limit,
        ));
    }
    if let Some(limit) = cfg.compare.max_period_mismatch {
        for (m, p) in mc_events.iter().zip(&pde_events) {
            let value = match (m.period, p.period) {
                (Some(a), Some(b)) => (b - a).abs() / a,
                _ => f64::INFINITY,
            };
            checks.push(Check::at_most(
                format!("rebound period mismatch after t = {} h", m.time),
                value,
                limit,
            ));
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(ScenarioReport {
        name: cfg.name.clone(),
        kind: cfg.kind,
        population: cfg.population,
        clusters: pde.solves.len(),
        within_cluster_distance: pde.clusters.as_ref().map(|c| c.within_cluster_distance),
        comparison,
        mc_events,
        pde_events,
        mc_mean_jumps: mc.mean_jumps,
        pde: pde.solves.iter().map(|s| s.report.clone()).collect(),
        checks,
        passed,
        mc_runtime_seconds: mc.runtime_seconds,
        pde_runtime_seconds: pde.runtime_seconds,
    })
}

fn run_pair(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let (mc, pde) = crate::par::join(|| simulate_mc(cfg), || simulate_pde(cfg, None));
    let (mc, pde) = (mc?, pde?);
    let report = assess(cfg, &mc, &pde)?;
    Ok(ScenarioOutcome { mc, pde, report })
}

fn require(cfg: &ScenarioConfig, kind: ScenarioKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::config(
            "kind",
            format!("expected {kind:?}, config declares {:?}", cfg.kind),
        ));
    }
    Ok(())
}

/// Thermostat setback: control values are setpoint shifts in °F.
pub fn run_setback(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    require(cfg, ScenarioKind::Setback)?;
    run_pair(cfg)
}

/// Price response: control values are price deviations.
pub fn run_price_response(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    require(cfg, ScenarioKind::PriceResponse)?;
    run_pair(cfg)
}

pub fn run_pev(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    require(cfg, ScenarioKind::Pev)?;
    run_pair(cfg)
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    match cfg.kind {
        ScenarioKind::Setback => run_setback(cfg),
        ScenarioKind::PriceResponse => run_price_response(cfg),
        ScenarioKind::Pev => run_pev(cfg),
    }
}

pub const MC_POWER_FILE: &str = "mc_power.csv";
pub const PDE_POWER_FILE: &str = "pde_power.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const REPORT_FILE: &str = "report.toml";
pub const CLUSTERS_FILE: &str = "clusters.toml";
pub const COMPARISON_CSV_HEADER: &str = "time_hours,mc_kw,pde_kw";

/// Both series on the candidate's time grid.
pub fn comparison_csv(mc: &PowerSeries, pde: &PowerSeries) -> String {
    let mut out = String::from(COMPARISON_CSV_HEADER);
    out.push('\n');
    for (t, v) in pde.times.iter().zip(&pde.values) {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_sig6(*t),
            fmt_sig6(mc.value_at(*t)),
            fmt_sig6(*v)
        ));
    }
    out
}

pub fn write_mc(dir: &Path, mc: &McOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    mc.power.write_csv(&dir.join(MC_POWER_FILE))?;
    for (k, s) in mc.snapshots.iter().enumerate() {
        std::fs::write(dir.join(format!("mc_snapshot_{k}.csv")), snapshot_csv(s))?;
    }
    Ok(())
}

pub fn write_pde(dir: &Path, pde: &PdeOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    pde.power.write_csv(&dir.join(PDE_POWER_FILE))?;
    if let Some(set) = &pde.clusters {
        set.write(&dir.join(CLUSTERS_FILE))?;
    }
    for (c, s) in pde.solves.iter().enumerate() {
        std::fs::write(
            dir.join(format!("grid_cluster_{c}.toml")),
            &s.grid_description,
        )?;
        for (k, (field, part)) in s.snapshots.iter().enumerate() {
            std::fs::write(
                dir.join(format!("pde_density_{k}_cluster_{c}.csv")),
                field.to_csv(part),
            )?;
        }
    }
    Ok(())
}

pub fn write_outcome(dir: &Path, outcome: &ScenarioOutcome) -> Result<()> {
    write_mc(dir, &outcome.mc)?;
    write_pde(dir, &outcome.pde)?;
    std::fs::write(
        dir.join(COMPARISON_FILE),
        comparison_csv(&outcome.mc.power, &outcome.pde.power),
    )?;
    std::fs::write(dir.join(REPORT_FILE), outcome.report.to_toml()?)?;
    Ok(())
}
