//! Acceptance suite. Every test prints one `criterion N ... PASS|FAIL` line to
//! stderr (uncaptured) before asserting.

mod common;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use loadsim::mc::{load_rng, simulate_trajectory, McSettings};
use loadsim::model::{
    hvac_mode, make_hvac_etp, make_pev, ControlSchedule, EtpParameters, HybridState,
};
use loadsim::pde::{
    solve, DensityField, Discretization, GridSpec, Region, SolverSettings, Truncation,
    INTERFACE_TOLERANCE,
};
use loadsim::scenario::{
    compare_series, run_scenario, simulate_mc, simulate_pde, write_outcome, ScenarioConfig,
    ScenarioOutcome, Seeds,
};
use statrs::distribution::{ContinuousCDF, Exp};

fn verdict(n: u32, title: &str, passed: bool, detail: &str) {
    let status = if passed { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {n} ({title}): {status} | {detail}");
}

fn config(name: &str) -> ScenarioConfig {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name]
        .iter()
        .collect();
    ScenarioConfig::read(&path).unwrap()
}

fn price() -> &'static ScenarioOutcome {
    static RUN: OnceLock<ScenarioOutcome> = OnceLock::new();
    RUN.get_or_init(|| run_scenario(&config("price_response.toml")).unwrap())
}

fn setback() -> &'static ScenarioOutcome {
    static RUN: OnceLock<ScenarioOutcome> = OnceLock::new();
    RUN.get_or_init(|| run_scenario(&config("setback.toml")).unwrap())
}

fn setback_sustained() -> &'static ScenarioOutcome {
    static RUN: OnceLock<ScenarioOutcome> = OnceLock::new();
    RUN.get_or_init(|| run_scenario(&config("setback_sustained.toml")).unwrap())
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[test]
fn criterion_1_mass_conservation() {
    let out = price();
    let worst_drift = out
        .pde
        .solves
        .iter()
        .map(|s| s.report.max_mass_drift)
        .fold(0.0, f64::max);
    let worst_runtime = out
        .pde
        .solves
        .iter()
        .map(|s| s.report.runtime_seconds)
        .fold(0.0, f64::max);
    let passed = out.pde.solves.len() == 10 && worst_drift <= 1e-3 && worst_runtime <= 300.0;
    verdict(
        1,
        "mass conservation",
        passed,
        &format!(
            "{} clusters, max |mass - 1| = {worst_drift:.3e} (<= 1e-3), max runtime {worst_runtime:.1} s per cluster (<= 300 s)",
            out.pde.solves.len()
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_2_mc_pde_cross_validation() {
    let out = price();
    let rms = out.report.comparison.rms_relative_error;
    let mut periods_ok = true;
    let mut detail = format!("rms relative error over [2, 8] h = {rms:.4} (<= 0.05)");
    for (m, p) in out.report.mc_events.iter().zip(&out.report.pde_events) {
        let mismatch = match (m.period, p.period) {
            (Some(a), Some(b)) => (b - a).abs() / a,
            _ => f64::INFINITY,
        };
        periods_ok &= mismatch <= 0.15;
        detail.push_str(&format!(
            "; period after {} h: mc {:?} pde {:?} mismatch {mismatch:.3} (<= 0.15)",
            m.time, m.period, p.period
        ));
    }
    let passed = rms <= 0.05 && periods_ok;
    verdict(2, "MC vs PDE cross-validation", passed, &detail);
    assert!(passed);
}

#[test]
fn criterion_3_setback_steady_state_and_rebound() {
    let held = setback_sustained();
    let reduction = |e: &loadsim::scenario::EventResponse| 1.0 - e.settled / e.before;
    let mc = reduction(&held.report.mc_events[0]);
    let pde = reduction(&held.report.pde_events[0]);
    let released = setback();
    let baseline_mc = released.report.mc_events[0].before;
    let baseline_pde = released.report.pde_events[0].before;
    let rebound_mc = released.report.mc_events[1].peak;
    let rebound_pde = released.report.pde_events[1].peak;
    let passed = (0.05..=0.15).contains(&mc)
        && (pde - mc).abs() <= 0.02
        && rebound_mc > baseline_mc
        && rebound_pde > baseline_pde;
    verdict(
        3,
        "setback steady state",
        passed,
        &format!(
            "mc reduction {:.2}% (in [5, 15]), pde reduction {:.2}% (within 2 pp), rebound after 4 h: mc {rebound_mc:.0} kW vs baseline {baseline_mc:.0}, pde {rebound_pde:.0} kW vs baseline {baseline_pde:.0}",
            100.0 * mc,
            100.0 * pde
        ),
    );
    assert!(passed);
}

fn bump(x1: f64, x2: f64) -> f64 {
    let r = ((x1 - 2.5).powi(2) + (x2 - 1.0).powi(2)).sqrt() / 0.6;
    if r < 1.0 {
        (0.5 * std::f64::consts::PI * r).cos().powi(2)
    } else {
        0.0
    }
}

fn transport_error(width: f64) -> f64 {
    let model = make_pev(6.6, 4.0).unwrap();
    let truncation = Truncation::Pev {
        max_remaining: 4.0,
        max_slack: 2.0,
        completed_span: 2.0,
        strip: 0.5,
    };
    let mut settings = SolverSettings::new(GridSpec::CellWidth([width, width]), truncation);
    let horizon = 1.0;
    settings.output_interval = horizon;
    let schedule = ControlSchedule::constant();
    let disc = Discretization::new(&model, 0.0, &truncation, settings.grid).unwrap();
    let shape = |shift: f64| {
        move |mode: usize, x1: f64, x2: f64| {
            if mode == 1 {
                bump(x1 + shift, x2)
            } else {
                0.0
            }
        }
    };
    let raw = DensityField::from_fn(disc.grid.clone(), 0.0, shape(0.0));
    let scale = 1.0 / loadsim::pde::total_mass(&raw);
    let mut init = raw;
    init.values.iter_mut().flatten().for_each(|v| *v *= scale);
    let res = solve(&model, &init, horizon, &schedule, &settings, &[horizon]).unwrap();
    assert!(res.report.passed, "{:?}", res.report.failures);
    let exact = DensityField::from_fn(disc.grid.clone(), horizon, shape(horizon));
    let p = &res.snapshots[0];
    let mut err = 0.0;
    for (q, m) in p.grid.modes.iter().enumerate() {
        for j in 0..m.n(1) {
            for i in 0..m.n(0) {
                let c = m.index(i, j);
                err += (p.values[q][c] - scale * exact.values[q][c]).abs() * m.volume(i, j);
            }
        }
    }
    err
}

#[test]
fn criterion_4_transport_convergence() {
    let widths = [0.1, 0.05, 0.025, 0.0125];
    let errors: Vec<f64> = widths.iter().map(|&w| transport_error(w)).collect();
    let orders: Vec<f64> = errors.windows(2).map(|e| order(e[0], e[1])).collect();
    let passed = orders.iter().all(|&o| o >= 0.8);
    verdict(
        4,
        "transport convergence",
        passed,
        &format!(
            "L1 errors {} at widths {widths:?}, orders {orders:.3?} (each >= 0.8)",
            sci(&errors)
        ),
    );
    assert!(passed);
}

fn outflow_density(cells: usize) -> (Vec<f64>, f64) {
    let params = EtpParameters {
        noise: 2.0,
        ..EtpParameters::default()
    };
    let model = make_hvac_etp(params).unwrap();
    let truncation = Truncation::Hvac {
        margin: 6.0,
        mass_range: (67.0, 81.0),
    };
    let spec = GridSpec::CellsPerInterval([cells, cells]);
    let mut settings = SolverSettings::new(spec, truncation);
    let horizon = 1.0;
    settings.output_interval = horizon;
    let disc = Discretization::new(&model, 0.0, &truncation, spec).unwrap();
    let init = DensityField::uniform_box(
        disc.grid.clone(),
        0.0,
        &[0.5, 0.5],
        Region {
            x1: (73.0, 75.0),
            x2: (73.0, 75.0),
        },
    )
    .unwrap();
    let res = solve(
        &model,
        &init,
        horizon,
        &ControlSchedule::constant(),
        &settings,
        &[horizon],
    )
    .unwrap();
    assert!(res.report.passed, "{:?}", res.report.failures);
    (
        disc.outflow_face_density(&res.snapshots[0]),
        res.report.max_interface_imbalance,
    )
}

#[test]
fn criterion_5_absorbing_boundary_and_interface_balance() {
    let levels = [10, 20, 40, 80];
    let runs: Vec<(Vec<f64>, f64)> = levels.iter().map(|&n| outflow_density(n)).collect();
    let surfaces = runs[0].0.len();
    let mut orders = Vec::new();
    for s in 0..surfaces {
        for k in 0..levels.len() - 1 {
            orders.push(order(runs[k].0[s], runs[k + 1].0[s]));
        }
    }
    let imbalance = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    let face: Vec<String> = runs.iter().map(|r| sci(&r.0)).collect();
    let passed = orders.iter().all(|&o| o >= 0.8) && imbalance <= INTERFACE_TOLERANCE;
    verdict(
        5,
        "absorbing boundary",
        passed,
        &format!(
            "outflow face density {face:?} at {levels:?} cells per interval, orders {orders:.3?} (each >= 0.8), max interface imbalance {imbalance:.2e} (<= 1e-10)"
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_6_duty_cycle() {
    let params = EtpParameters::default();
    let cycle = common::thermostat(&params, 0.0).limit_cycle(params.setpoint);
    let model = make_hvac_etp(params).unwrap();

    let truncation = Truncation::Hvac {
        margin: 6.0,
        mass_range: (67.0, 81.0),
    };
    let mut settings = SolverSettings::new(GridSpec::default(), truncation);
    settings.output_interval = 0.01;
    let disc = Discretization::new(&model, 0.0, &truncation, settings.grid).unwrap();
    let init = DensityField::uniform_box(
        disc.grid.clone(),
        0.0,
        &[0.5, 0.5],
        Region {
            x1: (73.0, 75.0),
            x2: (73.0, 75.0),
        },
    )
    .unwrap();
    let horizon = 24.0;
    let res = solve(
        &model,
        &init,
        horizon,
        &ControlSchedule::constant(),
        &settings,
        &[],
    )
    .unwrap();
    let on = res.active_fraction(&model).unwrap();
    let pde_duty = on
        .mean_over(horizon - 10.0 * cycle.period, horizon)
        .unwrap();

    let settings = McSettings::default();
    let mut rng = load_rng(7, 0);
    let traj = simulate_trajectory(
        &model,
        HybridState::new(hvac_mode::ON, 74.0, 74.0),
        200.0,
        &ControlSchedule::constant(),
        settings,
        &mut rng,
    )
    .unwrap();
    let tail: Vec<&HybridState> = traj
        .samples
        .iter()
        .filter(|(t, _)| *t > 10.0)
        .map(|(_, s)| s)
        .collect();
    let mc_duty =
        tail.iter().filter(|s| s.mode == hvac_mode::ON).count() as f64 / tail.len() as f64;

    let pde_err = (pde_duty - cycle.duty).abs() / cycle.duty;
    let mc_err = (mc_duty - cycle.duty).abs() / cycle.duty;
    let passed = pde_err <= 0.02 && mc_err <= 0.01;
    verdict(
        6,
        "duty cycle",
        passed,
        &format!(
            "oracle {:.5}, pde {pde_duty:.5} (rel err {pde_err:.4} <= 0.02), mc {mc_duty:.5} (rel err {mc_err:.4} <= 0.01)",
            cycle.duty
        ),
    );
    assert!(passed);
}

/// Asymptotic Kolmogorov survival function `P(K > x)`.
fn kolmogorov_survival(x: f64) -> f64 {
    let sum: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * k * k * x * x).exp()
        })
        .sum();
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sojourns(slack: f64, count: usize, horizon: f64) -> Vec<f64> {
    let model = make_pev(6.6, slack)
        .unwrap()
        .with_hazard(&[2.0, 0.0, 0.0])
        .unwrap();
    (0..count)
        .map(|i| {
            let mut rng = load_rng(11, i);
            let traj = simulate_trajectory(
                &model,
                HybridState::new(0, 1.0, slack),
                horizon,
                &ControlSchedule::constant(),
                McSettings::default(),
                &mut rng,
            )
            .unwrap();
            traj.jumps.first().map_or(f64::INFINITY, |j| j.time)
        })
        .collect()
}

#[test]
fn criterion_7_hazard_law() {
    let n = 10_000;
    let mut free = sojourns(1e6, n, 12.0);
    free.sort_by(f64::total_cmp);
    let law = Exp::new(2.0).unwrap();
    let d = free
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = law.cdf(t);
            (f - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    let p_value = kolmogorov_survival((n as f64).sqrt() * d);

    let deadline = 0.3;
    let bounded = sojourns(deadline, n, 1.0);
    let exceed = bounded.iter().filter(|&&t| t > deadline + 1e-12).count();
    let passed = p_value > 0.01 && exceed == 0;
    verdict(
        7,
        "hazard law",
        passed,
        &format!(
            "KS statistic {d:.4}, p = {p_value:.3} (> 0.01) over {n} sojourns; {exceed} of {n} sojourns exceed t* = {deadline} h"
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_8_heterogeneity_convergence() {
    let base = config("price_response.toml");
    let window = base.compare.window.unwrap();
    let mut monotone = 0;
    let mut rows = Vec::new();
    for seed in 1..=20u64 {
        let mut cfg = base.clone();
        cfg.seeds = Seeds::overridden(seed);
        let mc = simulate_mc(&cfg).unwrap();
        let errors: Vec<f64> = [1, 3, 10]
            .iter()
            .map(|&n_c| {
                cfg.clusters = n_c;
                let pde = simulate_pde(&cfg, None).unwrap();
                compare_series(&pde.power, &mc.power, window)
                    .unwrap()
                    .rms_relative_error
            })
            .collect();
        if errors.windows(2).all(|e| e[1] <= e[0]) {
            monotone += 1;
        }
        rows.push(format!("{seed}:{errors:.3?}"));
    }
    let passed = monotone >= 18;
    verdict(
        8,
        "heterogeneity convergence",
        passed,
        &format!(
            "error non-increasing over n_c = 1, 3, 10 in {monotone} of 20 seeds (>= 18); {}",
            rows.join(" ")
        ),
    );
    assert!(passed);
}

fn written(dir: &Path, out: &ScenarioOutcome) -> Vec<(String, Vec<u8>)> {
    write_outcome(dir, out).unwrap();
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_9_determinism() {
    let cases: [(&str, &ScenarioOutcome); 4] = [
        ("price_response.toml", price()),
        ("setback.toml", setback()),
        ("setback_sustained.toml", setback_sustained()),
        ("pev.toml", &run_scenario(&config("pev.toml")).unwrap()),
    ];
    let mut mismatched = Vec::new();
    let mut compared = 0;
    for (name, first) in cases {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let again = run_scenario(&config(name)).unwrap();
        let fa = written(a.path(), first);
        let fb = written(b.path(), &again);
        compared += fa.len();
        if fa != fb {
            mismatched.push(name);
        }
    }
    let passed = mismatched.is_empty();
    verdict(
        9,
        "determinism",
        passed,
        &format!("{compared} output files across 4 scenarios compared byte for byte; mismatched: {mismatched:?}"),
    );
    assert!(passed);
}
