use loadsim::hetero::{
    cluster_hvac, kmeans, sample_parameters, CoordinateSpec, HvacPopulation, ParameterDistribution,
};
use loadsim::mc::{simulate_population, McSettings};
use loadsim::model::{
    hvac_mode, make_hvac_etp, ControlSchedule, DiffusionMatrix, EtpParameters, HouseParameters,
    HybridState,
};
use loadsim::pde::{
    advect_diffuse_step, solve, total_mass, DensityField, Discretization, GridSpec, Region,
    SolverSettings, Truncation,
};
use loadsim::scenario::{compare_series, simulate_pde, ScenarioConfig};
use loadsim::series::{PowerSeries, SeriesMeta, SeriesSource};
use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;

fn hvac_truncation(setpoint: f64) -> Truncation {
    Truncation::Hvac {
        margin: 6.0,
        mass_range: (setpoint - 7.0, setpoint + 7.0),
    }
}

fn deadband_box(setpoint: f64) -> Region {
    Region {
        x1: (setpoint - 1.0, setpoint + 1.0),
        x2: (setpoint - 1.0, setpoint + 1.0),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn big_sigma_is_symmetric_psd(s in prop::array::uniform4(-3.0f64..3.0)) {
        let d = DiffusionMatrix::from_sigma(Matrix2::new(s[0], s[1], s[2], s[3]));
        let b = d.big_sigma;
        prop_assert!((b[(0, 1)] - b[(1, 0)]).abs() <= 1e-12);
        prop_assert!(b[(0, 0)] >= 0.0 && b[(1, 1)] >= 0.0);
        prop_assert!(b.determinant() >= -1e-9 * (1.0 + b.norm_squared()));
    }

    #[test]
    fn interior_states_keep_their_mode(
        setpoint in 68.0f64..80.0,
        offset in -0.999f64..0.999,
        mass in 60.0f64..90.0,
        on in any::<bool>(),
    ) {
        let p = EtpParameters { setpoint, ..EtpParameters::default() };
        let m = make_hvac_etp(p).unwrap();
        let mode = usize::from(on);
        let x = Vector2::new(setpoint + offset, mass);
        prop_assert!(m.guard(mode, &x, 0.0) > 0.0);
        prop_assert_eq!(m.transition(mode, &x, 0.0), mode);
    }

    #[test]
    fn cluster_weights_lie_on_the_simplex(n in 5usize..60, k in 1usize..5, seed in any::<u64>()) {
        let dist = ParameterDistribution {
            coordinates: vec![
                ("a".into(), CoordinateSpec::Uniform { low: 0.0, high: 1.0 }),
                ("b".into(), CoordinateSpec::Uniform { low: -5.0, high: 5.0 }),
            ],
        };
        let samples = sample_parameters(&dist, n, seed).unwrap();
        let set = kmeans(&samples, k.min(n), seed).unwrap();
        prop_assert!(set.weights.iter().all(|&w| w >= 0.0));
        prop_assert!((set.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn power_csv_round_trips_to_six_digits(values in prop::collection::vec(0.0f64..1e5, 1..40)) {
        let times: Vec<f64> = (0..values.len()).map(|k| 0.01 * k as f64).collect();
        let s = PowerSeries::new(times, values, SeriesSource::Mc, SeriesMeta::default()).unwrap();
        let text = s.to_csv();
        prop_assert!(text.ends_with('\n'));
        let back = PowerSeries::from_csv(&text).unwrap();
        for (a, b) in s.values.iter().zip(&back.values) {
            prop_assert!((a - b).abs() <= 5e-6 * a.abs().max(1e-300));
        }
        prop_assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn comparison_errors_are_nonnegative(
        a in prop::collection::vec(0.0f64..10.0, 20),
        b in prop::collection::vec(0.0f64..10.0, 20),
    ) {
        let times: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let sa = PowerSeries::new(times.clone(), a, SeriesSource::Pde, SeriesMeta::default()).unwrap();
        let sb = PowerSeries::new(times, b, SeriesSource::Mc, SeriesMeta::default()).unwrap();
        let r = compare_series(&sa, &sb, (0.0, 1.9)).unwrap();
        prop_assert!(r.rms_relative_error >= 0.0 && r.max_relative_error >= r.rms_relative_error - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn advection_sweep_keeps_nonnegative_densities(
        seed in any::<u64>(),
        frac in 0.05f64..1.0,
        x1_first in any::<bool>(),
    ) {
        let model = make_hvac_etp(EtpParameters::default()).unwrap();
        let disc = Discretization::new(&model, 0.0, &hvac_truncation(74.0), GridSpec::CellsPerInterval([8, 6])).unwrap();
        let mut state = seed | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut p = DensityField::zeros(disc.grid.clone(), 0.0);
        for v in p.values.iter_mut().flatten() {
            *v = next();
        }
        let dt = frac * disc.cfl_dt();
        let (out, _) = advect_diffuse_step(&p, &disc, dt, x1_first).unwrap();
        prop_assert!(out.values.iter().flatten().all(|&v| v >= 0.0));
    }

    #[test]
    fn mass_is_conserved_through_setpoint_events(
        first in 0.1f64..0.5,
        shift in -1.5f64..1.5,
        noise in 0.0f64..0.5,
    ) {
        let params = EtpParameters { noise, ..EtpParameters::default() };
        let model = make_hvac_etp(params).unwrap();
        let schedule = ControlSchedule::from_pairs(&[(first, shift), (first + 0.3, 0.0)]).unwrap();
        let truncation = Truncation::hvac_for_schedule(&model, &schedule, 6.0).unwrap();
        let settings = SolverSettings::new(GridSpec::CellsPerInterval([12, 10]), truncation);
        let disc = Discretization::new(&model, 0.0, &truncation, settings.grid).unwrap();
        let init = DensityField::uniform_box(disc.grid.clone(), 0.0, &[0.5, 0.5], deadband_box(74.0)).unwrap();
        let res = solve(&model, &init, 1.0, &schedule, &settings, &[]).unwrap();
        prop_assert!(res.report.max_mass_drift <= 1e-9, "{:?}", res.report);
        prop_assert!(res.mode_masses.iter().all(|m| m.iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn equal_seeds_give_equal_populations(seed in any::<u64>()) {
        let model = make_hvac_etp(EtpParameters { noise: 0.3, ..EtpParameters::default() }).unwrap();
        let models = vec![model; 16];
        let inits: Vec<HybridState> = (0..16)
            .map(|i| HybridState::new(i % 2, 73.2 + 0.1 * i as f64, 74.0))
            .collect();
        let run = || {
            simulate_population(&models, &inits, 0.5, &ControlSchedule::constant(), McSettings::default(), 10, &[0.25], seed)
                .unwrap()
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(a.power, b.power);
        prop_assert_eq!(a.snapshots, b.snapshots);
        prop_assert_eq!(a.mode_fractions, b.mode_fractions);
    }
}

/// Shifting the setpoint, the outdoor temperature and the initial density by
/// the same amount translates the whole solution.
#[test]
fn solution_translates_with_the_setpoint() {
    let solve_at = |delta: f64| {
        let house = HouseParameters {
            outdoor_temp: 84.0 + delta,
            ..HouseParameters::default()
        };
        let params = house.to_etp(74.0 + delta, 1.0, 0.4);
        let model = make_hvac_etp(params).unwrap();
        let truncation = hvac_truncation(74.0 + delta);
        let settings = SolverSettings::new(GridSpec::CellsPerInterval([16, 12]), truncation);
        let disc = Discretization::new(&model, 0.0, &truncation, settings.grid).unwrap();
        let init = DensityField::uniform_box(
            disc.grid.clone(),
            0.0,
            &[0.5, 0.5],
            deadband_box(74.0 + delta),
        )
        .unwrap();
        let res = solve(
            &model,
            &init,
            1.0,
            &ControlSchedule::constant(),
            &settings,
            &[1.0],
        )
        .unwrap();
        res.snapshots.into_iter().next().unwrap()
    };
    let base = solve_at(0.0);
    let moved = solve_at(2.0);
    for (qa, qb) in base.grid.modes.iter().zip(&moved.grid.modes) {
        for axis in 0..2 {
            for (a, b) in qa.faces[axis].iter().zip(&qb.faces[axis]) {
                assert!((b - a - 2.0).abs() < 1e-9);
            }
        }
    }
    let scale = base.values.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
    for (a, b) in base
        .values
        .iter()
        .flatten()
        .zip(moved.values.iter().flatten())
    {
        assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
    }
}

#[test]
fn within_cluster_distance_shrinks_with_more_clusters() {
    let pop = HvacPopulation::default();
    let mut monotone = 0;
    for seed in 0..20u64 {
        let loads = pop.sample(500, seed).unwrap();
        let eps: Vec<f64> = [1, 3, 10]
            .iter()
            .map(|&k| {
                cluster_hvac(&loads, k, seed)
                    .unwrap()
                    .0
                    .within_cluster_distance
            })
            .collect();
        if eps.windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
    }
    assert!(monotone >= 18, "{monotone} of 20");
}

fn kolmogorov_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn setpoint_ecdf_converges_at_root_n() {
    let pop = HvacPopulation::default();
    let (lo, hi) = pop.setpoint_range;
    let cdf = |x: f64| ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    let mean_distance = |n: usize| {
        (0..20u64)
            .map(|seed| {
                let setpoints = pop
                    .sample(n, seed)
                    .unwrap()
                    .iter()
                    .map(|p| p.setpoint)
                    .collect();
                kolmogorov_distance(setpoints, cdf)
            })
            .sum::<f64>()
            / 20.0
    };
    let d: Vec<f64> = [100, 1000, 10_000]
        .iter()
        .map(|&n| mean_distance(n))
        .collect();
    for w in d.windows(2) {
        let ratio = w[0] / w[1];
        assert!((2.0..5.0).contains(&ratio), "{d:?}");
    }
}

#[test]
fn homogeneous_population_runs_a_single_pde() {
    let text = r#"
schema_version = 1
name = "homogeneous"
kind = "setback"
horizon = 1.0
population = 300
clusters = 10

[[events]]
time = 0.5
value = 1.0

[hvac]
spread = 0.0
setpoint_range = [74.0, 74.0]
noise = 0.2

[grid]
cells_per_interval = [12, 10]
"#;
    let cfg = ScenarioConfig::from_toml(text).unwrap();
    let out = simulate_pde(&cfg, None).unwrap();
    assert_eq!(out.clusters.as_ref().unwrap().len(), 1);
    assert_eq!(out.solves.len(), 1);

    let params = HouseParameters::default().to_etp(74.0, 1.0, 0.2);
    let model = make_hvac_etp(params).unwrap();
    let schedule = cfg.schedule().unwrap();
    let truncation = Truncation::hvac_for_schedule(&model, &schedule, 6.0).unwrap();
    let settings = SolverSettings::new(GridSpec::CellsPerInterval([12, 10]), truncation);
    let disc = Discretization::new(&model, 0.0, &truncation, settings.grid).unwrap();
    let init =
        DensityField::uniform_box(disc.grid.clone(), 0.0, &[0.5, 0.5], deadband_box(74.0)).unwrap();
    let single = solve(&model, &init, 1.0, &schedule, &settings, &[]).unwrap();
    let on = single.active_fraction(&model).unwrap();
    let rated = model.output(hvac_mode::ON);
    assert!((total_mass(&init) - 1.0).abs() < 1e-12);
    for (a, b) in out.power.values.iter().zip(&on.values) {
        assert_eq!(*a, 300.0 * rated * b);
    }
}
