use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use loadsim::hetero::ClusterSet;
use loadsim::scenario::{
    self, compare_series, comparison_csv, Check, ScenarioConfig, Seeds, COMPARISON_FILE,
    MC_POWER_FILE, PDE_POWER_FILE,
};
use loadsim::series::PowerSeries;

#[derive(Parser)]
#[command(
    name = "loadsim",
    version,
    about = "Responsive load population simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output.directory` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace every seed of the config.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Run the invariant suite on the written outputs.
    #[arg(long)]
    verify: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo population run; writes mc_power.csv and snapshots.
    SimulateMc(Common),
    /// Weighted-PDE run; writes pde_power.csv, clusters.toml, grids and densities.
    SimulatePde {
        #[command(flatten)]
        common: Common,
        /// Reuse an exported cluster set instead of re-clustering.
        #[arg(long)]
        clusters: Option<PathBuf>,
    },
    /// Clusters the sampled population; writes clusters.toml.
    Cluster(Common),
    /// Compares pde_power.csv against mc_power.csv in the output directory.
    Compare(Common),
    /// MC and PDE pipelines, comparison and report.
    RunScenario(Common),
}

fn load(common: &Common) -> loadsim::Result<(ScenarioConfig, PathBuf)> {
    let mut cfg = ScenarioConfig::read(&common.config)?;
    if let Some(k) = common.seed_override {
        cfg.seeds = Seeds::overridden(k);
    }
    let out = match (&common.out, &cfg.output.directory) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => {
            return Err(loadsim::Error::Config {
                key: "output.directory".into(),
                reason: "no --out given and none configured".into(),
            })
        }
    };
    std::fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn report_checks(checks: &[Check]) -> bool {
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        eprintln!("{status} {} ({} <= {})", c.name, c.value, c.limit);
    }
    checks.iter().all(|c| c.passed)
}

fn run(command: Command) -> loadsim::Result<bool> {
    let (common, ok) = match command {
        Command::SimulateMc(common) => {
            let (cfg, out) = load(&common)?;
            let mc = scenario::simulate_mc(&cfg)?;
            scenario::write_mc(&out, &mc)?;
            eprintln!(
                "mc: {} loads in {:.2} s",
                cfg.population, mc.runtime_seconds
            );
            (common, true)
        }
        Command::SimulatePde { common, clusters } => {
            let (cfg, out) = load(&common)?;
            let set = clusters.as_deref().map(ClusterSet::read).transpose()?;
            let pde = scenario::simulate_pde(&cfg, set)?;
            scenario::write_pde(&out, &pde)?;
            eprintln!(
                "pde: {} cluster(s) in {:.2} s",
                pde.solves.len(),
                pde.runtime_seconds
            );
            let ok = pde.solves.iter().all(|s| s.report.passed);
            for (k, s) in pde.solves.iter().enumerate() {
                for f in &s.report.failures {
                    eprintln!("FAIL cluster {k}: {f}");
                }
            }
            (common, ok)
        }
        Command::Cluster(common) => {
            let (cfg, out) = load(&common)?;
            let (set, _) = scenario::cluster_population(&cfg)?;
            set.write(&out.join(scenario::CLUSTERS_FILE))?;
            eprintln!(
                "clusters: {} with within-cluster distance {}",
                set.len(),
                set.within_cluster_distance
            );
            (common, true)
        }
        Command::Compare(common) => {
            let (cfg, out) = load(&common)?;
            let mc = PowerSeries::read_csv(&out.join(MC_POWER_FILE))?;
            let pde = PowerSeries::read_csv(&out.join(PDE_POWER_FILE))?;
            let report = compare_series(&pde, &mc, cfg.window())?;
            std::fs::write(out.join(COMPARISON_FILE), comparison_csv(&mc, &pde))?;
            let text =
                toml::to_string(&report).map_err(|e| loadsim::Error::Parse(e.to_string()))?;
            std::fs::write(out.join("comparison.toml"), text)?;
            println!(
                "rms relative error {:.6}, max relative error {:.6}",
                report.rms_relative_error, report.max_relative_error
            );
            let ok = cfg
                .compare
                .max_rms_relative_error
                .is_none_or(|limit| report.rms_relative_error <= limit);
            (common, ok)
        }
        Command::RunScenario(common) => {
            let (cfg, out) = load(&common)?;
            let outcome = scenario::run_scenario(&cfg)?;
            scenario::write_outcome(&out, &outcome)?;
            let r = &outcome.report;
            eprintln!(
                "mc {:.2} s, pde {:.2} s; rms relative error {:.6}",
                r.mc_runtime_seconds, r.pde_runtime_seconds, r.comparison.rms_relative_error
            );
            let ok = report_checks(&r.checks);
            (common, ok)
        }
    };
    if !common.verify {
        return Ok(ok);
    }
    let (cfg, out) = load(&common)?;
    let checks = scenario::verify_outputs(Path::new(&out), &cfg)?;
    let verified = report_checks(&checks);
    Ok(ok && verified)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
