use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
schema_version = 1
name = "small"
kind = "price_response"
horizon = 2.0
population = 200
clusters = 3
burn_in = 0.5

[output]
snapshot_times = [1.0]

[[events]]
time = 1.0
value = 1.0

[price]
slope = 1.0
bound = 1.0

[hvac]
spread = 0.2
setpoint_range = [70.0, 78.0]
noise = 0.1

[grid]
cells_per_interval = [12, 10]
"#;

fn loadsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loadsim"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn run_scenario_writes_verified_and_reproducible_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = loadsim(&[
            "run-scenario",
            "--config",
            &cfg,
            "--out",
            dir.to_str().unwrap(),
            "--verify",
        ]);
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(0), "{stderr}");
        assert!(stderr.contains("PASS"));
    }
    assert_eq!(files(&a), files(&b));
    let names: Vec<String> = files(&a).into_iter().map(|f| f.0).collect();
    for expected in [
        "mc_power.csv",
        "pde_power.csv",
        "comparison.csv",
        "report.toml",
        "clusters.toml",
        "grid_cluster_0.toml",
        "mc_snapshot_0.csv",
        "pde_density_0_cluster_0.csv",
    ] {
        assert!(
            names.iter().any(|n| n == expected),
            "missing {expected} in {names:?}"
        );
    }
    let power = std::fs::read_to_string(a.join("mc_power.csv")).unwrap();
    assert!(power.starts_with("time_hours,power_kw,source\n"));
    assert!(power.ends_with('\n'));
    let snapshot = std::fs::read_to_string(a.join("mc_snapshot_0.csv")).unwrap();
    assert!(snapshot.starts_with("load_index,time_hours,mode,x1,x2\n"));
    let density = std::fs::read_to_string(a.join("pde_density_0_cluster_0.csv")).unwrap();
    assert!(density.starts_with("mode,component,x1,x2,p\n"));
}

#[test]
fn seed_override_changes_the_monte_carlo_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, seed) in [(&a, "5"), (&b, "6")] {
        let out = loadsim(&[
            "simulate-mc",
            "--config",
            &cfg,
            "--out",
            dir.to_str().unwrap(),
            "--seed-override",
            seed,
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_ne!(
        std::fs::read(a.join("mc_power.csv")).unwrap(),
        std::fs::read(b.join("mc_power.csv")).unwrap()
    );
}

#[test]
fn staged_pipeline_reuses_exported_clusters() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out_dir = tmp.path().join("out");
    let out = out_dir.to_str().unwrap();
    assert_eq!(
        loadsim(&["cluster", "--config", &cfg, "--out", out])
            .status
            .code(),
        Some(0)
    );
    let clusters = out_dir.join("clusters.toml");
    let exported = std::fs::read(&clusters).unwrap();
    let pde = loadsim(&[
        "simulate-pde",
        "--config",
        &cfg,
        "--out",
        out,
        "--clusters",
        clusters.to_str().unwrap(),
    ]);
    assert_eq!(
        pde.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&pde.stderr)
    );
    assert_eq!(std::fs::read(&clusters).unwrap(), exported);
    assert_eq!(
        loadsim(&["simulate-mc", "--config", &cfg, "--out", out])
            .status
            .code(),
        Some(0)
    );
    let cmp = loadsim(&["compare", "--config", &cfg, "--out", out]);
    assert_eq!(cmp.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&cmp.stdout).contains("rms relative error"));
    assert!(out_dir.join("comparison.csv").exists());
}

#[test]
fn failed_tolerance_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[compare]\nmax_rms_relative_error = 1e-9\n");
    let cfg = write_config(tmp.path(), &text);
    let out = loadsim(&[
        "run-scenario",
        "--config",
        &cfg,
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL rms relative error"));
}

#[test]
fn bad_config_exits_with_two_and_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &SMALL.replace("schema_version = 1", "schema_version = 7"),
    );
    let out = loadsim(&[
        "simulate-mc",
        "--config",
        &cfg,
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema_version"));
}

#[test]
fn verify_rejects_a_corrupted_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("o");
    let out = dir.to_str().unwrap();
    assert_eq!(
        loadsim(&["run-scenario", "--config", &cfg, "--out", out])
            .status
            .code(),
        Some(0)
    );
    let power = dir.join("pde_power.csv");
    let text = std::fs::read_to_string(&power).unwrap();
    std::fs::write(&power, text.replacen(",pde\n", ",pde\n0.005,-1,pde\n", 1)).unwrap();
    let verified = loadsim(&["compare", "--config", &cfg, "--out", out, "--verify"]);
    assert_ne!(verified.status.code(), Some(0));
}
