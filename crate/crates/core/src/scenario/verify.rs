use std::path::Path;

use super::config::ScenarioConfig;
use super::run::{
    Check, ScenarioReport, CLUSTERS_FILE, MC_POWER_FILE, PDE_POWER_FILE, REPORT_FILE,
};
use crate::error::Result;
use crate::hetero::ClusterSet;
use crate::mc::SNAPSHOT_CSV_HEADER;
use crate::pde::DENSITY_CSV_HEADER;
use crate::series::PowerSeries;

fn pass(name: impl Into<String>, passed: bool) -> Check {
    Check {
        name: name.into(),
        value: if passed { 0.0 } else { 1.0 },
        limit: 0.0,
        passed,
    }
}

fn power_checks(path: &Path, checks: &mut Vec<Check>) {
    let label = path
        .file_name()
        .map_or_else(String::new, |f| f.to_string_lossy().into_owned());
    let Ok(text) = std::fs::read_to_string(path) else {
        checks.push(pass(format!("{label}: readable"), false));
        return;
    };
    checks.push(pass(
        format!("{label}: newline-terminated"),
        text.ends_with('\n'),
    ));
    match PowerSeries::from_csv(&text) {
        Ok(s) => {
            checks.push(pass(format!("{label}: nonempty"), !s.is_empty()));
            checks.push(pass(
                format!("{label}: finite nonnegative power"),
                s.values.iter().all(|v| v.is_finite() && *v >= 0.0),
            ));
        }
        Err(_) => checks.push(pass(format!("{label}: parses"), false)),
    }
}

fn table_checks(path: &Path, header: &str, value_columns: &[usize], checks: &mut Vec<Check>) {
    let label = path
        .file_name()
        .map_or_else(String::new, |f| f.to_string_lossy().into_owned());
    let Ok(text) = std::fs::read_to_string(path) else {
        checks.push(pass(format!("{label}: readable"), false));
        return;
    };
    let mut lines = text.lines();
    let header_ok = lines.next() == Some(header);
    let rows_ok = lines.all(|l| {
        let cols: Vec<&str> = l.split(',').collect();
        cols.len() == header.split(',').count()
            && value_columns
                .iter()
                .all(|&c| cols[c].parse::<f64>().is_ok_and(|v| v.is_finite()))
    });
    checks.push(pass(
        format!("{label}: well-formed"),
        header_ok && rows_ok && text.ends_with('\n'),
    ));
}

/// Invariant suite over a scenario output directory.
///
/// Checks every CSV against its fixed header, power and densities for
/// finiteness and sign, the cluster weights for the simplex, and the mass and
/// clipping logs of every PDE solve against the configured tolerances.
pub fn verify_outputs(dir: &Path, cfg: &ScenarioConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for name in [MC_POWER_FILE, PDE_POWER_FILE] {
        let path = dir.join(name);
        if path.exists() {
            power_checks(&path, &mut checks);
        }
    }
    let clusters = dir.join(CLUSTERS_FILE);
    if clusters.exists() {
        let ok = ClusterSet::read(&clusters).is_ok_and(|c| c.validate(None).is_ok());
        checks.push(pass("clusters.toml: weight simplex", ok));
    }
    let report = dir.join(REPORT_FILE);
    if report.exists() {
        match ScenarioReport::from_toml(&std::fs::read_to_string(&report)?) {
            Ok(r) => {
                for (k, s) in r.pde.iter().enumerate() {
                    checks.push(Check::at_most(
                        format!("report: cluster {k} mass drift"),
                        s.max_mass_drift,
                        cfg.grid.tol_mass,
                    ));
                    checks.push(Check::at_most(
                        format!("report: cluster {k} clipped mass"),
                        s.clipped_mass,
                        cfg.grid.max_clipped,
                    ));
                    checks.push(Check::at_most(
                        format!("report: cluster {k} escaped mass"),
                        s.escaped_mass,
                        cfg.grid.max_escaped,
                    ));
                }
                checks.push(pass("report: declared tolerances", r.passed));
            }
            Err(_) => checks.push(pass("report.toml: parses", false)),
        }
    }
    let mut entries: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in entries {
        let name = path
            .file_name()
            .map_or_else(String::new, |f| f.to_string_lossy().into_owned());
        if name.starts_with("mc_snapshot_") && name.ends_with(".csv") {
            table_checks(&path, SNAPSHOT_CSV_HEADER, &[1, 3, 4], &mut checks);
        } else if name.starts_with("pde_density_") && name.ends_with(".csv") {
            table_checks(&path, DENSITY_CSV_HEADER, &[2, 3, 4], &mut checks);
            let nonneg = std::fs::read_to_string(&path)?.lines().skip(1).all(|l| {
                l.rsplit(',')
                    .next()
                    .and_then(|p| p.parse::<f64>().ok())
                    .is_some_and(|p| p >= 0.0)
            });
            checks.push(pass(format!("{name}: nonnegative density"), nonneg));
        }
    }
    Ok(checks)
}
