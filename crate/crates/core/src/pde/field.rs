use std::fmt::Write as _;

use super::grid::{Grid, ModeGrid};
use super::partition::{DomainPartition, Region};
use crate::error::{Error, Result};
use crate::model::LoadModel;
use crate::series::fmt_sig6;

pub const DENSITY_CSV_HEADER: &str = "mode,component,x1,x2,p";

/// Cell-average densities of every mode on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub time: f64,
    pub grid: Grid,
    pub values: Vec<Vec<f64>>,
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

impl DensityField {
    pub fn zeros(grid: Grid, time: f64) -> Self {
        let values = grid
            .modes
            .iter()
            .map(|m| vec![0.0; m.cell_count()])
            .collect();
        Self { time, grid, values }
    }

    /// Cell averages of `density(mode, x1, x2)` by 3x3 Gauss-Legendre quadrature.
    pub fn from_fn(grid: Grid, time: f64, density: impl Fn(usize, f64, f64) -> f64) -> Self {
        let mut field = Self::zeros(grid, time);
        for (q, m) in field.grid.modes.iter().enumerate() {
            for j in 0..m.n(1) {
                let (c2, h2) = (m.centre(1, j), 0.5 * m.width(1, j));
                for i in 0..m.n(0) {
                    let (c1, h1) = (m.centre(0, i), 0.5 * m.width(0, i));
                    let mut sum = 0.0;
                    for (a, wa) in GAUSS3 {
                        for (b, wb) in GAUSS3 {
                            sum += wa * wb * density(m.mode, c1 + a * h1, c2 + b * h2);
                        }
                    }
                    field.values[q][m.index(i, j)] = 0.25 * sum;
                }
            }
        }
        field
    }

    /// Uniform density on `region` in each mode, with mode masses `weights`.
    /// Cells cut by the region edge get the exact overlap fraction.
    pub fn uniform_box(grid: Grid, time: f64, weights: &[f64], region: Region) -> Result<Self> {
        if weights.len() != grid.modes.len() {
            return Err(Error::Mismatch(format!(
                "{} weights for {} modes",
                weights.len(),
                grid.modes.len()
            )));
        }
        let mut field = Self::zeros(grid, time);
        for (q, m) in field.grid.modes.iter().enumerate() {
            let overlap = |axis: usize, k: usize| {
                let (lo, hi) = region.axis(axis);
                let (a, b) = (m.faces[axis][k], m.faces[axis][k + 1]);
                (b.min(hi) - a.max(lo)).max(0.0)
            };
            let mut covered = 0.0;
            for j in 0..m.n(1) {
                for i in 0..m.n(0) {
                    covered += overlap(0, i) * overlap(1, j);
                }
            }
            if weights[q] == 0.0 {
                continue;
            }
            if !(covered > 0.0) {
                return Err(Error::param(
                    "initial_region",
                    format!("does not intersect the domain of mode {}", m.mode),
                ));
            }
            for j in 0..m.n(1) {
                for i in 0..m.n(0) {
                    let frac = overlap(0, i) * overlap(1, j);
                    if frac > 0.0 {
                        field.values[q][m.index(i, j)] =
                            weights[q] * frac / covered / m.volume(i, j);
                    }
                }
            }
        }
        Ok(field)
    }

    /// All mass of `mode` in the cell containing `(x1, x2)`.
    pub fn point_mass(grid: Grid, time: f64, mode: usize, x1: f64, x2: f64) -> Result<Self> {
        let mut field = Self::zeros(grid, time);
        let q = field
            .grid
            .modes
            .iter()
            .position(|m| m.mode == mode)
            .ok_or(Error::UnknownMode { mode })?;
        let m = &field.grid.modes[q];
        let (i, j) = match (m.locate(0, x1), m.locate(1, x2)) {
            (Some(i), Some(j)) => (i, j),
            _ => {
                return Err(Error::param(
                    "initial_state",
                    "outside the truncated domain",
                ))
            }
        };
        let c = m.index(i, j);
        field.values[q][c] = 1.0 / m.volume(i, j);
        Ok(field)
    }

    pub fn mode_mass(&self, q: usize) -> f64 {
        cell_sum(&self.grid.modes[q], &self.values[q])
    }

    pub fn mode_masses(&self) -> Vec<f64> {
        (0..self.values.len()).map(|q| self.mode_mass(q)).collect()
    }

    /// Rescales to unit total mass.
    pub fn normalise(&mut self) -> Result<()> {
        let mass = total_mass(self);
        if !(mass > 0.0) {
            return Err(Error::param("density", "has no mass to normalise"));
        }
        for v in self.values.iter_mut().flatten() {
            *v /= mass;
        }
        Ok(())
    }

    /// One record per cell, labelled by the component containing its centre.
    pub fn to_csv(&self, partition: &DomainPartition) -> String {
        let mut out = String::new();
        out.push_str(DENSITY_CSV_HEADER);
        out.push('\n');
        for (q, m) in self.grid.modes.iter().enumerate() {
            let comps = &partition.modes[q].components;
            for j in 0..m.n(1) {
                let x2 = m.centre(1, j);
                for i in 0..m.n(0) {
                    let x1 = m.centre(0, i);
                    let label = comps
                        .iter()
                        .find(|c| {
                            (c.region.x1.0..=c.region.x1.1).contains(&x1)
                                && (c.region.x2.0..=c.region.x2.1).contains(&x2)
                        })
                        .map_or(0, |c| c.label);
                    let _ = writeln!(
                        out,
                        "{},{label},{},{},{}",
                        m.mode,
                        fmt_sig6(x1),
                        fmt_sig6(x2),
                        fmt_sig6(self.values[q][m.index(i, j)])
                    );
                }
            }
        }
        out
    }
}

fn cell_sum(m: &ModeGrid, values: &[f64]) -> f64 {
    let mut total = 0.0;
    for j in 0..m.n(1) {
        let w2 = m.width(1, j);
        let row = &values[j * m.n(0)..(j + 1) * m.n(0)];
        let mut s = 0.0;
        for (i, v) in row.iter().enumerate() {
            s += v * m.width(0, i);
        }
        total += s * w2;
    }
    total
}

/// `Σ p·vol` over every cell of every mode.
pub fn total_mass(p: &DensityField) -> f64 {
    (0..p.values.len()).map(|q| p.mode_mass(q)).sum()
}

/// Expected aggregate power of `n_loads` loads distributed as `p`, kW.
pub fn aggregated_power(p: &DensityField, model: &LoadModel, n_loads: usize) -> f64 {
    let per_load: f64 = p
        .grid
        .modes
        .iter()
        .enumerate()
        .map(|(q, m)| model.output(m.mode) * p.mode_mass(q))
        .sum();
    n_loads as f64 * per_load
}

/// Face-centred probability flux per mode and axis. Axis-0 faces are stored
/// at `j * (n1 + 1) + i`, axis-1 faces at `j * n1 + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    pub time: f64,
    pub values: Vec<[Vec<f64>; 2]>,
}
