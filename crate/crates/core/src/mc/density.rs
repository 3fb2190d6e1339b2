use super::population::PopulationState;
use crate::pde::{DensityField, Grid};

/// Histogram of a population snapshot on a PDE grid.
#[derive(Debug, Clone)]
pub struct EmpiricalDensity {
    pub field: DensityField,
    /// Loads whose state lies outside the grid of their mode.
    pub outside: usize,
}

/// Cell-average density estimate, normalised by the number of loads.
pub fn empirical_density(snapshot: &PopulationState, grid: &Grid) -> EmpiricalDensity {
    let mut field = DensityField::zeros(grid.clone(), snapshot.time);
    let mut outside = 0;
    let weight = 1.0 / snapshot.states.len().max(1) as f64;
    for s in &snapshot.states {
        let Some(q) = grid.modes.iter().position(|m| m.mode == s.mode) else {
            outside += 1;
            continue;
        };
        let m = &grid.modes[q];
        match (m.locate(0, s.x[0]), m.locate(1, s.x[1])) {
            (Some(i), Some(j)) => field.values[q][m.index(i, j)] += weight / m.volume(i, j),
            _ => outside += 1,
        }
    }
    EmpiricalDensity { field, outside }
}
