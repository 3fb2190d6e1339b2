use nalgebra::Vector2;

use super::field::DensityField;
use super::grid::ModeGrid;
use super::scheme::Discretization;
use crate::error::{Error, Result};

/// Conservatively moves `p` onto the grid of `next` after a control change.
///
/// Rows must line up (x2 faces unchanged); along x1 mass is split by cell
/// overlap. Mass outside the new domain of its mode follows the transition
/// map; what still falls outside every domain is returned as escaped.
pub fn remap_density(p: &DensityField, next: &Discretization) -> Result<(DensityField, f64)> {
    if p.grid == next.grid {
        let mut out = p.clone();
        out.grid = next.grid.clone();
        return Ok((out, 0.0));
    }
    let mut out = DensityField::zeros(next.grid.clone(), p.time);
    let mut escaped = 0.0;
    let control = next.control();
    for (q, old) in p.grid.modes.iter().enumerate() {
        let new = &next.grid.modes[q];
        if old.faces[1] != new.faces[1] {
            return Err(Error::Partition(
                "density remap requires an unchanged x2 mesh".into(),
            ));
        }
        let (lo, hi) = new.bounds(0);
        for j in 0..old.n(1) {
            let x2 = old.centre(1, j);
            for i in 0..old.n(0) {
                let v = p.values[q][old.index(i, j)];
                if v == 0.0 {
                    continue;
                }
                let (a, b) = (old.faces[0][i], old.faces[0][i + 1]);
                // Inside the new domain of the same mode.
                let (ia, ib) = (a.max(lo), b.min(hi));
                if ib > ia {
                    deposit(new, &mut out.values[q], j, ia, ib, v);
                }
                for (sa, sb) in [(a, b.min(lo)), (a.max(hi), b)] {
                    if sb <= sa {
                        continue;
                    }
                    let mid = Vector2::new(0.5 * (sa + sb), x2);
                    let to = next.model.transition(old.mode, &mid, control);
                    let target = &next.grid.modes[to];
                    let (tlo, thi) = target.bounds(0);
                    let (ta, tb) = (sa.max(tlo), sb.min(thi));
                    let mut placed = 0.0;
                    if to != q && tb > ta && target.faces[1] == new.faces[1] {
                        deposit(target, &mut out.values[to], j, ta, tb, v);
                        placed = tb - ta;
                    }
                    escaped += v * (sb - sa - placed) * old.width(1, j);
                }
            }
        }
    }
    Ok((out, escaped))
}

/// Adds density `v` over `[a, b]` of row `j` to the overlapping cells.
fn deposit(grid: &ModeGrid, values: &mut [f64], j: usize, a: f64, b: f64, v: f64) {
    let faces = &grid.faces[0];
    let start = faces.partition_point(|&f| f <= a).saturating_sub(1);
    for k in start..grid.n(0) {
        let (fa, fb) = (faces[k], faces[k + 1]);
        if fa >= b {
            break;
        }
        let overlap = fb.min(b) - fa.max(a);
        if overlap > 0.0 {
            values[grid.index(k, j)] += v * overlap / (fb - fa);
        }
    }
}
