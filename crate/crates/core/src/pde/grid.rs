use serde::{Deserialize, Serialize};

use super::partition::DomainPartition;
use crate::error::{Error, Result};

/// Mesh resolution. Every interval between consecutive component bounds is
/// divided uniformly, so meshes of different modes share faces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    CellsPerInterval([usize; 2]),
    CellWidth([f64; 2]),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::CellsPerInterval([160, 120])
    }
}

impl GridSpec {
    fn cells(&self, axis: usize, length: f64) -> Result<usize> {
        let n = match *self {
            GridSpec::CellsPerInterval(n) => n[axis],
            GridSpec::CellWidth(w) => {
                if !(w[axis] > 0.0) {
                    return Err(Error::param("cell_width", "must be positive"));
                }
                (length / w[axis] - 1e-9).ceil().max(1.0) as usize
            }
        };
        if n < 2 {
            return Err(Error::Resolution(format!(
                "interval of length {length} on x{} gets {n} cell(s); at least 2 are required",
                axis + 1
            )));
        }
        Ok(n)
    }
}

/// Tensor mesh of one mode domain. Cell `(i, j)` is stored at `j * n1 + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    pub mode: usize,
    pub faces: [Vec<f64>; 2],
}

impl ModeGrid {
    #[inline]
    pub fn n(&self, axis: usize) -> usize {
        self.faces[axis].len() - 1
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        self.n(0) * self.n(1)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n(0) + i
    }

    #[inline]
    pub fn width(&self, axis: usize, k: usize) -> f64 {
        self.faces[axis][k + 1] - self.faces[axis][k]
    }

    #[inline]
    pub fn centre(&self, axis: usize, k: usize) -> f64 {
        0.5 * (self.faces[axis][k] + self.faces[axis][k + 1])
    }

    #[inline]
    pub fn volume(&self, i: usize, j: usize) -> f64 {
        self.width(0, i) * self.width(1, j)
    }

    /// Cell index along `axis` containing `x`, if inside the mesh.
    pub fn locate(&self, axis: usize, x: f64) -> Option<usize> {
        let f = &self.faces[axis];
        if x < f[0] || x > f[f.len() - 1] {
            return None;
        }
        let k = f.partition_point(|&y| y <= x);
        Some(k.saturating_sub(1).min(self.n(axis) - 1))
    }

    /// Face index along `axis` at coordinate `x`, within a relative tolerance.
    pub fn face_at(&self, axis: usize, x: f64) -> Option<usize> {
        let f = &self.faces[axis];
        let tol = 1e-9 * (1.0 + x.abs());
        let k = f.partition_point(|&y| y < x - tol);
        (k < f.len() && (f[k] - x).abs() <= tol).then_some(k)
    }

    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        let f = &self.faces[axis];
        (f[0], f[f.len() - 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub spec: GridSpec,
    pub modes: Vec<ModeGrid>,
}

impl Grid {
    /// Meshes every mode domain of `partition` on a common set of faces.
    pub fn build(partition: &DomainPartition, spec: GridSpec) -> Result<Self> {
        let global: Vec<Vec<f64>> = (0..2)
            .map(|axis| {
                let pts = partition.breakpoints(axis);
                let mut faces = vec![pts[0]];
                for w in pts.windows(2) {
                    let n = spec.cells(axis, w[1] - w[0])?;
                    let h = (w[1] - w[0]) / n as f64;
                    faces.extend((1..n).map(|k| w[0] + k as f64 * h));
                    faces.push(w[1]);
                }
                Ok(faces)
            })
            .collect::<Result<_>>()?;
        let modes = partition
            .modes
            .iter()
            .map(|m| {
                let slice = |axis: usize| -> Result<Vec<f64>> {
                    let (lo, hi) = m.bounds.axis(axis);
                    let g = &global[axis];
                    let tol = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
                    let a = g.iter().position(|&x| (x - lo).abs() <= tol);
                    let b = g.iter().position(|&x| (x - hi).abs() <= tol);
                    match (a, b) {
                        (Some(a), Some(b)) if b > a => Ok(g[a..=b].to_vec()),
                        _ => Err(Error::Partition(format!(
                            "mode {} bounds on x{} are not component bounds",
                            m.mode,
                            axis + 1
                        ))),
                    }
                };
                Ok(ModeGrid {
                    mode: m.mode,
                    faces: [slice(0)?, slice(1)?],
                })
            })
            .collect::<Result<_>>()?;
        Ok(Grid { spec, modes })
    }

    pub fn cell_count(&self) -> usize {
        self.modes.iter().map(ModeGrid::cell_count).sum()
    }

    /// Smallest cell width on `axis` over every mode.
    pub fn min_width(&self, axis: usize) -> f64 {
        self.modes
            .iter()
            .flat_map(|m| m.faces[axis].windows(2).map(|w| w[1] - w[0]))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Serialize)]
struct Export<'a> {
    partition: &'a DomainPartition,
    grid: &'a Grid,
}

/// Partition and mesh as TOML.
pub fn export_grid(partition: &DomainPartition, grid: &Grid) -> Result<String> {
    toml::to_string(&Export { partition, grid }).map_err(|e| Error::Parse(e.to_string()))
}
