use nalgebra::Vector2;

use super::field::{DensityField, FluxField};
use super::grid::{Grid, GridSpec, ModeGrid};
use super::partition::{build_partition, BoundaryKind, DomainPartition, Side, Truncation};
use crate::error::{Error, Result};
use crate::model::LoadModel;

pub const CFL_NUMBER: f64 = 0.9;
/// Allowed discrepancy between flux removed at outflow faces and mass
/// injected into successor cells, per step.
pub const INTERFACE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
enum SideOps {
    Wall,
    Truncation {
        coef: Vec<f64>,
    },
    Outflow {
        to: usize,
        coef: Vec<f64>,
        targets: Vec<usize>,
    },
}

impl SideOps {
    fn coef(&self) -> Option<&[f64]> {
        match self {
            SideOps::Wall => None,
            SideOps::Truncation { coef } | SideOps::Outflow { coef, .. } => Some(coef),
        }
    }
}

/// Precomputed face velocities, diffusion weights and boundary rules of one mode.
#[derive(Debug, Clone)]
struct ModeOps {
    n: [usize; 2],
    width: [Vec<f64>; 2],
    inv_width: [Vec<f64>; 2],
    /// Face-normal drift; axis 0 at `j * (n1 + 1) + i`, axis 1 at `j * n1 + i`.
    velocity: [Vec<f64>; 2],
    /// Diagonal entries of Σ at cell centres.
    sigma: [Vec<f64>; 2],
    /// `1 / (w_{k-1} + w_k)` at interior faces.
    diff_weight: [Vec<f64>; 2],
    diffuses: [bool; 2],
    sides: [SideOps; 4],
    hazard: Vec<f64>,
    jump_to: Option<usize>,
    jump_target: Vec<usize>,
    /// Largest per-axis outflow rate of each cell (1/h).
    rate: Vec<f64>,
}

impl ModeOps {
    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        j * self.n[0] + i
    }

    #[inline]
    fn volume(&self, c: usize) -> f64 {
        self.width[0][c % self.n[0]] * self.width[1][c / self.n[0]]
    }
}

/// Inclusive index box of cells that may hold mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ActiveBox {
    lo: [usize; 2],
    hi: [usize; 2],
    empty: bool,
}

impl ActiveBox {
    const EMPTY: ActiveBox = ActiveBox {
        lo: [usize::MAX; 2],
        hi: [0; 2],
        empty: true,
    };

    fn full(n: [usize; 2]) -> Self {
        ActiveBox {
            lo: [0, 0],
            hi: [n[0] - 1, n[1] - 1],
            empty: false,
        }
    }

    fn include(&mut self, i: usize, j: usize) {
        self.lo = [self.lo[0].min(i), self.lo[1].min(j)];
        self.hi = [self.hi[0].max(i), self.hi[1].max(j)];
        self.empty = false;
    }

    fn grow(&mut self, axis: usize, n: usize) {
        if !self.empty {
            self.lo[axis] = self.lo[axis].saturating_sub(1);
            self.hi[axis] = (self.hi[axis] + 1).min(n - 1);
        }
    }
}

/// Mass moved through outflow faces during one sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InterfaceBalance {
    pub removed: f64,
    pub injected: f64,
    pub escaped: f64,
}

impl InterfaceBalance {
    pub fn imbalance(&self) -> f64 {
        (self.removed - self.injected).abs()
    }

    fn add(&mut self, other: InterfaceBalance) {
        self.removed += other.removed;
        self.injected += other.injected;
        self.escaped += other.escaped;
    }
}

/// Finite-volume discretization of the forward equations for one control value.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub model: LoadModel,
    pub partition: DomainPartition,
    pub grid: Grid,
    ops: Vec<ModeOps>,
    /// Largest outflow rate over the successor cells of each surface.
    surface_rate: Vec<f64>,
}

impl Discretization {
    pub fn new(
        model: &LoadModel,
        control: f64,
        truncation: &Truncation,
        spec: GridSpec,
    ) -> Result<Self> {
        let partition = build_partition(model, control, truncation)?;
        partition.validate()?;
        let grid = Grid::build(&partition, spec)?;
        Self::from_parts(model, partition, grid)
    }

    pub fn from_parts(model: &LoadModel, partition: DomainPartition, grid: Grid) -> Result<Self> {
        if grid.modes.len() != partition.modes.len() {
            return Err(Error::Mismatch(
                "grid and partition mode counts differ".into(),
            ));
        }
        let control = partition.control;
        let mut ops = Vec::with_capacity(grid.modes.len());
        for (q, (mg, md)) in grid.modes.iter().zip(&partition.modes).enumerate() {
            model.check_mode(mg.mode)?;
            if mg.mode != md.mode || q != md.mode {
                return Err(Error::Mismatch(
                    "modes must be listed in index order".into(),
                ));
            }
            ops.push(mode_ops(model, control, &partition, &grid, mg)?);
        }
        let mut surface_rate = vec![0.0; partition.surfaces.len()];
        for (q, md) in partition.modes.iter().enumerate() {
            for side in Side::ALL {
                if let (BoundaryKind::Outflow { surface }, SideOps::Outflow { to, targets, .. }) =
                    (md.sides[side.index()], &ops[q].sides[side.index()])
                {
                    surface_rate[surface] = targets
                        .iter()
                        .map(|&c| ops[*to].rate[c])
                        .fold(0.0, f64::max);
                }
            }
        }
        Ok(Self {
            model: model.clone(),
            partition,
            grid,
            ops,
            surface_rate,
        })
    }

    pub fn control(&self) -> f64 {
        self.partition.control
    }

    /// `C · min(Δ/|f|, Δ²/(2Σ))` over every cell and axis, capped by `C · 0.5/λ_max`.
    pub fn cfl_dt(&self) -> f64 {
        let mut dt = f64::INFINITY;
        for (q, m) in self.grid.modes.iter().enumerate() {
            let ops = &self.ops[q];
            for j in 0..m.n(1) {
                for i in 0..m.n(0) {
                    let x = Vector2::new(m.centre(0, i), m.centre(1, j));
                    let f = self.model.drift(m.mode, &x);
                    let c = m.index(i, j);
                    for axis in 0..2 {
                        let w = m.width(axis, if axis == 0 { i } else { j });
                        if f[axis] != 0.0 {
                            dt = dt.min(w / f[axis].abs());
                        }
                        let s = ops.sigma[axis][c];
                        if s > 0.0 {
                            dt = dt.min(w * w / (2.0 * s));
                        }
                    }
                }
            }
        }
        let lambda = self.max_effective_hazard();
        if lambda > 0.0 {
            dt = dt.min(0.5 / lambda);
        }
        CFL_NUMBER * dt
    }

    fn max_effective_hazard(&self) -> f64 {
        self.ops
            .iter()
            .flat_map(|o| o.hazard.iter().copied())
            .fold(0.0, f64::max)
    }

    pub(crate) fn full_boxes(&self) -> Vec<ActiveBox> {
        self.ops.iter().map(|o| ActiveBox::full(o.n)).collect()
    }

    /// Largest step keeping every sweep and the jump stage positivity-preserving
    /// on the active region (plus one halo cell and successor cells).
    pub(crate) fn stable_dt(&self, boxes: &[ActiveBox]) -> f64 {
        let mut rate = 0.0f64;
        let mut lambda = 0.0f64;
        for (q, ops) in self.ops.iter().enumerate() {
            let b = boxes[q];
            if b.empty {
                continue;
            }
            let mut g = b;
            g.grow(0, ops.n[0]);
            g.grow(1, ops.n[1]);
            for j in g.lo[1]..=g.hi[1] {
                let row = &ops.rate[ops.index(g.lo[0], j)..=ops.index(g.hi[0], j)];
                rate = row.iter().copied().fold(rate, f64::max);
                if ops.jump_to.is_some() {
                    let hz = &ops.hazard[ops.index(g.lo[0], j)..=ops.index(g.hi[0], j)];
                    lambda = hz.iter().copied().fold(lambda, f64::max);
                }
            }
            for side in Side::ALL {
                let touches = if side.is_high() {
                    g.hi[side.axis()] == ops.n[side.axis()] - 1
                } else {
                    g.lo[side.axis()] == 0
                };
                if let (true, BoundaryKind::Outflow { surface }) =
                    (touches, self.partition.modes[q].sides[side.index()])
                {
                    rate = rate.max(self.surface_rate[surface]);
                }
            }
            if let Some(to) = ops.jump_to {
                if ops.hazard.iter().any(|&h| h > 0.0) {
                    rate = rate.max(self.ops[to].rate.iter().copied().fold(0.0, f64::max));
                }
            }
        }
        let mut dt = f64::INFINITY;
        if rate > 0.0 {
            dt = CFL_NUMBER / rate;
        }
        if lambda > 0.0 {
            dt = dt.min(CFL_NUMBER * 0.5 / lambda);
        }
        dt
    }

    /// Conservative donor-cell sweep along `axis` over the active boxes.
    /// Outflow-face mass is handed to the successor mode after every mode has
    /// been swept.
    pub(crate) fn sweep(
        &self,
        axis: usize,
        values: &mut [Vec<f64>],
        boxes: &mut [ActiveBox],
        dt: f64,
        scratch: &mut Vec<f64>,
        pending: &mut Vec<(usize, usize, f64)>,
    ) -> InterfaceBalance {
        let mut balance = InterfaceBalance::default();
        pending.clear();
        for (q, ops) in self.ops.iter().enumerate() {
            if boxes[q].empty {
                continue;
            }
            boxes[q].grow(axis, ops.n[axis]);
            let b = boxes[q];
            let vals = &mut values[q];
            if axis == 0 {
                sweep_x1(ops, vals, b, dt, &mut balance, pending);
            } else {
                sweep_x2(ops, vals, b, dt, scratch, &mut balance, pending);
            }
        }
        self.inject(values, boxes, pending, &mut balance);
        balance
    }

    fn inject(
        &self,
        values: &mut [Vec<f64>],
        boxes: &mut [ActiveBox],
        pending: &[(usize, usize, f64)],
        balance: &mut InterfaceBalance,
    ) {
        for &(to, c, mass) in pending {
            let ops = &self.ops[to];
            let vol = ops.volume(c);
            let before = values[to][c];
            values[to][c] = before + mass / vol;
            balance.injected += (values[to][c] - before) * vol;
            boxes[to].include(c % ops.n[0], c / ops.n[0]);
        }
    }

    /// Explicit-Euler transfer of `λ p dt` to the same cell of the successor mode.
    pub(crate) fn jump_exchange(
        &self,
        values: &mut [Vec<f64>],
        boxes: &mut [ActiveBox],
        dt: f64,
        pending: &mut Vec<(usize, usize, f64)>,
    ) {
        pending.clear();
        for (q, ops) in self.ops.iter().enumerate() {
            let (Some(to), false) = (ops.jump_to, boxes[q].empty) else {
                continue;
            };
            let b = boxes[q];
            for j in b.lo[1]..=b.hi[1] {
                for i in b.lo[0]..=b.hi[0] {
                    let c = ops.index(i, j);
                    let rate = ops.hazard[c];
                    let p = values[q][c];
                    if rate > 0.0 && p != 0.0 {
                        let moved = rate * p * dt;
                        values[q][c] = p - moved;
                        pending.push((to, ops.jump_target[c], moved * ops.volume(c)));
                    }
                }
            }
        }
        let mut sink = InterfaceBalance::default();
        self.inject(values, boxes, pending, &mut sink);
    }

    /// Clips negative values, flushes values below `floor`, and shrinks each
    /// box to its nonzero cells. Returns `(mass, clipped)`.
    pub(crate) fn tidy(
        &self,
        values: &mut [Vec<f64>],
        boxes: &mut [ActiveBox],
        floor: f64,
    ) -> (f64, f64) {
        let mut mass = 0.0;
        let mut clipped = 0.0;
        for (q, ops) in self.ops.iter().enumerate() {
            let b = boxes[q];
            if b.empty {
                continue;
            }
            let mut tight = ActiveBox::EMPTY;
            let vals = &mut values[q];
            for j in b.lo[1]..=b.hi[1] {
                let w2 = ops.width[1][j];
                let mut row_mass = 0.0;
                let mut row_clip = 0.0;
                let mut first = usize::MAX;
                let mut last = 0;
                for i in b.lo[0]..=b.hi[0] {
                    let c = j * ops.n[0] + i;
                    let v = vals[c];
                    if v == 0.0 {
                        continue;
                    }
                    let w1 = ops.width[0][i];
                    if v < floor {
                        row_clip += v.abs() * w1;
                        vals[c] = 0.0;
                        continue;
                    }
                    row_mass += v * w1;
                    first = first.min(i);
                    last = i;
                }
                mass += row_mass * w2;
                clipped += row_clip * w2;
                if first != usize::MAX {
                    tight.include(first, j);
                    tight.include(last, j);
                }
            }
            boxes[q] = tight;
        }
        (mass, clipped)
    }

    pub(crate) fn boxes_for(&self, values: &[Vec<f64>]) -> Vec<ActiveBox> {
        let mut boxes = self.full_boxes();
        let mut scratch = values.to_vec();
        self.tidy(&mut scratch, &mut boxes, f64::MIN_POSITIVE);
        boxes
    }

    /// Face-extrapolated density on each outflow surface, maximised over the
    /// surface: `p_face ≈ p_0 + (p_0 - p_1) w_0 / (w_0 + w_1)` from the two
    /// cells nearest the face.
    pub fn outflow_face_density(&self, p: &DensityField) -> Vec<f64> {
        let mut out = vec![0.0; self.partition.surfaces.len()];
        for (q, md) in self.partition.modes.iter().enumerate() {
            let ops = &self.ops[q];
            for side in Side::ALL {
                let BoundaryKind::Outflow { surface } = md.sides[side.index()] else {
                    continue;
                };
                let axis = side.axis();
                let other = 1 - axis;
                let n = ops.n[axis];
                let (k0, k1) = if side.is_high() {
                    (n - 1, n - 2)
                } else {
                    (0, 1)
                };
                let mut best = 0.0f64;
                for m in 0..ops.n[other] {
                    let cell = |k: usize| {
                        if axis == 0 {
                            ops.index(k, m)
                        } else {
                            ops.index(m, k)
                        }
                    };
                    let (p0, p1) = (p.values[q][cell(k0)], p.values[q][cell(k1)]);
                    let (w0, w1) = (ops.width[axis][k0], ops.width[axis][k1]);
                    let face = p0 + (p0 - p1) * w0 / (w0 + w1);
                    best = best.max(face.abs());
                }
                out[surface] = best;
            }
        }
        out
    }

    pub(crate) fn check_grid(&self, p: &DensityField) -> Result<()> {
        if p.grid != self.grid {
            return Err(Error::Mismatch(
                "density field does not live on the discretization grid".into(),
            ));
        }
        Ok(())
    }
}

fn mode_ops(
    model: &LoadModel,
    control: f64,
    partition: &DomainPartition,
    grid: &Grid,
    mg: &ModeGrid,
) -> Result<ModeOps> {
    let q = mg.mode;
    let n = [mg.n(0), mg.n(1)];
    let width: [Vec<f64>; 2] = [0, 1].map(|a| (0..n[a]).map(|k| mg.width(a, k)).collect());
    let inv_width: [Vec<f64>; 2] = [0, 1].map(|a| width[a].iter().map(|w| 1.0 / w).collect());
    let mut velocity = [vec![0.0; (n[0] + 1) * n[1]], vec![0.0; n[0] * (n[1] + 1)]];
    for j in 0..n[1] {
        for i in 0..=n[0] {
            let x = Vector2::new(mg.faces[0][i], mg.centre(1, j));
            velocity[0][j * (n[0] + 1) + i] = model.drift(q, &x)[0];
        }
    }
    for j in 0..=n[1] {
        for i in 0..n[0] {
            let x = Vector2::new(mg.centre(0, i), mg.faces[1][j]);
            velocity[1][j * n[0] + i] = model.drift(q, &x)[1];
        }
    }
    let cells = n[0] * n[1];
    let mut sigma = [vec![0.0; cells], vec![0.0; cells]];
    let mut hazard = vec![0.0; cells];
    let mut jump_target = vec![usize::MAX; cells];
    let jump_to = model.successor(q);
    for j in 0..n[1] {
        for i in 0..n[0] {
            let c = j * n[0] + i;
            let x = Vector2::new(mg.centre(0, i), mg.centre(1, j));
            let s = model.diffusion(q, &x).big_sigma;
            if s[(0, 1)].abs() > 0.0 || s[(1, 0)].abs() > 0.0 {
                return Err(Error::ModelContract(
                    "off-diagonal diffusion is not supported by the split scheme".into(),
                ));
            }
            sigma[0][c] = s[(0, 0)];
            sigma[1][c] = s[(1, 1)];
            let rate = model.effective_hazard(q, &x, control);
            if rate > 0.0 {
                let to = jump_to.ok_or_else(|| {
                    Error::ModelContract(format!("mode {q} has a hazard but no successor"))
                })?;
                let target = &grid.modes[to];
                let cell = conforming_cell(mg, target, i, j).ok_or_else(|| {
                    Error::Partition(format!(
                        "jump target of mode {q} cell ({i}, {j}) lies outside mode {to}"
                    ))
                })?;
                hazard[c] = rate;
                jump_target[c] = cell;
            }
        }
    }
    let diffuses = [
        sigma[0].iter().any(|s| *s > 0.0),
        sigma[1].iter().any(|s| *s > 0.0),
    ];
    let diff_weight = [0, 1].map(|a| {
        let mut d = vec![0.0; n[a] + 1];
        for k in 1..n[a] {
            d[k] = 1.0 / (width[a][k - 1] + width[a][k]);
        }
        d
    });

    let md = &partition.modes[q];
    let mut sides = [SideOps::Wall, SideOps::Wall, SideOps::Wall, SideOps::Wall];
    for side in Side::ALL {
        let axis = side.axis();
        let other = 1 - axis;
        let k = if side.is_high() { n[axis] - 1 } else { 0 };
        let face = if side.is_high() { n[axis] } else { 0 };
        let sign = if side.is_high() { 1.0 } else { -1.0 };
        let coef_for = |absorbing_factor: f64| -> Vec<f64> {
            (0..n[other])
                .map(|m| {
                    let (c, u) = if axis == 0 {
                        (m * n[0] + k, velocity[0][m * (n[0] + 1) + face])
                    } else {
                        (k * n[0] + m, velocity[1][face * n[0] + m])
                    };
                    (sign * u).max(0.0) + absorbing_factor * sigma[axis][c] / width[axis][k]
                })
                .collect()
        };
        sides[side.index()] = match md.sides[side.index()] {
            BoundaryKind::Wall => SideOps::Wall,
            BoundaryKind::Truncation => SideOps::Truncation {
                coef: coef_for(0.5),
            },
            BoundaryKind::Outflow { surface } => {
                let s = partition.surfaces[surface];
                if s.from != q || s.axis != axis || s.normal != side.normal() {
                    return Err(Error::Partition(format!(
                        "surface {surface} does not match side {side:?} of mode {q}"
                    )));
                }
                let target = &grid.modes[s.to];
                let kf = target.face_at(axis, s.coord).ok_or_else(|| {
                    Error::Partition(format!(
                        "surface {surface} has no conforming face in mode {}",
                        s.to
                    ))
                })?;
                // Successor cell on the side the normal points to, else the other side.
                let along = if side.is_high() {
                    if kf < target.n(axis) {
                        kf
                    } else {
                        kf - 1
                    }
                } else if kf > 0 {
                    kf - 1
                } else {
                    kf
                };
                let targets = (0..n[other])
                    .map(|m| {
                        let centre = mg.centre(other, m);
                        let t = target.locate(other, centre).ok_or_else(|| {
                            Error::Partition(format!(
                                "surface {surface} maps outside mode {}",
                                s.to
                            ))
                        })?;
                        if (target.faces[other][t] - mg.faces[other][m]).abs()
                            > 1e-9 * (1.0 + centre.abs())
                        {
                            return Err(Error::Partition(format!(
                                "surface {surface} meshes do not conform"
                            )));
                        }
                        Ok(if axis == 0 {
                            target.index(along, t)
                        } else {
                            target.index(t, along)
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                SideOps::Outflow {
                    to: s.to,
                    coef: coef_for(1.0),
                    targets,
                }
            }
        };
    }

    let mut rate = vec![0.0; cells];
    for j in 0..n[1] {
        for i in 0..n[0] {
            let c = j * n[0] + i;
            let mut per_axis = [0.0f64; 2];
            for axis in 0..2 {
                let (k, m) = if axis == 0 { (i, j) } else { (j, i) };
                let (lo_face, hi_face) = if axis == 0 {
                    (j * (n[0] + 1) + i, j * (n[0] + 1) + i + 1)
                } else {
                    (j * n[0] + i, (j + 1) * n[0] + i)
                };
                let mut r = 0.0;
                if k == 0 {
                    let side = if axis == 0 { Side::Low1 } else { Side::Low2 };
                    r += sides[side.index()].coef().map_or(0.0, |c| c[m]);
                } else {
                    r +=
                        (-velocity[axis][lo_face]).max(0.0) + diff_weight[axis][k] * sigma[axis][c];
                }
                if k == n[axis] - 1 {
                    let side = if axis == 0 { Side::High1 } else { Side::High2 };
                    r += sides[side.index()].coef().map_or(0.0, |c| c[m]);
                } else {
                    r += velocity[axis][hi_face].max(0.0)
                        + diff_weight[axis][k + 1] * sigma[axis][c];
                }
                per_axis[axis] = r * inv_width[axis][k];
            }
            rate[c] = per_axis[0].max(per_axis[1]);
        }
    }

    Ok(ModeOps {
        n,
        width,
        inv_width,
        velocity,
        sigma,
        diff_weight,
        diffuses,
        sides,
        hazard,
        jump_to,
        jump_target,
        rate,
    })
}

/// Index in `target` of the cell geometrically identical to `(i, j)` of `source`.
fn conforming_cell(source: &ModeGrid, target: &ModeGrid, i: usize, j: usize) -> Option<usize> {
    let ti = target.locate(0, source.centre(0, i))?;
    let tj = target.locate(1, source.centre(1, j))?;
    let same = |a: usize, s: usize, t: usize| {
        let tol = 1e-9 * (1.0 + source.faces[a][s].abs());
        (source.faces[a][s] - target.faces[a][t]).abs() <= tol
            && (source.faces[a][s + 1] - target.faces[a][t + 1]).abs() <= tol
    };
    (same(0, i, ti) && same(1, j, tj)).then(|| target.index(ti, tj))
}

#[inline]
fn interior_flux(u: f64, d: f64, s_lo: f64, p_lo: f64, s_hi: f64, p_hi: f64) -> f64 {
    let adv = if u > 0.0 { u * p_lo } else { u * p_hi };
    adv - d * (s_hi * p_hi - s_lo * p_lo)
}

/// Handles the outward boundary flux `coef * p` through one face.
#[inline]
fn boundary_out(
    side: &SideOps,
    m: usize,
    p: f64,
    length: f64,
    dt: f64,
    balance: &mut InterfaceBalance,
    pending: &mut Vec<(usize, usize, f64)>,
) -> f64 {
    match side {
        SideOps::Wall => 0.0,
        SideOps::Truncation { coef } => {
            let out = coef[m] * p;
            balance.escaped += out * dt * length;
            out
        }
        SideOps::Outflow { to, coef, targets } => {
            let out = coef[m] * p;
            if out != 0.0 {
                let mass = out * dt * length;
                balance.removed += mass;
                pending.push((*to, targets[m], mass));
            }
            out
        }
    }
}

fn sweep_x1(
    ops: &ModeOps,
    vals: &mut [f64],
    b: ActiveBox,
    dt: f64,
    balance: &mut InterfaceBalance,
    pending: &mut Vec<(usize, usize, f64)>,
) {
    let n1 = ops.n[0];
    let (i0, i1) = (b.lo[0], b.hi[0]);
    let diffuses = ops.diffuses[0];
    for j in b.lo[1]..=b.hi[1] {
        let length = ops.width[1][j];
        let row = &mut vals[j * n1..(j + 1) * n1];
        let vel = &ops.velocity[0][j * (n1 + 1)..(j + 1) * (n1 + 1)];
        let sig = &ops.sigma[0][j * n1..(j + 1) * n1];
        let mut f_left = if i0 == 0 {
            -boundary_out(
                &ops.sides[Side::Low1.index()],
                j,
                row[0],
                length,
                dt,
                balance,
                pending,
            )
        } else {
            0.0
        };
        for i in i0..=i1 {
            let p = row[i];
            let f_right = if i + 1 < n1 {
                let d = if diffuses {
                    ops.diff_weight[0][i + 1]
                } else {
                    0.0
                };
                interior_flux(vel[i + 1], d, sig[i], p, sig[i + 1], row[i + 1])
            } else {
                boundary_out(
                    &ops.sides[Side::High1.index()],
                    j,
                    p,
                    length,
                    dt,
                    balance,
                    pending,
                )
            };
            row[i] = p - dt * ops.inv_width[0][i] * (f_right - f_left);
            f_left = f_right;
        }
    }
}

#[allow(clippy::needless_range_loop)]
fn sweep_x2(
    ops: &ModeOps,
    vals: &mut [f64],
    b: ActiveBox,
    dt: f64,
    below: &mut Vec<f64>,
    balance: &mut InterfaceBalance,
    pending: &mut Vec<(usize, usize, f64)>,
) {
    let [n1, n2] = ops.n;
    let (i0, i1) = (b.lo[0], b.hi[0]);
    let (j0, j1) = (b.lo[1], b.hi[1]);
    let diffuses = ops.diffuses[1];
    below.clear();
    below.resize(n1, 0.0);
    if j0 == 0 {
        for i in i0..=i1 {
            below[i] = -boundary_out(
                &ops.sides[Side::Low2.index()],
                i,
                vals[i],
                ops.width[0][i],
                dt,
                balance,
                pending,
            );
        }
    }
    for j in j0..=j1 {
        let scale = dt * ops.inv_width[1][j];
        let d = if diffuses && j + 1 < n2 {
            ops.diff_weight[1][j + 1]
        } else {
            0.0
        };
        for i in i0..=i1 {
            let c = j * n1 + i;
            let p = vals[c];
            let f_up = if j + 1 < n2 {
                interior_flux(
                    ops.velocity[1][(j + 1) * n1 + i],
                    d,
                    ops.sigma[1][c],
                    p,
                    ops.sigma[1][c + n1],
                    vals[c + n1],
                )
            } else {
                boundary_out(
                    &ops.sides[Side::High2.index()],
                    i,
                    p,
                    ops.width[0][i],
                    dt,
                    balance,
                    pending,
                )
            };
            vals[c] = p - scale * (f_up - below[i]);
            below[i] = f_up;
        }
    }
}

/// Global explicit time-step bound of `model` on `grid`.
pub fn cfl_dt(disc: &Discretization) -> f64 {
    disc.cfl_dt()
}

/// Face fluxes `γ = f p - ½ ∇·(pΣ)` in the +x1 / +x2 directions.
pub fn compute_flux(p: &DensityField, disc: &Discretization) -> Result<FluxField> {
    disc.check_grid(p)?;
    let mut values = Vec::with_capacity(disc.ops.len());
    for (q, ops) in disc.ops.iter().enumerate() {
        let [n1, n2] = ops.n;
        let v = &p.values[q];
        let mut f0 = vec![0.0; (n1 + 1) * n2];
        let mut f1 = vec![0.0; n1 * (n2 + 1)];
        let mut sink = InterfaceBalance::default();
        let mut pend = Vec::new();
        for j in 0..n2 {
            for k in 0..=n1 {
                let idx = j * (n1 + 1) + k;
                f0[idx] = if k == 0 {
                    -boundary_out(
                        &ops.sides[Side::Low1.index()],
                        j,
                        v[j * n1],
                        0.0,
                        0.0,
                        &mut sink,
                        &mut pend,
                    )
                } else if k == n1 {
                    boundary_out(
                        &ops.sides[Side::High1.index()],
                        j,
                        v[j * n1 + n1 - 1],
                        0.0,
                        0.0,
                        &mut sink,
                        &mut pend,
                    )
                } else {
                    let (a, b) = (j * n1 + k - 1, j * n1 + k);
                    interior_flux(
                        ops.velocity[0][idx],
                        ops.diff_weight[0][k],
                        ops.sigma[0][a],
                        v[a],
                        ops.sigma[0][b],
                        v[b],
                    )
                };
            }
        }
        for k in 0..=n2 {
            for i in 0..n1 {
                let idx = k * n1 + i;
                f1[idx] = if k == 0 {
                    -boundary_out(
                        &ops.sides[Side::Low2.index()],
                        i,
                        v[i],
                        0.0,
                        0.0,
                        &mut sink,
                        &mut pend,
                    )
                } else if k == n2 {
                    boundary_out(
                        &ops.sides[Side::High2.index()],
                        i,
                        v[(n2 - 1) * n1 + i],
                        0.0,
                        0.0,
                        &mut sink,
                        &mut pend,
                    )
                } else {
                    let (a, b) = ((k - 1) * n1 + i, k * n1 + i);
                    interior_flux(
                        ops.velocity[1][idx],
                        ops.diff_weight[1][k],
                        ops.sigma[1][a],
                        v[a],
                        ops.sigma[1][b],
                        v[b],
                    )
                };
            }
        }
        values.push([f0, f1]);
    }
    Ok(FluxField {
        time: p.time,
        values,
    })
}

/// One split advection-diffusion step, sweeping x1 first when `x1_first`.
/// Outflow-face mass is handed to the successor modes.
pub fn advect_diffuse_step(
    p: &DensityField,
    disc: &Discretization,
    dt: f64,
    x1_first: bool,
) -> Result<(DensityField, InterfaceBalance)> {
    disc.check_grid(p)?;
    let admissible = disc.cfl_dt();
    if !(dt > 0.0) || dt > admissible {
        return Err(Error::Cfl { dt, admissible });
    }
    let mut out = p.clone();
    let mut boxes = disc.full_boxes();
    let mut scratch = Vec::new();
    let mut pending = Vec::new();
    let mut balance = InterfaceBalance::default();
    let order = if x1_first { [0, 1] } else { [1, 0] };
    for axis in order {
        balance.add(disc.sweep(
            axis,
            &mut out.values,
            &mut boxes,
            dt,
            &mut scratch,
            &mut pending,
        ));
    }
    out.time += dt;
    Ok((out, balance))
}

/// Explicit jump exchange over `dt`.
pub fn jump_exchange_step(
    p: &DensityField,
    disc: &Discretization,
    dt: f64,
) -> Result<DensityField> {
    disc.check_grid(p)?;
    let lambda = disc.max_effective_hazard();
    if lambda * dt >= 0.5 {
        return Err(Error::Cfl {
            dt,
            admissible: 0.5 / lambda,
        });
    }
    let mut out = p.clone();
    let mut boxes = disc.full_boxes();
    let mut pending = Vec::new();
    disc.jump_exchange(&mut out.values, &mut boxes, dt, &mut pending);
    Ok(out)
}

/// Injects the outflow-face flux of `gamma` over `dt` into the successor
/// cells of `p`, returning the flux balance.
pub fn apply_boundary(
    p: &mut DensityField,
    gamma: &FluxField,
    disc: &Discretization,
    dt: f64,
) -> Result<InterfaceBalance> {
    disc.check_grid(p)?;
    let mut balance = InterfaceBalance::default();
    let mut pending = Vec::new();
    for (q, ops) in disc.ops.iter().enumerate() {
        let [n1, n2] = ops.n;
        for side in Side::ALL {
            let SideOps::Outflow { to, targets, .. } = &ops.sides[side.index()] else {
                continue;
            };
            let axis = side.axis();
            let sign = if side.is_high() { 1.0 } else { -1.0 };
            for (m, &target) in targets.iter().enumerate() {
                let (flux, length) = if axis == 0 {
                    let k = if side.is_high() { n1 } else { 0 };
                    (gamma.values[q][0][m * (n1 + 1) + k], ops.width[1][m])
                } else {
                    let k = if side.is_high() { n2 } else { 0 };
                    (gamma.values[q][1][k * n1 + m], ops.width[0][m])
                };
                let mass = (sign * flux).max(0.0) * dt * length;
                if mass > 0.0 {
                    balance.removed += mass;
                    pending.push((*to, target, mass));
                }
            }
        }
    }
    let mut boxes = disc.full_boxes();
    disc.inject(&mut p.values, &mut boxes, &pending, &mut balance);
    Ok(balance)
}
