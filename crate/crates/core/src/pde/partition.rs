use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ControlSchedule, LoadModel};

/// Axis-aligned box `[x1.0, x1.1] x [x2.0, x2.1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

impl Region {
    pub fn axis(&self, axis: usize) -> (f64, f64) {
        if axis == 0 {
            self.x1
        } else {
            self.x2
        }
    }
}

/// One component `{q} x Ω_i(q)` of a mode domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mode: usize,
    pub label: usize,
    pub region: Region,
}

/// The four sides of a mode's bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Low1,
    High1,
    Low2,
    High2,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Low1, Side::High1, Side::Low2, Side::High2];

    pub fn axis(self) -> usize {
        match self {
            Side::Low1 | Side::High1 => 0,
            Side::Low2 | Side::High2 => 1,
        }
    }

    pub fn is_high(self) -> bool {
        matches!(self, Side::High1 | Side::High2)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Outer unit normal of the side.
    pub fn normal(self) -> [f64; 2] {
        let s = if self.is_high() { 1.0 } else { -1.0 };
        if self.axis() == 0 {
            [s, 0.0]
        } else {
            [0.0, s]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Outflow switching surface `G_q`; index into [`DomainPartition::surfaces`].
    Outflow { surface: usize },
    /// Zero-flux wall (non-outflow boundary or inflow-only face).
    Wall,
    /// Artificial truncation of an unbounded domain; zero-density ghosts.
    Truncation,
}

/// Outflow surface `G_q` and where its mass re-enters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingSurface {
    pub from: usize,
    pub to: usize,
    pub axis: usize,
    pub coord: f64,
    /// Extent along the other axis.
    pub extent: (f64, f64),
    /// Outer unit normal `ν` of `X_from` on the surface.
    pub normal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDomain {
    pub mode: usize,
    pub bounds: Region,
    pub components: Vec<Component>,
    pub sides: [BoundaryKind; 4],
}

/// Mode-partitioned, truncated continuous domain for one control value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPartition {
    pub control: f64,
    pub modes: Vec<ModeDomain>,
    pub surfaces: Vec<SwitchingSurface>,
}

/// How far the unbounded mode domains are cut off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Truncation {
    /// Air temperature extends `margin` beyond each threshold; the mass
    /// temperature range is fixed for the whole run.
    Hvac { margin: f64, mass_range: (f64, f64) },
    Pev {
        max_remaining: f64,
        max_slack: f64,
        completed_span: f64,
        strip: f64,
    },
}

impl Truncation {
    /// HVAC truncation covering every setpoint the schedule visits, with the
    /// same margin on the mass temperature.
    pub fn hvac_for_schedule(
        model: &LoadModel,
        schedule: &ControlSchedule,
        margin: f64,
    ) -> Result<Self> {
        let hvac = model
            .as_hvac()
            .ok_or_else(|| Error::param("model", "expected an HVAC model"))?;
        let (vlo, vhi) = schedule.value_range();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in [vlo, vhi, 0.0]
            .into_iter()
            .chain(schedule.events().iter().map(|e| e.value))
        {
            let (a, b) = hvac.thresholds(v);
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Ok(Truncation::Hvac {
            margin,
            mass_range: (lo - margin, hi + margin),
        })
    }
}

/// Builds the component partition of every mode domain under control `control`.
///
/// HVAC: each mode has the deadband component (label 2) and the component on
/// the far side of its inflow threshold (label 1). PEV: the charging mode is
/// split along `x2 = 0` into `Ω_1(1)` (label 1, `x2 <= 0`) and `Ω_2(1)`
/// (label 2, the waiting domain).
pub fn build_partition(
    model: &LoadModel,
    control: f64,
    truncation: &Truncation,
) -> Result<DomainPartition> {
    match (model, truncation) {
        (LoadModel::Hvac(hvac), Truncation::Hvac { margin, mass_range }) => {
            if !(*margin > 0.0) {
                return Err(Error::param("margin", "must be positive"));
            }
            if !(mass_range.1 > mass_range.0) {
                return Err(Error::param("mass_range", "must be a nonempty interval"));
            }
            let (lo, hi) = hvac.thresholds(control);
            let x2 = *mass_range;
            let region = |a: f64, b: f64| Region { x1: (a, b), x2 };
            let off = ModeDomain {
                mode: 0,
                bounds: region(lo - margin, hi),
                components: vec![
                    Component {
                        mode: 0,
                        label: 1,
                        region: region(lo - margin, lo),
                    },
                    Component {
                        mode: 0,
                        label: 2,
                        region: region(lo, hi),
                    },
                ],
                sides: [
                    BoundaryKind::Truncation,
                    BoundaryKind::Outflow { surface: 0 },
                    BoundaryKind::Truncation,
                    BoundaryKind::Truncation,
                ],
            };
            let on = ModeDomain {
                mode: 1,
                bounds: region(lo, hi + margin),
                components: vec![
                    Component {
                        mode: 1,
                        label: 2,
                        region: region(lo, hi),
                    },
                    Component {
                        mode: 1,
                        label: 1,
                        region: region(hi, hi + margin),
                    },
                ],
                sides: [
                    BoundaryKind::Outflow { surface: 1 },
                    BoundaryKind::Truncation,
                    BoundaryKind::Truncation,
                    BoundaryKind::Truncation,
                ],
            };
            let surfaces = vec![
                SwitchingSurface {
                    from: 0,
                    to: 1,
                    axis: 0,
                    coord: hi,
                    extent: x2,
                    normal: [1.0, 0.0],
                },
                SwitchingSurface {
                    from: 1,
                    to: 0,
                    axis: 0,
                    coord: lo,
                    extent: x2,
                    normal: [-1.0, 0.0],
                },
            ];
            Ok(DomainPartition {
                control,
                modes: vec![off, on],
                surfaces,
            })
        }
        (
            LoadModel::Pev(_),
            Truncation::Pev {
                max_remaining,
                max_slack,
                completed_span,
                strip,
            },
        ) => {
            let (r, s, c, w) = (*max_remaining, *max_slack, *completed_span, *strip);
            if !(r > 0.0 && s > 0.0 && c > 0.0 && w > 0.0) {
                return Err(Error::param("truncation", "PEV extents must be positive"));
            }
            let waiting = ModeDomain {
                mode: 0,
                bounds: Region {
                    x1: (0.0, r),
                    x2: (0.0, s),
                },
                components: vec![Component {
                    mode: 0,
                    label: 1,
                    region: Region {
                        x1: (0.0, r),
                        x2: (0.0, s),
                    },
                }],
                sides: [
                    BoundaryKind::Wall,
                    BoundaryKind::Wall,
                    BoundaryKind::Outflow { surface: 0 },
                    BoundaryKind::Truncation,
                ],
            };
            let charging = ModeDomain {
                mode: 1,
                bounds: Region {
                    x1: (0.0, r),
                    x2: (-w, s),
                },
                components: vec![
                    Component {
                        mode: 1,
                        label: 1,
                        region: Region {
                            x1: (0.0, r),
                            x2: (-w, 0.0),
                        },
                    },
                    Component {
                        mode: 1,
                        label: 2,
                        region: Region {
                            x1: (0.0, r),
                            x2: (0.0, s),
                        },
                    },
                ],
                sides: [
                    BoundaryKind::Outflow { surface: 1 },
                    BoundaryKind::Truncation,
                    BoundaryKind::Wall,
                    BoundaryKind::Wall,
                ],
            };
            let completed = ModeDomain {
                mode: 2,
                bounds: Region {
                    x1: (-c, 0.0),
                    x2: (-w, s),
                },
                components: vec![Component {
                    mode: 2,
                    label: 1,
                    region: Region {
                        x1: (-c, 0.0),
                        x2: (-w, s),
                    },
                }],
                sides: [
                    BoundaryKind::Truncation,
                    BoundaryKind::Wall,
                    BoundaryKind::Wall,
                    BoundaryKind::Wall,
                ],
            };
            let surfaces = vec![
                SwitchingSurface {
                    from: 0,
                    to: 1,
                    axis: 1,
                    coord: 0.0,
                    extent: (0.0, r),
                    normal: [0.0, -1.0],
                },
                SwitchingSurface {
                    from: 1,
                    to: 2,
                    axis: 0,
                    coord: 0.0,
                    extent: (-w, s),
                    normal: [-1.0, 0.0],
                },
            ];
            Ok(DomainPartition {
                control,
                modes: vec![waiting, charging, completed],
                surfaces,
            })
        }
        _ => Err(Error::param(
            "truncation",
            "truncation family does not match the model family",
        )),
    }
}

impl DomainPartition {
    /// Sorted, de-duplicated component bounds along `axis` over all modes.
    pub fn breakpoints(&self, axis: usize) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .modes
            .iter()
            .flat_map(|m| m.components.iter())
            .flat_map(|c| {
                let (a, b) = c.region.axis(axis);
                [a, b]
            })
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        pts
    }

    /// Checks the structural invariants: one target per surface, components
    /// tiling their mode box without overlap, surfaces lying on box sides.
    pub fn validate(&self) -> Result<()> {
        for (k, s) in self.surfaces.iter().enumerate() {
            let owners = self
                .modes
                .iter()
                .flat_map(|m| m.sides.iter())
                .filter(|b| **b == BoundaryKind::Outflow { surface: k })
                .count();
            if owners != 1 {
                return Err(Error::Partition(format!(
                    "surface {k} is attached to {owners} sides"
                )));
            }
            if s.to >= self.modes.len() || s.from >= self.modes.len() || s.to == s.from {
                return Err(Error::Partition(format!(
                    "surface {k} has an invalid target"
                )));
            }
        }
        for m in &self.modes {
            let area = |r: &Region| (r.x1.1 - r.x1.0) * (r.x2.1 - r.x2.0);
            let total: f64 = m.components.iter().map(|c| area(&c.region)).sum();
            if (total - area(&m.bounds)).abs() > 1e-9 * area(&m.bounds) {
                return Err(Error::Partition(format!(
                    "components of mode {} do not tile its domain",
                    m.mode
                )));
            }
            for (i, a) in m.components.iter().enumerate() {
                for b in &m.components[i + 1..] {
                    let overlap =
                        |p: (f64, f64), q: (f64, f64)| (p.1.min(q.1) - p.0.max(q.0)).max(0.0);
                    if overlap(a.region.x1, b.region.x1) * overlap(a.region.x2, b.region.x2) > 0.0 {
                        return Err(Error::Partition(format!(
                            "components {} and {} of mode {} overlap",
                            a.label, b.label, m.mode
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Plain-text description for reproducibility.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "control = {}", self.control);
        for m in &self.modes {
            let _ = writeln!(
                out,
                "mode {}: x1 in [{}, {}], x2 in [{}, {}]",
                m.mode, m.bounds.x1.0, m.bounds.x1.1, m.bounds.x2.0, m.bounds.x2.1
            );
            for c in &m.components {
                let _ = writeln!(
                    out,
                    "  component {}: x1 in [{}, {}], x2 in [{}, {}]",
                    c.label, c.region.x1.0, c.region.x1.1, c.region.x2.0, c.region.x2.1
                );
            }
            for side in Side::ALL {
                let _ = writeln!(out, "  side {:?}: {:?}", side, m.sides[side.index()]);
            }
        }
        for (k, s) in self.surfaces.iter().enumerate() {
            let _ = writeln!(
                out,
                "surface {k}: mode {} -> {} at x{} = {}, normal {:?}",
                s.from,
                s.to,
                s.axis + 1,
                s.coord,
                s.normal
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_hvac_etp, make_pev, EtpParameters};

    fn hvac_partition(control: f64) -> DomainPartition {
        let m = make_hvac_etp(EtpParameters::default()).unwrap();
        let t = Truncation::Hvac {
            margin: 6.0,
            mass_range: (60.0, 90.0),
        };
        build_partition(&m, control, &t).unwrap()
    }

    #[test]
    fn hvac_deadband_component_spans_thresholds() {
        let p = hvac_partition(0.0);
        p.validate().unwrap();
        for m in &p.modes {
            let band = m.components.iter().find(|c| c.label == 2).unwrap();
            assert_eq!(band.region.x1, (73.0, 75.0));
        }
        assert_eq!(p.surfaces[0].coord, 75.0);
        assert_eq!(p.surfaces[0].normal, [1.0, 0.0]);
        assert_eq!(p.surfaces[1].coord, 73.0);
        assert_eq!(p.surfaces[1].normal, [-1.0, 0.0]);
    }

    #[test]
    fn setpoint_shift_translates_every_surface() {
        let a = hvac_partition(0.0);
        let b = hvac_partition(1.0);
        for (sa, sb) in a.surfaces.iter().zip(&b.surfaces) {
            assert_eq!(sb.coord - sa.coord, 1.0);
        }
        for (ma, mb) in a.modes.iter().zip(&b.modes) {
            assert_eq!(mb.bounds.x1.0 - ma.bounds.x1.0, 1.0);
            assert_eq!(mb.bounds.x1.1 - ma.bounds.x1.1, 1.0);
            assert_eq!(mb.bounds.x2, ma.bounds.x2);
        }
    }

    #[test]
    fn pev_waiting_surface() {
        let m = make_pev(6.6, 4.0).unwrap();
        let t = Truncation::Pev {
            max_remaining: 4.0,
            max_slack: 4.0,
            completed_span: 8.0,
            strip: 0.5,
        };
        let p = build_partition(&m, 0.0, &t).unwrap();
        p.validate().unwrap();
        let g0 = p.surfaces[0];
        assert_eq!((g0.from, g0.to, g0.axis, g0.coord), (0, 1, 1, 0.0));
        assert_eq!(g0.normal, [0.0, -1.0]);
        assert_eq!(p.surfaces[1].normal, [-1.0, 0.0]);
        assert_eq!(p.breakpoints(0), vec![-8.0, 0.0, 4.0]);
        assert_eq!(p.breakpoints(1), vec![-0.5, 0.0, 4.0]);
    }

    #[test]
    fn mismatched_truncation_is_rejected() {
        let m = make_pev(6.6, 4.0).unwrap();
        let t = Truncation::Hvac {
            margin: 6.0,
            mass_range: (60.0, 90.0),
        };
        assert!(build_partition(&m, 0.0, &t).is_err());
    }

    #[test]
    fn schedule_truncation_covers_shifted_bands() {
        let m = make_hvac_etp(EtpParameters::default()).unwrap();
        let s = ControlSchedule::from_pairs(&[(1.0, 1.0), (2.0, -1.0)]).unwrap();
        let Truncation::Hvac { mass_range, .. } =
            Truncation::hvac_for_schedule(&m, &s, 6.0).unwrap()
        else {
            unreachable!()
        };
        assert_eq!(mass_range, (66.0, 82.0));
    }
}
