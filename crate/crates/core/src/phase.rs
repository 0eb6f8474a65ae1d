//! Trapping regions of the collapse field and phase-portrait sampling.
//!
//! Each region is a closed triangle with one edge on (or vertex at) the `y`
//! axis. Trajectories entering a region through its start point stay inside
//! because the field points inward along every edge with `x > 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{field_unchecked, vector_field};
use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::model::{check_point, FlowKind, FlowParams, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Region {
    /// `0 ≤ x ≤ v, w ≤ y ≤ w + v − x`.
    K { v: f64, w: f64 },
    /// `0 ≤ x ≤ v, (3/2)x + w − (3/2)v ≤ y ≤ w`, for `0 < v < (2/3)w`.
    K1 { v: f64, w: f64 },
    /// `0 ≤ x ≤ v, x ≤ y ≤ (3/2)x`.
    K2 { v: f64 },
    /// `0 ≤ x ≤ v, (w/v)x ≤ y ≤ x`, for `0 < w < v`.
    K3 { v: f64, w: f64 },
}

/// One boundary edge with its inward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: (f64, f64),
    pub to: (f64, f64),
    pub inward: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxViolation {
    pub x: f64,
    pub y: f64,
    /// Field component along the unit inward normal (negative: outward).
    pub inward_component: f64,
}

const FLUX_SLACK: f64 = 1e-12;

impl Region {
    pub fn name(&self) -> String {
        match *self {
            Region::K { v, w } => format!("K({v}, {w})"),
            Region::K1 { v, w } => format!("K1({v}, {w})"),
            Region::K2 { v } => format!("K2({v})"),
            Region::K3 { v, w } => format!("K3({v}, {w})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        let ok = match *self {
            Region::K { v, w } => v > 0.0 && w > 0.0 && finite(v) && finite(w),
            Region::K1 { v, w } => v > 0.0 && v < 2.0 / 3.0 * w && finite(w),
            Region::K2 { v } => v > 0.0 && finite(v),
            Region::K3 { v, w } => w > 0.0 && w < v && finite(v),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "region",
                format!("{} violates its parameter constraints", self.name()),
            ))
        }
    }

    /// Closed-set membership, assuming valid parameters.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Region::K { v, w } => (0.0..=v).contains(&x) && w <= y && y <= w + v - x,
            Region::K1 { v, w } => (0.0..=v).contains(&x) && 1.5 * x + w - 1.5 * v <= y && y <= w,
            Region::K2 { v } => (0.0..=v).contains(&x) && x <= y && y <= 1.5 * x,
            Region::K3 { v, w } => (0.0..=v).contains(&x) && w / v * x <= y && y <= x,
        }
    }

    /// Corners of the triangle.
    pub fn vertices(&self) -> [(f64, f64); 3] {
        match *self {
            Region::K { v, w } => [(0.0, w), (v, w), (0.0, w + v)],
            Region::K1 { v, w } => [(0.0, w - 1.5 * v), (v, w), (0.0, w)],
            Region::K2 { v } => [(0.0, 0.0), (v, v), (v, 1.5 * v)],
            Region::K3 { v, w } => [(0.0, 0.0), (v, w), (v, v)],
        }
    }

    /// Edges away from the `y` axis, where the field must point inward.
    pub fn flux_edges(&self) -> Vec<Edge> {
        match *self {
            Region::K { v, w } => vec![
                Edge {
                    from: (0.0, w),
                    to: (v, w),
                    inward: (0.0, 1.0),
                },
                Edge {
                    from: (v, w),
                    to: (0.0, w + v),
                    inward: (-1.0, -1.0),
                },
            ],
            Region::K1 { v, w } => vec![
                Edge {
                    from: (0.0, w),
                    to: (v, w),
                    inward: (0.0, -1.0),
                },
                Edge {
                    from: (0.0, w - 1.5 * v),
                    to: (v, w),
                    inward: (-1.5, 1.0),
                },
            ],
            Region::K2 { v } => vec![
                Edge {
                    from: (0.0, 0.0),
                    to: (v, v),
                    inward: (-1.0, 1.0),
                },
                Edge {
                    from: (0.0, 0.0),
                    to: (v, 1.5 * v),
                    inward: (1.5, -1.0),
                },
                Edge {
                    from: (v, v),
                    to: (v, 1.5 * v),
                    inward: (-1.0, 0.0),
                },
            ],
            Region::K3 { v, w } => vec![
                Edge {
                    from: (0.0, 0.0),
                    to: (v, v),
                    inward: (1.0, -1.0),
                },
                Edge {
                    from: (0.0, 0.0),
                    to: (v, w),
                    inward: (-w / v, 1.0),
                },
                Edge {
                    from: (v, w),
                    to: (v, v),
                    inward: (-1.0, 0.0),
                },
            ],
        }
    }

    /// Range of `y` on the axis `x = 0`, which brackets the limit `β_∞` of a
    /// trapped trajectory that collapses its fiber.
    pub fn axis_bracket(&self) -> Option<(f64, f64)> {
        match *self {
            Region::K { v, w } => Some((w, w + v)),
            Region::K1 { v, w } => Some((w - 1.5 * v, w)),
            Region::K2 { .. } | Region::K3 { .. } => None,
        }
    }

    /// Euclidean distance from `(x, y)` to the region; zero inside.
    pub fn distance_outside(&self, x: f64, y: f64) -> f64 {
        if self.contains(x, y) {
            return 0.0;
        }
        let [p, q, r] = self.vertices();
        [(p, q), (q, r), (r, p)]
            .into_iter()
            .map(|(a, b)| segment_distance((x, y), a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let s = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.0 - (a.0 + s * dx)).hypot(p.1 - (a.1 + s * dy))
}

pub fn region_contains(region: &Region, x: f64, y: f64) -> Result<bool> {
    region.validate()?;
    Ok(region.contains(x, y))
}

/// The trapping region assigned to a start point of the collapse flow, or
/// `None` on the separating lines `y = x` and `y = (3/2)x`.
pub fn region_for_initial(params: &FlowParams, state: &State) -> Result<Option<Region>> {
    params.require(FlowKind::Collapse)?;
    check_point(state.alpha, state.beta)?;
    let (x, y) = state.point();
    let region = if params.product() < 0.0 {
        Some(Region::K { v: x, w: y })
    } else if x < 2.0 / 3.0 * y {
        Some(Region::K1 { v: x, w: y })
    } else if x < y && y < 1.5 * x {
        Some(Region::K2 { v: x })
    } else if y < x {
        Some(Region::K3 { v: x, w: y })
    } else {
        None
    };
    Ok(region)
}

/// Samples `n_samples` interior points on every edge with `x > 0` and returns
/// those where the collapse field has an outward normal component beyond
/// rounding.
pub fn inward_flux_check(
    region: &Region,
    params: &FlowParams,
    n_samples: usize,
) -> Result<Vec<FluxViolation>> {
    params.require(FlowKind::Collapse)?;
    region.validate()?;
    let mut violations = Vec::new();
    for edge in region.flux_edges() {
        let norm = edge.inward.0.hypot(edge.inward.1);
        let (nx, ny) = (edge.inward.0 / norm, edge.inward.1 / norm);
        for i in 1..=n_samples {
            let s = i as f64 / (n_samples + 1) as f64;
            let x = edge.from.0 + s * (edge.to.0 - edge.from.0);
            let y = edge.from.1 + s * (edge.to.1 - edge.from.1);
            if x <= 0.0 || y <= 0.0 {
                continue;
            }
            let (dx, dy) = field_unchecked(params, x, y);
            let component = dx * nx + dy * ny;
            if component < -FLUX_SLACK {
                violations.push(FluxViolation {
                    x,
                    y,
                    inward_component: component,
                });
            }
        }
    }
    Ok(violations)
}

/// Largest distance of any trajectory sample outside `region`.
pub fn containment_report(trajectory: &Trajectory, region: &Region) -> Result<f64> {
    region.validate()?;
    Ok(trajectory
        .states()
        .map(|s| region.distance_outside(s.alpha, s.beta))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortraitPoint {
    pub x: f64,
    pub y: f64,
    pub ux: f64,
    pub uy: f64,
    pub magnitude: f64,
}

fn grid_axis(range: (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![range.0];
    }
    (0..n)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Unit directions and magnitudes of the field on an `nx × ny` grid, ordered
/// row by row in `y`, then `x`.
pub fn sample_portrait(
    params: &FlowParams,
    x_range: (f64, f64),
    y_range: (f64, f64),
    nx: usize,
    ny: usize,
) -> Result<Vec<PortraitPoint>> {
    for (name, (lo, hi)) in [("x_range", x_range), ("y_range", y_range)] {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::invalid(
                name,
                format!("must lie in the open first quadrant with lo <= hi, got {lo},{hi}"),
            ));
        }
    }
    if nx == 0 || ny == 0 {
        return Err(Error::invalid("grid", "needs at least one point per axis"));
    }
    let xs = grid_axis(x_range, nx);
    let ys = grid_axis(y_range, ny);
    let points: Vec<(f64, f64)> = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
        .collect();
    points
        .par_iter()
        .map(|&(x, y)| {
            let (dx, dy) = vector_field(params, x, y)?;
            let magnitude = dx.hypot(dy);
            let (ux, uy) = if magnitude > 0.0 {
                (dx / magnitude, dy / magnitude)
            } else {
                (0.0, 0.0)
            };
            Ok(PortraitPoint {
                x,
                y,
                ux,
                uy,
                magnitude,
            })
        })
        .collect()
}
