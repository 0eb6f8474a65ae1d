//! Planar vector fields of both flows, their explicit solutions, the
//! unit-volume invariant curve and the equilibria of the reduced dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_point, normalizing_constant, FlowKind, FlowParams, State, ROUND_VOLUME};

/// Right-hand side `(α', β')` of the flow selected by `params` at `(x, y)`.
///
/// The normalized flow uses the two explicit systems for `a·μ = ±1`; the
/// collapse flow is written in terms of `a`, `λ` directly.
pub fn vector_field(params: &FlowParams, x: f64, y: f64) -> Result<(f64, f64)> {
    check_point(x, y)?;
    Ok(field_unchecked(params, x, y))
}

#[inline]
pub(crate) fn field_unchecked(params: &FlowParams, x: f64, y: f64) -> (f64, f64) {
    match params.kind {
        FlowKind::Collapse => {
            let a = params.a;
            let lambda = params.kappa;
            let dx = -9.0 / 128.0 * x.powi(3) / y.powi(4) * (a * a)
                + 1.0 / 4.0 * x.powi(2) / y.powi(3) * (a * lambda)
                - 1.0 / 4.0 * x / y.powi(2) * (lambda * lambda);
            let dy = 3.0 / 128.0 * x.powi(2) / y.powi(3) * (a * a)
                - 1.0 / 16.0 * x / y.powi(2) * (a * lambda);
            (dx, dy)
        }
        FlowKind::Normalized => {
            if params.product() > 0.0 {
                let dx = -1.0 / 4.0 * x.powi(3) / y.powi(4) + 5.0 / 12.0 * x.powi(2) / y.powi(3)
                    - 1.0 / 6.0 * x / y.powi(2);
                let dy =
                    1.0 / 8.0 * x.powi(2) / y.powi(3) - 5.0 / 24.0 * x / y.powi(2) + 1.0 / 12.0 / y;
                (dx, dy)
            } else {
                let dx =
                    -1.0 / 4.0 * x.powi(3) / y.powi(4) + 1.0 / 12.0 * x / y.powi(2) + 1.0 / 6.0 / x;
                let dy =
                    1.0 / 8.0 * x.powi(2) / y.powi(3) - 1.0 / 12.0 * y / x.powi(2) - 1.0 / 24.0 / y;
                (dx, dy)
            }
        }
    }
}

/// `‖F(x, y)‖ / ‖(x, y)‖`.
pub(crate) fn relative_speed(params: &FlowParams, x: f64, y: f64) -> f64 {
    let (dx, dy) = field_unchecked(params, x, y);
    dx.hypot(dy) / x.hypot(y)
}

pub fn initial_state(params: &FlowParams) -> State {
    match params.kind {
        FlowKind::Collapse => State {
            t: 0.0,
            alpha: params.epsilon,
            beta: 1.0,
        },
        FlowKind::Normalized => {
            let (alpha, beta) = curve_point(params.epsilon);
            State {
                t: 0.0,
                alpha,
                beta,
            }
        }
    }
}

fn matches_epsilon(epsilon: f64, target: f64) -> bool {
    (epsilon - target).abs() <= 1e-12 * target
}

/// Maximal existence time of the explicit finite-time solutions.
pub fn closed_form_t_max(params: &FlowParams) -> Option<f64> {
    if params.kind != FlowKind::Collapse || params.product() < 0.0 {
        return None;
    }
    if matches_epsilon(params.epsilon, 1.0) {
        Some(16.0)
    } else if matches_epsilon(params.epsilon, 2.0 / 3.0) {
        Some(12.0)
    } else {
        None
    }
}

/// Explicit solution at time `t` when `params` selects one of the solvable
/// cases, `None` otherwise.
///
/// Collapse flow with `a·λ = 2`: `ε = 1` gives `α = β = ¼√(16 − t)`, and
/// `ε = 2/3` gives `β = ⅙√(36 − 3t)`, `α = ⅔β`. Normalized flow: the round
/// sphere `ε = 1` is stationary for both signs, and `ε = 2/3` for `a·μ = 1`.
pub fn closed_form(params: &FlowParams, t: f64) -> Result<Option<State>> {
    if !t.is_finite() {
        return Err(Error::invalid("t", "must be finite"));
    }
    match params.kind {
        FlowKind::Collapse => {
            let Some(t_max) = closed_form_t_max(params) else {
                return Ok(None);
            };
            if t >= t_max {
                return Err(Error::BeyondExistence { t, t_max });
            }
            let state = if t_max == 16.0 {
                let s = 0.25 * (16.0 - t).sqrt();
                State {
                    t,
                    alpha: s,
                    beta: s,
                }
            } else {
                let beta = (36.0 - 3.0 * t).sqrt() / 6.0;
                State {
                    t,
                    alpha: 2.0 / 3.0 * beta,
                    beta,
                }
            };
            Ok(Some(state))
        }
        FlowKind::Normalized => {
            let eps = params.epsilon;
            let stationary = if matches_epsilon(eps, 1.0) {
                Some(1.0)
            } else if matches_epsilon(eps, 2.0 / 3.0) && params.product() > 0.0 {
                Some(2.0 / 3.0)
            } else {
                None
            };
            Ok(stationary.map(|e| {
                let s = normalizing_constant(e).expect("positive constant").sqrt();
                State {
                    t,
                    alpha: e * s,
                    beta: s,
                }
            }))
        }
    }
}

/// `(2π²)^(-1/3)`, the common scale of the invariant curve.
fn curve_scale() -> f64 {
    ROUND_VOLUME.powf(-1.0 / 3.0)
}

/// Point `u(ε) = (√c(ε)·ε, √c(ε))` of the unit-volume curve.
pub fn curve_point(epsilon: f64) -> (f64, f64) {
    let s = curve_scale();
    (s * epsilon.powf(2.0 / 3.0), s * epsilon.powf(-1.0 / 3.0))
}

/// Analytic derivative `u'(ε)`.
pub fn curve_tangent(epsilon: f64) -> (f64, f64) {
    let s = curve_scale();
    (
        s * 2.0 / 3.0 * epsilon.powf(-1.0 / 3.0),
        -s / 3.0 * epsilon.powf(-4.0 / 3.0),
    )
}

/// Polynomial factor of the reduced speed and its derivative.
fn speed_factor(product: f64, e: f64) -> (f64, f64) {
    if product > 0.0 {
        (-3.0 * e * e + 5.0 * e - 2.0, -6.0 * e + 5.0)
    } else {
        let e2 = e * e;
        (-3.0 * e2 * e2 + e2 + 2.0, -12.0 * e2 * e + 2.0 * e)
    }
}

/// Reduced speed `k(ε)` with `F(u(ε)) = k(ε)·u'(ε)`; the flow restricted to
/// the curve is `ε' = k(ε)`.
pub fn curve_speed(params: &FlowParams, epsilon: f64) -> Result<f64> {
    params.require(FlowKind::Normalized)?;
    check_epsilon(epsilon)?;
    Ok(curve_speed_unchecked(params.product(), epsilon))
}

pub(crate) fn curve_speed_unchecked(product: f64, epsilon: f64) -> f64 {
    let lead = 1.0 / 8.0 * ROUND_VOLUME.powf(2.0 / 3.0);
    let (factor, _) = speed_factor(product, epsilon);
    if product > 0.0 {
        lead * epsilon.powf(5.0 / 3.0) * factor
    } else {
        lead * epsilon.powf(-1.0 / 3.0) * factor
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            "epsilon",
            format!("must be positive and finite, got {epsilon}"),
        ))
    }
}

/// `‖F(u(ε)) − k(ε)·u'(ε)‖`.
pub fn tangency_residual(params: &FlowParams, epsilon: f64) -> Result<f64> {
    let k = curve_speed(params, epsilon)?;
    let (x, y) = curve_point(epsilon);
    let (dx, dy) = vector_field(params, x, y)?;
    let (tx, ty) = curve_tangent(epsilon);
    Ok((dx - k * tx).hypot(dy - k * ty))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Attracting,
    Repelling,
    /// The collapse field's line of critical points on the `y` axis.
    DegenerateLine,
}

impl Stability {
    pub fn name(self) -> &'static str {
        match self {
            Stability::Attracting => "attracting",
            Stability::Repelling => "repelling",
            Stability::DegenerateLine => "degenerate-line",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EquilibriumLocation {
    /// A point `u(ε*)` on the unit-volume curve.
    Curve { epsilon: f64, x: f64, y: f64 },
    /// Every `(0, k)` with `k ≠ 0`; on the boundary of the admissible domain.
    AxisLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub location: EquilibriumLocation,
    pub stability: Stability,
}

impl Equilibrium {
    pub fn epsilon_star(&self) -> Option<f64> {
        match self.location {
            EquilibriumLocation::Curve { epsilon, .. } => Some(epsilon),
            EquilibriumLocation::AxisLine => None,
        }
    }
}

const ROOT_TOL: f64 = 1e-12;

/// Safeguarded Newton iteration on a sign-changing bracket `[lo, hi]`.
fn refine_root(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo).0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, dv) = f(x);
        if v == 0.0 {
            return x;
        }
        if (v < 0.0) == (f_lo < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= ROOT_TOL * hi.max(1.0) {
            break;
        }
        let newton = x - v / dv;
        x = if dv != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    0.5 * (lo + hi)
}

/// Equilibria of the flow. For the normalized flow these are the positive
/// roots of the reduced speed, classified by its sign on either side.
pub fn equilibria(params: &FlowParams) -> Vec<Equilibrium> {
    if params.kind == FlowKind::Collapse {
        return vec![Equilibrium {
            location: EquilibriumLocation::AxisLine,
            stability: Stability::DegenerateLine,
        }];
    }
    let product = params.product();
    let factor = |e: f64| speed_factor(product, e);

    // Log-spaced scan over (1e-3, 1e3); both factors are negative beyond it.
    let n = 4000;
    let grid: Vec<f64> = (0..=n)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / n as f64))
        .collect();
    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (factor(a).0, factor(b).0);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            roots.push(refine_root(factor, a, b));
        }
    }

    roots
        .into_iter()
        .map(|root| {
            let delta = 1e-6 * root;
            let left = curve_speed_unchecked(product, root - delta);
            let right = curve_speed_unchecked(product, root + delta);
            let stability = if left > 0.0 && right < 0.0 {
                Stability::Attracting
            } else if left < 0.0 && right > 0.0 {
                Stability::Repelling
            } else {
                Stability::DegenerateLine
            };
            let (x, y) = curve_point(root);
            Equilibrium {
                location: EquilibriumLocation::Curve {
                    epsilon: root,
                    x,
                    y,
                },
                stability,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collapse(lambda: f64, eps: f64) -> FlowParams {
        FlowParams::collapse(2.0, lambda, eps).unwrap()
    }

    fn normalized(mu: f64, eps: f64) -> FlowParams {
        FlowParams::normalized(2.0, mu, eps).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn field_values() {
        let (dx, dy) = vector_field(&collapse(1.0, 1.0), 1.0, 1.0).unwrap();
        assert!(close(dx, -1.0 / 32.0, 1e-16) && close(dy, -1.0 / 32.0, 1e-16));

        let (dx, dy) = vector_field(&collapse(1.0, 1.0), 2.0 / 3.0, 1.0).unwrap();
        assert!(close(dx, -1.0 / 36.0, 1e-16) && close(dy, -1.0 / 24.0, 1e-16));

        let (dx, dy) = vector_field(&collapse(-1.0, 1.0), 1.0, 1.0).unwrap();
        assert!(close(dx, -33.0 / 32.0, 1e-15) && close(dy, 7.0 / 32.0, 1e-15));

        let s = normalizing_constant(1.0).unwrap().sqrt();
        let (dx, dy) = vector_field(&normalized(0.5, 1.0), s, s).unwrap();
        assert!(dx.hypot(dy) < 1e-15);

        assert!(matches!(
            vector_field(&collapse(1.0, 1.0), 0.0, 1.0),
            Err(Error::Domain { .. })
        ));
        assert!(vector_field(&collapse(1.0, 1.0), 1.0, -0.5).is_err());
    }

    #[test]
    fn initial_states() {
        let s = initial_state(&collapse(1.0, 0.5));
        assert_eq!((s.t, s.alpha, s.beta), (0.0, 0.5, 1.0));

        let s = initial_state(&normalized(0.5, 1.0));
        assert!(close(s.alpha, 0.370_018_484_153_678, 1e-14));
        assert!(close(s.beta, 0.370_018_484_153_678, 1e-14));

        let s = initial_state(&normalized(0.5, 1.0 / ROUND_VOLUME));
        assert!(close(s.alpha, 1.0 / ROUND_VOLUME, 1e-15));
        assert!(close(s.beta, 1.0, 1e-15));
    }

    #[test]
    fn closed_form_values() {
        let s = closed_form(&collapse(1.0, 1.0), 12.0).unwrap().unwrap();
        assert_eq!((s.alpha, s.beta), (0.5, 0.5));

        let s = closed_form(&collapse(1.0, 2.0 / 3.0), 6.0)
            .unwrap()
            .unwrap();
        assert!(close(s.beta, std::f64::consts::FRAC_1_SQRT_2, 1e-15));
        assert!(close(s.alpha, 0.471_404_520_791_031_7, 1e-15));

        let s = closed_form(&normalized(0.5, 2.0 / 3.0), 37.0)
            .unwrap()
            .unwrap();
        assert!(close(s.alpha, 0.282_376_952_545_806_5, 1e-14));
        assert!(close(s.beta, 0.423_565_428_818_709_7, 1e-14));

        assert!(closed_form(&normalized(-0.5, 2.0 / 3.0), 1.0)
            .unwrap()
            .is_none());
        assert!(closed_form(&collapse(1.0, 0.5), 1.0).unwrap().is_none());
        assert!(closed_form(&collapse(-1.0, 1.0), 1.0).unwrap().is_none());
        assert!(matches!(
            closed_form(&collapse(1.0, 1.0), 16.0),
            Err(Error::BeyondExistence { .. })
        ));
        assert!(closed_form(&collapse(1.0, 2.0 / 3.0), 12.5).is_err());
    }

    #[test]
    fn curve_values() {
        let (x, y) = curve_point(1.0);
        assert!(close(x, 0.370_018_484_153_678, 1e-14) && close(x, y, 1e-16));
        for e in [0.01, 0.5, 2.0 / 3.0, 3.0, 50.0] {
            let (x, y) = curve_point(e);
            assert!(close(x * y * y * ROUND_VOLUME, 1.0, 1e-14));
        }
        let eq = closed_form(&normalized(0.5, 2.0 / 3.0), 0.0)
            .unwrap()
            .unwrap();
        let (x, y) = curve_point(2.0 / 3.0);
        assert!(close(x, eq.alpha, 1e-15) && close(y, eq.beta, 1e-15));
    }

    #[test]
    fn speed_roots_and_signs() {
        let p = normalized(0.5, 1.0);
        assert_eq!(curve_speed(&p, 1.0).unwrap(), 0.0);
        assert!(curve_speed(&p, 2.0 / 3.0).unwrap().abs() < 1e-15);
        assert!(curve_speed(&p, 0.9).unwrap() > 0.0);
        assert!(curve_speed(&p, 1.1).unwrap() < 0.0);
        assert_eq!(curve_speed(&normalized(-0.5, 1.0), 1.0).unwrap(), 0.0);
        assert!(curve_speed(&collapse(1.0, 1.0), 1.0).is_err());
        assert!(curve_speed(&p, -1.0).is_err());
    }

    #[test]
    fn tangency_at_fixed_points() {
        let p = normalized(0.5, 1.0);
        assert!(tangency_residual(&p, 1.0).unwrap() <= 1e-12);
        let (x, y) = curve_point(2.0);
        let (dx, dy) = vector_field(&p, x, y).unwrap();
        assert!(tangency_residual(&p, 2.0).unwrap() <= 1e-10 * dx.hypot(dy));
    }

    #[test]
    fn normalized_equilibria() {
        let eq = equilibria(&normalized(0.5, 1.0));
        assert_eq!(eq.len(), 2);
        assert!(close(eq[0].epsilon_star().unwrap(), 2.0 / 3.0, 1e-12));
        assert_eq!(eq[0].stability, Stability::Repelling);
        assert!(close(eq[1].epsilon_star().unwrap(), 1.0, 1e-12));
        assert_eq!(eq[1].stability, Stability::Attracting);

        let eq = equilibria(&normalized(-0.5, 1.0));
        assert_eq!(eq.len(), 1);
        assert!(close(eq[0].epsilon_star().unwrap(), 1.0, 1e-12));
        assert_eq!(eq[0].stability, Stability::Attracting);
        if let EquilibriumLocation::Curve { x, y, .. } = eq[0].location {
            let s = normalizing_constant(1.0).unwrap().sqrt();
            assert!(close(x, s, 1e-12) && close(y, s, 1e-12));
            let (dx, dy) = vector_field(&normalized(-0.5, 1.0), x, y).unwrap();
            assert!(dx.hypot(dy) <= 1e-12);
        }
    }

    #[test]
    fn collapse_equilibria_are_descriptive() {
        let eq = equilibria(&collapse(1.0, 1.0));
        assert_eq!(eq.len(), 1);
        assert_eq!(eq[0].location, EquilibriumLocation::AxisLine);
        assert_eq!(eq[0].stability, Stability::DegenerateLine);
    }
}
