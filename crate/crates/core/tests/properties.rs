use std::f64::consts::PI;

use berger_flow::model::volume_at;
use berger_flow::{
    closed_form, energy, energy_density_sixth, geometry_scalars, integrate, integrate_reduced,
    normalizing_constant, q1_collapse_components, q1_normalized_components, spinor_coefficients,
    vector_field, FlowKind, FlowParams, IntegratorConfig, TerminationTag,
};
use proptest::prelude::*;

fn flow() -> impl Strategy<Value = FlowParams> {
    (
        prop_oneof![Just(FlowKind::Collapse), Just(FlowKind::Normalized)],
        prop_oneof![Just(2.0), Just(-2.0)],
        prop_oneof![Just(1.0), Just(-1.0)],
    )
        .prop_map(|(kind, a, sign)| {
            FlowParams::new(kind, a, sign * kind.kappa_magnitude(), 1.0).unwrap()
        })
}

fn point() -> impl Strategy<Value = (f64, f64)> {
    (0.1..=3.0f64, 0.1..=3.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sign_flip_symmetry(p in flow(), (x, y) in point()) {
        let q = p.flipped();
        prop_assert_eq!(vector_field(&p, x, y).unwrap(), vector_field(&q, x, y).unwrap());
        prop_assert_eq!(energy(&p, x, y).unwrap(), energy(&q, x, y).unwrap());
        let (sp, sq) = (geometry_scalars(&p, x, y).unwrap(), geometry_scalars(&q, x, y).unwrap());
        prop_assert_eq!((sp.q00, sp.q11, sp.volume), (sq.q00, sq.q11, sq.volume));
        prop_assert_eq!((sp.f, sp.g), (-sq.f, -sq.g));
    }

    #[test]
    fn q_consistency(p in flow(), (x, y) in point()) {
        let (dx, dy) = vector_field(&p, x, y).unwrap();
        let (q00, q11) = match p.kind {
            FlowKind::Collapse => q1_collapse_components(&p, x, y).unwrap(),
            FlowKind::Normalized => {
                let (q00, q11) = q1_normalized_components(&p, x, y).unwrap();
                let e = energy_density_sixth(&p, x, y).unwrap();
                (q00 + e, q11 + e)
            }
        };
        for (d, r) in [(dx, 0.5 * x * q00), (dy, 0.5 * y * q11)] {
            prop_assert!((d - r).abs() <= 1e-13 * d.abs().max(1.0), "{} vs {}", d, r);
        }
    }

    #[test]
    fn normalized_field_preserves_volume(sign in prop_oneof![Just(1.0), Just(-1.0)], (x, y) in point()) {
        let p = FlowParams::normalized(2.0, 0.5 * sign, 1.0).unwrap();
        let (dx, dy) = vector_field(&p, x, y).unwrap();
        let (u, v) = (y * y * dx, 2.0 * x * y * dy);
        // Bound on the monomials of y²·dx; the field itself cancels to zero on
        // the diagonal when aμ = 1.
        let scale = x * y * y * (x * x / y.powi(4) + 1.0 / (x * x) + 1.0 / (y * y));
        prop_assert!((u + v).abs() <= 1e-12 * scale, "{} {} {}", u, v, scale);
    }

    #[test]
    fn energy_formula_consistency(sign in prop_oneof![Just(1.0), Just(-1.0)], (x, y) in point()) {
        let p = FlowParams::normalized(2.0, 0.5 * sign, 1.0).unwrap();
        let (f, g) = spinor_coefficients(&p, x, y).unwrap();
        let e = energy_density_sixth(&p, x, y).unwrap();
        prop_assert!(((f * f + 2.0 * g * g) / 12.0 - e).abs() <= 1e-12 * e.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn normalizing_constant_inverts_volume(eps in 0.01..100.0f64) {
        let s = normalizing_constant(eps).unwrap().sqrt();
        prop_assert!((volume_at(s * eps, s) - 1.0).abs() <= 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn trajectories_lose_energy_and_stay_in_quadrant(p in flow(), eps in 0.25..4.0f64) {
        let p = p.with_epsilon(eps).unwrap();
        let t_end = if p.kind == FlowKind::Collapse { 1e5 } else { 200.0 };
        let run = integrate(&p, &IntegratorConfig::default(), t_end).unwrap();
        prop_assert!(!run.termination.is_failure());
        for w in run.samples.windows(2) {
            prop_assert!(w[1].state.t > w[0].state.t);
            prop_assert!(w[1].scalars.energy - w[0].scalars.energy <= 1e-10);
        }
        for s in run.states() {
            prop_assert!(s.alpha > 0.0 && s.beta > 0.0);
        }
    }
}

#[test]
fn collapse_fiber_strictly_shrinks() {
    for a in [2.0, -2.0] {
        for lambda in [1.0, -1.0] {
            let p = FlowParams::collapse(a, lambda, 1.0).unwrap();
            for i in 1..=200 {
                for j in 1..=200 {
                    let (x, y) = (3.0 * i as f64 / 200.0, 3.0 * j as f64 / 200.0);
                    let (dx, _) = vector_field(&p, x, y).unwrap();
                    assert!(dx < 0.0, "dx = {dx} at ({x}, {y})");
                }
            }
        }
    }
}

#[test]
fn closed_forms_solve_the_field() {
    type Derivative = fn(f64) -> (f64, f64);
    let cases: [(f64, f64, Derivative); 2] = [
        (1.0, 16.0, |t| {
            let d = -1.0 / (8.0 * (16.0 - t).sqrt());
            (d, d)
        }),
        (2.0 / 3.0, 12.0, |t| {
            let db = -3.0 / (12.0 * (36.0 - 3.0 * t).sqrt());
            (2.0 / 3.0 * db, db)
        }),
    ];
    for (eps, t_max, derivative) in cases {
        let p = FlowParams::collapse(2.0, 1.0, eps).unwrap();
        for k in 0..100 {
            let t = (t_max - 0.5) * k as f64 / 100.0;
            let s = closed_form(&p, t).unwrap().unwrap();
            let (dx, dy) = vector_field(&p, s.alpha, s.beta).unwrap();
            let (ex, ey) = derivative(t);
            assert!((dx - ex).abs() <= 1e-12, "eps {eps} t {t}: {dx} vs {ex}");
            assert!((dy - ey).abs() <= 1e-12, "eps {eps} t {t}: {dy} vs {ey}");
        }
    }
}

fn oracle_error(tol: f64) -> f64 {
    let p = FlowParams::collapse(2.0, 1.0, 1.0).unwrap();
    let cfg = IntegratorConfig {
        rtol: tol,
        atol: tol * 1e-2,
        ..Default::default()
    };
    integrate(&p, &cfg, 15.5)
        .unwrap()
        .states()
        .map(|s| (s.alpha - 0.25 * (16.0 - s.t).sqrt()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn tighter_tolerances_shrink_oracle_error() {
    let tols = [1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11];
    let errs: Vec<f64> = tols.iter().map(|&t| oracle_error(t)).collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "no improvement: {errs:?}");
    }
    assert!(errs[errs.len() - 1] < 1e-9, "{errs:?}");
}

#[test]
fn small_epsilon_decreases_on_curve() {
    let p = FlowParams::normalized(2.0, 0.5, 0.5).unwrap();
    let r = integrate_reduced(&p, &IntegratorConfig::default(), 0.5, 50.0).unwrap();
    assert!(r.points.windows(2).all(|w| w[1].1 < w[0].1));
    assert_eq!(r.tag, TerminationTag::ReachedTEnd);
}

#[test]
fn volume_is_pi_squared_scaled() {
    assert!((volume_at(1.0, 1.0) - 2.0 * PI * PI).abs() < 1e-15);
}
