//! Self-checks run by the `verify` command.
//!
//! Each check compares one measured quantity against a fixed threshold. The
//! closed-form oracles are written out here from the explicit solutions rather
//! than taken from [`crate::dynamics::closed_form`], so that they test the
//! integrator and the closed-form module independently.

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    curve_point, curve_speed, curve_tangent, initial_state, tangency_residual, vector_field,
};
use crate::error::Result;
use crate::integrate::{
    integrate, integrate_reduced, IntegratorConfig, TerminationEvent, TerminationTag, Trajectory,
};
use crate::model::{
    energy, energy_density_sixth, geometry_scalars, q1_collapse_components,
    q1_normalized_components, spinor_coefficients, volume_at, FlowParams, State,
};
use crate::phase::{containment_report, inward_flux_check, region_for_initial};

/// `√c(1) = (2π²)^(-1/3)`, the coordinates of the attracting critical point.
const CRITICAL: f64 = 0.370_018_484_153_678_16;

const SEED: u64 = 0x5eed_b3e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Pass when `measured <= threshold`.
    AtMost,
    /// Pass when `measured < threshold`.
    Below,
    /// Pass when `measured > threshold`.
    Above,
}

impl Comparison {
    fn holds(self, measured: f64, threshold: f64) -> bool {
        match self {
            Comparison::AtMost => measured <= threshold,
            Comparison::Below => measured < threshold,
            Comparison::Above => measured > threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub comparison: Comparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub params: Option<FlowParams>,
    pub termination: Option<TerminationEvent>,
    pub final_state: Option<State>,
    pub checks: Vec<Check>,
    pub status: Status,
}

impl RunReport {
    pub fn new(
        params: Option<FlowParams>,
        termination: Option<TerminationEvent>,
        final_state: Option<State>,
        checks: Vec<Check>,
    ) -> Self {
        let status = if checks.iter().all(|c| c.passed) {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            params,
            termination,
            final_state,
            checks,
            status,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyOptions {
    /// Run only checks whose name contains this substring.
    pub filter: Option<String>,
    /// Replaces the error threshold of the closed-form oracle comparisons.
    pub oracle_tol: Option<f64>,
}

struct Outcome {
    measured: f64,
    threshold: f64,
    comparison: Comparison,
}

fn at_most(measured: f64, threshold: f64) -> Outcome {
    Outcome {
        measured,
        threshold,
        comparison: Comparison::AtMost,
    }
}

type CheckFn = fn(&VerifyOptions) -> Result<Outcome>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("oracle_eps1_max_error", oracle_eps1_error),
    ("oracle_eps1_event_time", oracle_eps1_event),
    ("oracle_eps1_runtime_seconds", oracle_eps1_runtime),
    ("oracle_eps2_3_max_error", oracle_eps23_error),
    ("oracle_eps2_3_event_time", oracle_eps23_event),
    ("equilibrium_drift_amu_pos_eps1", drift_pos_eps1),
    ("equilibrium_drift_amu_neg_eps1", drift_neg_eps1),
    ("equilibrium_drift_amu_pos_eps2_3", drift_pos_eps23),
    ("convergence_to_critical_point", convergence),
    ("normalized_fiber_escape_beta", fiber_escape),
    ("collapse_fiber_bracket_misses", fiber_bracket),
    ("collapse_point_tag_misses", point_tags),
    ("volume_conservation", volume_conservation),
    ("energy_monotone_max_increase", energy_monotone),
    ("identity_q_collapse", identity_q_collapse),
    ("identity_q_normalized", identity_q_normalized),
    ("identity_tangency_relative", identity_tangency),
    ("identity_energy_formula_relative", identity_energy_formula),
    ("identity_sign_flip_mismatches", identity_sign_flip),
    ("trapping_containment", trapping_containment),
    ("trapping_inward_flux_violations", trapping_flux),
    ("spinor_coefficient_limits", spinor_limits),
    ("reduced_planar_agreement", reduced_planar),
];

/// Names of every available check, in report order.
pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(name, _)| *name).collect()
}

/// Runs the selected checks in parallel and reports them in a fixed order.
pub fn run_checks(options: &VerifyOptions) -> Vec<Check> {
    let selected: Vec<&(&str, CheckFn)> = CHECKS
        .iter()
        .filter(|(name, _)| match &options.filter {
            Some(f) => name.contains(f.as_str()),
            None => true,
        })
        .collect();
    selected
        .par_iter()
        .map(|(name, run)| match run(options) {
            Ok(o) => Check {
                name: name.to_string(),
                passed: o.comparison.holds(o.measured, o.threshold),
                measured: o.measured,
                threshold: o.threshold,
                comparison: o.comparison,
            },
            Err(_) => Check {
                name: name.to_string(),
                passed: false,
                measured: f64::NAN,
                threshold: f64::NAN,
                comparison: Comparison::AtMost,
            },
        })
        .collect()
}

/// The full verification report; the echoed run is the `ε = 1` oracle run.
pub fn verify(options: &VerifyOptions) -> Result<RunReport> {
    let checks = run_checks(options);
    let params = FlowParams::collapse(2.0, 1.0, 1.0)?;
    let reference = integrate(&params, &IntegratorConfig::default(), 20.0)?;
    Ok(RunReport::new(
        Some(params),
        Some(reference.termination),
        Some(reference.last_state()),
        checks,
    ))
}

fn oracle_run(epsilon: f64) -> Result<Trajectory> {
    integrate(
        &FlowParams::collapse(2.0, 1.0, epsilon)?,
        &IntegratorConfig::default(),
        20.0,
    )
}

fn oracle_error(epsilon: f64, t_last: f64, exact: impl Fn(f64) -> (f64, f64)) -> Result<f64> {
    let run = oracle_run(epsilon)?;
    Ok(run
        .states()
        .filter(|s| s.t <= t_last)
        .map(|s| {
            let (x, y) = exact(s.t);
            (s.alpha - x).abs().max((s.beta - y).abs())
        })
        .fold(0.0, f64::max))
}

fn oracle_eps1_error(o: &VerifyOptions) -> Result<Outcome> {
    let err = oracle_error(1.0, 15.5, |t| {
        let v = 0.25 * (16.0 - t).sqrt();
        (v, v)
    })?;
    Ok(at_most(err, o.oracle_tol.unwrap_or(1e-8)))
}

fn oracle_eps23_error(o: &VerifyOptions) -> Result<Outcome> {
    let err = oracle_error(2.0 / 3.0, 11.5, |t| {
        let b = (36.0 - 3.0 * t).sqrt() / 6.0;
        (2.0 / 3.0 * b, b)
    })?;
    Ok(at_most(err, o.oracle_tol.unwrap_or(1e-8)))
}

fn event_offset(epsilon: f64, expected: f64) -> Result<Outcome> {
    let run = oracle_run(epsilon)?;
    let t = run
        .termination
        .alpha_threshold_time
        .unwrap_or(f64::INFINITY);
    Ok(at_most((t - expected).abs(), 1e-5))
}

fn oracle_eps1_event(_: &VerifyOptions) -> Result<Outcome> {
    event_offset(1.0, 15.999_984)
}

fn oracle_eps23_event(_: &VerifyOptions) -> Result<Outcome> {
    event_offset(2.0 / 3.0, 11.999_973)
}

fn oracle_eps1_runtime(_: &VerifyOptions) -> Result<Outcome> {
    let start = Instant::now();
    oracle_run(1.0)?;
    Ok(Outcome {
        measured: start.elapsed().as_secs_f64(),
        threshold: 1.0,
        comparison: Comparison::Below,
    })
}

fn equilibrium_drift(mu: f64, epsilon: f64) -> Result<Outcome> {
    let params = FlowParams::normalized(2.0, mu, epsilon)?;
    let config = IntegratorConfig {
        stop_on_equilibrium: false,
        ..IntegratorConfig::default()
    };
    let run = integrate(&params, &config, 100.0)?;
    let start = initial_state(&params);
    let drift = run
        .states()
        .map(|s| {
            (s.alpha - start.alpha)
                .abs()
                .max((s.beta - start.beta).abs())
        })
        .fold(0.0, f64::max);
    let reached = run.termination.tag == TerminationTag::ReachedTEnd;
    Ok(Outcome {
        measured: if reached { drift } else { f64::INFINITY },
        threshold: 1e-10,
        comparison: Comparison::Below,
    })
}

fn drift_pos_eps1(_: &VerifyOptions) -> Result<Outcome> {
    equilibrium_drift(0.5, 1.0)
}

fn drift_neg_eps1(_: &VerifyOptions) -> Result<Outcome> {
    equilibrium_drift(-0.5, 1.0)
}

fn drift_pos_eps23(_: &VerifyOptions) -> Result<Outcome> {
    equilibrium_drift(0.5, 2.0 / 3.0)
}

const CONVERGENT: [(f64, f64); 6] = [
    (0.5, 0.8),
    (0.5, 2.0),
    (0.5, 5.0),
    (-0.5, 0.2),
    (-0.5, 1.0),
    (-0.5, 5.0),
];

fn normalized_runs(cases: &[(f64, f64)], t_end: f64) -> Result<Vec<Trajectory>> {
    cases
        .iter()
        .map(|&(mu, eps)| {
            integrate(
                &FlowParams::normalized(2.0, mu, eps)?,
                &IntegratorConfig::default(),
                t_end,
            )
        })
        .collect()
}

fn convergence(_: &VerifyOptions) -> Result<Outcome> {
    let worst = normalized_runs(&CONVERGENT, 500.0)?
        .iter()
        .map(|run| {
            let s = run.last_state();
            (s.alpha - CRITICAL).abs().max((s.beta - CRITICAL).abs())
        })
        .fold(0.0, f64::max);
    Ok(at_most(worst, 1e-6))
}

fn fiber_escape(_: &VerifyOptions) -> Result<Outcome> {
    let smallest = normalized_runs(&[(0.5, 0.3), (0.5, 0.5)], 500.0)?
        .iter()
        .map(|run| match run.termination.tag {
            TerminationTag::CollapseFiber => run.termination.state.beta,
            _ => f64::NEG_INFINITY,
        })
        .fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        measured: smallest,
        threshold: 5.0,
        comparison: Comparison::Above,
    })
}

fn collapse_run(lambda: f64, epsilon: f64) -> Result<Trajectory> {
    integrate(
        &FlowParams::collapse(2.0, lambda, epsilon)?,
        &IntegratorConfig::default(),
        1e5,
    )
}

fn fiber_bracket(_: &VerifyOptions) -> Result<Outcome> {
    let mut misses = 0;
    for eps in [0.5, 1.0, 3.0] {
        let event = collapse_run(-1.0, eps)?.termination;
        let inside = match (event.tag, event.beta_infinity, event.beta_bracket) {
            (TerminationTag::CollapseFiber, Some(b), Some((lo, hi))) => lo < b && b < hi,
            _ => false,
        };
        if !inside {
            misses += 1;
        }
    }
    Ok(at_most(misses as f64, 0.0))
}

fn point_tags(_: &VerifyOptions) -> Result<Outcome> {
    let mut misses = 0;
    for eps in [0.8, 1.3] {
        if collapse_run(1.0, eps)?.termination.tag != TerminationTag::CollapsePoint {
            misses += 1;
        }
    }
    Ok(at_most(misses as f64, 0.0))
}

fn volume_conservation(_: &VerifyOptions) -> Result<Outcome> {
    let mut cases = CONVERGENT.to_vec();
    cases.extend([(0.5, 0.3), (0.5, 0.5), (0.5, 2.0 / 3.0), (-0.5, 1.5)]);
    let worst = normalized_runs(&cases, 500.0)?
        .iter()
        .flat_map(|run| run.samples.iter().map(|s| (s.scalars.volume - 1.0).abs()))
        .fold(0.0, f64::max);
    Ok(at_most(worst, 1e-8))
}

/// Largest increase of the energy between consecutive samples over 20 runs
/// with random flow, signs and `ε`.
fn energy_monotone(_: &VerifyOptions) -> Result<Outcome> {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let a = if rng.gen_bool(0.5) { 2.0 } else { -2.0 };
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let eps = rng.gen_range(0.3..3.0);
        let (params, t_end) = if rng.gen_bool(0.5) {
            (FlowParams::collapse(a, sign, eps)?, 1e5)
        } else {
            (FlowParams::normalized(a, 0.5 * sign, eps)?, 100.0)
        };
        let run = integrate(&params, &IntegratorConfig::default(), t_end)?;
        for w in run.samples.windows(2) {
            worst = worst.max(w[1].scalars.energy - w[0].scalars.energy);
        }
    }
    Ok(at_most(worst, 1e-10))
}

fn random_points(n: usize) -> Vec<(f64, f64)> {
    let mut rng = StdRng::seed_from_u64(SEED ^ 1);
    (0..n)
        .map(|_| (rng.gen_range(0.1..=3.0), rng.gen_range(0.1..=3.0)))
        .collect()
}

fn all_params() -> Result<Vec<FlowParams>> {
    let mut out = Vec::new();
    for a in [2.0, -2.0] {
        for sign in [1.0, -1.0] {
            out.push(FlowParams::collapse(a, sign, 1.0)?);
            out.push(FlowParams::normalized(a, 0.5 * sign, 1.0)?);
        }
    }
    Ok(out)
}

/// `|F − (x/2, y/2)·q|`, scaled by `max(1, |F|)` per component.
fn q_consistency(collapse: bool) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in all_params()?
        .iter()
        .filter(|p| (p.kind == crate::FlowKind::Collapse) == collapse)
    {
        for &(x, y) in &random_points(1000) {
            let (dx, dy) = vector_field(p, x, y)?;
            let (q00, q11) = if collapse {
                q1_collapse_components(p, x, y)?
            } else {
                let (q00, q11) = q1_normalized_components(p, x, y)?;
                let e = energy_density_sixth(p, x, y)?;
                (q00 + e, q11 + e)
            };
            for (d, q) in [(dx, 0.5 * x * q00), (dy, 0.5 * y * q11)] {
                worst = worst.max((d - q).abs() / d.abs().max(1.0));
            }
        }
    }
    Ok(worst)
}

fn identity_q_collapse(_: &VerifyOptions) -> Result<Outcome> {
    Ok(at_most(q_consistency(true)?, 1e-13))
}

fn identity_q_normalized(_: &VerifyOptions) -> Result<Outcome> {
    Ok(at_most(q_consistency(false)?, 1e-13))
}

fn identity_tangency(_: &VerifyOptions) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for p in all_params()?
        .iter()
        .filter(|p| p.kind == crate::FlowKind::Normalized)
    {
        for &(x, y) in &random_points(1000) {
            let eps = x / y;
            let (ux, uy) = curve_point(eps);
            let (dx, dy) = vector_field(p, ux, uy)?;
            let k = curve_speed(p, eps)?;
            let (tx, ty) = curve_tangent(eps);
            let scale = dx
                .hypot(dy)
                .max((k * tx).hypot(k * ty))
                .max(f64::MIN_POSITIVE);
            worst = worst.max(tangency_residual(p, eps)? / scale);
        }
    }
    Ok(at_most(worst, 1e-10))
}

fn identity_energy_formula(_: &VerifyOptions) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for p in all_params()?
        .iter()
        .filter(|p| p.kind == crate::FlowKind::Normalized)
    {
        for &(x, y) in &random_points(1000) {
            let (f, g) = spinor_coefficients(p, x, y)?;
            let e = energy_density_sixth(p, x, y)?;
            worst = worst.max(((f * f + 2.0 * g * g) / 12.0 - e).abs() / e.abs());
        }
    }
    Ok(at_most(worst, 1e-12))
}

/// Counts outputs that change under `(a, kappa) → (−a, −kappa)`; the spinor
/// coefficients must change sign exactly, everything else must be identical.
fn identity_sign_flip(_: &VerifyOptions) -> Result<Outcome> {
    let mut mismatches = 0usize;
    let mut tally = |same: bool| {
        if !same {
            mismatches += 1;
        }
    };
    for p in all_params()? {
        let q = p.flipped();
        for &(x, y) in &random_points(1000) {
            tally(vector_field(&p, x, y)? == vector_field(&q, x, y)?);
            tally(energy(&p, x, y)? == energy(&q, x, y)?);
            let (f, g) = spinor_coefficients(&p, x, y)?;
            let (fq, gq) = spinor_coefficients(&q, x, y)?;
            tally(f == -fq && g == -gq);
            let (sp, sq) = (geometry_scalars(&p, x, y)?, geometry_scalars(&q, x, y)?);
            tally(sp.q00 == sq.q00 && sp.q11 == sq.q11 && sp.volume == sq.volume);
            if p.kind == crate::FlowKind::Normalized {
                tally(energy_density_sixth(&p, x, y)? == energy_density_sixth(&q, x, y)?);
                tally(curve_speed(&p, x / y)? == curve_speed(&q, x / y)?);
            }
            tally(volume_at(x, y) == sp.volume);
        }
    }
    Ok(at_most(mismatches as f64, 0.0))
}

/// The four trapping cases: `aλ = −2`, and `aλ = 2` starting in `K1`, `K2`, `K3`.
const TRAPPING: [(f64, f64); 4] = [(-1.0, 1.0), (1.0, 0.4), (1.0, 0.8), (1.0, 1.3)];

fn trapping_containment(_: &VerifyOptions) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for (lambda, eps) in TRAPPING {
        let run = collapse_run(lambda, eps)?;
        match region_for_initial(&run.params, &initial_state(&run.params))? {
            Some(region) => worst = worst.max(containment_report(&run, &region)?),
            None => worst = f64::INFINITY,
        }
    }
    Ok(at_most(worst, 1e-9))
}

fn trapping_flux(_: &VerifyOptions) -> Result<Outcome> {
    let mut violations = 0usize;
    for (lambda, eps) in TRAPPING {
        let params = FlowParams::collapse(2.0, lambda, eps)?;
        match region_for_initial(&params, &initial_state(&params))? {
            Some(region) => violations += inward_flux_check(&region, &params, 1000)?.len(),
            None => violations += 1,
        }
    }
    Ok(at_most(violations as f64, 0.0))
}

fn spinor_limits(_: &VerifyOptions) -> Result<Outcome> {
    let mu = -0.5;
    let params = FlowParams::normalized(2.0, mu, 1.5)?;
    let run = integrate(&params, &IntegratorConfig::default(), 500.0)?;
    let s = run.last_state();
    let (f, g) = spinor_coefficients(&params, s.alpha, s.beta)?;
    let target = mu / CRITICAL;
    Ok(at_most((f - target).abs().max((g - target).abs()), 1e-6))
}

fn reduced_planar(_: &VerifyOptions) -> Result<Outcome> {
    let params = FlowParams::normalized(2.0, 0.5, 2.0)?;
    let config = IntegratorConfig {
        stop_on_equilibrium: false,
        ..IntegratorConfig::default()
    };
    let reduced = integrate_reduced(&params, &config, 2.0, 1.0)?;
    let planar = integrate(&params, &config, 1.0)?;
    let (t, eps) = reduced.last();
    let end = planar.last_state();
    let (x, y) = curve_point(eps);
    let gap = if t == end.t {
        (x - end.alpha).abs().max((y - end.beta).abs())
    } else {
        f64::INFINITY
    };
    Ok(at_most(gap, 1e-7))
}
