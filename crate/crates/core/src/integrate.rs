//! Adaptive integration of either flow with event detection.
//!
//! Steps are taken with the embedded Dormand–Prince 5(4) pair. After every
//! accepted step the event predicates are checked on the new state; when one
//! switches on, its time is located by bisection, re-integrating a single step
//! of reduced size from the start of the bracketing step.
//!
//! Collapse detection works with the threshold `collapse_tol`:
//!
//! * both scales below it: `CollapsePoint`, at the later of the two crossings;
//! * normalized flow, fiber below it: `CollapseFiber` immediately, since
//!   volume conservation forces the base to grow;
//! * collapse flow, fiber below it: integration continues until either the
//!   base crosses too (`CollapsePoint`) or the fiber reaches `collapse_tol²`
//!   with the base still above the threshold (`CollapseFiber`).

use serde::{Deserialize, Serialize};

use crate::dopri::{self, Controller};
use crate::dynamics::{curve_speed_unchecked, field_unchecked, initial_state, relative_speed};
use crate::error::{Error, Result};
use crate::model::{geometry_scalars, FlowKind, FlowParams, GeometryScalars, State};
use crate::phase::region_for_initial;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    pub collapse_tol: f64,
    /// Threshold on `‖F‖ / ‖(α, β)‖` for equilibrium convergence.
    pub equilib_tol: f64,
    pub event_time_tol: f64,
    /// Record every `output_stride`-th accepted step.
    pub output_stride: usize,
    /// Terminate when the equilibrium threshold is met.
    pub stop_on_equilibrium: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            h_min: 1e-12,
            h_max: 1.0,
            max_steps: 2_000_000,
            collapse_tol: 1e-3,
            equilib_tol: 1e-10,
            event_time_tol: 1e-9,
            output_stride: 1,
            stop_on_equilibrium: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("h_init", self.h_init),
            ("h_min", self.h_min),
            ("h_max", self.h_max),
            ("collapse_tol", self.collapse_tol),
            ("equilib_tol", self.equilib_tol),
            ("event_time_tol", self.event_time_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return Err(Error::invalid(
                "h_init",
                format!(
                    "step bounds must satisfy h_min <= h_init <= h_max, got {} <= {} <= {}",
                    self.h_min, self.h_init, self.h_max
                ),
            ));
        }
        if self.collapse_tol >= 1.0 {
            return Err(Error::invalid("collapse_tol", "must be below 1"));
        }
        if self.output_stride == 0 {
            return Err(Error::invalid("output_stride", "must be at least 1"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationTag {
    ReachedTEnd,
    CollapsePoint,
    CollapseFiber,
    Equilibrium,
    StepUnderflow,
}

impl TerminationTag {
    pub fn name(self) -> &'static str {
        match self {
            TerminationTag::ReachedTEnd => "ReachedTEnd",
            TerminationTag::CollapsePoint => "CollapsePoint",
            TerminationTag::CollapseFiber => "CollapseFiber",
            TerminationTag::Equilibrium => "Equilibrium",
            TerminationTag::StepUnderflow => "StepUnderflow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminationEvent {
    pub tag: TerminationTag,
    pub t_event: f64,
    /// State at `t_event`; for `Equilibrium` this is the equilibrium location.
    pub state: State,
    /// When the fiber scale first reached `collapse_tol`.
    pub alpha_threshold_time: Option<f64>,
    /// When the base scale first reached `collapse_tol`.
    pub beta_threshold_time: Option<f64>,
    /// `β` at the `CollapseFiber` event, the estimate of `β_∞`.
    pub beta_infinity: Option<f64>,
    /// `[lo, hi]` bracket for `β_∞` from the trapping region of the start point.
    pub beta_bracket: Option<(f64, f64)>,
}

impl TerminationEvent {
    pub fn is_failure(&self) -> bool {
        self.tag == TerminationTag::StepUnderflow
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: State,
    pub scalars: GeometryScalars,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: FlowParams,
    pub samples: Vec<Sample>,
    pub termination: TerminationEvent,
}

impl Trajectory {
    pub fn last_state(&self) -> State {
        self.samples.last().expect("trajectory has samples").state
    }

    pub fn states(&self) -> impl Iterator<Item = &State> + '_ {
        self.samples.iter().map(|s| &s.state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trigger {
    AlphaLow,
    BetaLow,
    FiberConfirmed,
    Equilibrium,
}

struct Watch {
    collapse_tol: f64,
    equilib_tol: f64,
    stop_on_equilibrium: bool,
    params: FlowParams,
}

impl Watch {
    fn holds(&self, trigger: Trigger, y: &[f64; 2]) -> bool {
        match trigger {
            Trigger::AlphaLow => y[0] <= self.collapse_tol,
            Trigger::BetaLow => y[1] <= self.collapse_tol,
            Trigger::FiberConfirmed => y[0] <= self.collapse_tol * self.collapse_tol,
            Trigger::Equilibrium => relative_speed(&self.params, y[0], y[1]) <= self.equilib_tol,
        }
    }

    fn active(&self, trigger: Trigger, progress: &Progress) -> bool {
        match trigger {
            Trigger::AlphaLow => progress.alpha_time.is_none(),
            Trigger::BetaLow => progress.beta_time.is_none(),
            Trigger::FiberConfirmed => self.params.kind == FlowKind::Collapse,
            Trigger::Equilibrium => self.stop_on_equilibrium,
        }
    }
}

#[derive(Default)]
struct Progress {
    alpha_time: Option<f64>,
    beta_time: Option<f64>,
}

const TRIGGERS: [Trigger; 4] = [
    Trigger::AlphaLow,
    Trigger::BetaLow,
    Trigger::FiberConfirmed,
    Trigger::Equilibrium,
];

fn sample(params: &FlowParams, t: f64, y: [f64; 2]) -> Sample {
    Sample {
        state: State {
            t,
            alpha: y[0],
            beta: y[1],
        },
        scalars: geometry_scalars(params, y[0], y[1]).expect("state in the open first quadrant"),
    }
}

fn in_quadrant(y: &[f64; 2]) -> bool {
    y[0] > 0.0 && y[1] > 0.0 && y[0].is_finite() && y[1].is_finite()
}

/// Integrates the flow selected by `params` from its initial state.
pub fn integrate(params: &FlowParams, config: &IntegratorConfig, t_end: f64) -> Result<Trajectory> {
    integrate_from(params, config, initial_state(params), t_end)
}

/// Integrates from an arbitrary state in the open first quadrant.
pub fn integrate_from(
    params: &FlowParams,
    config: &IntegratorConfig,
    start: State,
    t_end: f64,
) -> Result<Trajectory> {
    config.validate()?;
    let start = State::new(start.t, start.alpha, start.beta)?;
    if !(t_end > start.t && t_end.is_finite()) {
        return Err(Error::invalid(
            "t_end",
            format!(
                "must be finite and after the start time {}, got {t_end}",
                start.t
            ),
        ));
    }

    let params = *params;
    let f = move |y: &[f64; 2]| {
        let (dx, dy) = field_unchecked(&params, y[0], y[1]);
        [dx, dy]
    };
    let watch = Watch {
        collapse_tol: config.collapse_tol,
        equilib_tol: config.equilib_tol,
        stop_on_equilibrium: config.stop_on_equilibrium,
        params,
    };
    let bracket = match params.kind {
        FlowKind::Collapse => region_for_initial(&params, &start)
            .ok()
            .flatten()
            .and_then(|r| r.axis_bracket()),
        FlowKind::Normalized => None,
    };

    let mut t = start.t;
    let mut y = [start.alpha, start.beta];
    let mut k1 = f(&y);
    let mut samples = vec![sample(&params, t, y)];
    let mut progress = Progress::default();

    let finish = |tag: TerminationTag, t: f64, y: [f64; 2], progress: &Progress| TerminationEvent {
        tag,
        t_event: t,
        state: State {
            t,
            alpha: y[0],
            beta: y[1],
        },
        alpha_threshold_time: progress.alpha_time,
        beta_threshold_time: progress.beta_time,
        beta_infinity: (tag == TerminationTag::CollapseFiber).then_some(y[1]),
        beta_bracket: if tag == TerminationTag::CollapseFiber {
            bracket
        } else {
            None
        },
    };

    // Events already satisfied by the start point.
    let initial: Vec<Trigger> = TRIGGERS
        .iter()
        .copied()
        .filter(|&tr| watch.active(tr, &progress) && watch.holds(tr, &y))
        .collect();
    for trigger in initial {
        if let Some(tag) = apply(trigger, t, &y, &watch, &mut progress) {
            let termination = finish(tag, t, y, &progress);
            return Ok(Trajectory {
                params,
                samples,
                termination,
            });
        }
    }

    let mut controller = Controller::new();
    let mut h = config.h_init;
    let mut steps = 0usize;
    let mut accepted = 0usize;

    loop {
        let remaining = t_end - t;
        if remaining <= 0.0 {
            let termination = finish(TerminationTag::ReachedTEnd, t, y, &progress);
            push_sample(&mut samples, sample(&params, t, y));
            return Ok(Trajectory {
                params,
                samples,
                termination,
            });
        }
        if steps >= config.max_steps {
            return Err(Error::StepBudget {
                max_steps: config.max_steps,
                t,
            });
        }
        steps += 1;

        h = h.min(config.h_max);
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if (h < config.h_min && !last) || t + h == t {
            let termination = finish(TerminationTag::StepUnderflow, t, y, &progress);
            push_sample(&mut samples, sample(&params, t, y));
            return Ok(Trajectory {
                params,
                samples,
                termination,
            });
        }

        let result = match dopri::step(&f, &in_quadrant, &y, &k1, h, config.rtol, config.atol) {
            Some(r) if r.err <= 1.0 => r,
            other => {
                h = controller.reject(h, other.map(|r| r.err));
                continue;
            }
        };

        let t_new = if last { t_end } else { t + h };
        let h_taken = t_new - t;
        let y_new = result.y;

        // Locate every event that switched on during this step.
        let mut hits: Vec<(f64, [f64; 2], Trigger)> = TRIGGERS
            .iter()
            .copied()
            .filter(|&tr| {
                watch.active(tr, &progress) && !watch.holds(tr, &y) && watch.holds(tr, &y_new)
            })
            .map(|tr| {
                let (dt, y_ev) = locate(&f, &watch, tr, &y, &k1, h_taken, y_new, config);
                (t + dt, y_ev, tr)
            })
            .collect();
        hits.sort_by(|a, b| a.0.total_cmp(&b.0));

        for (t_ev, y_ev, trigger) in hits {
            if let Some(tag) = apply(trigger, t_ev, &y_ev, &watch, &mut progress) {
                push_sample(&mut samples, sample(&params, t_ev, y_ev));
                let termination = finish(tag, t_ev, y_ev, &progress);
                return Ok(Trajectory {
                    params,
                    samples,
                    termination,
                });
            }
            push_sample(&mut samples, sample(&params, t_ev, y_ev));
        }

        t = t_new;
        y = y_new;
        k1 = result.dy;
        accepted += 1;
        if accepted.is_multiple_of(config.output_stride) || last {
            push_sample(&mut samples, sample(&params, t, y));
        }
        h = controller.accept(h_taken, result.err);
    }
}

fn push_sample(samples: &mut Vec<Sample>, s: Sample) {
    if samples.last().is_none_or(|last| s.state.t > last.state.t) {
        samples.push(s);
    }
}

/// Updates the collapse bookkeeping for an event at `t`; returns the
/// termination tag when the event ends the run.
fn apply(
    trigger: Trigger,
    t: f64,
    y: &[f64; 2],
    watch: &Watch,
    progress: &mut Progress,
) -> Option<TerminationTag> {
    match trigger {
        Trigger::AlphaLow => {
            progress.alpha_time = Some(t);
            if progress.beta_time.is_some() || y[1] <= watch.collapse_tol {
                progress.beta_time.get_or_insert(t);
                Some(TerminationTag::CollapsePoint)
            } else if watch.params.kind == FlowKind::Normalized {
                Some(TerminationTag::CollapseFiber)
            } else {
                None
            }
        }
        Trigger::BetaLow => {
            progress.beta_time = Some(t);
            if progress.alpha_time.is_some() || y[0] <= watch.collapse_tol {
                progress.alpha_time.get_or_insert(t);
                Some(TerminationTag::CollapsePoint)
            } else {
                None
            }
        }
        Trigger::FiberConfirmed => {
            if y[1] > watch.collapse_tol {
                Some(TerminationTag::CollapseFiber)
            } else {
                progress.beta_time.get_or_insert(t);
                Some(TerminationTag::CollapsePoint)
            }
        }
        Trigger::Equilibrium => Some(TerminationTag::Equilibrium),
    }
}

/// Bisection for the first time in `(0, h]` at which `trigger` holds.
#[allow(clippy::too_many_arguments)]
fn locate<F>(
    f: &F,
    watch: &Watch,
    trigger: Trigger,
    y0: &[f64; 2],
    k1: &[f64; 2],
    h: f64,
    y_end: [f64; 2],
    config: &IntegratorConfig,
) -> (f64, [f64; 2])
where
    F: Fn(&[f64; 2]) -> [f64; 2],
{
    let mut lo = 0.0;
    let mut hi = h;
    let mut y_hi = y_end;
    while hi - lo > config.event_time_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match dopri::step(f, &in_quadrant, y0, k1, mid, config.rtol, config.atol) {
            Some(r) if watch.holds(trigger, &r.y) => {
                hi = mid;
                y_hi = r.y;
            }
            Some(_) => lo = mid,
            // A stage left the quadrant: the predicate region lies closer.
            None => {
                hi = mid;
            }
        }
    }
    (hi, y_hi)
}

/// Points `(t, ε)` of the reduced one-dimensional flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedTrajectory {
    pub params: FlowParams,
    pub points: Vec<(f64, f64)>,
    pub tag: TerminationTag,
}

impl ReducedTrajectory {
    pub fn last(&self) -> (f64, f64) {
        *self.points.last().expect("reduced trajectory has points")
    }
}

/// Integrates `ε' = k(ε)` on the invariant unit-volume curve.
pub fn integrate_reduced(
    params: &FlowParams,
    config: &IntegratorConfig,
    epsilon0: f64,
    t_end: f64,
) -> Result<ReducedTrajectory> {
    params.require(FlowKind::Normalized)?;
    config.validate()?;
    if !(epsilon0 > 0.0 && epsilon0.is_finite()) {
        return Err(Error::invalid(
            "epsilon0",
            format!("must be positive and finite, got {epsilon0}"),
        ));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid(
            "t_end",
            format!("must be positive, got {t_end}"),
        ));
    }

    let product = params.product();
    let f = move |e: &[f64; 1]| [curve_speed_unchecked(product, e[0])];
    let valid = |e: &[f64; 1]| e[0] > 0.0 && e[0].is_finite();

    let mut t = 0.0;
    let mut y = [epsilon0];
    let mut k1 = f(&y);
    let mut points = vec![(t, epsilon0)];
    let mut controller = Controller::new();
    let mut h = config.h_init;
    let mut steps = 0usize;
    let mut accepted = 0usize;

    let tag = loop {
        let remaining = t_end - t;
        if remaining <= 0.0 {
            break TerminationTag::ReachedTEnd;
        }
        if steps >= config.max_steps {
            return Err(Error::StepBudget {
                max_steps: config.max_steps,
                t,
            });
        }
        steps += 1;
        h = h.min(config.h_max);
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if (h < config.h_min && !last) || t + h == t {
            break TerminationTag::StepUnderflow;
        }
        match dopri::step(&f, &valid, &y, &k1, h, config.rtol, config.atol) {
            Some(r) if r.err <= 1.0 => {
                let t_new = if last { t_end } else { t + h };
                let h_taken = t_new - t;
                t = t_new;
                y = r.y;
                k1 = r.dy;
                accepted += 1;
                if accepted.is_multiple_of(config.output_stride) || last {
                    points.push((t, y[0]));
                }
                h = controller.accept(h_taken, r.err);
            }
            other => h = controller.reject(h, other.map(|r| r.err)),
        }
    };
    if points.last().is_some_and(|p| p.0 < t) {
        points.push((t, y[0]));
    }
    Ok(ReducedTrajectory {
        params: *params,
        points,
        tag,
    })
}
