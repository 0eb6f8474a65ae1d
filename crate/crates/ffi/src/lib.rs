//! C ABI over `berger-flow`.
//!
//! Trajectories are returned through the opaque [`BfTrajectory`] handle and
//! must be released with [`bf_trajectory_free`]. Every fallible call returns a
//! [`BfStatus`]; the message of the most recent failure on the calling thread
//! is available from [`bf_last_error_message`]. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use berger_flow::{
    energy, integrate, vector_field, Error, FlowKind, FlowParams, IntegratorConfig, TerminationTag,
    Trajectory,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Domain = 3,
    BeyondExistence = 4,
    KindMismatch = 5,
    StepBudget = 6,
    OutOfRange = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfFlowKind {
    Collapse = 0,
    Normalized = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfTerminationTag {
    ReachedTEnd = 0,
    CollapsePoint = 1,
    CollapseFiber = 2,
    Equilibrium = 3,
    StepUnderflow = 4,
}

/// Flow selection; `kappa` is `±1` for collapse and `±1/2` for normalized.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfParams {
    pub kind: BfFlowKind,
    pub a: f64,
    pub kappa: f64,
    pub epsilon: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfConfig {
    pub rtol: f64,
    pub atol: f64,
    pub collapse_tol: f64,
    pub equilib_tol: f64,
    pub max_steps: usize,
    pub output_stride: usize,
    pub stop_on_equilibrium: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfSample {
    pub t: f64,
    pub alpha: f64,
    pub beta: f64,
    pub volume: f64,
    pub energy: f64,
    pub f: f64,
    pub g: f64,
}

/// Termination summary; optional values are NaN when absent.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfTermination {
    pub tag: BfTerminationTag,
    pub t_event: f64,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_threshold_time: f64,
    pub beta_infinity: f64,
}

/// Opaque integrated trajectory.
pub struct BfTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BfStatus {
    match e {
        Error::InvalidParameter { .. } => BfStatus::InvalidParameter,
        Error::Domain { .. } => BfStatus::Domain,
        Error::BeyondExistence { .. } => BfStatus::BeyondExistence,
        Error::KindMismatch { .. } => BfStatus::KindMismatch,
        Error::StepBudget { .. } => BfStatus::StepBudget,
    }
}

fn fail(status: BfStatus, message: impl Into<String>) -> BfStatus {
    set_last_error(message.into());
    status
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), BfStatus>) -> BfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => BfStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(BfStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: berger_flow::Result<T>) -> Result<T, BfStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn to_params(p: &BfParams) -> Result<FlowParams, BfStatus> {
    let kind = match p.kind {
        BfFlowKind::Collapse => FlowKind::Collapse,
        BfFlowKind::Normalized => FlowKind::Normalized,
    };
    lift(FlowParams::new(kind, p.a, p.kappa, p.epsilon))
}

fn to_config(c: &BfConfig) -> IntegratorConfig {
    IntegratorConfig {
        rtol: c.rtol,
        atol: c.atol,
        collapse_tol: c.collapse_tol,
        equilib_tol: c.equilib_tol,
        max_steps: c.max_steps,
        output_stride: c.output_stride,
        stop_on_equilibrium: c.stop_on_equilibrium,
        ..IntegratorConfig::default()
    }
}

fn tag_of(tag: TerminationTag) -> BfTerminationTag {
    match tag {
        TerminationTag::ReachedTEnd => BfTerminationTag::ReachedTEnd,
        TerminationTag::CollapsePoint => BfTerminationTag::CollapsePoint,
        TerminationTag::CollapseFiber => BfTerminationTag::CollapseFiber,
        TerminationTag::Equilibrium => BfTerminationTag::Equilibrium,
        TerminationTag::StepUnderflow => BfTerminationTag::StepUnderflow,
    }
}

fn non_null<T>(p: *const T) -> Result<(), BfStatus> {
    if p.is_null() {
        Err(fail(BfStatus::NullPointer, "null pointer argument"))
    } else {
        Ok(())
    }
}

/// Default integrator settings.
#[no_mangle]
pub extern "C" fn bf_config_default() -> BfConfig {
    let d = IntegratorConfig::default();
    BfConfig {
        rtol: d.rtol,
        atol: d.atol,
        collapse_tol: d.collapse_tol,
        equilib_tol: d.equilib_tol,
        max_steps: d.max_steps,
        output_stride: d.output_stride,
        stop_on_equilibrium: d.stop_on_equilibrium,
    }
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn bf_status_name(status: BfStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        BfStatus::Ok => b"ok\0",
        BfStatus::NullPointer => b"null pointer\0",
        BfStatus::InvalidParameter => b"invalid parameter\0",
        BfStatus::Domain => b"domain error\0",
        BfStatus::BeyondExistence => b"beyond existence interval\0",
        BfStatus::KindMismatch => b"flow kind mismatch\0",
        BfStatus::StepBudget => b"step budget exhausted\0",
        BfStatus::OutOfRange => b"index out of range\0",
        BfStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL, or
/// 0 when there is no message.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn bf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: caller guarantees `buf` holds `len` bytes and `n < len`.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Evaluates the vector field at `(x, y)`.
///
/// # Safety
/// `params`, `dx` and `dy` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn bf_vector_field(
    params: *const BfParams,
    x: f64,
    y: f64,
    dx: *mut f64,
    dy: *mut f64,
) -> BfStatus {
    guard(|| {
        non_null(params)?;
        non_null(dx)?;
        non_null(dy)?;
        // SAFETY: checked non-null above; validity is the caller's contract.
        let p = to_params(unsafe { &*params })?;
        let (u, v) = lift(vector_field(&p, x, y))?;
        unsafe {
            *dx = u;
            *dy = v;
        }
        Ok(())
    })
}

/// Spinorial energy at `(x, y)`.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn bf_energy(
    params: *const BfParams,
    x: f64,
    y: f64,
    out: *mut f64,
) -> BfStatus {
    guard(|| {
        non_null(params)?;
        non_null(out)?;
        let p = to_params(unsafe { &*params })?;
        let e = lift(energy(&p, x, y))?;
        unsafe { *out = e };
        Ok(())
    })
}

/// Integrates from the Berger start point up to `t_end`. `config` may be null
/// for the defaults. On success `*out` receives a handle owned by the caller.
///
/// # Safety
/// `params` and `out` must be valid pointers; `config` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn bf_integrate(
    params: *const BfParams,
    config: *const BfConfig,
    t_end: f64,
    out: *mut *mut BfTrajectory,
) -> BfStatus {
    guard(|| {
        non_null(params)?;
        non_null(out)?;
        unsafe { *out = ptr::null_mut() };
        let p = to_params(unsafe { &*params })?;
        let cfg = if config.is_null() {
            IntegratorConfig::default()
        } else {
            to_config(unsafe { &*config })
        };
        let inner = lift(integrate(&p, &cfg, t_end))?;
        let handle = Box::into_raw(Box::new(BfTrajectory { inner }));
        unsafe { *out = handle };
        Ok(())
    })
}

/// Number of recorded samples; 0 for a null handle.
///
/// # Safety
/// `trajectory` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bf_trajectory_len(trajectory: *const BfTrajectory) -> usize {
    if trajectory.is_null() {
        return 0;
    }
    unsafe { &*trajectory }.inner.samples.len()
}

/// Copies sample `index` into `*out`.
///
/// # Safety
/// `trajectory` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bf_trajectory_sample(
    trajectory: *const BfTrajectory,
    index: usize,
    out: *mut BfSample,
) -> BfStatus {
    guard(|| {
        non_null(trajectory)?;
        non_null(out)?;
        let t = unsafe { &*trajectory };
        let s = t.inner.samples.get(index).ok_or_else(|| {
            fail(
                BfStatus::OutOfRange,
                format!("sample {index} of {}", t.inner.samples.len()),
            )
        })?;
        unsafe {
            *out = BfSample {
                t: s.state.t,
                alpha: s.state.alpha,
                beta: s.state.beta,
                volume: s.scalars.volume,
                energy: s.scalars.energy,
                f: s.scalars.f,
                g: s.scalars.g,
            }
        };
        Ok(())
    })
}

/// Copies the termination summary into `*out`.
///
/// # Safety
/// `trajectory` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bf_trajectory_termination(
    trajectory: *const BfTrajectory,
    out: *mut BfTermination,
) -> BfStatus {
    guard(|| {
        non_null(trajectory)?;
        non_null(out)?;
        let e = unsafe { &*trajectory }.inner.termination;
        unsafe {
            *out = BfTermination {
                tag: tag_of(e.tag),
                t_event: e.t_event,
                alpha: e.state.alpha,
                beta: e.state.beta,
                alpha_threshold_time: e.alpha_threshold_time.unwrap_or(f64::NAN),
                beta_infinity: e.beta_infinity.unwrap_or(f64::NAN),
            }
        };
        Ok(())
    })
}

/// Releases a trajectory handle; null is ignored.
///
/// # Safety
/// `trajectory` must be null or a handle from [`bf_integrate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bf_trajectory_free(trajectory: *mut BfTrajectory) {
    if !trajectory.is_null() {
        drop(unsafe { Box::from_raw(trajectory) });
    }
}
