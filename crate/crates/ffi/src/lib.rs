//! C ABI for the `autotune` crate.
//!
//! Optimizers and sessions are exposed as opaque handles created by
//! `at_*_new` and released by the matching `*_free`. Every fallible call
//! returns an [`AtStatus`]; the message of the last failure on the calling
//! thread is available through [`at_last_error_message`].
//!
//! Point buffers come in two flavours, `int` and `double`, mirroring the
//! integer and floating-point point types a session can render.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use autotune::{
    Csa, Error, ExecError, NelderMead, NumericalOptimizer, PointKind, PointValue, TuningSession,
};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Dimension = 3,
    OutOfDomain = 4,
    Usage = 5,
    Contract = 6,
    /// A user callback reported failure (non-zero return).
    Target = 7,
    Panic = 8,
}

/// Opaque optimizer handle.
pub struct AtOptimizer {
    inner: Box<dyn NumericalOptimizer>,
}

/// Opaque tuning-session handle.
pub struct AtSession {
    inner: TuningSession,
}

/// Timed target over an `int` point. Return 0 on success.
pub type AtRuntimeTargetInt =
    Option<unsafe extern "C" fn(point: *const c_int, len: usize, user_data: *mut c_void) -> c_int>;
/// Timed target over a `double` point. Return 0 on success.
pub type AtRuntimeTargetDouble =
    Option<unsafe extern "C" fn(point: *const f64, len: usize, user_data: *mut c_void) -> c_int>;
/// Cost-returning target over an `int` point: writes the cost to `cost`
/// and returns 0 on success.
pub type AtCostTargetInt = Option<
    unsafe extern "C" fn(
        point: *const c_int,
        len: usize,
        user_data: *mut c_void,
        cost: *mut f64,
    ) -> c_int,
>;
/// Cost-returning target over a `double` point.
pub type AtCostTargetDouble = Option<
    unsafe extern "C" fn(
        point: *const f64,
        len: usize,
        user_data: *mut c_void,
        cost: *mut f64,
    ) -> c_int,
>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: AtStatus, msg: impl Into<String>) -> AtStatus {
    set_last_error(msg);
    status
}

fn status_of(err: Error) -> AtStatus {
    let status = match err {
        Error::Config(_) => AtStatus::Config,
        Error::Dimension { .. } => AtStatus::Dimension,
        Error::OutOfDomain { .. } => AtStatus::OutOfDomain,
        Error::Usage(_) => AtStatus::Usage,
        Error::Contract(_) => AtStatus::Contract,
    };
    fail(status, err.to_string())
}

fn exec_status(err: ExecError<c_int>) -> AtStatus {
    match err {
        ExecError::Tuning(e) => status_of(e),
        ExecError::Target(rc) => fail(AtStatus::Target, format!("target returned {rc}")),
    }
}

/// Runs `f`, converting a panic into [`AtStatus::Panic`].
fn guard(f: impl FnOnce() -> AtStatus) -> AtStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(AtStatus::Panic, "panic in autotune"))
}

fn into_handle<T>(value: T, out: *mut *mut T) -> AtStatus {
    // SAFETY: callers check `out` for null before building `value`.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    AtStatus::Ok
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length in
/// bytes, excluding the terminator; 0 when there is no error.
#[no_mangle]
pub unsafe extern "C" fn at_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn at_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

/// Creates a Coupled Simulated Annealing optimizer.
#[no_mangle]
pub unsafe extern "C" fn at_csa_new(
    dim: usize,
    num_opt: usize,
    max_iter: usize,
    seed: u64,
    out: *mut *mut AtOptimizer,
) -> AtStatus {
    guard(|| {
        if out.is_null() {
            return fail(AtStatus::NullPointer, "out is null");
        }
        match Csa::new(dim, num_opt, max_iter, seed) {
            Ok(csa) => into_handle(
                AtOptimizer {
                    inner: Box::new(csa),
                },
                out,
            ),
            Err(e) => status_of(e),
        }
    })
}

/// Creates a Nelder-Mead optimizer. `max_iter == 0` means no evaluation cap.
#[no_mangle]
pub unsafe extern "C" fn at_nelder_mead_new(
    dim: usize,
    error: f64,
    max_iter: usize,
    seed: u64,
    out: *mut *mut AtOptimizer,
) -> AtStatus {
    guard(|| {
        if out.is_null() {
            return fail(AtStatus::NullPointer, "out is null");
        }
        match NelderMead::new(dim, error, max_iter, seed) {
            Ok(nm) => into_handle(
                AtOptimizer {
                    inner: Box::new(nm),
                },
                out,
            ),
            Err(e) => status_of(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn at_optimizer_free(opt: *mut AtOptimizer) {
    if !opt.is_null() {
        drop(Box::from_raw(opt));
    }
}

/// Feeds `cost` for the last candidate and writes the next candidate, in
/// normalized `[-1, 1]` coordinates, into `point` (`len` must equal the
/// dimension).
#[no_mangle]
pub unsafe extern "C" fn at_optimizer_run(
    opt: *mut AtOptimizer,
    cost: f64,
    point: *mut f64,
    len: usize,
) -> AtStatus {
    guard(|| {
        let (Some(opt), false) = (opt.as_mut(), point.is_null()) else {
            return fail(AtStatus::NullPointer, "optimizer or point is null");
        };
        let dim = opt.inner.dimension();
        if len != dim {
            return status_of(Error::Dimension {
                expected: dim,
                got: len,
            });
        }
        let next = opt.inner.run(cost);
        ptr::copy_nonoverlapping(next.coords().as_ptr(), point, dim);
        AtStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn at_optimizer_num_points(opt: *const AtOptimizer) -> usize {
    opt.as_ref().map_or(0, |o| o.inner.num_points())
}

#[no_mangle]
pub unsafe extern "C" fn at_optimizer_dimension(opt: *const AtOptimizer) -> usize {
    opt.as_ref().map_or(0, |o| o.inner.dimension())
}

#[no_mangle]
pub unsafe extern "C" fn at_optimizer_is_end(opt: *const AtOptimizer) -> bool {
    opt.as_ref().is_some_and(|o| o.inner.is_end())
}

/// Writes the best cost seen so far into `out`; `AT_STATUS_USAGE` when no
/// finite cost has been observed.
#[no_mangle]
pub unsafe extern "C" fn at_optimizer_best_cost(
    opt: *const AtOptimizer,
    out: *mut f64,
) -> AtStatus {
    let (Some(opt), false) = (opt.as_ref(), out.is_null()) else {
        return fail(AtStatus::NullPointer, "optimizer or out is null");
    };
    match opt.inner.best_cost() {
        Some(c) => {
            *out = c;
            AtStatus::Ok
        }
        None => fail(AtStatus::Usage, "no cost observed yet"),
    }
}

/// Resets the optimizer; negative levels are rejected.
#[no_mangle]
pub unsafe extern "C" fn at_optimizer_reset(opt: *mut AtOptimizer, level: c_int) -> AtStatus {
    guard(|| {
        let Some(opt) = opt.as_mut() else {
            return fail(AtStatus::NullPointer, "optimizer is null");
        };
        let Ok(level) = u32::try_from(level) else {
            return status_of(Error::Contract(format!("negative reset level {level}")));
        };
        opt.inner.reset(level);
        AtStatus::Ok
    })
}

/// State summary as a newly allocated string; free it with
/// [`at_string_free`]. Returns null for a null handle.
#[no_mangle]
pub unsafe extern "C" fn at_optimizer_describe(opt: *const AtOptimizer) -> *mut c_char {
    opt.as_ref()
        .and_then(|o| CString::new(o.inner.describe()).ok())
        .map_or(ptr::null_mut(), CString::into_raw)
}

// ---------------------------------------------------------------------------
// Sessions
// ---------------------------------------------------------------------------

fn kind(integer_points: bool) -> PointKind {
    if integer_points {
        PointKind::Integer
    } else {
        PointKind::Real
    }
}

/// Creates a session driven by a new CSA optimizer.
#[no_mangle]
pub unsafe extern "C" fn at_session_new(
    lower: f64,
    upper: f64,
    ignore: usize,
    dim: usize,
    num_opt: usize,
    max_iter: usize,
    seed: u64,
    integer_points: bool,
    out: *mut *mut AtSession,
) -> AtStatus {
    guard(|| {
        if out.is_null() {
            return fail(AtStatus::NullPointer, "out is null");
        }
        let built = Csa::new(dim, num_opt, max_iter, seed).and_then(|csa| {
            TuningSession::with_optimizer_kind(
                lower,
                upper,
                ignore,
                Box::new(csa),
                kind(integer_points),
            )
        });
        match built {
            Ok(inner) => into_handle(AtSession { inner }, out),
            Err(e) => status_of(e),
        }
    })
}

/// Creates a session adopting `opt`. Ownership of `opt` passes to the
/// library even when this call fails; do not free it afterwards.
#[no_mangle]
pub unsafe extern "C" fn at_session_with_optimizer(
    lower: f64,
    upper: f64,
    ignore: usize,
    opt: *mut AtOptimizer,
    integer_points: bool,
    out: *mut *mut AtSession,
) -> AtStatus {
    guard(|| {
        if opt.is_null() {
            return fail(AtStatus::NullPointer, "optimizer is null");
        }
        let opt = Box::from_raw(opt);
        if out.is_null() {
            return fail(AtStatus::NullPointer, "out is null");
        }
        match TuningSession::with_optimizer_kind(
            lower,
            upper,
            ignore,
            opt.inner,
            kind(integer_points),
        ) {
            Ok(inner) => into_handle(AtSession { inner }, out),
            Err(e) => status_of(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn at_session_free(session: *mut AtSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

#[no_mangle]
pub unsafe extern "C" fn at_session_is_finished(session: *const AtSession) -> bool {
    session.as_ref().is_some_and(|s| s.inner.is_finished())
}

/// Target executions measured while tuning.
#[no_mangle]
pub unsafe extern "C" fn at_session_target_execs(session: *const AtSession) -> u64 {
    session.as_ref().map_or(0, |s| s.inner.target_execs())
}

#[no_mangle]
pub unsafe extern "C" fn at_session_reset(session: *mut AtSession, level: c_int) -> AtStatus {
    guard(|| {
        let Some(s) = session.as_mut() else {
            return fail(AtStatus::NullPointer, "session is null");
        };
        let Ok(level) = u32::try_from(level) else {
            return status_of(Error::Contract(format!("negative reset level {level}")));
        };
        s.inner.reset(level);
        AtStatus::Ok
    })
}

/// Resolves the session and point buffer, then runs `f`.
unsafe fn with_session<P: PointValue>(
    session: *mut AtSession,
    point: *mut P,
    len: usize,
    f: impl FnOnce(&mut TuningSession, &mut [P]) -> AtStatus,
) -> AtStatus {
    guard(|| {
        let (Some(s), false) = (session.as_mut(), point.is_null()) else {
            return fail(AtStatus::NullPointer, "session or point is null");
        };
        let buf = std::slice::from_raw_parts_mut(point, len);
        f(&mut s.inner, buf)
    })
}

fn done(r: Result<(), Error>) -> AtStatus {
    r.map_or_else(status_of, |()| AtStatus::Ok)
}

fn exec_done<T>(r: Result<T, ExecError<c_int>>) -> AtStatus {
    r.map_or_else(exec_status, |_| AtStatus::Ok)
}

/// Opens a measured section and writes the point to use.
#[no_mangle]
pub unsafe extern "C" fn at_session_start_int(
    session: *mut AtSession,
    point: *mut c_int,
    len: usize,
) -> AtStatus {
    with_session(session, point, len, |s, p| done(s.start(p)))
}

#[no_mangle]
pub unsafe extern "C" fn at_session_start_double(
    session: *mut AtSession,
    point: *mut f64,
    len: usize,
) -> AtStatus {
    with_session(session, point, len, |s, p| done(s.start(p)))
}

/// Closes the measured section; its duration becomes the cost.
#[no_mangle]
pub unsafe extern "C" fn at_session_end(session: *mut AtSession) -> AtStatus {
    guard(|| match session.as_mut() {
        Some(s) => done(s.inner.end()),
        None => fail(AtStatus::NullPointer, "session is null"),
    })
}

/// Feeds `cost` for the previously returned point and writes the next one.
#[no_mangle]
pub unsafe extern "C" fn at_session_exec_int(
    session: *mut AtSession,
    point: *mut c_int,
    len: usize,
    cost: f64,
) -> AtStatus {
    with_session(session, point, len, |s, p| done(s.exec(p, cost)))
}

#[no_mangle]
pub unsafe extern "C" fn at_session_exec_double(
    session: *mut AtSession,
    point: *mut f64,
    len: usize,
    cost: f64,
) -> AtStatus {
    with_session(session, point, len, |s, p| done(s.exec(p, cost)))
}

type RuntimeCb<P> = unsafe extern "C" fn(*const P, usize, *mut c_void) -> c_int;
type CostCb<P> = unsafe extern "C" fn(*const P, usize, *mut c_void, *mut f64) -> c_int;

unsafe fn call_runtime<P>(cb: RuntimeCb<P>, p: &[P], ud: *mut c_void) -> Result<(), c_int> {
    match cb(p.as_ptr(), p.len(), ud) {
        0 => Ok(()),
        rc => Err(rc),
    }
}

unsafe fn call_cost<P>(cb: CostCb<P>, p: &[P], ud: *mut c_void) -> Result<f64, c_int> {
    let mut cost = f64::NAN;
    match cb(p.as_ptr(), p.len(), ud, &mut cost) {
        0 => Ok(cost),
        rc => Err(rc),
    }
}

unsafe fn entire_runtime<P: PointValue>(
    session: *mut AtSession,
    point: *mut P,
    len: usize,
    target: Option<RuntimeCb<P>>,
    user_data: *mut c_void,
) -> AtStatus {
    let Some(cb) = target else {
        return fail(AtStatus::NullPointer, "target is null");
    };
    with_session(session, point, len, |s, p| {
        exec_done(s.try_entire_exec_runtime(p, |q| call_runtime(cb, q, user_data)))
    })
}

unsafe fn single_runtime<P: PointValue>(
    session: *mut AtSession,
    point: *mut P,
    len: usize,
    target: Option<RuntimeCb<P>>,
    user_data: *mut c_void,
) -> AtStatus {
    let Some(cb) = target else {
        return fail(AtStatus::NullPointer, "target is null");
    };
    with_session(session, point, len, |s, p| {
        exec_done(s.try_single_exec_runtime(p, |q| call_runtime(cb, q, user_data)))
    })
}

unsafe fn entire_cost<P: PointValue>(
    session: *mut AtSession,
    point: *mut P,
    len: usize,
    target: Option<CostCb<P>>,
    user_data: *mut c_void,
) -> AtStatus {
    let Some(cb) = target else {
        return fail(AtStatus::NullPointer, "target is null");
    };
    with_session(session, point, len, |s, p| {
        exec_done(s.try_entire_exec(p, |q| call_cost(cb, q, user_data)))
    })
}

unsafe fn single_cost<P: PointValue>(
    session: *mut AtSession,
    point: *mut P,
    len: usize,
    target: Option<CostCb<P>>,
    user_data: *mut c_void,
    cost_out: *mut f64,
) -> AtStatus {
    let Some(cb) = target else {
        return fail(AtStatus::NullPointer, "target is null");
    };
    with_session(session, point, len, |s, p| {
        match s.try_single_exec(p, |q| call_cost(cb, q, user_data)) {
            Ok(c) => {
                if !cost_out.is_null() {
                    *cost_out = c;
                }
                AtStatus::Ok
            }
            Err(e) => exec_status(e),
        }
    })
}

/// Tunes to completion, timing each call of `target`, and leaves the final
/// point in `point`.
#[no_mangle]
pub unsafe extern "C" fn at_session_entire_exec_runtime_int(
    session: *mut AtSession,
    point: *mut c_int,
    len: usize,
    target: AtRuntimeTargetInt,
    user_data: *mut c_void,
) -> AtStatus {
    entire_runtime(session, point, len, target, user_data)
}

#[no_mangle]
pub unsafe extern "C" fn at_session_entire_exec_runtime_double(
    session: *mut AtSession,
    point: *mut f64,
    len: usize,
    target: AtRuntimeTargetDouble,
    user_data: *mut c_void,
) -> AtStatus {
    entire_runtime(session, point, len, target, user_data)
}

/// One timed tuning step; after tuning ends `target` runs untimed with the
/// final point.
#[no_mangle]
pub unsafe extern "C" fn at_session_single_exec_runtime_int(
    session: *mut AtSession,
    point: *mut c_int,
    len: usize,
    target: AtRuntimeTargetInt,
    user_data: *mut c_void,
) -> AtStatus {
    single_runtime(session, point, len, target, user_data)
}

#[no_mangle]
pub unsafe extern "C" fn at_session_single_exec_runtime_double(
    session: *mut AtSession,
    point: *mut f64,
    len: usize,
    target: AtRuntimeTargetDouble,
    user_data: *mut c_void,
) -> AtStatus {
    single_runtime(session, point, len, target, user_data)
}

/// Tunes to completion using the cost reported by `target`.
#[no_mangle]
pub unsafe extern "C" fn at_session_entire_exec_int(
    session: *mut AtSession,
    point: *mut c_int,
    len: usize,
    target: AtCostTargetInt,
    user_data: *mut c_void,
) -> AtStatus {
    entire_cost(session, point, len, target, user_data)
}

#[no_mangle]
pub unsafe extern "C" fn at_session_entire_exec_double(
    session: *mut AtSession,
    point: *mut f64,
    len: usize,
    target: AtCostTargetDouble,
    user_data: *mut c_void,
) -> AtStatus {
    entire_cost(session, point, len, target, user_data)
}

/// One tuning step using the cost reported by `target`, which is also
/// written to `cost_out` when non-null.
#[no_mangle]
pub unsafe extern "C" fn at_session_single_exec_int(
    session: *mut AtSession,
    point: *mut c_int,
    len: usize,
    target: AtCostTargetInt,
    user_data: *mut c_void,
    cost_out: *mut f64,
) -> AtStatus {
    single_cost(session, point, len, target, user_data, cost_out)
}

#[no_mangle]
pub unsafe extern "C" fn at_session_single_exec_double(
    session: *mut AtSession,
    point: *mut f64,
    len: usize,
    target: AtCostTargetDouble,
    user_data: *mut c_void,
    cost_out: *mut f64,
) -> AtStatus {
    single_cost(session, point, len, target, user_data, cost_out)
}
