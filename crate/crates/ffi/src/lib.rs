//! C ABI for the random Riccati equation toolkit.
//!
//! Conventions shared by every exported function:
//!
//! - Every fallible call returns an [`RreStatus`]; `RRE_STATUS_OK` (0) means
//!   success and nothing was written to the thread-local error message.
//!   On failure, [`rre_last_error_message`] returns a description.
//! - Matrices cross the boundary as dense row-major `double` arrays with
//!   caller-owned storage. The state dimension is `n`, the output dimension
//!   `m`: `A` and covariances are `n*n`, `C` is `m*n`, `R` is `m*m`, the
//!   steady gain is `n*m`.
//! - Symmetric inputs are symmetrized as `(X + X^T) / 2` on entry, so mild
//!   asymmetry from round-tripping is tolerated rather than rejected.
//! - [`RreSystem`] is an opaque handle allocated by the constructors and
//!   released with [`rre_system_free`]. Handles are immutable after
//!   construction and may be shared across threads.
//!
//! The header `include/rre.h` is generated from this file at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use rre_core::critical::{gamma_sb, lower_bound, upper_bound};
use rre_core::maps::{
    lyapunov_map, riccati_map, solve_dare, DEFAULT_DARE_MAX_ITER, DEFAULT_DARE_TOL,
};
use rre_core::model::{
    check_detectability, check_stabilizability, spectral_abscissa, DEFAULT_PBH_TOL,
};
use rre_core::presets::{scalar_example, ten_dim_example};
use rre_core::simulator::{run_rre, ArrivalProcess};
use rre_core::stats::{ergodic_average, ScalarFunctional};
use rre_core::support::enumerate_support;
use rre_core::{RreError, SymMatrix, SystemModel};

use nalgebra::DMatrix;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RreStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument was rejected (dimensions, ranges, parse errors,
    /// structural assumptions such as detectability).
    InvalidArgument = 2,
    /// A numerical computation failed (non-finite values, no convergence,
    /// exhausted enumeration budget).
    Numerical = 3,
    /// An output buffer is too small; the required size was written to the
    /// count argument.
    BufferTooSmall = 4,
    /// An internal invariant was violated; the library state is still valid.
    Internal = 5,
}

/// Scalar summary applied to a covariance matrix.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RreFunctional {
    /// Trace of the covariance.
    Trace = 0,
    /// Largest eigenvalue of the covariance.
    LambdaMax = 1,
}

/// Opaque system handle: the matrices `(A, C, Q, R)` after validation.
pub struct RreSystem {
    model: SystemModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let sanitized: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    let cstring = CString::new(sanitized).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = cstring);
}

fn fail(e: &RreError) -> RreStatus {
    set_last_error(&e.to_string());
    match e.exit_code() {
        2 => RreStatus::InvalidArgument,
        _ => RreStatus::Numerical,
    }
}

fn invalid(msg: &str) -> RreStatus {
    set_last_error(msg);
    RreStatus::InvalidArgument
}

fn null_argument(name: &str) -> RreStatus {
    set_last_error(&format!("{name} must not be null"));
    RreStatus::NullArgument
}

/// Converts panics into [`RreStatus::Internal`] instead of unwinding into
/// the caller, which would be undefined behavior across the C boundary.
fn guard<F: FnOnce() -> RreStatus>(f: F) -> RreStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unidentified panic".to_string());
            set_last_error(&format!("internal panic: {msg}"));
            RreStatus::Internal
        }
    }
}

macro_rules! require_nonnull {
    ($ptr:expr) => {
        if $ptr.is_null() {
            return null_argument(stringify!($ptr));
        }
    };
}

/// Reads a row-major `rows x cols` array. Caller checked non-null.
unsafe fn read_matrix(ptr: *const f64, rows: usize, cols: usize) -> Result<DMatrix<f64>, RreStatus> {
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| invalid("matrix dimensions overflow"))?;
    let data = slice::from_raw_parts(ptr, len);
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

unsafe fn read_symmetric(ptr: *const f64, dim: usize) -> Result<SymMatrix, RreStatus> {
    let m = read_matrix(ptr, dim, dim)?;
    SymMatrix::new(m).map_err(|e| fail(&e))
}

/// Writes a matrix row-major into a caller buffer of `nrows * ncols` doubles.
unsafe fn write_matrix(out: *mut f64, m: &DMatrix<f64>) {
    let mut k = 0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            *out.add(k) = m[(i, j)];
            k += 1;
        }
    }
}

unsafe fn model_ref<'a>(system: *const RreSystem) -> &'a SystemModel {
    &(*system).model
}

fn boxed(model: SystemModel, out: *mut *mut RreSystem) -> RreStatus {
    let handle = Box::new(RreSystem { model });
    unsafe { *out = Box::into_raw(handle) };
    RreStatus::Ok
}

/// Returns the library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn rre_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Returns the error message of the most recent failing call on this
/// thread, or an empty string. The pointer stays valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn rre_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Builds a system from row-major arrays: `a` is `n*n`, `c` is `m*n`
/// (`m` outputs of an `n`-dimensional state), `q` is `n*n` and `r` is
/// `m*m`. Validates symmetry by construction, `Q >= 0` and `R > 0`, and
/// writes the new handle to `out`.
///
/// # Safety
///
/// The array pointers must reference readable buffers of the stated sizes
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rre_system_new(
    n: usize,
    m: usize,
    a: *const f64,
    c: *const f64,
    q: *const f64,
    r: *const f64,
    out: *mut *mut RreSystem,
) -> RreStatus {
    guard(|| {
        require_nonnull!(a);
        require_nonnull!(c);
        require_nonnull!(q);
        require_nonnull!(r);
        require_nonnull!(out);
        if n == 0 || m == 0 {
            return invalid("dimensions must be at least 1");
        }
        let a = match read_matrix(a, n, n) {
            Ok(x) => x,
            Err(s) => return s,
        };
        let c = match read_matrix(c, m, n) {
            Ok(x) => x,
            Err(s) => return s,
        };
        let q = match read_symmetric(q, n) {
            Ok(x) => x,
            Err(s) => return s,
        };
        let r = match read_symmetric(r, m) {
            Ok(x) => x,
            Err(s) => return s,
        };
        match SystemModel::new(a, c, q, r) {
            Ok(model) => boxed(model, out),
            Err(e) => fail(&e),
        }
    })
}

/// Builds a system from a nul-terminated JSON document with keys
/// `"A"`, `"C"`, `"Q"`, `"R"`, each a nested array of rows.
///
/// # Safety
///
/// `json` must be a valid nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rre_system_from_json(
    json: *const c_char,
    out: *mut *mut RreSystem,
) -> RreStatus {
    guard(|| {
        require_nonnull!(json);
        require_nonnull!(out);
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(_) => return invalid("JSON document is not valid UTF-8"),
        };
        match SystemModel::from_json_str(text) {
            Ok(model) => boxed(model, out),
            Err(e) => fail(&e),
        }
    })
}

/// Builds the scalar benchmark system `A = sqrt(2)`, `C = Q = R = 1`.
///
/// # Safety
///
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rre_system_example_scalar(out: *mut *mut RreSystem) -> RreStatus {
    guard(|| {
        require_nonnull!(out);
        boxed(scalar_example(), out)
    })
}

/// Builds the seeded ten-state, five-output benchmark system with spectral
/// radius 1.25.
///
/// # Safety
///
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rre_system_example_ten_dim(
    seed: u64,
    out: *mut *mut RreSystem,
) -> RreStatus {
    guard(|| {
        require_nonnull!(out);
        match ten_dim_example(seed) {
            Ok(model) => boxed(model, out),
            Err(e) => fail(&e),
        }
    })
}

/// Releases a handle. Passing null is a no-op.
///
/// # Safety
///
/// `system` must be null or a pointer returned by a constructor that has
/// not been freed already.
#[no_mangle]
pub unsafe extern "C" fn rre_system_free(system: *mut RreSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Writes the state dimension `n` and output dimension `m`.
///
/// # Safety
///
/// `system` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn rre_system_dims(
    system: *const RreSystem,
    out_n: *mut usize,
    out_m: *mut usize,
) -> RreStatus {
    guard(|| {
        require_nonnull!(system);
        let model = model_ref(system);
        if !out_n.is_null() {
            *out_n = model.dim_n();
        }
        if !out_m.is_null() {
            *out_m = model.dim_m();
        }
        RreStatus::Ok
    })
}

/// Writes the spectral radius of `A`.
///
/// # Safety
///
/// `system` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rre_spectral_radius(
    system: *const RreSystem,
    out: *mut f64,
) -> RreStatus {
    guard(|| {
        require_nonnull!(system);
        require_nonnull!(out);
        *out = spectral_abscissa(model_ref(system));
        RreStatus::Ok
    })
}

/// Writes whether `(A, C)` is detectable in the PBH sense.
///
/// # Safety
///
/// `system` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rre_is_detectable(
    system: *const RreSystem,
    out: *mut bool,
) -> RreStatus {
    guard(|| {
        require_nonnull!(system);
        require_nonnull!(out);
        *out = check_detectability(model_ref(system), DEFAULT_PBH_TOL);
        RreStatus::Ok
    })
}

/// Writes whether `(A, Q^{1/2})` is stabilizable in the PBH sense.
///
/// # Safety
///
/// `system` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rre_is_stabilizable(
    system: *const RreSystem,
    out: *mut bool,
) -> RreStatus {
    guard(|| {
        require_nonnull!(system);
        require_nonnull!(out);
        *out = check_stabilizability(model_ref(system), DEFAULT_PBH_TOL);
        RreStatus::Ok
    })
}

/// Applies the open-loop map `X -> A X A^T + Q` to the symmetric `n*n`
/// input `x` and writes the `n*n` result to `out`.
///
/// # Safety
///
/// `system` must be a live handle; `x` and `out` must reference `n*n`
/// doubles (they may alias).
#[no_mangle]
pub unsafe extern "C" fn rre_lyapunov_map(
    system: *const RreSystem,
    x: *const f64,
    out: *mut f64,
) -> RreStatus {
    apply_map(system, x, out, lyapunov_map)
}

/// Applies the update map
/// `X -> A X A^T + Q - A X C^T (C X C^T + R)^{-1} C X A^T` to the
/// symmetric `n*n` input `x` and writes the `n*n` result to `out`.
///
/// # Safety
///
/// `system` must be a live handle; `x` and `out` must reference `n*n`
/// doubles (they may alias).
#[no_mangle]
pub unsafe extern "C" fn rre_riccati_map(
    system: *const RreSystem,
    x: *const f64,
    out: *mut f64,
) -> RreStatus {
    apply_map(system, x, out, riccati_map)
}

unsafe fn apply_map(
    system: *const RreSystem,
    x: *const f64,
    out: *mut f64,
    map: fn(&SystemModel, &SymMatrix) -> rre_core::Result<SymMatrix>,
) -> RreStatus {
    guard(|| {
        require_nonnull!(system);
        require_nonnull!(x);
        require_nonnull!(out);
        let model = model_ref(system);
        let x = match read_symmetric(x, model.dim_n()) {
            Ok(x) => x,
            Err(s) => return s,
        };
        match map(model, &x) {
            Ok(y) => {
                write_matrix(out, y.as_dmatrix());
                RreStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Solves the deterministic steady-state equation `f1(P) = P` by fixed-point
/// iteration. Pass `tol <= 0` and `max_iter == 0` for the defaults
/// (`1e-12`, `10000`). Non-null outputs receive: `out_p_star` the `n*n`
/// fixed point, `out_gain` the `n*m` steady gain `K` (closed loop
/// `A + K C`), `out_iterations` and `out_residual` the iteration count and
/// final residual.
///
/// # Safety
///
/// `system` must be a live handle; non-null outputs must reference buffers
/// of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn rre_solve_dare(
    system: *const RreSystem,
    tol: f64,
    max_iter: usize,
    out_p_star: *mut f64,
    out_gain: *mut f64,
    out_iterations: *mut usize,
    out_residual: *mut f64,
) -> RreStatus {
    guard(|| {
        require_nonnull!(system);
        let model = model_ref(system);
        let tol = if tol > 0.0 { tol } else { DEFAULT_DARE_TOL };
        let max_iter = if max_iter > 0 { max_iter } else { DEFAULT_DARE_MAX_ITER };
        match solve_dare(model, tol, max_iter) {
            Ok(solution) => {
                if !out_p_star.is_null() {
                    write_matrix(out_p_star, solution.p_star.as_dmatrix());
                }
                if !out_gain.is_null() {
                    write_matrix(out_gain, &solution.gain);
                }
                if !out_iterations.is_null() {
                    *out_iterations = solution.iterations;
                }
                if !out_residual.is_null() {
                    *out_residual = solution.residual;
                }
                RreStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Writes the closed-form lower bound `max(0, 1 - 1/alpha^2)` on the
/// critical arrival probability, where `alpha` is the spectral radius
/// of `A`.
///
/// # Safety
///
/// `system` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rre_critical_lower(
    system: *const RreSystem,
    out: *mut f64,
) -> RreStatus {
    guard(|| {
        require_nonnull!(system);
        require_nonnull!(out);
        *out = lower_bound(model_ref(system));
        RreStatus::Ok
    })
}

/// Computes the critical-probability bracket: the closed-form lower bound
/// and the bisected fixed-gain upper bound. Pass `bisect_tol <= 0` for the
/// default `1e-6`. Non-null outputs receive the bounds and the spectral
/// radius of the averaged closed-loop operator at the upper bound.
/// Requires detectability and stabilizability.
///
/// # Safety
///
/// `system` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn rre_critical_bounds(
    system: *const RreSystem,
    bisect_tol: f64,
    out_lower: *mut f64,
    out_upper: *mut f64,
    out_radius_at_upper: *mut f64,
) -> RreStatus {
    guard(|| {
        require_nonnull!(system);
        let tol = if bisect_tol > 0.0 { bisect_tol } else { 1e-6 };
        match upper_bound(model_ref(system), tol) {
            Ok(bounds) => {
                if !out_lower.is_null() {
                    *out_lower = bounds.lower;
                }
                if !out_upper.is_null() {
                    *out_upper = bounds.upper;
                }
                if !out_radius_at_upper.is_null() {
                    *out_radius_at_upper = bounds.spectral_radius_at_upper;
                }
                RreStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Writes `0.0` when boundedness in probability holds for every positive
/// arrival probability (detectable and stabilizable systems), and `-1.0`
/// when no statement applies.
///
/// # Safety
///
/// `system` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rre_weak_critical(
    system: *const RreSystem,
    out: *mut f64,
) -> RreStatus {
    guard(|| {
        require_nonnull!(system);
        require_nonnull!(out);
        *out = gamma_sb(model_ref(system)).unwrap_or(-1.0);
        RreStatus::Ok
    })
}

/// Runs the covariance recursion for `horizon` steps with i.i.d. Bernoulli
/// arrivals of probability `gamma_bar` on the stream derived from `seed`.
/// `p0` is the symmetric `n*n` initial covariance, or null for `Q`.
/// Non-null output arrays receive `horizon + 1` values (`t = 0` through
/// `t = horizon` inclusive): `out_trace` the trace and `out_lambda_max`
/// the largest eigenvalue of each covariance.
///
/// # Safety
///
/// `system` must be a live handle; `p0` must be null or reference `n*n`
/// doubles; non-null outputs must reference `horizon + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn rre_simulate(
    system: *const RreSystem,
    gamma_bar: f64,
    seed: u64,
    horizon: usize,
    p0: *const f64,
    out_trace: *mut f64,
    out_lambda_max: *mut f64,
) -> RreStatus {
    guard(|| {
        require_nonnull!(system);
        let model = model_ref(system);
        let start = if p0.is_null() {
            model.q().clone()
        } else {
            match read_symmetric(p0, model.dim_n()) {
                Ok(x) => x,
                Err(s) => return s,
            }
        };
        let ap = match ArrivalProcess::new(gamma_bar, seed) {
            Ok(ap) => ap,
            Err(e) => return fail(&e),
        };
        match run_rre(model, &ap, &start, horizon) {
            Ok(traj) => {
                for (t, cov) in traj.covs.iter().enumerate() {
                    if !out_trace.is_null() {
                        *out_trace.add(t) = cov.trace();
                    }
                    if !out_lambda_max.is_null() {
                        *out_lambda_max.add(t) = cov.lambda_max();
                    }
                }
                RreStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Averages the chosen functional of the covariance over
/// `t in (burn_in, horizon]` on one seeded arrival path. Writes the time
/// average to `out_value`; a non-null `out_divergent` receives whether the
/// path showed no sign of settling (in that case the average does not
/// estimate a stationary quantity).
///
/// # Safety
///
/// `system` must be a live handle; `out_value` must be writable; a
/// non-null `out_divergent` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rre_ergodic_average(
    system: *const RreSystem,
    gamma_bar: f64,
    seed: u64,
    burn_in: usize,
    horizon: usize,
    functional: RreFunctional,
    out_value: *mut f64,
    out_divergent: *mut bool,
) -> RreStatus {
    guard(|| {
        require_nonnull!(system);
        require_nonnull!(out_value);
        let model = model_ref(system);
        let ap = match ArrivalProcess::new(gamma_bar, seed) {
            Ok(ap) => ap,
            Err(e) => return fail(&e),
        };
        let h = match functional {
            RreFunctional::Trace => ScalarFunctional::Trace,
            RreFunctional::LambdaMax => ScalarFunctional::LambdaMax,
        };
        match ergodic_average(model, &ap, model.q(), h, burn_in, horizon) {
            Ok(estimate) => {
                *out_value = estimate.value;
                if !out_divergent.is_null() {
                    *out_divergent = estimate.diagnostic.divergent;
                }
                RreStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Enumerates the reachable covariances up to word length `depth`, rooted
/// at the steady-state fixed point, and reports their traces in the
/// enumeration order (root first). Two-call convention: when `buffer` is
/// null the node count is written to `out_count`; otherwise up to
/// `capacity` traces are written and the total count goes to `out_count`
/// (`RRE_STATUS_BUFFER_TOO_SMALL` when `capacity` is insufficient).
/// Pass `dedupe_tol <= 0` or `max_nodes == 0` for the defaults.
///
/// # Safety
///
/// `system` must be a live handle; `out_count` must be writable; a
/// non-null `buffer` must reference `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn rre_support_traces(
    system: *const RreSystem,
    depth: usize,
    dedupe_tol: f64,
    max_nodes: usize,
    buffer: *mut f64,
    capacity: usize,
    out_count: *mut usize,
) -> RreStatus {
    guard(|| {
        require_nonnull!(system);
        require_nonnull!(out_count);
        let model = model_ref(system);
        let dedupe_tol = if dedupe_tol > 0.0 {
            dedupe_tol
        } else {
            rre_core::support::DEFAULT_DEDUPE_TOL
        };
        let max_nodes = if max_nodes > 0 {
            max_nodes
        } else {
            rre_core::support::DEFAULT_MAX_NODES
        };
        let p_star = match solve_dare(model, DEFAULT_DARE_TOL, DEFAULT_DARE_MAX_ITER) {
            Ok(solution) => solution.p_star,
            Err(e) => return fail(&e),
        };
        let atlas = match enumerate_support(model, &p_star, depth, dedupe_tol, max_nodes) {
            Ok(atlas) => atlas,
            Err(e) => return fail(&e),
        };
        *out_count = atlas.len();
        if buffer.is_null() {
            return RreStatus::Ok;
        }
        if capacity < atlas.len() {
            set_last_error(&format!(
                "buffer holds {capacity} values but the atlas has {} nodes",
                atlas.len()
            ));
            return RreStatus::BufferTooSmall;
        }
        for (k, node) in atlas.nodes().iter().enumerate() {
            *buffer.add(k) = node.matrix.trace();
        }
        RreStatus::Ok
    })
}
