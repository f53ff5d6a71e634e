//! C interface to the `qbd-poisson` solver.
//!
//! Problems and solutions are opaque handles created and released by this
//! library. Every fallible function returns a [`QbdStatus`]; on failure a
//! description is available from [`qbd_last_error_message`] on the same thread.
//! Matrices cross the boundary as row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qbd_poisson::linalg::{Mat, Vector};
use qbd_poisson::model::{self, DEFAULT_STOCHASTIC_TOL};
use qbd_poisson::poisson::{self, PoissonOptions, PoissonSolution, YPerp};
use qbd_poisson::qme::{self, Classification, QmeOptions, QmeSolutions};
use qbd_poisson::{cli, Error, QbdModel, RhsSpec};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QbdStatus {
    Ok = 0,
    /// Malformed document, wrong dimensions or a non-stochastic model.
    Validation = 1,
    /// A numerical step failed (no convergence, singular matrix, residual check).
    Numerical = 2,
    /// The requested boundary constraint cannot be met.
    Infeasible = 3,
    NullPointer = 10,
    InvalidArgument = 11,
    /// An internal panic was caught at the boundary.
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QbdClass {
    PositiveRecurrent = 0,
    NullRecurrent = 1,
    Transient = 2,
}

impl From<Classification> for QbdClass {
    fn from(c: Classification) -> Self {
        match c {
            Classification::PositiveRecurrent => QbdClass::PositiveRecurrent,
            Classification::NullRecurrent => QbdClass::NullRecurrent,
            Classification::Transient => QbdClass::Transient,
        }
    }
}

/// `y_perp` chosen with minimal norm.
pub const QBD_Y_PERP_MINIMAL_NORM: i32 = 0;
/// `y_perp = 0`; needs `pi^T g = 0` on recurrent chains.
pub const QBD_Y_PERP_ZERO: i32 = 1;

/// Options for [`qbd_solve`]. Start from [`qbd_solve_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QbdSolveOptions {
    /// Highest level evaluated; 0 selects the default (support of g plus 10).
    pub levels: usize,
    /// Additive constant of recurrent solutions.
    pub alpha: f64,
    /// One of `QBD_Y_PERP_*`.
    pub y_perp: i32,
    /// Relative tolerance of the residual check.
    pub residual_tol: f64,
    /// Zero threshold of the spectral split; non-positive selects the default.
    pub eps_zero: f64,
    /// Nonzero: a failed residual check is reported as a numerical failure.
    pub strict: i32,
}

/// A validated model together with its forcing term.
pub struct QbdProblem {
    model: QbdModel,
    rhs: RhsSpec,
}

pub struct QbdSolution {
    inner: PoissonSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(QbdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            1 => QbdStatus::Validation,
            3 => QbdStatus::Infeasible,
            _ => QbdStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(QbdStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(QbdStatus::InvalidArgument, message.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QbdStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QbdStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QbdStatus::Panic
        }
    }
}

fn boxed<T>(out: *mut *mut T, value: T) {
    // SAFETY: callers check `out` for null before computing `value`.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

unsafe fn square(ptr: *const f64, m: usize, name: &str) -> Result<Mat, Failure> {
    if ptr.is_null() {
        return Err(null(name));
    }
    let data = std::slice::from_raw_parts(ptr, m * m);
    Ok(Mat::from_row_slice(m, m, data))
}

/// Parses a problem document (UTF-8 JSON) and validates the model.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qbd_problem_from_json(json: *const c_char, out: *mut *mut QbdProblem) -> QbdStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| Failure(QbdStatus::Validation, format!("not UTF-8: {e}")))?;
        let (model, rhs) = model::load_problem(text)?;
        boxed(out, QbdProblem { model, rhs });
        Ok(())
    })
}

/// Builds a problem from row-major `m x m` blocks and `g_blocks` forcing
/// vectors of length `m` stored back to back in `g`.
///
/// # Safety
/// Each block pointer must reference `m * m` doubles, `g` must reference
/// `g_blocks * m` doubles and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qbd_problem_from_blocks(
    m: usize,
    b: *const f64,
    a_minus: *const f64,
    a0: *const f64,
    a1: *const f64,
    g: *const f64,
    g_blocks: usize,
    out: *mut *mut QbdProblem,
) -> QbdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if m == 0 || g_blocks == 0 {
            return Err(invalid("m and g_blocks must be positive"));
        }
        if g.is_null() {
            return Err(null("g"));
        }
        let model = QbdModel::new(
            square(b, m, "B")?,
            square(a_minus, m, "A_minus")?,
            square(a0, m, "A0")?,
            square(a1, m, "A1")?,
            DEFAULT_STOCHASTIC_TOL,
        )?;
        let flat = std::slice::from_raw_parts(g, g_blocks * m);
        let rhs = RhsSpec::new(flat.chunks(m).map(Vector::from_column_slice).collect(), m)?;
        boxed(out, QbdProblem { model, rhs });
        Ok(())
    })
}

/// Releases a problem; null is ignored.
///
/// # Safety
/// `problem` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qbd_problem_free(problem: *mut QbdProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of phases `m`, 0 for null.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qbd_problem_phases(problem: *const QbdProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.model.m())
}

/// Classifies the chain; `drift` may be null.
///
/// # Safety
/// `problem` must be a live handle, `class_out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qbd_classify(problem: *const QbdProblem, class_out: *mut QbdClass, drift: *mut f64) -> QbdStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if class_out.is_null() {
            return Err(null("class_out"));
        }
        let sols = QmeSolutions::compute(&p.model, &QmeOptions::default())?;
        *class_out = sols.classification.into();
        if !drift.is_null() {
            *drift = qme::drift(&p.model)?;
        }
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn qbd_solve_options_default() -> QbdSolveOptions {
    let d = PoissonOptions::default();
    QbdSolveOptions {
        levels: 0,
        alpha: d.alpha,
        y_perp: QBD_Y_PERP_MINIMAL_NORM,
        residual_tol: d.residual_tol,
        eps_zero: 0.0,
        strict: 0,
    }
}

fn to_options(o: &QbdSolveOptions) -> Result<PoissonOptions, Failure> {
    let y_perp = match o.y_perp {
        QBD_Y_PERP_MINIMAL_NORM => YPerp::MinimalNorm,
        QBD_Y_PERP_ZERO => YPerp::Zero,
        other => return Err(invalid(format!("unknown y_perp mode {other}"))),
    };
    if o.residual_tol.is_nan() || o.residual_tol <= 0.0 || !o.alpha.is_finite() {
        return Err(invalid("residual_tol must be positive and alpha finite"));
    }
    Ok(PoissonOptions {
        levels: (o.levels > 0).then_some(o.levels),
        alpha: o.alpha,
        y_perp,
        eps_zero: (o.eps_zero > 0.0).then_some(o.eps_zero),
        residual_tol: o.residual_tol,
        ..PoissonOptions::default()
    })
}

/// Solves the Poisson equation. `options` may be null for the defaults.
///
/// # Safety
/// `problem` must be a live handle, `options` null or valid, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qbd_solve(
    problem: *const QbdProblem,
    options: *const QbdSolveOptions,
    out: *mut *mut QbdSolution,
) -> QbdStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let raw = options.as_ref().copied().unwrap_or_else(|| qbd_solve_options_default());
        let opts = to_options(&raw)?;
        let sol = poisson::solve(&p.model, &p.rhs, &opts)?;
        let failed = !sol.residuals.pass;
        let message = format!("residual check failed: {:e} > {:e}", sol.residuals.max_residual, sol.residuals.tol * sol.residuals.scale);
        boxed(out, QbdSolution { inner: sol });
        if failed && raw.strict != 0 {
            return Err(Failure(QbdStatus::Numerical, message));
        }
        Ok(())
    })
}

/// Releases a solution; null is ignored.
///
/// # Safety
/// `solution` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qbd_solution_free(solution: *mut QbdSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Number of levels `u_0 .. u_R` in the solution, 0 for null.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qbd_solution_levels(solution: *const QbdSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.u.len())
}

/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qbd_solution_phases(solution: *const QbdSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.x.len())
}

/// # Safety
/// `solution` must be a live handle, `class_out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qbd_solution_class(solution: *const QbdSolution, class_out: *mut QbdClass) -> QbdStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if class_out.is_null() {
            return Err(null("class_out"));
        }
        *class_out = s.inner.classification.into();
        Ok(())
    })
}

/// Copies `u` level by level (`levels * phases` doubles) into `out`.
///
/// # Safety
/// `out` must reference at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qbd_solution_copy_u(solution: *const QbdSolution, out: *mut f64, len: usize) -> QbdStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let need = s.inner.u.len() * s.inner.x.len();
        if len < need {
            return Err(invalid(format!("buffer holds {len} values, {need} needed")));
        }
        let dst = std::slice::from_raw_parts_mut(out, need);
        for (chunk, level) in dst.chunks_mut(s.inner.x.len()).zip(&s.inner.u) {
            chunk.copy_from_slice(level.as_slice());
        }
        Ok(())
    })
}

/// Largest boundary or interior residual, NaN for null.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qbd_solution_max_residual(solution: *const QbdSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.inner.residuals.max_residual)
}

/// Solution document as JSON; release with [`qbd_string_free`]. Null on failure.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qbd_solution_to_json(solution: *const QbdSolution) -> *mut c_char {
    let mut text = ptr::null_mut();
    let status = guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let json = cli::solution_json(&s.inner).to_string();
        text = CString::new(json).map_err(|e| invalid(e.to_string()))?.into_raw();
        Ok(())
    });
    if status == QbdStatus::Ok {
        text
    } else {
        ptr::null_mut()
    }
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn qbd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn qbd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
