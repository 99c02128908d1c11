//! C ABI over the `subslope` library.
//!
//! Objects are opaque handles created by `*_new` functions and released
//! with the matching `*_free`. Every fallible call returns a
//! [`SubslopeStatus`]; on failure the message is kept per thread and can
//! be copied out with [`subslope_last_error_message`]. Output pointers are
//! written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use subslope::config::ProblemConfig;
use subslope::continuity::run_path;
use subslope::grid::{GridGeometry, HermitianField, ScalarField};
use subslope::linalg::CMatrix;
use subslope::subsolution::is_c_subsolution;
use subslope::symmetric::{sigma, DhymBranch, OperatorSpec};
use subslope::{io, Equation, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubslopeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutsideCone = 3,
    NotSubsolution = 4,
    SolverFailure = 5,
    MonitorBreach = 6,
    Config = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubslopeDhymBranch {
    Hypercritical = 0,
    Supercritical = 1,
    Full = 2,
}

pub struct SubslopeGeometry(Arc<GridGeometry>);
pub struct SubslopeOperator(OperatorSpec);
pub struct SubslopeEquation(Equation);
pub struct SubslopeField(ScalarField);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> SubslopeStatus {
    match err {
        Error::OutsideCone { .. } | Error::ConeViolation { .. } | Error::InadmissibleManufactured(_) => {
            SubslopeStatus::OutsideCone
        }
        Error::NotSubsolution { .. } => SubslopeStatus::NotSubsolution,
        Error::SingularLinearization { .. }
        | Error::StepFailure { .. }
        | Error::PathFailure { .. }
        | Error::NoAdmissibleTrial { .. } => SubslopeStatus::SolverFailure,
        Error::MonitorBreach { .. } => SubslopeStatus::MonitorBreach,
        Error::Config { .. } | Error::Expression { .. } => SubslopeStatus::Config,
        Error::Io(_) => SubslopeStatus::Io,
        _ => SubslopeStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), SubslopeStatus>) -> SubslopeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SubslopeStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            SubslopeStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, SubslopeStatus>;
}

impl<T> OrStatus<T> for subslope::Result<T> {
    fn or_status(self) -> Result<T, SubslopeStatus> {
        self.map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), SubslopeStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        Err(SubslopeStatus::NullPointer)
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], SubslopeStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, SubslopeStatus> {
    non_null(p, what)?;
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        SubslopeStatus::InvalidArgument
    })
}

fn boxed<T>(v: T, out: *mut *mut T) {
    // SAFETY: callers check `out` before building the value.
    unsafe { *out = Box::into_raw(Box::new(v)) };
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// including the terminator, or 0 when there is no message.
///
/// # Safety
/// `buf` must be null or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn subslope_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Creates a torus geometry. `shape` lists grid counts for the 2n real
/// coordinates x1 y1 x2 y2 …; use 1 for an inactive coordinate.
///
/// # Safety
/// `shape` must point to `shape_len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subslope_geometry_new(
    n: usize,
    shape: *const usize,
    shape_len: usize,
    out: *mut *mut SubslopeGeometry,
) -> SubslopeStatus {
    guard(|| {
        non_null(out, "out")?;
        let shape = slice(shape, shape_len, "shape")?.to_vec();
        let g = GridGeometry::new(n, shape).or_status()?;
        boxed(SubslopeGeometry(Arc::new(g)), out);
        Ok(())
    })
}

/// Number of grid points, or 0 for a null handle.
///
/// # Safety
/// `geom` must be null or a live geometry handle.
#[no_mangle]
pub unsafe extern "C" fn subslope_geometry_len(geom: *const SubslopeGeometry) -> usize {
    geom.as_ref().map_or(0, |g| g.0.len())
}

/// # Safety
/// `geom` must be null or a handle from [`subslope_geometry_new`].
#[no_mangle]
pub unsafe extern "C" fn subslope_geometry_free(geom: *mut SubslopeGeometry) {
    if !geom.is_null() {
        drop(Box::from_raw(geom));
    }
}

/// ln(σ_k/C(n,k)) − ln(σ_l/C(n,l)) on the Gårding cone Γ_k.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subslope_operator_quotient(
    n: usize,
    k: usize,
    l: usize,
    out: *mut *mut SubslopeOperator,
) -> SubslopeStatus {
    guard(|| {
        non_null(out, "out")?;
        boxed(SubslopeOperator(OperatorSpec::quotient(n, k, l).or_status()?), out);
        Ok(())
    })
}

/// Σ arctan λ on the chosen phase branch.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subslope_operator_dhym(
    n: usize,
    branch: SubslopeDhymBranch,
    out: *mut *mut SubslopeOperator,
) -> SubslopeStatus {
    guard(|| {
        non_null(out, "out")?;
        let branch = match branch {
            SubslopeDhymBranch::Hypercritical => DhymBranch::Hypercritical,
            SubslopeDhymBranch::Supercritical => DhymBranch::Supercritical,
            SubslopeDhymBranch::Full => DhymBranch::Full,
        };
        boxed(SubslopeOperator(OperatorSpec::dhym(n, branch).or_status()?), out);
        Ok(())
    })
}

/// # Safety
/// `op` must be null or a handle from an operator constructor.
#[no_mangle]
pub unsafe extern "C" fn subslope_operator_free(op: *mut SubslopeOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Elementary symmetric polynomial σ_k(λ).
///
/// # Safety
/// `lambda` must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subslope_sigma(k: usize, lambda: *const f64, n: usize, out: *mut f64) -> SubslopeStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = sigma(k, slice(lambda, n, "lambda")?).or_status()?;
        Ok(())
    })
}

unsafe fn op_and_lambda<'a>(
    op: *const SubslopeOperator,
    lambda: *const f64,
    n: usize,
) -> Result<(&'a OperatorSpec, &'a [f64]), SubslopeStatus> {
    non_null(op, "op")?;
    Ok((&(*op).0, slice(lambda, n, "lambda")?))
}

/// f(λ); fails with `OUTSIDE_CONE` outside the operator's cone.
///
/// # Safety
/// `op` must be live, `lambda` must point to `n` values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn subslope_f_eval(
    op: *const SubslopeOperator,
    lambda: *const f64,
    n: usize,
    out: *mut f64,
) -> SubslopeStatus {
    guard(|| {
        non_null(out, "out")?;
        let (op, lambda) = op_and_lambda(op, lambda, n)?;
        *out = op.f_eval(lambda).or_status()?;
        Ok(())
    })
}

/// ∂f/∂λᵢ written to `grad_out[0..n]`.
///
/// # Safety
/// `op` must be live; `lambda` and `grad_out` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn subslope_f_grad(
    op: *const SubslopeOperator,
    lambda: *const f64,
    n: usize,
    grad_out: *mut f64,
) -> SubslopeStatus {
    guard(|| {
        non_null(grad_out, "grad_out")?;
        let (op, lambda) = op_and_lambda(op, lambda, n)?;
        let g = op.f_grad(lambda).or_status()?;
        ptr::copy_nonoverlapping(g.as_ptr(), grad_out, g.len());
        Ok(())
    })
}

/// min over i of lim f as λᵢ → +∞; writes +INFINITY when unbounded.
///
/// # Safety
/// `op` must be live, `lambda` must point to `n` values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn subslope_f_infinity(
    op: *const SubslopeOperator,
    lambda: *const f64,
    n: usize,
    out: *mut f64,
) -> SubslopeStatus {
    guard(|| {
        non_null(out, "out")?;
        let (op, lambda) = op_and_lambda(op, lambda, n)?;
        *out = op.f_infinity(lambda).or_status()?;
        Ok(())
    })
}

/// Builds an equation with constant diagonal background form ω =
/// diag(`omega_diag`) (identity when null) and reference metric χ = I.
///
/// # Safety
/// `op` and `geom` must be live; `omega_diag` null or `n` values; `out`
/// writable. The handles are copied, not borrowed.
#[no_mangle]
pub unsafe extern "C" fn subslope_equation_new(
    op: *const SubslopeOperator,
    geom: *const SubslopeGeometry,
    omega_diag: *const f64,
    out: *mut *mut SubslopeEquation,
) -> SubslopeStatus {
    guard(|| {
        non_null(out, "out")?;
        non_null(op, "op")?;
        non_null(geom, "geom")?;
        let (op, g) = (&(*op).0, &(*geom).0);
        let omega = if omega_diag.is_null() {
            HermitianField::identity(g.clone())
        } else {
            let d = slice(omega_diag, g.n(), "omega_diag")?;
            HermitianField::constant(g.clone(), &CMatrix::from_real_diagonal(d)).or_status()?
        };
        let eq = Equation::new(op.clone(), omega, HermitianField::identity(g.clone())).or_status()?;
        boxed(SubslopeEquation(eq), out);
        Ok(())
    })
}

/// # Safety
/// `eq` must be null or a handle from [`subslope_equation_new`].
#[no_mangle]
pub unsafe extern "C" fn subslope_equation_free(eq: *mut SubslopeEquation) {
    if !eq.is_null() {
        drop(Box::from_raw(eq));
    }
}

/// Real field on `geom` from `len` row-major values.
///
/// # Safety
/// `geom` must be live, `values` must point to `len` values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn subslope_field_new(
    geom: *const SubslopeGeometry,
    values: *const f64,
    len: usize,
    out: *mut *mut SubslopeField,
) -> SubslopeStatus {
    guard(|| {
        non_null(out, "out")?;
        non_null(geom, "geom")?;
        let v = slice(values, len, "values")?.to_vec();
        boxed(SubslopeField(ScalarField::new((*geom).0.clone(), v).or_status()?), out);
        Ok(())
    })
}

/// # Safety
/// `field` must be null or a handle from [`subslope_field_new`].
#[no_mangle]
pub unsafe extern "C" fn subslope_field_free(field: *mut SubslopeField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Evaluates F(u) = f(λ(ω_u)) into `out[0..len]`, where `len` must equal
/// the number of grid points.
///
/// # Safety
/// `eq` and `u` must be live; `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn subslope_equation_evaluate(
    eq: *const SubslopeEquation,
    u: *const SubslopeField,
    out: *mut f64,
    len: usize,
) -> SubslopeStatus {
    guard(|| {
        non_null(eq, "eq")?;
        non_null(u, "u")?;
        non_null(out, "out")?;
        let f = (*eq).0.evaluate(&(*u).0).or_status()?;
        if f.len() != len {
            set_error(format!("output holds {len} values, the grid has {}", f.len()));
            return Err(SubslopeStatus::InvalidArgument);
        }
        ptr::copy_nonoverlapping(f.values().as_ptr(), out, len);
        Ok(())
    })
}

/// Tests u_sub as a C-subsolution of F = h + `shift`: writes the verdict
/// (1 or 0), the minimum margin f_∞(λ) − h − shift and its grid index.
///
/// # Safety
/// `eq`, `u_sub` and `h` must be live; the output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn subslope_check_subsolution(
    eq: *const SubslopeEquation,
    u_sub: *const SubslopeField,
    h: *const SubslopeField,
    shift: f64,
    is_subsolution: *mut c_int,
    min_margin: *mut f64,
    argmin: *mut usize,
) -> SubslopeStatus {
    guard(|| {
        for (p, what) in [
            (eq as *const u8, "eq"),
            (u_sub as *const u8, "u_sub"),
            (h as *const u8, "h"),
            (is_subsolution as *const u8, "is_subsolution"),
            (min_margin as *const u8, "min_margin"),
            (argmin as *const u8, "argmin"),
        ] {
            non_null(p, what)?;
        }
        let eq = &(*eq).0;
        let lambda = eq.admissible_eigenvalues(&(*u_sub).0).or_status()?;
        let check = is_c_subsolution(&eq.op, &lambda, &(*h).0, shift).or_status()?;
        *is_subsolution = c_int::from(check.is_subsolution);
        *min_margin = check.min_margin;
        *argmin = check.argmin;
        Ok(())
    })
}

/// Runs the continuity path for a config file and writes c₁. When
/// `out_dir` is non-null, the sup-normalized φ (raw and CSV) and the
/// monitor log are written there.
///
/// # Safety
/// `config_path` must be a NUL-terminated path, `out_dir` null or one,
/// `c1` writable.
#[no_mangle]
pub unsafe extern "C" fn subslope_solve_config(
    config_path: *const c_char,
    out_dir: *const c_char,
    c1: *mut f64,
) -> SubslopeStatus {
    guard(|| {
        non_null(c1, "c1")?;
        let path = string(config_path, "config_path")?;
        let out = if out_dir.is_null() {
            None
        } else {
            Some(string(out_dir, "out_dir")?)
        };
        let cfg = ProblemConfig::from_file(Path::new(path)).or_status()?;
        let p = cfg.build().or_status()?;
        let outcome = run_path(&p.eq, &p.h, &p.u_bar, &p.u_sub, &cfg.path).or_status()?;
        if let Some(dir) = out {
            let dir = Path::new(dir);
            let write = || -> subslope::Result<()> {
                std::fs::create_dir_all(dir)?;
                let phi = outcome.state.sup_normalized_phi();
                io::write_scalar(&dir.join("phi.f64"), &phi)?;
                std::fs::write(dir.join("phi.csv"), io::scalar_csv(&phi))?;
                std::fs::write(dir.join("monitor.csv"), outcome.monitor_csv())?;
                Ok(())
            };
            write().or_status()?;
        }
        *c1 = outcome.state.c;
        Ok(())
    })
}
