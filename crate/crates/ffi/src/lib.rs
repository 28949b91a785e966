//! C interface to the `hpcalc` engine.
//!
//! Objects cross the boundary as opaque handles created by the constructor,
//! parse and catalog functions and released with the matching `hp_*_free`.
//! Every fallible call returns an [`HpStatus`]; on failure the message is
//! available from [`hp_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hpcalc::calculus::{self, CalculusResult};
use hpcalc::eta::{self, FactorizationCertificate};
use hpcalc::measure::WeightedMeasure;
use hpcalc::operator::OperatorModel;
use hpcalc::symbol::{catalog, HalfPlaneFunction};
use hpcalc::{CMat, Error, C64};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Domain = 4,
    Unbounded = 5,
    Convergence = 6,
    Numerical = 7,
    SupportViolation = 8,
    Unrepresentable = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// Square operator model.
pub struct HpOperator {
    inner: OperatorModel,
}

/// Bounded holomorphic function on a right half-plane.
pub struct HpFunction {
    inner: HalfPlaneFunction,
}

/// Exponentially weighted measure on the half-line.
pub struct HpMeasure {
    inner: WeightedMeasure,
}

/// Square complex matrix produced by the calculus.
pub struct HpMatrix {
    inner: CMat,
    norm: f64,
}

/// Factorization certificate for the convolution constant.
pub struct HpCertificate {
    inner: FactorizationCertificate,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> HpStatus {
    match err {
        Error::Precondition(_) | Error::Usage(_) => HpStatus::InvalidArgument,
        Error::Parse { .. } => HpStatus::Parse,
        Error::Domain(_) | Error::Singularity(_) => HpStatus::Domain,
        Error::Unbounded(_) => HpStatus::Unbounded,
        Error::Convergence(_) | Error::Divergence(_) | Error::Truncation(_) | Error::GridResolution(_) => {
            HpStatus::Convergence
        }
        Error::Overflow(_) | Error::Conditioning(_) | Error::Causality(_) | Error::Io { .. } => HpStatus::Numerical,
        Error::SupportViolation(_) => HpStatus::SupportViolation,
        Error::Recognition(_) => HpStatus::Unrepresentable,
    }
}

enum Failure {
    Status(HpStatus, String),
    Engine(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(HpStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Status(HpStatus::InvalidArgument, msg.into())
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> HpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            HpStatus::Ok
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Engine(e))) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            HpStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn complex_slice(re: *const f64, im: *const f64, n: usize) -> Result<Vec<C64>, Failure> {
    if n == 0 {
        return Err(invalid("length must be positive"));
    }
    if re.is_null() {
        return Err(null("real part"));
    }
    let re = std::slice::from_raw_parts(re, n);
    let im = if im.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(im, n))
    };
    Ok((0..n).map(|i| C64::new(re[i], im.map_or(0.0, |v| v[i]))).collect())
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn clear<T>(out: *mut *mut T) {
    if !out.is_null() {
        *out = ptr::null_mut();
    }
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn matrix_handle(r: CalculusResult) -> HpMatrix {
    HpMatrix {
        norm: r.norm_value,
        inner: r.matrix,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hp_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Diagonal operator with entries `re[i] + i im[i]`. `im` may be null.
///
/// # Safety
/// `re` (and `im` when non-null) must point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn hp_operator_diagonal(
    re: *const f64,
    im: *const f64,
    n: usize,
    out: *mut *mut HpOperator,
) -> HpStatus {
    clear(out);
    guard(|| {
        let values = complex_slice(re, im, n)?;
        store(
            out,
            HpOperator {
                inner: OperatorModel::diagonal(values)?,
            },
        )
    })
}

/// Dense operator from `n * n` row-major entries. `im` may be null.
///
/// # Safety
/// `re` (and `im` when non-null) must point to `n * n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn hp_operator_dense(
    re: *const f64,
    im: *const f64,
    n: usize,
    out: *mut *mut HpOperator,
) -> HpStatus {
    clear(out);
    guard(|| {
        let len = n.checked_mul(n).ok_or_else(|| invalid("dimension overflow"))?;
        let values = complex_slice(re, im, len)?;
        let m = CMat::from_row_slice(n, n, &values);
        store(
            out,
            HpOperator {
                inner: OperatorModel::dense(m)?,
            },
        )
    })
}

/// Single Jordan block of size `n` with eigenvalue `re + i im`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn hp_operator_jordan(re: f64, im: f64, n: usize, out: *mut *mut HpOperator) -> HpStatus {
    clear(out);
    guard(|| {
        store(
            out,
            HpOperator {
                inner: OperatorModel::jordan(C64::new(re, im), n)?,
            },
        )
    })
}

/// Operator from the line-oriented text format (`diagonal`, `dense`,
/// `jordan`, `shifted` blocks).
///
/// # Safety
/// `src` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hp_operator_parse(src: *const c_char, out: *mut *mut HpOperator) -> HpStatus {
    clear(out);
    guard(|| {
        let src = text(src, "operator text")?;
        store(
            out,
            HpOperator {
                inner: OperatorModel::parse(src)?,
            },
        )
    })
}

/// Dimension of the operator, 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_operator_dim(op: *const HpOperator) -> usize {
    op.as_ref().map_or(0, |o| o.inner.dim())
}

/// # Safety
/// `op` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hp_operator_free(op: *mut HpOperator) {
    release(op)
}

/// Function from an expression such as `rpow(add(z,1),-1)`.
///
/// # Safety
/// `src` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hp_function_parse(src: *const c_char, out: *mut *mut HpFunction) -> HpStatus {
    clear(out);
    guard(|| {
        let src = text(src, "expression")?;
        store(
            out,
            HpFunction {
                inner: HalfPlaneFunction::parse(src)?,
            },
        )
    })
}

/// Function from the built-in catalog by name.
///
/// # Safety
/// `name` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hp_function_catalog(name: *const c_char, out: *mut *mut HpFunction) -> HpStatus {
    clear(out);
    guard(|| {
        let name = text(name, "catalog name")?;
        let f = catalog::get(name).ok_or_else(|| invalid(format!("no catalog function named '{name}'")))?;
        store(out, HpFunction { inner: f })
    })
}

/// Supremum of `|f|` on the half-plane `Re z > omega`.
///
/// # Safety
/// `f` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hp_function_sup_norm(f: *const HpFunction, omega: f64, out: *mut f64) -> HpStatus {
    guard(|| {
        let f = borrow(f, "function")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = f.inner.sup_norm(omega)?;
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hp_function_free(f: *mut HpFunction) {
    release(f)
}

/// Measure from its text form, e.g. `atom 1 0.5 0` or `exppoly 0 1,0 0,0 -1,0`.
///
/// # Safety
/// `src` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hp_measure_parse(src: *const c_char, out: *mut *mut HpMeasure) -> HpStatus {
    clear(out);
    guard(|| {
        let src = text(src, "measure text")?;
        store(
            out,
            HpMeasure {
                inner: WeightedMeasure::parse(src)?,
            },
        )
    })
}

/// # Safety
/// `mu` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hp_measure_free(mu: *mut HpMeasure) {
    release(mu)
}

/// `f(A)` through the best available route.
///
/// # Safety
/// `op` and `f` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_apply_function(
    op: *const HpOperator,
    f: *const HpFunction,
    out: *mut *mut HpMatrix,
) -> HpStatus {
    clear(out);
    guard(|| {
        let op = borrow(op, "operator")?;
        let f = borrow(f, "function")?;
        store(out, matrix_handle(calculus::apply_function(&op.inner, &f.inner)?))
    })
}

/// `μ(A) = ∫ T(s) μ(ds)`.
///
/// # Safety
/// `op` and `mu` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_apply_measure(
    op: *const HpOperator,
    mu: *const HpMeasure,
    out: *mut *mut HpMatrix,
) -> HpStatus {
    clear(out);
    guard(|| {
        let op = borrow(op, "operator")?;
        let mu = borrow(mu, "measure")?;
        store(out, matrix_handle(calculus::apply_measure(&op.inner, &mu.inner)?))
    })
}

/// `f(A) (A - λ)^{-α}` with complex `λ` and `α`.
///
/// # Safety
/// `op` and `f` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_apply_smoothed(
    op: *const HpOperator,
    f: *const HpFunction,
    lambda_re: f64,
    lambda_im: f64,
    alpha_re: f64,
    alpha_im: f64,
    out: *mut *mut HpMatrix,
) -> HpStatus {
    clear(out);
    guard(|| {
        let op = borrow(op, "operator")?;
        let f = borrow(f, "function")?;
        let r = calculus::apply_smoothed(
            &op.inner,
            &f.inner,
            C64::new(lambda_re, lambda_im),
            C64::new(alpha_re, alpha_im),
        )?;
        store(out, matrix_handle(r))
    })
}

/// Dimension of the matrix, 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_matrix_dim(m: *const HpMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.nrows())
}

/// Spectral norm of the matrix, NaN for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_matrix_norm(m: *const HpMatrix) -> f64 {
    m.as_ref().map_or(f64::NAN, |m| m.norm)
}

/// Entry `(row, col)`.
///
/// # Safety
/// `m` must be a live handle; `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_matrix_get(
    m: *const HpMatrix,
    row: usize,
    col: usize,
    re: *mut f64,
    im: *mut f64,
) -> HpStatus {
    guard(|| {
        let m = borrow(m, "matrix")?;
        if re.is_null() || im.is_null() {
            return Err(null("output pointer"));
        }
        let n = m.inner.nrows();
        if row >= n || col >= n {
            return Err(invalid(format!("index ({row}, {col}) outside a {n}x{n} matrix")));
        }
        let v = m.inner[(row, col)];
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}

/// Copies all entries row-major into `re` and `im`, each of length `len`.
///
/// # Safety
/// `m` must be a live handle; `re` and `im` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hp_matrix_copy(m: *const HpMatrix, re: *mut f64, im: *mut f64, len: usize) -> HpStatus {
    guard(|| {
        let m = borrow(m, "matrix")?;
        if re.is_null() || im.is_null() {
            return Err(null("output pointer"));
        }
        let n = m.inner.nrows();
        if len < n * n {
            return Err(Failure::Status(
                HpStatus::BufferTooSmall,
                format!("need {} entries, got {len}", n * n),
            ));
        }
        for i in 0..n {
            for j in 0..n {
                let v = m.inner[(i, j)];
                *re.add(i * n + j) = v.re;
                *im.add(i * n + j) = v.im;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hp_matrix_free(m: *mut HpMatrix) {
    release(m)
}

/// Upper and lower bounds for the convolution constant at `(alpha, t, q)`.
///
/// # Safety
/// `upper` and `lower` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_eta_envelope(alpha: f64, t: f64, q: f64, upper: *mut f64, lower: *mut f64) -> HpStatus {
    guard(|| {
        if upper.is_null() || lower.is_null() {
            return Err(null("output pointer"));
        }
        let env = eta::envelope(alpha, t, q)?;
        *upper = env.upper;
        *lower = env.lower;
        Ok(())
    })
}

/// Best certificate found for `(alpha, t, q)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_certificate_best(alpha: f64, t: f64, q: f64, out: *mut *mut HpCertificate) -> HpStatus {
    clear(out);
    guard(|| {
        store(
            out,
            HpCertificate {
                inner: eta::best_certificate(alpha, t, q)?,
            },
        )
    })
}

/// Certified value `‖ψ‖_q ‖φ‖_{q'}`, NaN for a null handle.
///
/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_certificate_value(c: *const HpCertificate) -> f64 {
    c.as_ref().map_or(f64::NAN, |c| c.inner.value)
}

/// Residual bound of the certificate, NaN for a null handle.
///
/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hp_certificate_residual(c: *const HpCertificate) -> f64 {
    c.as_ref().map_or(f64::NAN, |c| c.inner.residual)
}

/// # Safety
/// `c` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hp_certificate_free(c: *mut HpCertificate) {
    release(c)
}
