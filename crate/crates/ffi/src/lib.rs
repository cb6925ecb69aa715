//! C ABI over the `logconcave` crate.
//!
//! Samples and fits are opaque heap handles created by `lc_*_new`/`lc_fit`
//! and released with the matching `_free`. Every fallible function returns
//! an [`LcStatus`] and writes its result through an out-pointer; on failure
//! [`lc_last_error_message`] describes the error. Panics never cross the
//! boundary and are reported as [`LcStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use logconcave::tails::{chernov_h, nu};
use logconcave::{certify, fit_mle, CertTolerances, Error, LogConcaveFit, SolverConfig, SortedSample};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Domain = 3,
    NotConverged = 4,
    Quadrature = 5,
    Parse = 6,
    Io = 7,
    TooManyFailures = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Certificate residuals of a fit, see `lc_certify`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcCertificate {
    pub max_violation_char1: f64,
    pub max_eq_residual_char1: f64,
    pub max_violation_char2: f64,
    pub pass: bool,
}

/// Opaque sorted, tie-merged sample.
pub struct LcSample {
    inner: SortedSample,
}

/// Opaque fitted log-concave density.
pub struct LcFit {
    inner: LogConcaveFit,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> LcStatus {
    match err {
        Error::InvalidInput(_) => LcStatus::InvalidInput,
        Error::Domain(_) => LcStatus::Domain,
        Error::NotConverged { .. } => LcStatus::NotConverged,
        Error::Quadrature { .. } => LcStatus::Quadrature,
        Error::TooManyFailures { .. } => LcStatus::TooManyFailures,
        Error::Parse { .. } => LcStatus::Parse,
        Error::Io(_) => LcStatus::Io,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), (LcStatus, String)>>(f: F) -> LcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LcStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (LcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LcStatus, String) {
    (LcStatus::NullPointer, format!("{what} is null"))
}

/// Message for the last failed call on this thread. Empty if none failed.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn lc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a sample from `len` observations.
///
/// # Safety
/// `values` must point to `len` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_sample_new(values: *const f64, len: usize, out: *mut *mut LcSample) -> LcStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let xs = std::slice::from_raw_parts(values, len);
        let inner = SortedSample::new(xs).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LcSample { inner }));
        Ok(())
    })
}

/// # Safety
/// `sample` must be null or a handle from `lc_sample_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lc_sample_free(sample: *mut LcSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Fits the log-concave MLE with default solver settings.
///
/// # Safety
/// `sample` must be a live sample handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lc_fit(sample: *const LcSample, out: *mut *mut LcFit) -> LcStatus {
    guard(|| {
        let sample = sample.as_ref().ok_or_else(|| null("sample"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = fit_mle(&sample.inner, &SolverConfig::default()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LcFit { inner }));
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a handle from `lc_fit` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lc_fit_free(fit: *mut LcFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be a live fit handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lc_fit_knot_count(fit: *const LcFit, out: *mut usize) -> LcStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| null("fit"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = fit.inner.knots().len();
        Ok(())
    })
}

/// Copies knot positions and log-density values into caller buffers of
/// `capacity` doubles each. Either buffer may be null to skip it.
///
/// # Safety
/// Non-null buffers must hold `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lc_fit_knots(fit: *const LcFit, knots: *mut f64, values: *mut f64, capacity: usize) -> LcStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| null("fit"))?;
        let m = fit.inner.knots().len();
        if capacity < m {
            return Err((
                LcStatus::BufferTooSmall,
                format!("buffer holds {capacity} values, fit has {m} knots"),
            ));
        }
        if !knots.is_null() {
            ptr::copy_nonoverlapping(fit.inner.knots().as_ptr(), knots, m);
        }
        if !values.is_null() {
            ptr::copy_nonoverlapping(fit.inner.values().as_ptr(), values, m);
        }
        Ok(())
    })
}

unsafe fn eval_with<F>(fit: *const LcFit, out: *mut f64, f: F) -> LcStatus
where
    F: FnOnce(&LogConcaveFit) -> Result<f64, Error>,
{
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| null("fit"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = f(&fit.inner).map_err(lib_err)?;
        Ok(())
    })
}

/// `phi_hat(x)`, `-inf` outside the sample hull.
///
/// # Safety
/// `fit` must be a live fit handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lc_fit_eval_phi(fit: *const LcFit, x: f64, out: *mut f64) -> LcStatus {
    eval_with(fit, out, |f| Ok(f.eval_phi(x)))
}

/// `phi_hat'(x+)`; `LC_STATUS_DOMAIN` left of the hull.
///
/// # Safety
/// `fit` must be a live fit handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lc_fit_eval_phi_rderiv(fit: *const LcFit, x: f64, out: *mut f64) -> LcStatus {
    eval_with(fit, out, |f| f.eval_phi_rderiv(x))
}

/// # Safety
/// `fit` must be a live fit handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lc_fit_cdf(fit: *const LcFit, x: f64, out: *mut f64) -> LcStatus {
    eval_with(fit, out, |f| Ok(f.cdf(x)))
}

/// # Safety
/// `fit` must be a live fit handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lc_fit_mean_excess(fit: *const LcFit, x: f64, out: *mut f64) -> LcStatus {
    eval_with(fit, out, |f| Ok(f.mean_excess(x)))
}

/// Certifies `fit` against `sample` with the default tolerances.
///
/// # Safety
/// `fit` and `sample` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lc_certify(fit: *const LcFit, sample: *const LcSample, out: *mut LcCertificate) -> LcStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| null("fit"))?;
        let sample = sample.as_ref().ok_or_else(|| null("sample"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = certify(&fit.inner, &sample.inner, &CertTolerances::default());
        *out = LcCertificate {
            max_violation_char1: r.max_violation_char1,
            max_eq_residual_char1: r.max_eq_residual_char1,
            max_violation_char2: r.max_violation_char2,
            pass: r.pass,
        };
        Ok(())
    })
}

/// Mean of the log-linear density `e^{tu}` on `[0, 1]`.
#[no_mangle]
pub extern "C" fn lc_nu(t: f64) -> f64 {
    nu(t)
}

/// `t - log(1 + t)` for `t > -1`, `+inf` otherwise.
#[no_mangle]
pub extern "C" fn lc_chernov_h(t: f64) -> f64 {
    chernov_h(t)
}
