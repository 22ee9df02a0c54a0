//! C ABI over [`renewmed`].
//!
//! A stream is an opaque `RmStream*` created by [`rm_stream_new`] or
//! [`rm_stream_load`] and released with [`rm_stream_free`]. Every fallible
//! call returns an [`RmStatus`] whose value matches the CLI exit code for the
//! same failure; the message of the most recent failure on the calling thread
//! is available from [`rm_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use renewmed::engine::{load_checkpoint, save_checkpoint, MediationStream, OutcomeModel, RawBatch, StreamConfig};
use renewmed::mediation::{test_mediator, Regime, TestConfig};
use renewmed::{Error, ModelDims};

/// Opaque stream handle.
pub struct RmStream {
    inner: MediationStream,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmStatus {
    Ok = 0,
    /// Bad arguments, malformed data or configuration.
    Input = 2,
    /// Not enough observations yet.
    NotReady = 3,
    /// Singular design, non-convergence, separation or degenerate inference.
    Numerical = 4,
    /// Corrupt or incompatible checkpoint.
    Integrity = 5,
    /// Unexpected internal failure.
    Internal = 70,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmModel {
    Linear = 0,
    Logistic = 1,
}

/// Direct-effect estimate and stream metadata.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RmSummary {
    pub gamma_hat: f64,
    pub gamma_se: f64,
    pub n_total: u64,
    pub batch_count: u64,
    pub degenerate_fit: bool,
}

/// Test results for one mediator.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RmTestResult {
    pub product_hat: f64,
    pub sigma_product: f64,
    pub t_alpha: f64,
    pub t_beta: f64,
    pub t_sobel: f64,
    pub large_t: bool,
    pub p_sobel: f64,
    pub p_asobel: f64,
    pub p_js: f64,
    pub p_ajs: f64,
    pub ci_sobel_lower: f64,
    pub ci_sobel_upper: f64,
    pub ci_asobel_lower: f64,
    pub ci_asobel_upper: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RmStatus {
    match e.exit_code() {
        3 => RmStatus::NotReady,
        4 => RmStatus::Numerical,
        5 => RmStatus::Integrity,
        _ => RmStatus::Input,
    }
}

fn guard<F: FnOnce() -> Result<(), Error>>(f: F) -> RmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RmStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            RmStatus::Internal
        }
    }
}

fn null_arg(name: &str) -> Error {
    Error::Input(format!("argument '{name}' is null"))
}

unsafe fn stream_ref<'a>(s: *const RmStream) -> Result<&'a RmStream, Error> {
    s.as_ref().ok_or_else(|| null_arg("stream"))
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, Error> {
    if path.is_null() {
        return Err(null_arg("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(Path::new)
        .map_err(|_| Error::Input("path is not valid UTF-8".into()))
}

/// Creates an empty stream. Logistic streams always include an outcome intercept.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one `RmStream*`.
#[no_mangle]
pub unsafe extern "C" fn rm_stream_new(
    model: RmModel,
    p: usize,
    q: usize,
    intercept: bool,
    out: *mut *mut RmStream,
) -> RmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let model = match model {
            RmModel::Linear => OutcomeModel::Linear,
            RmModel::Logistic => OutcomeModel::Logistic,
        };
        let dims = ModelDims::new(p, q).with_intercepts(intercept, intercept);
        let inner = MediationStream::new(StreamConfig::new(model, dims))?;
        *out = Box::into_raw(Box::new(RmStream { inner }));
        Ok(())
    })
}

/// Releases a stream. Null is ignored.
///
/// # Safety
/// `stream` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn rm_stream_free(stream: *mut RmStream) {
    if !stream.is_null() {
        drop(Box::from_raw(stream));
    }
}

/// Folds in `n_rows` observations stored row-major as `Y, X, M1..Mp, Z1..Zq`.
/// On failure the stream is unchanged.
///
/// # Safety
/// `rows` must point to `n_rows * (2 + p + q)` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn rm_stream_update(stream: *mut RmStream, rows: *const f64, n_rows: usize) -> RmStatus {
    guard(|| {
        let s = stream.as_mut().ok_or_else(|| null_arg("stream"))?;
        if rows.is_null() {
            return Err(null_arg("rows"));
        }
        let dims = s.inner.dims();
        let width = dims.raw_width();
        let values = std::slice::from_raw_parts(rows, n_rows * width).to_vec();
        if s.inner.config().model == OutcomeModel::Logistic {
            if let Some(i) = values.chunks_exact(width).position(|r| r[0] != 0.0 && r[0] != 1.0) {
                return Err(Error::Input(format!("logistic outcome must be 0 or 1 (row {})", i + 1)));
            }
        }
        s.inner.update_raw(&RawBatch { n: n_rows, values })
    })
}

/// Number of mediators `p`, or 0 for a null handle.
///
/// # Safety
/// `stream` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rm_stream_num_mediators(stream: *const RmStream) -> usize {
    stream.as_ref().map_or(0, |s| s.inner.dims().p)
}

/// Observations absorbed so far, or 0 for a null handle.
///
/// # Safety
/// `stream` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rm_stream_n_total(stream: *const RmStream) -> u64 {
    stream.as_ref().map_or(0, |s| s.inner.n_total())
}

/// Batches absorbed so far, or 0 for a null handle.
///
/// # Safety
/// `stream` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rm_stream_batch_count(stream: *const RmStream) -> u64 {
    stream.as_ref().map_or(0, |s| s.inner.batch_count())
}

/// Writes the direct effect into `summary` and the per-mediator estimates into
/// the four arrays, each of length `len`, which must equal `p`. Any array
/// pointer may be null to skip it.
///
/// # Safety
/// Non-null pointers must be writable for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn rm_stream_summary(
    stream: *const RmStream,
    summary: *mut RmSummary,
    alpha_hat: *mut f64,
    alpha_se: *mut f64,
    beta_hat: *mut f64,
    beta_se: *mut f64,
    len: usize,
) -> RmStatus {
    guard(|| {
        let s = stream_ref(stream)?;
        if len != s.inner.dims().p {
            return Err(Error::Input(format!("array length {len} does not match p = {}", s.inner.dims().p)));
        }
        let sm = s.inner.summary()?;
        if let Some(out) = summary.as_mut() {
            *out = RmSummary {
                gamma_hat: sm.gamma_hat,
                gamma_se: sm.gamma_se,
                n_total: sm.n_total,
                batch_count: sm.batch_count,
                degenerate_fit: sm.degenerate_fit,
            };
        }
        for (dst, src) in [
            (alpha_hat, &sm.alpha_hat),
            (alpha_se, &sm.alpha_se),
            (beta_hat, &sm.beta_hat),
            (beta_se, &sm.beta_se),
        ] {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), dst, len);
            }
        }
        Ok(())
    })
}

/// Runs the four tests for mediator `j` (0-based) at level `delta`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_stream_test(
    stream: *const RmStream,
    j: usize,
    delta: f64,
    out: *mut RmTestResult,
) -> RmStatus {
    guard(|| {
        let s = stream_ref(stream)?;
        let out = out.as_mut().ok_or_else(|| null_arg("out"))?;
        let cfg = TestConfig {
            delta,
            ..TestConfig::default()
        };
        let r = test_mediator(&s.inner.summary()?, j, &cfg)?;
        *out = RmTestResult {
            product_hat: r.product_hat,
            sigma_product: r.sigma_product,
            t_alpha: r.t_alpha,
            t_beta: r.t_beta,
            t_sobel: r.t_sobel,
            large_t: r.regime == Regime::LargeT,
            p_sobel: r.p_sobel,
            p_asobel: r.p_asobel,
            p_js: r.p_js,
            p_ajs: r.p_ajs,
            ci_sobel_lower: r.ci_sobel.lower,
            ci_sobel_upper: r.ci_sobel.upper,
            ci_asobel_lower: r.ci_asobel.lower,
            ci_asobel_upper: r.ci_asobel.upper,
        };
        Ok(())
    })
}

/// Writes a checkpoint atomically.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn rm_stream_save(stream: *const RmStream, path: *const c_char) -> RmStatus {
    guard(|| save_checkpoint(&stream_ref(stream)?.inner, path_arg(path)?))
}

/// Restores a stream from a checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_stream_load(path: *const c_char, out: *mut *mut RmStream) -> RmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let inner = load_checkpoint(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(RmStream { inner }));
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// NUL-terminated) and returns the full message length plus one. Returns 0 if
/// there is no message.
///
/// # Safety
/// `buf` must be null or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn rm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}
