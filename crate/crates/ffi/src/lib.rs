//! C interface to the vadtl detector.
//!
//! Every function returns a [`VadtlStatus`]. On failure a message for the
//! calling thread is available from [`vadtl_last_error`]. Models and
//! normalizers are opaque handles released with their `_free` function.
//! Sample and feature buffers are `double`; feature matrices are row-major
//! with [`vadtl_feature_dim`] columns.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ndarray::Array2;
use vadtl::eval::similarity;
use vadtl::features::{compute_centroid, FeatureExtractor, FeatureMatrix, Normalizer, FEATURE_DIM};
use vadtl::network::io::load_model;
use vadtl::network::{predict, NetworkStack};
use vadtl::signal::{AudioSignal, FrameConfig};
use vadtl::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VadtlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    DimensionMismatch = 5,
    InsufficientData = 6,
    /// The output buffer is too small; the required size was still written.
    BufferTooSmall = 7,
    Panic = 8,
}

/// A trained network.
pub struct VadtlModel {
    stack: NetworkStack,
}

/// Per-dimension min-max scaling fitted on a corpus.
pub struct VadtlNormalizer {
    inner: Normalizer,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: VadtlStatus,
    message: String,
}

impl Failure {
    fn new(status: VadtlStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

fn status_of(e: &Error) -> VadtlStatus {
    match e {
        Error::File { source, .. } => status_of(source),
        Error::Io(_) => VadtlStatus::Io,
        Error::MalformedWav(_)
        | Error::UnsupportedEncoding(_)
        | Error::MultiChannel(_)
        | Error::Format(_)
        | Error::Json(_)
        | Error::Csv(_) => VadtlStatus::Format,
        Error::DimensionMismatch { .. } => VadtlStatus::DimensionMismatch,
        Error::SignalTooShort { .. } | Error::Insufficient(_) | Error::Empty(_) => VadtlStatus::InsufficientData,
        _ => VadtlStatus::InvalidArgument,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(status_of(&e), e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VadtlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            VadtlStatus::Ok
        }
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            VadtlStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(VadtlStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    non_null(p, "path")?;
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(VadtlStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn matrix(data: *const f64, rows: usize, dim: usize) -> Result<FeatureMatrix, Failure> {
    let values = slice(data, rows * dim, "features")?.to_vec();
    let values = Array2::from_shape_vec((rows, dim), values)
        .map_err(|e| Failure::new(VadtlStatus::InvalidArgument, e.to_string()))?;
    Ok(FeatureMatrix::unlabeled(values))
}

fn extract(samples: &[f64], sample_rate: u32) -> Result<FeatureMatrix, Failure> {
    if sample_rate == 0 {
        return Err(Failure::new(VadtlStatus::InvalidArgument, "sample rate is zero"));
    }
    Ok(FeatureExtractor::new(sample_rate).extract(&AudioSignal::new(samples.to_vec(), sample_rate))?)
}

/// Message describing the calling thread's most recent failure, or NULL.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn vadtl_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vadtl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length of one feature row.
#[no_mangle]
pub extern "C" fn vadtl_feature_dim() -> usize {
    FEATURE_DIM
}

/// Number of analysis frames in `n_samples` samples at `sample_rate`.
#[no_mangle]
pub extern "C" fn vadtl_frame_count(n_samples: usize, sample_rate: u32) -> usize {
    FrameConfig::for_rate(sample_rate).frame_count(n_samples)
}

/// Extracts the feature matrix of an utterance into `out` (row-major,
/// `capacity` doubles). `*rows_out` receives the frame count. Passing a NULL
/// `out` only computes `*rows_out`.
///
/// # Safety
/// `samples` must point to `n_samples` doubles, `out` (if non-NULL) to
/// `capacity` writable doubles and `rows_out` to a writable `size_t`.
#[no_mangle]
pub unsafe extern "C" fn vadtl_extract_features(
    samples: *const f64,
    n_samples: usize,
    sample_rate: u32,
    out: *mut f64,
    capacity: usize,
    rows_out: *mut usize,
) -> VadtlStatus {
    guard(|| {
        non_null(rows_out, "rows_out")?;
        let m = extract(slice(samples, n_samples, "samples")?, sample_rate)?;
        *rows_out = m.rows();
        if out.is_null() {
            return Ok(());
        }
        let need = m.rows() * m.dim();
        if capacity < need {
            return Err(Failure::new(
                VadtlStatus::BufferTooSmall,
                format!("feature buffer holds {capacity} values, {need} needed"),
            ));
        }
        for (i, v) in m.values.iter().enumerate() {
            *out.add(i) = *v;
        }
        Ok(())
    })
}

/// Loads a model file written by `vadtl run`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn vadtl_model_load(path: *const c_char, out: *mut *mut VadtlModel) -> VadtlStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let stack = load_model(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(VadtlModel { stack }));
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from [`vadtl_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vadtl_model_free(model: *mut VadtlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input dimension of the model, 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vadtl_model_input_dim(model: *const VadtlModel) -> usize {
    model.as_ref().map_or(0, |m| m.stack.input_dim)
}

/// Number of hidden layers, 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vadtl_model_depth(model: *const VadtlModel) -> usize {
    model.as_ref().map_or(0, |m| m.stack.depth())
}

/// Speech probabilities (and optionally 0/1 labels) for `rows` normalized
/// feature rows of width `dim`.
///
/// # Safety
/// `features` must point to `rows * dim` doubles, `probabilities` to `rows`
/// writable doubles and `labels` to NULL or `rows` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn vadtl_model_predict(
    model: *const VadtlModel,
    features: *const f64,
    rows: usize,
    dim: usize,
    probabilities: *mut f64,
    labels: *mut u8,
) -> VadtlStatus {
    guard(|| {
        non_null(model, "model")?;
        if rows > 0 {
            non_null(probabilities, "probabilities")?;
        }
        let m = matrix(features, rows, dim)?;
        let p = predict(&(*model).stack, &m)?;
        for i in 0..rows {
            *probabilities.add(i) = p.probabilities[i];
            if !labels.is_null() {
                *labels.add(i) = p.labels[i].is_speech() as u8;
            }
        }
        Ok(())
    })
}

/// Loads a normalizer CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn vadtl_normalizer_load(path: *const c_char, out: *mut *mut VadtlNormalizer) -> VadtlStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let inner = Normalizer::load_csv(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(VadtlNormalizer { inner }));
        Ok(())
    })
}

/// Releases a normalizer. NULL is ignored.
///
/// # Safety
/// `norm` must come from [`vadtl_normalizer_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vadtl_normalizer_free(norm: *mut VadtlNormalizer) {
    if !norm.is_null() {
        drop(Box::from_raw(norm));
    }
}

/// Scales `rows` rows of width `dim` in place.
///
/// # Safety
/// `data` must point to `rows * dim` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vadtl_normalizer_apply(
    norm: *const VadtlNormalizer,
    data: *mut f64,
    rows: usize,
    dim: usize,
) -> VadtlStatus {
    guard(|| {
        non_null(norm, "normalizer")?;
        let n = &(*norm).inner;
        if dim != n.dim() {
            return Err(Error::DimensionMismatch {
                expected: n.dim(),
                found: dim,
            }
            .into());
        }
        if rows == 0 {
            return Ok(());
        }
        non_null(data, "data")?;
        let all = std::slice::from_raw_parts_mut(data, rows * dim);
        for row in all.chunks_mut(dim) {
            n.apply_slice(row)?;
        }
        Ok(())
    })
}

/// Frame decisions for raw audio: extraction, scaling with `norm` and
/// prediction with `model`. `*frames_out` receives the frame count; the
/// labels (0/1) go to `labels`, which holds `capacity` bytes. Passing a
/// NULL `labels` only computes `*frames_out`.
///
/// # Safety
/// Pointers must satisfy the same rules as in the functions above.
#[no_mangle]
pub unsafe extern "C" fn vadtl_detect(
    model: *const VadtlModel,
    norm: *const VadtlNormalizer,
    samples: *const f64,
    n_samples: usize,
    sample_rate: u32,
    labels: *mut u8,
    capacity: usize,
    frames_out: *mut usize,
) -> VadtlStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(norm, "normalizer")?;
        non_null(frames_out, "frames_out")?;
        let raw = extract(slice(samples, n_samples, "samples")?, sample_rate)?;
        *frames_out = raw.rows();
        if labels.is_null() {
            return Ok(());
        }
        if capacity < raw.rows() {
            return Err(Failure::new(
                VadtlStatus::BufferTooSmall,
                format!("label buffer holds {capacity} frames, {} needed", raw.rows()),
            ));
        }
        let scaled = (*norm).inner.apply(&raw)?;
        let p = predict(&(*model).stack, &scaled)?;
        for (i, l) in p.labels.iter().enumerate() {
            *labels.add(i) = l.is_speech() as u8;
        }
        Ok(())
    })
}

/// Similarity of two corpora from their normalized feature rows, computed
/// on the rows' centroids.
///
/// # Safety
/// `a` must point to `rows_a * dim` doubles, `b` to `rows_b * dim` and `out`
/// to a writable double.
#[no_mangle]
pub unsafe extern "C" fn vadtl_similarity(
    a: *const f64,
    rows_a: usize,
    b: *const f64,
    rows_b: usize,
    dim: usize,
    out: *mut f64,
) -> VadtlStatus {
    guard(|| {
        non_null(out, "out")?;
        let ca = compute_centroid(&matrix(a, rows_a, dim)?)?;
        let cb = compute_centroid(&matrix(b, rows_b, dim)?)?;
        *out = similarity(&ca, &cb)?;
        Ok(())
    })
}
