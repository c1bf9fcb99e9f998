//! C ABI for training and applying minimax risk classifiers.
//!
//! Datasets and models are opaque handles released with their `_free`
//! function. Fallible calls return an [`MrcStatus`]; after a failure,
//! [`mrc_last_error_message`] describes it on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::time::Duration;

use mrc_core::ccg::{self, CcgConfig, Mode};
use mrc_core::dataio::{self, Dataset, LabelColumn};
use mrc_core::features::{self, FeatureMapSpec, StdNormalization};
use mrc_core::model::Model;
use mrc_core::MrcError;

/// Opaque dataset handle.
pub struct MrcDataset {
    inner: Dataset,
}

/// Opaque model handle.
pub struct MrcModel {
    inner: Model,
    names: Vec<CString>,
}

impl MrcModel {
    fn new(inner: Model) -> Self {
        let names = inner
            .label_names
            .iter()
            .map(|n| CString::new(n.replace('\0', "")).unwrap_or_default())
            .collect();
        MrcModel { inner, names }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Shape = 5,
    Config = 6,
    Numerical = 7,
    Unbounded = 8,
    TimeLimit = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrcMode {
    Auto = 0,
    ConstraintsOnly = 1,
    Combined = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrcFeatures {
    Identity = 0,
    Standardize = 1,
    Rff = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MrcTrainOptions {
    pub lambda0: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub n_max: usize,
    pub m_max: usize,
    pub k_max: usize,
    pub mode: MrcMode,
    pub features: MrcFeatures,
    pub rff_dim: usize,
    /// Nonpositive selects the median-distance bandwidth.
    pub rff_sigma: f64,
    pub seed: u64,
    /// Nonpositive disables the limit.
    pub time_limit_seconds: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Core(MrcError),
}

impl From<MrcError> for Failure {
    fn from(e: MrcError) -> Self {
        Failure::Core(e)
    }
}

fn status_of(e: &MrcError) -> MrcStatus {
    match e {
        MrcError::Io { .. } => MrcStatus::Io,
        MrcError::Parse { .. }
        | MrcError::Format { .. }
        | MrcError::NoSamples
        | MrcError::MissingColumn(_)
        | MrcError::Version(_)
        | MrcError::Model(_) => MrcStatus::Parse,
        MrcError::Shape(_) => MrcStatus::Shape,
        MrcError::Config(_) | MrcError::CapExceeded { .. } | MrcError::Init(_) => MrcStatus::Config,
        MrcError::Numerical(_) | MrcError::Internal(_) => MrcStatus::Numerical,
        MrcError::Unbounded(_) => MrcStatus::Unbounded,
        MrcError::TimeLimit(_) => MrcStatus::TimeLimit,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MrcStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MrcStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} is null"));
            MrcStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            MrcStatus::InvalidArgument
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MrcStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &'static str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Failure::Invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<T>(out: *mut *mut T) -> Result<&'static mut *mut T, Failure> {
    if out.is_null() {
        return Err(Failure::Null("output pointer"));
    }
    *out = ptr::null_mut();
    Ok(&mut *out)
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn mrc_status_str(status: MrcStatus) -> *const c_char {
    let s: &'static CStr = match status {
        MrcStatus::Ok => c"ok",
        MrcStatus::NullPointer => c"null pointer argument",
        MrcStatus::InvalidArgument => c"invalid argument",
        MrcStatus::Io => c"i/o error",
        MrcStatus::Parse => c"malformed input",
        MrcStatus::Shape => c"dimension mismatch",
        MrcStatus::Config => c"invalid configuration",
        MrcStatus::Numerical => c"numerical failure",
        MrcStatus::Unbounded => c"problem is unbounded",
        MrcStatus::TimeLimit => c"time limit reached",
        MrcStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Message of the last failure on this thread, or "" if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mrc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn mrc_train_options_default() -> MrcTrainOptions {
    let c = CcgConfig::default();
    MrcTrainOptions {
        lambda0: features::DEFAULT_LAMBDA0,
        eps1: c.eps1,
        eps2: c.eps2,
        n_max: c.n_max,
        m_max: c.m_max,
        k_max: c.k_max,
        mode: MrcMode::Auto,
        features: MrcFeatures::Identity,
        rff_dim: 400,
        rff_sigma: 0.0,
        seed: 0,
        time_limit_seconds: c.time_limit.map_or(0.0, |d| d.as_secs_f64()),
    }
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mrc_dataset_load_libsvm(path: *const c_char, out: *mut *mut MrcDataset) -> MrcStatus {
    guard(|| {
        let out = out_arg(out)?;
        let p = path_arg(path, "path")?;
        let ds = dataio::load_libsvm(&p)?;
        *out = Box::into_raw(Box::new(MrcDataset { inner: ds }));
        Ok(())
    })
}

/// `label_column` is a header name or a 0-based index; null means "label".
///
/// # Safety
/// `path` and a non-null `label_column` must be NUL-terminated strings and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mrc_dataset_load_csv(
    path: *const c_char,
    label_column: *const c_char,
    out: *mut *mut MrcDataset,
) -> MrcStatus {
    guard(|| {
        let out = out_arg(out)?;
        let p = path_arg(path, "path")?;
        let col: LabelColumn = if label_column.is_null() {
            LabelColumn::Name("label".into())
        } else {
            let s = CStr::from_ptr(label_column)
                .to_str()
                .map_err(|_| Failure::Invalid("label column is not valid UTF-8".into()))?;
            s.parse().unwrap()
        };
        let ds = dataio::load_csv(&p, &col)?;
        *out = Box::into_raw(Box::new(MrcDataset { inner: ds }));
        Ok(())
    })
}

/// Builds a dataset from a row-major `n × d` matrix and 0-based labels
/// below `n_classes`. Classes are named "1".."n_classes".
///
/// # Safety
/// `x` must point to `n * d` doubles, `labels` to `n` values and `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mrc_dataset_from_dense(
    x: *const f64,
    n: usize,
    d: usize,
    labels: *const u32,
    n_classes: usize,
    out: *mut *mut MrcDataset,
) -> MrcStatus {
    guard(|| {
        let out = out_arg(out)?;
        if x.is_null() {
            return Err(Failure::Null("x"));
        }
        if labels.is_null() {
            return Err(Failure::Null("labels"));
        }
        let len = n.checked_mul(d).ok_or_else(|| Failure::Invalid("n * d overflows".into()))?;
        let x = std::slice::from_raw_parts(x, len);
        let labels = std::slice::from_raw_parts(labels, n);
        if let Some(&bad) = labels.iter().find(|&&y| y as usize >= n_classes) {
            return Err(Failure::Invalid(format!("label {bad} is not below n_classes = {n_classes}")));
        }
        let rows: Vec<Vec<f64>> = if d == 0 { vec![Vec::new(); n] } else { x.chunks(d).map(<[f64]>::to_vec).collect() };
        let ds = Dataset::from_dense(&rows, labels.iter().map(|&y| y as usize).collect(), n_classes)?;
        *out = Box::into_raw(Box::new(MrcDataset { inner: ds }));
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mrc_dataset_free(ds: *mut MrcDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Returns 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn mrc_dataset_n_samples(ds: *const MrcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_samples())
}

/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn mrc_dataset_n_features(ds: *const MrcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_features())
}

/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn mrc_dataset_n_classes(ds: *const MrcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_classes())
}

fn config_from(o: &MrcTrainOptions) -> CcgConfig {
    CcgConfig {
        eps1: o.eps1,
        eps2: o.eps2,
        n_max: o.n_max,
        m_max: o.m_max,
        k_max: o.k_max,
        mode: match o.mode {
            MrcMode::Auto => None,
            MrcMode::ConstraintsOnly => Some(Mode::ConstraintsOnly),
            MrcMode::Combined => Some(Mode::Combined),
        },
        time_limit: (o.time_limit_seconds > 0.0 && o.time_limit_seconds.is_finite())
            .then(|| Duration::from_secs_f64(o.time_limit_seconds)),
        record_timings: false,
        ..Default::default()
    }
}

/// Trains a model on `ds`. A null `options` uses the defaults.
///
/// # Safety
/// `ds` must be a live dataset handle, `options` null or valid, and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mrc_train(
    ds: *const MrcDataset,
    options: *const MrcTrainOptions,
    out: *mut *mut MrcModel,
) -> MrcStatus {
    guard(|| {
        let out = out_arg(out)?;
        let ds = &ds.as_ref().ok_or(Failure::Null("dataset"))?.inner;
        let opts = options.as_ref().copied().unwrap_or_else(|| mrc_train_options_default());
        let d = ds.n_features();
        let spec = match opts.features {
            MrcFeatures::Identity => FeatureMapSpec::identity(d),
            MrcFeatures::Standardize => FeatureMapSpec::fit_standardize(ds.features()),
            MrcFeatures::Rff => {
                let sigma = if opts.rff_sigma > 0.0 {
                    opts.rff_sigma
                } else {
                    features::median_bandwidth(ds.features(), 1000, opts.seed)
                };
                features::sample_rff(d, opts.rff_dim, sigma, opts.seed)?
            }
        };
        let cfg = config_from(&opts);
        cfg.validate()?;
        let trained = ccg::train(ds, &spec, opts.lambda0, StdNormalization::Population, &cfg)?;
        *out = Box::into_raw(Box::new(MrcModel::new(trained.model)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mrc_model_load(path: *const c_char, out: *mut *mut MrcModel) -> MrcStatus {
    guard(|| {
        let out = out_arg(out)?;
        let p = path_arg(path, "path")?;
        let m = Model::load(&p)?;
        *out = Box::into_raw(Box::new(MrcModel::new(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live model handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mrc_model_save(model: *const MrcModel, path: *const c_char) -> MrcStatus {
    guard(|| {
        let m = model.as_ref().ok_or(Failure::Null("model"))?;
        let p = path_arg(path, "path")?;
        m.inner.save(&p)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mrc_model_free(model: *mut MrcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicts the 0-based class of one raw input of length `len`.
///
/// # Safety
/// `model` must be a live model handle, `x` must point to `len` doubles and
/// `out_label` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mrc_model_predict(
    model: *const MrcModel,
    x: *const f64,
    len: usize,
    out_label: *mut usize,
) -> MrcStatus {
    guard(|| {
        let m = model.as_ref().ok_or(Failure::Null("model"))?;
        if out_label.is_null() {
            return Err(Failure::Null("output pointer"));
        }
        if x.is_null() && len > 0 {
            return Err(Failure::Null("x"));
        }
        let x = if len == 0 { &[][..] } else { std::slice::from_raw_parts(x, len) };
        *out_label = m.inner.predict(x)?;
        Ok(())
    })
}

/// Name of class `label`, or null if out of range. Owned by the model.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn mrc_model_label_name(model: *const MrcModel, label: usize) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.names.get(label))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Worst-case error probability R of the model; NaN for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn mrc_model_worst_case_risk(model: *const MrcModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.inner.worst_case_risk)
}

/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn mrc_model_n_classes(model: *const MrcModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n_classes)
}

/// Length of the raw inputs the model accepts.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn mrc_model_input_dim(model: *const MrcModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.input_dim())
}
