//! C ABI for the reqclass pipeline.
//!
//! Handles (`ReqclassDataset`, `ReqclassModel`) are opaque pointers owned by
//! the caller and released with their `*_free` function. Strings returned
//! through `out` parameters are heap-allocated and released with
//! `reqclass_string_free`. Every fallible function returns a
//! `ReqclassStatus`; on failure, `reqclass_last_error_message` and
//! `reqclass_last_error_code` describe the most recent error on the calling
//! thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use reqclass::corpus::{class_distribution, load_promise_csv, Dataset};
use reqclass::harness::{run_cv, train_final, ExperimentConfig, FinalModel};
use reqclass::models::ModelSpec;
use reqclass::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReqclassStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    Io = 3,
    /// Malformed CSV or JSON input.
    Parse = 4,
    /// Well-formed input that violates a data contract (unknown label,
    /// empty text, empty dataset, class too small for the fold count).
    Data = 5,
    /// Invalid configuration or hyperparameters.
    Config = 6,
    /// The model cannot perform the request or training failed.
    Model = 7,
    /// A panic was caught; the library state is still usable.
    Internal = 8,
}

/// Loaded requirements corpus.
pub struct ReqclassDataset {
    inner: Dataset,
}

/// Trained classifier together with its vocabulary.
pub struct ReqclassModel {
    inner: FinalModel,
}

struct LastError {
    code: CString,
    message: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn c_string(s: &str) -> CString {
    CString::new(s.replace('\0', " ")).expect("interior NULs were replaced")
}

fn set_error(code: &str, message: &str) {
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = Some(LastError {
            code: c_string(code),
            message: c_string(message),
        })
    });
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> ReqclassStatus {
    match e {
        Error::Io { .. } => ReqclassStatus::Io,
        Error::Csv(_) | Error::Json(_) | Error::VocabularyFormat(_) | Error::MissingColumn(_) => ReqclassStatus::Parse,
        Error::UnknownLabel { .. }
        | Error::EmptyText { .. }
        | Error::EmptyDataset
        | Error::EmptyVocabulary
        | Error::ClassTooSmall { .. }
        | Error::EmptyMatrix
        | Error::EmptyInput => ReqclassStatus::Data,
        Error::Config(_) | Error::InvalidParameter(_) => ReqclassStatus::Config,
        Error::Fold { source, .. } => status_of(source),
        _ => ReqclassStatus::Model,
    }
}

struct Failure(ReqclassStatus);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        set_error(e.code(), &e.to_string());
        Failure(status_of(&e))
    }
}

fn fail(status: ReqclassStatus, code: &str, message: &str) -> Failure {
    set_error(code, message);
    Failure(status)
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ReqclassStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ReqclassStatus::Ok,
        Ok(Err(Failure(s))) => s,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error("E_INTERNAL", &msg);
            ReqclassStatus::Internal
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(ReqclassStatus::NullArgument, "E_NULL_ARGUMENT", &format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ReqclassStatus::InvalidUtf8, "E_INVALID_UTF8", &format!("`{name}` is not UTF-8")))
}

/// # Safety
/// `p` is null or points to a live `T` created by this library.
unsafe fn handle_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(ReqclassStatus::NullArgument, "E_NULL_ARGUMENT", &format!("`{name}` is null")))
}

fn check_out<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(ReqclassStatus::NullArgument, "E_NULL_ARGUMENT", "`out` is null"));
    }
    Ok(())
}

/// # Safety
/// `out` is non-null and writable.
unsafe fn put_string(out: *mut *mut c_char, s: &str) {
    *out = c_string(s).into_raw();
}

/// # Safety
/// `config_json` is null or a valid NUL-terminated string.
unsafe fn config_arg(config_json: *const c_char) -> Result<ExperimentConfig, Failure> {
    if config_json.is_null() {
        return Ok(ExperimentConfig::default());
    }
    let text = str_arg(config_json, "config_json")?;
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(Error::from)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Library version as a static string; never free it.
#[no_mangle]
pub extern "C" fn reqclass_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Human-readable message of the last error on this thread, or null when
/// the last call succeeded. Valid until the next call into the library on
/// the same thread; do not free.
#[no_mangle]
pub extern "C" fn reqclass_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |e| e.message.as_ptr()))
}

/// Stable identifier (for example `E_CLASS_TOO_SMALL`) of the last error on
/// this thread, or null. Same lifetime rules as the message.
#[no_mangle]
pub extern "C" fn reqclass_last_error_code() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |e| e.code.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or a pointer obtained from an `out` string parameter of this
/// library that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn reqclass_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a labelled requirements CSV. The header is auto-detected
/// (`id,text,label` or the PROMISE_exp layout).
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn reqclass_dataset_load_csv(path: *const c_char, out: *mut *mut ReqclassDataset) -> ReqclassStatus {
    guard(|| {
        check_out(out)?;
        let path = str_arg(path, "path")?;
        let inner = load_promise_csv(path, None)?;
        *out = Box::into_raw(Box::new(ReqclassDataset { inner }));
        Ok(())
    })
}

/// Number of records; 0 for a null handle.
///
/// # Safety
/// `ds` is null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn reqclass_dataset_len(ds: *const ReqclassDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// Class counts as a JSON object keyed by label code.
///
/// # Safety
/// `ds` is a live dataset handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn reqclass_dataset_distribution_json(
    ds: *const ReqclassDataset,
    out: *mut *mut c_char,
) -> ReqclassStatus {
    guard(|| {
        check_out(out)?;
        let ds = handle_arg(ds, "ds")?;
        let json = serde_json::to_string(&class_distribution(&ds.inner)).map_err(Error::from)?;
        put_string(out, &json);
        Ok(())
    })
}

/// # Safety
/// `ds` is null or a live dataset handle, which becomes invalid.
#[no_mangle]
pub unsafe extern "C" fn reqclass_dataset_free(ds: *mut ReqclassDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Cross-validates per `config_json` (an experiment config object; null for
/// defaults) and returns the versioned JSON report.
///
/// # Safety
/// `ds` is a live dataset handle; `config_json` is null or a NUL-terminated
/// string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn reqclass_run_cv_json(
    ds: *const ReqclassDataset,
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> ReqclassStatus {
    guard(|| {
        check_out(out)?;
        let ds = handle_arg(ds, "ds")?;
        let cfg = config_arg(config_json)?;
        let report = run_cv(&ds.inner, &cfg)?;
        put_string(out, &report.to_json()?);
        Ok(())
    })
}

/// Trains `model_id` (`lr`, `svm`, `nb`, `knn3`, `knn5`, `knn7`, `dt`) on the
/// whole dataset using the vectorizer and resampling settings of
/// `config_json` (null for defaults).
///
/// # Safety
/// `ds` is a live dataset handle; string arguments are NUL-terminated or,
/// for `config_json`, null; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn reqclass_train_final(
    ds: *const ReqclassDataset,
    config_json: *const c_char,
    model_id: *const c_char,
    out: *mut *mut ReqclassModel,
) -> ReqclassStatus {
    guard(|| {
        check_out(out)?;
        let ds = handle_arg(ds, "ds")?;
        let cfg = config_arg(config_json)?;
        let spec = ModelSpec::from_id(str_arg(model_id, "model_id")?)?;
        let inner = train_final(&ds.inner, &cfg, &spec)?;
        *out = Box::into_raw(Box::new(ReqclassModel { inner }));
        Ok(())
    })
}

/// Parses a model artifact produced by `reqclass_model_to_json` or the CLI.
///
/// # Safety
/// `json` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn reqclass_model_from_json(json: *const c_char, out: *mut *mut ReqclassModel) -> ReqclassStatus {
    guard(|| {
        check_out(out)?;
        let inner = FinalModel::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(ReqclassModel { inner }));
        Ok(())
    })
}

/// Serializes a model artifact to JSON.
///
/// # Safety
/// `model` is a live model handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn reqclass_model_to_json(model: *const ReqclassModel, out: *mut *mut c_char) -> ReqclassStatus {
    guard(|| {
        check_out(out)?;
        let model = handle_arg(model, "model")?;
        put_string(out, &model.inner.to_json()?);
        Ok(())
    })
}

/// Predicts the label code (for example `SE`) of one requirement text.
///
/// # Safety
/// `model` is a live model handle; `text` is NUL-terminated; `out` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn reqclass_model_predict(
    model: *const ReqclassModel,
    text: *const c_char,
    out: *mut *mut c_char,
) -> ReqclassStatus {
    guard(|| {
        check_out(out)?;
        let model = handle_arg(model, "model")?;
        let text = str_arg(text, "text")?;
        let label = model.inner.predict_texts(&[text])?[0];
        put_string(out, label.code());
        Ok(())
    })
}

/// # Safety
/// `model` is null or a live model handle, which becomes invalid.
#[no_mangle]
pub unsafe extern "C" fn reqclass_model_free(model: *mut ReqclassModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_statuses_follow_the_error_kind() {
        assert_eq!(status_of(&Error::EmptyDataset), ReqclassStatus::Data);
        assert_eq!(status_of(&Error::Config("x".into())), ReqclassStatus::Config);
        let nested = Error::Fold {
            fold: 2,
            source: Box::new(Error::EmptyVocabulary),
        };
        assert_eq!(status_of(&nested), ReqclassStatus::Data);
    }

    #[test]
    fn panics_become_internal_errors() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, ReqclassStatus::Internal);
        let msg = unsafe { CStr::from_ptr(reqclass_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "boom");
        assert_eq!(guard(|| Ok(())), ReqclassStatus::Ok);
        assert!(reqclass_last_error_message().is_null());
    }
}
