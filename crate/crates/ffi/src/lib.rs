//! C ABI over the clickbias toolkit.
//!
//! Every fallible call returns a [`CbStatus`]; on failure the message is kept
//! per thread and read back with [`cb_last_error_message`]. Handles are opaque
//! and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use clickbias::eval::{evaluate, ndcg_at_k, perplexity_improvement, DEFAULT_K_LIST};
use clickbias::inference::{EmConfig, Fitter};
use clickbias::intent::IntentLabel;
use clickbias::log_store::{read_judgments, read_sessions, Session};
use clickbias::models::{ModelDocument, ModelKind};
use clickbias::{Error, ErrorKind};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Bad argument or configuration.
    Usage = 3,
    /// Unreadable, malformed or inconsistent input.
    Data = 4,
    Numeric = 5,
    /// Output buffer too small; the required length is still reported.
    BufferTooSmall = 6,
    Panic = 7,
}

/// Sessions loaded from a JSONL file.
pub struct CbSessions {
    sessions: Vec<Session>,
}

/// A fitted or loaded click model.
pub struct CbModel {
    doc: ModelDocument,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(CbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            ErrorKind::Usage => CbStatus::Usage,
            ErrorKind::Data => CbStatus::Data,
            ErrorKind::Numeric => CbStatus::Numeric,
        };
        Fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CbStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CbStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CbStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(CbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CbStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null(what))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

fn usage(msg: impl Into<String>) -> Fail {
    Fail(CbStatus::Usage, msg.into())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads sessions from a JSONL file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_handle` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_sessions_load(path: *const c_char, out_handle: *mut *mut CbSessions) -> CbStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let slot = out(out_handle, "out_handle")?;
        let sessions = read_sessions(Path::new(path))?;
        *slot = Box::into_raw(Box::new(CbSessions { sessions }));
        Ok(())
    })
}

/// Number of sessions in the handle; 0 for NULL.
///
/// # Safety
/// `sessions` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_sessions_len(sessions: *const CbSessions) -> usize {
    sessions.as_ref().map_or(0, |s| s.sessions.len())
}

/// # Safety
/// `sessions` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cb_sessions_free(sessions: *mut CbSessions) {
    if !sessions.is_null() {
        drop(Box::from_raw(sessions));
    }
}

/// Fit options; start from [`cb_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CbFitOptions {
    pub intent_aware: bool,
    pub alternating: bool,
    pub tol: f64,
    pub max_iters: u32,
    pub max_positions: u32,
    pub seed: u64,
}

#[no_mangle]
pub extern "C" fn cb_fit_options_default() -> CbFitOptions {
    let d = EmConfig::default();
    CbFitOptions {
        intent_aware: false,
        alternating: false,
        tol: d.tol,
        max_iters: d.max_iters as u32,
        max_positions: d.max_positions as u32,
        seed: d.seed,
    }
}

/// Fits `model` ("pbm", "cascade", "ubm" or "dbn") to the sessions by EM.
///
/// # Safety
/// Pointers must be valid; `options` may be NULL for defaults.
#[no_mangle]
pub unsafe extern "C" fn cb_fit(
    sessions: *const CbSessions,
    model: *const c_char,
    options: *const CbFitOptions,
    out_model: *mut *mut CbModel,
) -> CbStatus {
    guard(|| {
        let sessions = handle(sessions, "sessions")?;
        let kind: ModelKind = str_arg(model, "model")?.parse()?;
        let opts = options.as_ref().copied().unwrap_or_else(|| cb_fit_options_default());
        let slot = out(out_model, "out_model")?;
        let config = EmConfig {
            tol: opts.tol,
            max_iters: opts.max_iters as usize,
            max_positions: opts.max_positions as usize,
            seed: opts.seed,
            ..EmConfig::default()
        };
        let (params, report) = Fitter::new(kind, &config)
            .intent_aware(opts.intent_aware || opts.alternating)
            .alternating(opts.alternating)
            .fit(&sessions.sessions)?;
        *slot = Box::into_raw(Box::new(CbModel {
            doc: ModelDocument::new(params, Some(report)),
        }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_model_load(path: *const c_char, out_model: *mut *mut CbModel) -> CbStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let slot = out(out_model, "out_model")?;
        let doc = ModelDocument::load(Path::new(path))?;
        *slot = Box::into_raw(Box::new(CbModel { doc }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cb_model_save(model: *const CbModel, path: *const c_char) -> CbStatus {
    guard(|| {
        let model = handle(model, "model")?;
        model.doc.save(Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cb_model_free(model: *mut CbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// True when the model keeps separate tables per search intent.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_model_is_intent_aware(model: *const CbModel) -> bool {
    model.as_ref().is_some_and(|m| m.doc.intent_aware)
}

fn parse_intent(code: Option<&str>) -> Result<IntentLabel, Fail> {
    match code {
        None => Ok(IntentLabel::Unknown),
        Some(c) => c.parse().map_err(|e: Error| usage(e.to_string())),
    }
}

/// Relevance of `doc` for `query` under `intent` ("inf", "nav", "tra"; NULL
/// for the intent-agnostic table).
///
/// # Safety
/// String arguments must be NUL-terminated; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_model_relevance(
    model: *const CbModel,
    query: *const c_char,
    doc: *const c_char,
    intent: *const c_char,
    out_value: *mut f64,
) -> CbStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let query = str_arg(query, "query")?;
        let doc = str_arg(doc, "doc")?;
        let intent = parse_intent(opt_str_arg(intent, "intent")?)?;
        let slot = out(out_value, "out_value")?;
        *slot = model.doc.params.for_intent(intent).relevance_table().get(query, doc);
        Ok(())
    })
}

/// Marginal click probability at each position of session `index`.
///
/// Writes up to `capacity` values and stores the session length in
/// `out_len`; returns `BufferTooSmall` when `capacity` is short.
///
/// # Safety
/// `out_probs` must hold `capacity` doubles; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_model_click_probs(
    model: *const CbModel,
    sessions: *const CbSessions,
    index: usize,
    out_probs: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> CbStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let sessions = handle(sessions, "sessions")?;
        let len_slot = out(out_len, "out_len")?;
        let session = sessions
            .sessions
            .get(index)
            .ok_or_else(|| usage(format!("session index {index} out of range")))?;
        let probs = model.doc.params.click_probs(session)?;
        *len_slot = probs.len();
        if capacity < probs.len() {
            return Err(Fail(
                CbStatus::BufferTooSmall,
                format!("need {} slots, got {capacity}", probs.len()),
            ));
        }
        if !probs.is_empty() {
            if out_probs.is_null() {
                return Err(null("out_probs"));
            }
            std::slice::from_raw_parts_mut(out_probs, probs.len()).copy_from_slice(&probs);
        }
        Ok(())
    })
}

/// Percentage improvement of perplexity `p1` over `p2`.
///
/// # Safety
/// `out_percent` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_perplexity_improvement(p1: f64, p2: f64, out_percent: *mut f64) -> CbStatus {
    guard(|| {
        let slot = out(out_percent, "out_percent")?;
        *slot = perplexity_improvement(p1, p2)?;
        Ok(())
    })
}

/// NDCG@k of graded results in ranked order against the ideal ordering.
///
/// `out_defined` is set false when every ideal grade is zero.
///
/// # Safety
/// `ranked` and `ideal` must hold `n_ranked` and `n_ideal` bytes.
#[no_mangle]
pub unsafe extern "C" fn cb_ndcg_at_k(
    ranked: *const u8,
    n_ranked: usize,
    ideal: *const u8,
    n_ideal: usize,
    k: usize,
    out_value: *mut f64,
    out_defined: *mut bool,
) -> CbStatus {
    guard(|| {
        let ranked = slice(ranked, n_ranked, "ranked")?;
        let ideal = slice(ideal, n_ideal, "ideal")?;
        let value = out(out_value, "out_value")?;
        let defined = out(out_defined, "out_defined")?;
        let ndcg = ndcg_at_k(ranked, ideal, k)?;
        *defined = ndcg.is_some();
        *value = ndcg.unwrap_or(0.0);
        Ok(())
    })
}

/// Evaluates the model on the sessions and returns the report as JSON.
///
/// `judgments` is an optional TSV path enabling NDCG. Free the result with
/// [`cb_string_free`].
///
/// # Safety
/// Handles must be live; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_eval(
    model: *const CbModel,
    sessions: *const CbSessions,
    judgments: *const c_char,
    out_overall: *mut f64,
    out_json: *mut *mut c_char,
) -> CbStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let sessions = handle(sessions, "sessions")?;
        let judgments = opt_str_arg(judgments, "judgments")?
            .map(|p| read_judgments(Path::new(p)))
            .transpose()?;
        let label = model.doc.model.name().to_uppercase();
        let report = evaluate(&label, &model.doc.params, &sessions.sessions, judgments.as_ref(), &DEFAULT_K_LIST)?;
        if let Some(slot) = out_overall.as_mut() {
            *slot = report.overall_perplexity;
        }
        if let Some(slot) = out_json.as_mut() {
            let text = serde_json::to_string(&report).map_err(|e| Fail(CbStatus::Data, e.to_string()))?;
            *slot = CString::new(text).map_err(|e| Fail(CbStatus::Data, e.to_string()))?.into_raw();
        }
        Ok(())
    })
}
