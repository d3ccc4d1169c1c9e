//! C interface. Structured values cross the boundary as JSON strings;
//! models, repositories and sessions are opaque handles.
//!
//! Every fallible call returns an [`AdaptestStatus`]; on failure
//! [`adaptest_last_error`] describes what went wrong. Strings handed out
//! through `out` parameters are owned by the caller and released with
//! [`adaptest_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use adaptest::dsl::{parse_unchecked, validate, TestScript};
use adaptest::engine::{execute_suite, render_report, EngineConfig, ReportFormat, FIXED_TIMESTAMP};
use adaptest::maintainer::{diff_models, DiffConfig};
use adaptest::matcher::{levenshtein, string_similarity};
use adaptest::model::{load_model, start_session, Action, AppModel, SimSession};
use adaptest::recovery::KnowledgeBase;
use adaptest::repo::{load_repository, Repository};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptestStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// A document did not parse or failed validation.
    InvalidInput = 3,
    /// A panic was caught at the boundary.
    Internal = 4,
}

pub struct AdaptestModel(Arc<AppModel>);
pub struct AdaptestRepository(Repository);
pub struct AdaptestSession(SimSession);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(AdaptestStatus, String);

fn invalid(e: impl ToString) -> Fail {
    Fail(AdaptestStatus::InvalidInput, e.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AdaptestStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AdaptestStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error");
            AdaptestStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(AdaptestStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(AdaptestStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(AdaptestStatus::NullPointer, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(
            AdaptestStatus::NullPointer,
            "output pointer is null".into(),
        ));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|_| invalid("output contains a NUL byte"))?;
    if out.is_null() {
        return Err(Fail(
            AdaptestStatus::NullPointer,
            "output pointer is null".into(),
        ));
    }
    out.write(c.into_raw());
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn adaptest_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn adaptest_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn adaptest_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adaptest_model_load(
    json: *const c_char,
    out: *mut *mut AdaptestModel,
) -> AdaptestStatus {
    guard(|| {
        let m = load_model(text(json, "json")?).map_err(invalid)?;
        put(out, Box::into_raw(Box::new(AdaptestModel(Arc::new(m)))))
    })
}

/// # Safety
/// `model` must come from `adaptest_model_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn adaptest_model_free(model: *mut AdaptestModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes the model's version string to `out`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn adaptest_model_version(
    model: *const AdaptestModel,
    out: *mut *mut c_char,
) -> AdaptestStatus {
    guard(|| put_string(out, handle(model, "model")?.0.version.clone()))
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adaptest_repository_load(
    json: *const c_char,
    out: *mut *mut AdaptestRepository,
) -> AdaptestStatus {
    guard(|| {
        let r = load_repository(text(json, "json")?).map_err(invalid)?;
        put(out, Box::into_raw(Box::new(AdaptestRepository(r))))
    })
}

/// # Safety
/// `repo` must come from `adaptest_repository_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn adaptest_repository_free(repo: *mut AdaptestRepository) {
    if !repo.is_null() {
        drop(Box::from_raw(repo));
    }
}

/// Starts a simulated session. The session keeps the model alive on its own.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn adaptest_session_start(
    model: *const AdaptestModel,
    seed: u64,
    out: *mut *mut AdaptestSession,
) -> AdaptestStatus {
    guard(|| {
        let m = handle(model, "model")?;
        put(
            out,
            Box::into_raw(Box::new(AdaptestSession(start_session(
                Arc::clone(&m.0),
                seed,
            )))),
        )
    })
}

/// # Safety
/// `session` must come from `adaptest_session_start` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn adaptest_session_free(session: *mut AdaptestSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Current screen view as JSON.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn adaptest_session_observe(
    session: *const AdaptestSession,
    out: *mut *mut c_char,
) -> AdaptestStatus {
    guard(|| {
        let view = handle(session, "session")?.0.observe();
        put_string(out, serde_json::to_string(&view).expect("view serializes"))
    })
}

/// Performs `{"verb": ..., "target": ..., "value": ...}` and writes the
/// outcome as JSON. A rejected action is an outcome, not an error.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn adaptest_session_perform(
    session: *mut AdaptestSession,
    action_json: *const c_char,
    out: *mut *mut c_char,
) -> AdaptestStatus {
    guard(|| {
        let s = session
            .as_mut()
            .ok_or_else(|| Fail(AdaptestStatus::NullPointer, "session is null".into()))?;
        let action: Action =
            serde_json::from_str(text(action_json, "action_json")?).map_err(invalid)?;
        let outcome = s.0.perform(&action);
        put_string(
            out,
            serde_json::to_string(&outcome).expect("outcome serializes"),
        )
    })
}

fn scripts_of(json: &str) -> Result<Vec<TestScript>, Fail> {
    let texts: Vec<String> =
        serde_json::from_str(json).map_err(|e| invalid(format!("scripts: {e}")))?;
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| parse_unchecked(t).map_err(|e| invalid(format!("script {i}: {:?}", e[0]))))
        .collect()
}

/// Runs a suite and writes the JSON report.
///
/// `scripts_json` is an array of script texts. `config_json` and `kb_json`
/// may be null for the defaults. With `fixed_clock` non-zero the report
/// carries a constant timestamp.
///
/// # Safety
/// Pointers must be valid; the nullable ones may be null.
#[no_mangle]
pub unsafe extern "C" fn adaptest_run_suite(
    model: *const AdaptestModel,
    repo: *const AdaptestRepository,
    scripts_json: *const c_char,
    config_json: *const c_char,
    kb_json: *const c_char,
    seed: u64,
    fixed_clock: i32,
    out: *mut *mut c_char,
) -> AdaptestStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let repo = handle(repo, "repo")?;
        let scripts = scripts_of(text(scripts_json, "scripts_json")?)?;
        let config = if config_json.is_null() {
            EngineConfig::default()
        } else {
            EngineConfig::load(text(config_json, "config_json")?).map_err(invalid)?
        };
        let kb = if kb_json.is_null() {
            KnowledgeBase::builtin()
        } else {
            KnowledgeBase::load(text(kb_json, "kb_json")?).map_err(invalid)?
        };
        let timestamp = if fixed_clock != 0 {
            FIXED_TIMESTAMP.to_string()
        } else {
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        };
        let report = execute_suite(
            "ffi", &scripts, &model.0, &repo.0, &config, &kb, seed, timestamp,
        );
        put_string(
            out,
            render_report(&report, ReportFormat::Json).map_err(invalid)?,
        )
    })
}

/// Validates one script; writes the issues as a JSON array. `model` may be null.
///
/// # Safety
/// Pointers must be valid; `model` may be null.
#[no_mangle]
pub unsafe extern "C" fn adaptest_validate_script(
    script: *const c_char,
    repo: *const AdaptestRepository,
    model: *const AdaptestModel,
    out: *mut *mut c_char,
) -> AdaptestStatus {
    guard(|| {
        let repo = handle(repo, "repo")?;
        let s =
            parse_unchecked(text(script, "script")?).map_err(|e| invalid(format!("{:?}", e[0])))?;
        let model = model.as_ref().map(|m| &*m.0);
        let issues = validate(&s, &repo.0, model);
        put_string(
            out,
            serde_json::to_string(&issues).expect("issues serialize"),
        )
    })
}

/// Differences between two model versions as JSON.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn adaptest_diff_models(
    old: *const AdaptestModel,
    new: *const AdaptestModel,
    out: *mut *mut c_char,
) -> AdaptestStatus {
    guard(|| {
        let d = diff_models(
            &handle(old, "old")?.0,
            &handle(new, "new")?.0,
            &DiffConfig::default(),
        );
        put_string(out, serde_json::to_string(&d).expect("diff serializes"))
    })
}

/// Edit distance in characters.
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adaptest_levenshtein(
    a: *const c_char,
    b: *const c_char,
    out: *mut usize,
) -> AdaptestStatus {
    guard(|| put(out, levenshtein(text(a, "a")?, text(b, "b")?)))
}

/// `1 - distance / max length`, in [0, 1].
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adaptest_string_similarity(
    a: *const c_char,
    b: *const c_char,
    case_insensitive: i32,
    out: *mut f64,
) -> AdaptestStatus {
    guard(|| {
        put(
            out,
            string_similarity(text(a, "a")?, text(b, "b")?, case_insensitive != 0),
        )
    })
}
