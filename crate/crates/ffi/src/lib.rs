//! C ABI over the kgforge engine.
//!
//! Every call returns a [`KgfStatus`]. Results that are not plain numbers
//! come back as NUL-terminated UTF-8 JSON written to an out pointer; free
//! them with [`kgf_string_free`]. On failure [`kgf_last_error_message`]
//! describes the error for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kgforge::acquisition::{confidence, FeedbackMode};
use kgforge::edulink::HeteroRecord;
use kgforge::gateway::{AddCandidateRequest, Config, CreateSession, Engine, GatewayError, LabelRequest};
use serde_json::{json, Value};

/// Result of every `kgf_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KgfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    BadRequest = 3,
    NotFound = 4,
    Conflict = 5,
    Config = 6,
    Io = 7,
    Internal = 8,
    Panic = 9,
}

/// Opaque engine handle.
pub struct KgfEngine {
    engine: Engine,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let msg = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("NULs removed")));
}

struct Failure(KgfStatus, String);

impl From<GatewayError> for Failure {
    fn from(e: GatewayError) -> Self {
        let status = match (&e, e.status()) {
            (GatewayError::Config(_), _) => KgfStatus::Config,
            (GatewayError::Io { .. }, _) => KgfStatus::Io,
            (_, 400) => KgfStatus::BadRequest,
            (_, 404) => KgfStatus::NotFound,
            (_, 409) => KgfStatus::Conflict,
            _ => KgfStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn bad_request(e: impl std::fmt::Display) -> Failure {
    Failure(KgfStatus::BadRequest, e.to_string())
}

/// Runs `f`, turning errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> KgfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            KgfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            KgfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(KgfStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(KgfStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn engine_arg<'a>(p: *const KgfEngine) -> Result<&'a Engine, Failure> {
    p.as_ref().map(|h| &h.engine).ok_or_else(|| Failure(KgfStatus::NullArgument, "engine is null".into()))
}

unsafe fn write_json(out: *mut *mut c_char, value: &Value) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(KgfStatus::NullArgument, "out is null".into()));
    }
    let s = CString::new(value.to_string()).map_err(|e| Failure(KgfStatus::Internal, e.to_string()))?;
    *out = s.into_raw();
    Ok(())
}

fn with_revision(value: impl serde::Serialize, revision: u64) -> Value {
    let mut v = serde_json::to_value(value).expect("serializable");
    match &mut v {
        Value::Object(map) => {
            map.insert("revision".into(), json!(revision));
            v
        }
        _ => json!({ "result": v, "revision": revision }),
    }
}

/// Opens an engine. `config_toml` may be null for defaults; graph and other
/// files are named in its `[paths]` table.
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kgf_engine_open(config_toml: *const c_char, out: *mut *mut KgfEngine) -> KgfStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(KgfStatus::NullArgument, "out is null".into()));
        }
        let config = if config_toml.is_null() { Config::default() } else { Config::from_toml(str_arg(config_toml, "config")?)? };
        let engine = Engine::open(config)?;
        *out = Box::into_raw(Box::new(KgfEngine { engine }));
        Ok(())
    })
}

/// # Safety
/// `engine` must come from [`kgf_engine_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kgf_engine_free(engine: *mut KgfEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// # Safety
/// `engine` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn kgf_revision(engine: *const KgfEngine, out: *mut u64) -> KgfStatus {
    guard(|| {
        let e = engine_arg(engine)?;
        if out.is_null() {
            return Err(Failure(KgfStatus::NullArgument, "out is null".into()));
        }
        *out = e.revision();
        Ok(())
    })
}

/// Fuzzy entity search; `k` of 0 uses the configured default.
/// Writes `{"hits":[..],"revision":n}`.
///
/// # Safety
/// Pointers must be valid; `query` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn kgf_search(engine: *const KgfEngine, query: *const c_char, k: u32, out: *mut *mut c_char) -> KgfStatus {
    guard(|| {
        let e = engine_arg(engine)?;
        let k = (k > 0).then_some(k as usize);
        let (hits, rev) = e.search(str_arg(query, "query")?, k)?;
        write_json(out, &json!({ "hits": hits, "revision": rev }))
    })
}

/// Links one record given as JSON; with `store` non-zero the record and
/// its links are added to the graph.
///
/// # Safety
/// Pointers must be valid; `record_json` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn kgf_link(engine: *const KgfEngine, record_json: *const c_char, store: i32, out: *mut *mut c_char) -> KgfStatus {
    guard(|| {
        let e = engine_arg(engine)?;
        let record: HeteroRecord = serde_json::from_str(str_arg(record_json, "record")?).map_err(bad_request)?;
        let (report, rev) = e.link(&record, store != 0)?;
        write_json(out, &with_revision(report, rev))
    })
}

/// # Safety
/// Pointers must be valid; `question` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn kgf_answer(engine: *const KgfEngine, question: *const c_char, out: *mut *mut c_char) -> KgfStatus {
    guard(|| {
        let e = engine_arg(engine)?;
        let (a, rev) = e.answer(str_arg(question, "question")?)?;
        write_json(out, &with_revision(a, rev))
    })
}

/// Creates an annotation session from `{"docId","text","sessionId"?}`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn kgf_session_create(engine: *const KgfEngine, request_json: *const c_char, out: *mut *mut c_char) -> KgfStatus {
    guard(|| {
        let e = engine_arg(engine)?;
        let req: CreateSession = serde_json::from_str(str_arg(request_json, "request")?).map_err(bad_request)?;
        let (s, rev) = e.create_session(req)?;
        write_json(out, &with_revision(s, rev))
    })
}

/// Labels a candidate: `{"candidateId","verdict":"accept"|"reject"|"edit",..}`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn kgf_session_label(
    engine: *const KgfEngine,
    session_id: *const c_char,
    request_json: *const c_char,
    out: *mut *mut c_char,
) -> KgfStatus {
    guard(|| {
        let e = engine_arg(engine)?;
        let req: LabelRequest = serde_json::from_str(str_arg(request_json, "request")?).map_err(bad_request)?;
        let (s, rev) = e.label(str_arg(session_id, "session_id")?, req)?;
        write_json(out, &with_revision(s, rev))
    })
}

/// Adds a missed span: `{"start","end","classIri"?}`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn kgf_session_add_candidate(
    engine: *const KgfEngine,
    session_id: *const c_char,
    request_json: *const c_char,
    out: *mut *mut c_char,
) -> KgfStatus {
    guard(|| {
        let e = engine_arg(engine)?;
        let req: AddCandidateRequest = serde_json::from_str(str_arg(request_json, "request")?).map_err(bad_request)?;
        let (s, rev) = e.add_candidate(str_arg(session_id, "session_id")?, req)?;
        write_json(out, &with_revision(s, rev))
    })
}

/// # Safety
/// Pointers must be valid; `session_id` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn kgf_session_advance(engine: *const KgfEngine, session_id: *const c_char, out: *mut *mut c_char) -> KgfStatus {
    guard(|| {
        let e = engine_arg(engine)?;
        let (s, rev) = e.advance(str_arg(session_id, "session_id")?)?;
        write_json(out, &with_revision(s, rev))
    })
}

/// # Safety
/// Pointers must be valid; `session_id` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn kgf_session_commit(engine: *const KgfEngine, session_id: *const c_char, out: *mut *mut c_char) -> KgfStatus {
    guard(|| {
        let e = engine_arg(engine)?;
        let (report, s, rev) = e.commit(str_arg(session_id, "session_id")?)?;
        write_json(out, &json!({ "report": report, "session": s, "revision": rev }))
    })
}

/// Writes the graph as N-Triples text (not JSON).
///
/// # Safety
/// `engine` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn kgf_export_ntriples(engine: *const KgfEngine, out: *mut *mut c_char) -> KgfStatus {
    guard(|| {
        let e = engine_arg(engine)?;
        if out.is_null() {
            return Err(Failure(KgfStatus::NullArgument, "out is null".into()));
        }
        let (nt, _, _) = e.export()?;
        *out = CString::new(nt).map_err(|e| Failure(KgfStatus::Internal, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Candidate confidence after `pos` accepts and `neg` rejects. `signed`
/// non-zero subtracts rejections; zero adds them.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kgf_confidence(base: f64, pos: u32, neg: u32, alpha: f64, signed: i32, out: *mut f64) -> KgfStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(KgfStatus::NullArgument, "out is null".into()));
        }
        let mode = if signed != 0 { FeedbackMode::Signed } else { FeedbackMode::Literal };
        *out = confidence(base, pos, neg, alpha, mode);
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next `kgf_*` call on the same thread.
#[no_mangle]
pub extern "C" fn kgf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn kgf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn kgf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
