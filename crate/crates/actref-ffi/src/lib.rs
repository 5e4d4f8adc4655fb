//! C ABI for the refactoring detector. All handles are opaque; every
//! function returns an error code and writes results through out-pointers.
//! The generated header lives at `include/actref.h`.

use std::ffi::{c_char, c_int, CStr, CString};
use std::ptr;

use actref_core::config::Config;
use actref_core::pipeline::detect_commit;
use actref_core::source_model::SourceFile;

/// Error codes returned by every fallible function.
pub const ACTREF_OK: c_int = 0;
pub const ACTREF_ERR_NULL_ARGUMENT: c_int = 1;
pub const ACTREF_ERR_INVALID_UTF8: c_int = 2;
pub const ACTREF_ERR_BAD_CONFIG: c_int = 3;
pub const ACTREF_ERR_BAD_INPUT: c_int = 4;

/// Opaque detector configuration handle.
pub struct ActrefConfig {
    inner: Config,
}

/// Opaque detection result handle.
pub struct ActrefResult {
    json: CString,
    count: usize,
}

/// Version of the library as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn actref_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Static message for an error code; never NULL.
#[no_mangle]
pub extern "C" fn actref_error_message(code: c_int) -> *const c_char {
    let msg: &'static str = match code {
        ACTREF_OK => "ok\0",
        ACTREF_ERR_NULL_ARGUMENT => "null argument\0",
        ACTREF_ERR_INVALID_UTF8 => "argument is not valid UTF-8\0",
        ACTREF_ERR_BAD_CONFIG => "unknown configuration key or bad value\0",
        ACTREF_ERR_BAD_INPUT => "malformed input payload\0",
        _ => "unknown error code\0",
    };
    msg.as_ptr() as *const c_char
}

/// New configuration with default thresholds. Free with
/// `actref_config_free`.
#[no_mangle]
pub extern "C" fn actref_config_new() -> *mut ActrefConfig {
    Box::into_raw(Box::new(ActrefConfig {
        inner: Config::default(),
    }))
}

/// Set one threshold by its key (same keys as the config file,
/// e.g. "file_pair_floor", "source_suffix").
///
/// # Safety
/// `key` and `value` must be NUL-terminated strings or NULL.
#[no_mangle]
pub unsafe extern "C" fn actref_config_set(
    cfg: *mut ActrefConfig,
    key: *const c_char,
    value: *const c_char,
) -> c_int {
    let Some(cfg) = cfg.as_mut() else {
        return ACTREF_ERR_NULL_ARGUMENT;
    };
    let (Some(key), Some(value)) = (cstr(key), cstr(value)) else {
        return ACTREF_ERR_NULL_ARGUMENT;
    };
    let (Ok(key), Ok(value)) = (key.to_str(), value.to_str()) else {
        return ACTREF_ERR_INVALID_UTF8;
    };
    match cfg.inner.set(key, value) {
        Ok(()) => ACTREF_OK,
        Err(_) => ACTREF_ERR_BAD_CONFIG,
    }
}

/// Free a configuration handle. NULL is ignored.
///
/// # Safety
/// `cfg` must come from `actref_config_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn actref_config_free(cfg: *mut ActrefConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

unsafe fn cstr<'a>(p: *const c_char) -> Option<&'a CStr> {
    (!p.is_null()).then(|| CStr::from_ptr(p))
}

fn finish(
    analysis: actref_core::pipeline::CommitAnalysis,
    out: *mut *mut ActrefResult,
) -> c_int {
    let instances = analysis.instances();
    let count = instances.len();
    let json = serde_json::to_string(&instances).expect("instances serialize");
    let json = CString::new(json).expect("json has no NUL bytes");
    unsafe {
        *out = Box::into_raw(Box::new(ActrefResult { json, count }));
    }
    ACTREF_OK
}

/// Detect refactorings between one before and one after version of a file.
/// Writes a result handle to `out_result` on success.
///
/// # Safety
/// All pointers must be valid; string arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn actref_detect_pair(
    cfg: *const ActrefConfig,
    before_path: *const c_char,
    before_source: *const c_char,
    after_path: *const c_char,
    after_source: *const c_char,
    out_result: *mut *mut ActrefResult,
) -> c_int {
    if out_result.is_null() {
        return ACTREF_ERR_NULL_ARGUMENT;
    }
    *out_result = ptr::null_mut();
    let Some(cfg) = cfg.as_ref() else {
        return ACTREF_ERR_NULL_ARGUMENT;
    };
    let parts = [before_path, before_source, after_path, after_source];
    let mut strs = Vec::with_capacity(4);
    for p in parts {
        let Some(s) = cstr(p) else {
            return ACTREF_ERR_NULL_ARGUMENT;
        };
        let Ok(s) = s.to_str() else {
            return ACTREF_ERR_INVALID_UTF8;
        };
        strs.push(s);
    }
    let before = vec![SourceFile::new(strs[0], strs[1])];
    let after = vec![SourceFile::new(strs[2], strs[3])];
    finish(detect_commit(&before, &after, &cfg.inner, ""), out_result)
}

/// Detect refactorings for a whole commit described as JSON:
/// `{"commit": "...", "before": [{"path": "...", "content": "..."}],
///   "after": [...]}`.
///
/// # Safety
/// `payload` must be a NUL-terminated string; `out_result` must be valid.
#[no_mangle]
pub unsafe extern "C" fn actref_detect_json(
    cfg: *const ActrefConfig,
    payload: *const c_char,
    out_result: *mut *mut ActrefResult,
) -> c_int {
    if out_result.is_null() {
        return ACTREF_ERR_NULL_ARGUMENT;
    }
    *out_result = ptr::null_mut();
    let Some(cfg) = cfg.as_ref() else {
        return ACTREF_ERR_NULL_ARGUMENT;
    };
    let Some(payload) = cstr(payload) else {
        return ACTREF_ERR_NULL_ARGUMENT;
    };
    let Ok(payload) = payload.to_str() else {
        return ACTREF_ERR_INVALID_UTF8;
    };

    #[derive(serde::Deserialize)]
    struct FileIn {
        path: String,
        content: String,
    }
    #[derive(serde::Deserialize)]
    struct CommitIn {
        #[serde(default)]
        commit: String,
        #[serde(default)]
        before: Vec<FileIn>,
        #[serde(default)]
        after: Vec<FileIn>,
    }
    let Ok(input) = serde_json::from_str::<CommitIn>(payload) else {
        return ACTREF_ERR_BAD_INPUT;
    };
    let conv = |fs: Vec<FileIn>| -> Vec<SourceFile> {
        fs.into_iter()
            .map(|f| SourceFile::new(f.path, f.content))
            .collect()
    };
    let before = conv(input.before);
    let after = conv(input.after);
    finish(
        detect_commit(&before, &after, &cfg.inner, &input.commit),
        out_result,
    )
}

/// Number of detected instances in a result.
///
/// # Safety
/// `result` must come from a detect call.
#[no_mangle]
pub unsafe extern "C" fn actref_result_count(result: *const ActrefResult) -> usize {
    result.as_ref().map_or(0, |r| r.count)
}

/// JSON array of the detected instances. The pointer stays valid until the
/// result is freed; never NULL for a valid handle.
///
/// # Safety
/// `result` must come from a detect call.
#[no_mangle]
pub unsafe extern "C" fn actref_result_json(result: *const ActrefResult) -> *const c_char {
    result.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// Free a result handle. NULL is ignored.
///
/// # Safety
/// `result` must come from a detect call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn actref_result_free(result: *mut ActrefResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
