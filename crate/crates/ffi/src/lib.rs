//! C ABI over the sensorpen core.
//!
//! Every fallible call returns an [`SpStatus`]. On failure a message is kept
//! per thread and can be copied out with [`sp_last_error_message`]. Handles
//! are opaque and must be released with their matching `_free` function.
//! Strings handed out by the library are released with [`sp_string_free`].

use sensorpen::llm::ReplayStore;
use sensorpen::parse::parse_rpeaks;
use sensorpen::prompt::{builtin_template, render_ecg, PromptScheme};
use sensorpen::qrs::{detect, DetectorKind};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    NotFound = 5,
    Detector = 6,
    Prompt = 7,
    Panic = 99,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: SpStatus, msg: impl Into<String>) -> SpStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> SpStatus) -> SpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == SpStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(_) => fail(SpStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, SpStatus> {
    if p.is_null() {
        return Err(fail(SpStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(SpStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn give_string(s: String, out: *mut *mut c_char) -> SpStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            SpStatus::Ok
        }
        Err(_) => fail(SpStatus::InvalidArgument, "string contains NUL"),
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(SpStatus::NullArgument, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf`, truncating
/// to `len - 1` bytes. Returns the full message length, or 0 when there is
/// no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer previously handed out by this library.
#[no_mangle]
pub unsafe extern "C" fn sp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ------------------------------------------------------------------ peaks

/// A list of peak positions, from a parsed response or a detector.
pub struct SpPeaks {
    values: Vec<f64>,
    hallucinated: bool,
}

/// Extracts the R-peak list from a model response.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_rpeaks_parse(text: *const c_char, out: *mut *mut SpPeaks) -> SpStatus {
    guard(|| {
        non_null!(out);
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let p = parse_rpeaks(text);
        *out = Box::into_raw(Box::new(SpPeaks { values: p.peaks, hallucinated: p.hallucinated }));
        SpStatus::Ok
    })
}

/// Runs a QRS detector (`pan_tompkins`, `hamilton`, `christov`, `tma` or
/// `swt`) over `n` samples taken at `fs` Hz.
///
/// # Safety
/// `detector` must be a NUL-terminated string, `samples` must point to `n`
/// doubles, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_detect(
    detector: *const c_char,
    samples: *const f64,
    n: usize,
    fs: f64,
    out: *mut *mut SpPeaks,
) -> SpStatus {
    guard(|| {
        non_null!(samples, out);
        let kind: DetectorKind = match str_arg(detector, "detector").map(str::parse) {
            Ok(Ok(k)) => k,
            Ok(Err(e)) => return fail(SpStatus::InvalidArgument, format!("{e}")),
            Err(s) => return s,
        };
        let x = std::slice::from_raw_parts(samples, n);
        match detect(kind, x, fs) {
            Ok(d) => {
                let values = d.peak_indices.iter().map(|&i| i as f64).collect();
                *out = Box::into_raw(Box::new(SpPeaks { values, hallucinated: false }));
                SpStatus::Ok
            }
            Err(e) => fail(SpStatus::Detector, e.to_string()),
        }
    })
}

/// Number of peaks held by `peaks`; 0 for null.
///
/// # Safety
/// `peaks` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_peaks_len(peaks: *const SpPeaks) -> usize {
    peaks.as_ref().map_or(0, |p| p.values.len())
}

/// True when the response had no well-formed R-peak list.
///
/// # Safety
/// `peaks` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_peaks_hallucinated(peaks: *const SpPeaks) -> bool {
    peaks.as_ref().is_some_and(|p| p.hallucinated)
}

/// Copies up to `cap` peaks into `dst`; returns how many were copied.
///
/// # Safety
/// `peaks` must be a live handle and `dst` must have room for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn sp_peaks_copy(peaks: *const SpPeaks, dst: *mut f64, cap: usize) -> usize {
    let (Some(p), false) = (peaks.as_ref(), dst.is_null()) else { return 0 };
    let n = p.values.len().min(cap);
    ptr::copy_nonoverlapping(p.values.as_ptr(), dst, n);
    n
}

/// # Safety
/// `peaks` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sp_peaks_free(peaks: *mut SpPeaks) {
    if !peaks.is_null() {
        drop(Box::from_raw(peaks));
    }
}

// --------------------------------------------------------------- metrics

/// Beats per minute for `count` beats in `window_s` seconds.
#[no_mangle]
pub extern "C" fn sp_heart_rate(count: usize, window_s: f64) -> f64 {
    sensorpen::ecg::heart_rate(count, window_s)
}

/// chrF of `hypothesis` against `reference`, in [0, 1].
///
/// # Safety
/// Both strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_chrf(hypothesis: *const c_char, reference: *const c_char, out: *mut f64) -> SpStatus {
    guard(|| {
        non_null!(out);
        match (str_arg(hypothesis, "hypothesis"), str_arg(reference, "reference")) {
            (Ok(h), Ok(r)) => {
                *out = sensorpen::metrics::chrf(h, r);
                SpStatus::Ok
            }
            (Err(s), _) | (_, Err(s)) => s,
        }
    })
}

// ---------------------------------------------------------------- prompts

/// Renders a builtin ECG scheme (`ecg/description`, `ecg/procedure_1ex`,
/// ...) over `n` digitized samples. The prompt text goes to `out`.
///
/// # Safety
/// `scheme` must be NUL-terminated, `values` must point to `n` integers,
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_render_ecg_prompt(
    scheme: *const c_char,
    values: *const i64,
    n: usize,
    out: *mut *mut c_char,
) -> SpStatus {
    guard(|| {
        non_null!(values, out);
        let scheme: PromptScheme = match str_arg(scheme, "scheme").map(str::parse) {
            Ok(Ok(s)) => s,
            Ok(Err(e)) => return fail(SpStatus::Prompt, format!("{e}")),
            Err(s) => return s,
        };
        match render_ecg(&builtin_template(scheme), std::slice::from_raw_parts(values, n)) {
            Ok(p) => give_string(p.text, out),
            Err(e) => fail(SpStatus::Prompt, e.to_string()),
        }
    })
}

// ----------------------------------------------------------------- replay

/// A read-only replay store.
pub struct SpReplay {
    store: ReplayStore,
}

/// Opens an existing JSON Lines replay store.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_replay_open(path: *const c_char, out: *mut *mut SpReplay) -> SpStatus {
    guard(|| {
        non_null!(out);
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match ReplayStore::open(path) {
            Ok(store) => {
                *out = Box::into_raw(Box::new(SpReplay { store }));
                SpStatus::Ok
            }
            Err(e) => fail(SpStatus::Io, e.to_string()),
        }
    })
}

/// Number of distinct fingerprints in the store.
///
/// # Safety
/// `store` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_replay_len(store: *const SpReplay) -> usize {
    store.as_ref().map_or(0, |s| s.store.len())
}

/// Looks up the response recorded for `fingerprint`. Returns
/// `SpStatus::NotFound` on a miss.
///
/// # Safety
/// `store` must be a live handle, `fingerprint` NUL-terminated, and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sp_replay_lookup(
    store: *const SpReplay,
    fingerprint: *const c_char,
    out: *mut *mut c_char,
) -> SpStatus {
    guard(|| {
        non_null!(store, out);
        let fp = match str_arg(fingerprint, "fingerprint") {
            Ok(f) => f,
            Err(s) => return s,
        };
        match (*store).store.get(fp) {
            Some(r) => give_string(r.response_text, out),
            None => fail(SpStatus::NotFound, format!("no recorded response for {fp}")),
        }
    })
}

/// # Safety
/// `store` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sp_replay_free(store: *mut SpReplay) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}
