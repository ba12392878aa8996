use sensorpen_ffi::*;
use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { sp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string()
}

fn store_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/replay/store.jsonl")
}

#[test]
fn rpeaks_round_trip() {
    let mut h = ptr::null_mut();
    let text = c(include_str!("../../core/tests/fixtures/worked_example_response.txt"));
    assert_eq!(unsafe { sp_rpeaks_parse(text.as_ptr(), &mut h) }, SpStatus::Ok);
    let mut out = vec![0.0; 10];
    let n = unsafe { sp_peaks_copy(h, out.as_mut_ptr(), out.len()) };
    assert_eq!(&out[..n], &[1181.0, 1183.0, 1208.0, 1154.0, 1166.0, 1183.0]);
    unsafe { sp_peaks_free(h) };

    let text = c("no list here");
    assert_eq!(unsafe { sp_rpeaks_parse(text.as_ptr(), &mut h) }, SpStatus::Ok);
    assert!(unsafe { sp_peaks_hallucinated(h) });
    assert_eq!(unsafe { sp_peaks_len(h) }, 0);
    unsafe { sp_peaks_free(h) };
}

#[test]
fn detector_matches_core() {
    let s = sensorpen::synth::random(7, 360.0, 20.0);
    let expect = sensorpen::qrs::detect(sensorpen::qrs::DetectorKind::Swt, &s.samples, 360.0).unwrap().peak_indices;
    let mut h = ptr::null_mut();
    let name = c("swt");
    assert_eq!(unsafe { sp_detect(name.as_ptr(), s.samples.as_ptr(), s.samples.len(), 360.0, &mut h) }, SpStatus::Ok);
    let mut got = vec![0.0; unsafe { sp_peaks_len(h) }];
    unsafe { sp_peaks_copy(h, got.as_mut_ptr(), got.len()) };
    unsafe { sp_peaks_free(h) };
    assert_eq!(got, expect.iter().map(|&i| i as f64).collect::<Vec<_>>());

    let bad = c("nope");
    assert_eq!(unsafe { sp_detect(bad.as_ptr(), s.samples.as_ptr(), s.samples.len(), 360.0, &mut h) }, SpStatus::InvalidArgument);
    assert_eq!(unsafe { sp_detect(name.as_ptr(), ptr::null(), 0, 360.0, &mut h) }, SpStatus::NullArgument);
}

#[test]
fn errors_are_reported_per_thread() {
    let mut score = 0.0;
    let bad = [0xffu8, 0];
    let ok = c("x");
    assert_eq!(unsafe { sp_chrf(bad.as_ptr().cast(), ok.as_ptr(), &mut score) }, SpStatus::InvalidUtf8);
    assert!(last_error().contains("UTF-8"));
    std::thread::spawn(|| assert_eq!(unsafe { sp_last_error_message(ptr::null_mut(), 0) }, 0)).join().unwrap();
    assert_eq!(unsafe { sp_chrf(ok.as_ptr(), ok.as_ptr(), &mut score) }, SpStatus::Ok);
    assert_eq!(score, 1.0);
    assert_eq!(unsafe { sp_last_error_message(ptr::null_mut(), 0) }, 0);
}

#[test]
fn replay_lookup() {
    let mut store = ptr::null_mut();
    let path = c(store_path().to_str().unwrap());
    assert_eq!(unsafe { sp_replay_open(path.as_ptr(), &mut store) }, SpStatus::Ok);
    assert_eq!(unsafe { sp_replay_len(store) }, 20);
    let first: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(store_path()).unwrap().lines().next().unwrap()).unwrap();
    let fp = c(first["fingerprint"].as_str().unwrap());
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { sp_replay_lookup(store, fp.as_ptr(), &mut text) }, SpStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(text) }.to_str().unwrap(), first["response_text"].as_str().unwrap());
    unsafe { sp_string_free(text) };
    let miss = c("ffff");
    assert_eq!(unsafe { sp_replay_lookup(store, miss.as_ptr(), &mut text) }, SpStatus::NotFound);
    unsafe { sp_replay_free(store) };

    let missing = c("/nonexistent/store.jsonl");
    assert_eq!(unsafe { sp_replay_open(missing.as_ptr(), &mut store) }, SpStatus::Io);
}

#[test]
fn header_is_current_and_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/sensorpen.h")).unwrap();
    for f in ["sp_rpeaks_parse", "sp_detect", "sp_chrf", "sp_render_ecg_prompt", "sp_replay_lookup", "sp_last_error_message"] {
        assert!(header.contains(&format!(" {f}(")), "{f} missing from header");
    }
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(dir.join("tests/c/smoke.c"))
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
}

#[test]
fn c_program_links_against_the_static_library() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<this test> -> target/<profile>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libsensorpen_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let exe = Path::new(env!("CARGO_TARGET_TMPDIR")).join("sensorpen_smoke");
    let status = Command::new("cc")
        .args(["-std=c99", "-I"])
        .arg(dir.join("include"))
        .arg(dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
    let out = Command::new(&exe).arg(store_path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
