//! Exercises the C ABI end to end: synthetic recording in, trace and
//! segments out, lexicon round trip, and WER scoring. A second test
//! compiles and runs a small C program against the generated header and
//! static library.

use std::ffi::{CStr, CString};
use std::path::PathBuf;

use silentwave_ffi::*;

fn make_iq() -> *mut SwIqRecording {
    // 2 s of a 2 kHz square-wave-modulated tag over a DC direct path at
    // 20 kHz; a 12 Hz phase wobble in [0.5 s, 1.3 s) stands in for one
    // lip-motion unit flanked by quiet.
    let fs = 20_000.0;
    let n = 40_000usize;
    let mut interleaved = Vec::with_capacity(2 * n);
    let mut phase = 0.0f64;
    for k in 0..n {
        let t = k as f64 / fs;
        let m = if (t * 2000.0).rem_euclid(1.0) < 0.5 { 1.0 } else { -1.0 };
        let active = (0.5..1.3).contains(&t);
        let f_d = if active {
            18.0 * (2.0 * std::f64::consts::PI * 12.0 * (t - 0.5)).sin()
        } else {
            0.0
        };
        phase += 2.0 * std::f64::consts::PI * f_d / fs;
        let tag_re = 0.5 * phase.cos() * m;
        let tag_im = 0.5 * phase.sin() * m;
        interleaved.push((1.0 + tag_re) as f32);
        interleaved.push(tag_im as f32);
    }
    let mut out: *mut SwIqRecording = std::ptr::null_mut();
    let status = unsafe { sw_iq_from_samples(interleaved.as_ptr(), n, fs, &mut out) };
    assert_eq!(status, SwStatus::Ok);
    out
}

#[test]
fn trace_extraction_and_segments_via_c_abi() {
    unsafe {
        let iq = make_iq();
        assert_eq!(sw_iq_len(iq), 40_000);
        assert_eq!(sw_iq_sample_rate(iq), 20_000.0);

        let mut params = std::mem::zeroed::<SwIsolationParams>();
        assert_eq!(sw_isolation_params_default(&mut params), SwStatus::Ok);
        assert_eq!(params.delta_f1_hz, 2000.0);

        let mut trace: *mut SwMotionTrace = std::ptr::null_mut();
        assert_eq!(sw_extract_trace(iq, &params, &mut trace), SwStatus::Ok);
        let len = sw_trace_len(trace);
        assert!(len > 1500, "trace length {len}");
        assert_eq!(sw_trace_sample_rate(trace), 1000.0);

        let mut values = vec![0.0f64; len];
        let mut written = 0usize;
        assert_eq!(
            sw_trace_values(trace, values.as_mut_ptr(), values.len(), &mut written),
            SwStatus::Ok
        );
        assert_eq!(written, len);
        let energy: f64 = values.iter().map(|v| v * v).sum();
        assert!(energy > 0.0);

        // Buffer-too-small path reports the required capacity.
        let mut tiny = [0.0f64; 4];
        let mut needed = 0usize;
        assert_eq!(
            sw_trace_values(trace, tiny.as_mut_ptr(), tiny.len(), &mut needed),
            SwStatus::BufferTooSmall
        );
        assert_eq!(needed, len);
        let mut msg = vec![0i8; 128];
        let msg_len = sw_last_error_message(msg.as_mut_ptr(), msg.len());
        assert!(msg_len > 0);

        let mut segs: *mut SwSegmentList = std::ptr::null_mut();
        assert_eq!(sw_segment(trace, std::ptr::null(), &mut segs), SwStatus::Ok);
        let n_segs = sw_segments_len(segs);
        assert!(n_segs >= 1, "expected at least one unit, got {n_segs}");
        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(sw_segments_get(segs, 0, &mut a, &mut b), SwStatus::Ok);
        assert!(b > a);
        assert_eq!(
            sw_segments_get(segs, n_segs, &mut a, &mut b),
            SwStatus::InvalidArgument
        );

        sw_segments_free(segs);
        sw_trace_free(trace);
        sw_iq_free(iq);
    }
}

#[test]
fn trace_file_roundtrip_via_c_abi() {
    unsafe {
        let iq = make_iq();
        let mut trace: *mut SwMotionTrace = std::ptr::null_mut();
        assert_eq!(sw_extract_trace(iq, std::ptr::null(), &mut trace), SwStatus::Ok);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("t.trace").to_str().unwrap()).unwrap();
        assert_eq!(sw_trace_write(path.as_ptr(), trace), SwStatus::Ok);

        let mut back: *mut SwMotionTrace = std::ptr::null_mut();
        assert_eq!(sw_trace_read(path.as_ptr(), &mut back), SwStatus::Ok);
        assert_eq!(sw_trace_len(back), sw_trace_len(trace));

        sw_trace_free(back);
        sw_trace_free(trace);
        sw_iq_free(iq);
    }
}

#[test]
fn lexicon_roundtrip_via_c_abi() {
    use silentwave::lexicon::{build_lexicon, LexiconOptions};
    use std::collections::BTreeMap;

    let freqs: BTreeMap<String, u64> =
        [("open", 5u64), ("the", 9), ("door", 4), ("window", 3)]
            .into_iter()
            .map(|(w, f)| (w.to_string(), f))
            .collect();
    let lex = build_lexicon(&freqs, LexiconOptions { max_size: 120, lowercase: true }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lex.txt");
    lex.save(&path).unwrap();

    unsafe {
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        let mut handle: *mut SwLexicon = std::ptr::null_mut();
        assert_eq!(sw_lexicon_load(cpath.as_ptr(), &mut handle), SwStatus::Ok);
        assert_eq!(sw_lexicon_size(handle), lex.size());

        let text = CString::new("open the window").unwrap();
        let mut ids = vec![0u32; 64];
        let mut n_ids = 0usize;
        assert_eq!(
            sw_lexicon_tokenize(handle, text.as_ptr(), ids.as_mut_ptr(), ids.len(), &mut n_ids),
            SwStatus::Ok
        );
        assert!(n_ids >= 4); // at least three words plus <eos>

        let mut buf = vec![0i8; 256];
        let mut n_text = 0usize;
        assert_eq!(
            sw_lexicon_detokenize(handle, ids.as_ptr(), n_ids, buf.as_mut_ptr(), buf.len(), &mut n_text),
            SwStatus::Ok
        );
        let round = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        assert_eq!(round, "open the window");

        // Unknown character surfaces as a processing error with a message.
        let bad = CString::new("q7@").unwrap();
        let status =
            sw_lexicon_tokenize(handle, bad.as_ptr(), ids.as_mut_ptr(), ids.len(), &mut n_ids);
        assert_eq!(status, SwStatus::ProcessingError);

        sw_lexicon_free(handle);
    }
}

#[test]
fn wer_via_c_abi() {
    unsafe {
        let r = CString::new("a b c d e f g h i j").unwrap();
        let h = CString::new("z a b x d e y g h i").unwrap();
        let mut out = std::mem::zeroed::<SwEvalResult>();
        assert_eq!(sw_wer(r.as_ptr(), h.as_ptr(), &mut out), SwStatus::Ok);
        assert!((out.wer - 0.4).abs() < 1e-12);
        assert!((out.word_accuracy - 0.7).abs() < 1e-12);
        assert_eq!(out.substitutions, 2);

        let empty = CString::new("").unwrap();
        assert_eq!(
            sw_wer(empty.as_ptr(), h.as_ptr(), &mut out),
            SwStatus::InvalidArgument
        );
    }
}

#[test]
fn version_is_exposed() {
    let v = unsafe { CStr::from_ptr(sw_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compile and run a small C program against the generated header and the
/// static library; skipped when no C compiler is available.
#[test]
fn c_program_links_against_header_and_staticlib() {
    let cc = ["cc", "gcc", "clang"]
        .iter()
        .find(|c| {
            std::process::Command::new(c)
                .arg("--version")
                .output()
                .map(|o| o.status.success())
                .unwrap_or(false)
        })
        .copied();
    let Some(cc) = cc else {
        eprintln!("no C compiler found; skipping");
        return;
    };

    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include_dir = manifest.join("include");
    let target_dir = manifest.parent().unwrap().parent().unwrap().join("target");
    let lib = ["debug", "release"]
        .iter()
        .map(|p| target_dir.join(p).join("libsilentwave_ffi.a"))
        .find(|p| p.exists());
    let Some(lib) = lib else {
        panic!("libsilentwave_ffi.a not found under {}", target_dir.display());
    };

    let dir = tempfile::tempdir().unwrap();
    let c_src = dir.path().join("smoke.c");
    std::fs::write(
        &c_src,
        r#"
#include "silentwave.h"
#include <stdio.h>
#include <string.h>

int main(void) {
    if (strlen(sw_version()) == 0) return 1;
    SwEvalResult result;
    if (sw_wer("go left now", "go right now", &result) != SW_STATUS_OK) return 2;
    if (result.substitutions != 1 || result.correct != 2) return 3;
    SwIsolationParams params;
    if (sw_isolation_params_default(&params) != SW_STATUS_OK) return 4;
    if (params.vmd_modes != 4) return 5;
    float iq[4000];
    for (int k = 0; k < 2000; k++) {
        iq[2 * k] = 1.0f;
        iq[2 * k + 1] = 0.0f;
    }
    SwIqRecording* rec = NULL;
    if (sw_iq_from_samples(iq, 2000, 20000.0, &rec) != SW_STATUS_OK) return 6;
    if (sw_iq_len(rec) != 2000) return 7;
    sw_iq_free(rec);
    printf("ok\n");
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let compile = std::process::Command::new(cc)
        .arg(&c_src)
        .arg("-I")
        .arg(&include_dir)
        .arg(lib)
        .arg("-lpthread")
        .arg("-lm")
        .arg("-ldl")
        .arg("-o")
        .arg(&exe)
        .output()
        .expect("compiler invocation");
    assert!(
        compile.status.success(),
        "C compilation failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );
    let run = std::process::Command::new(&exe).output().expect("run smoke test");
    assert!(run.status.success(), "smoke binary exited with {:?}", run.status);
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
