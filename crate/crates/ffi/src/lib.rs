//! C ABI for the silentwave pipeline.
//!
//! Conventions: every fallible call returns an [`SwStatus`]; out-pointers
//! are written only on `SW_STATUS_OK`. Objects returned through `**out`
//! parameters are opaque handles owned by the caller and released with the
//! matching `sw_*_free` function. `sw_last_error_message` retrieves a
//! human-readable description of the most recent failure on the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use silentwave::eval;
use silentwave::io;
use silentwave::isolate::{extract_motion_trace, IsolationParams, MotionTrace};
use silentwave::lexicon::{Lexicon, TokenSequence};
use silentwave::nn::{beam_search, checkpoint, featurize_series, BeamConfig, FrontendConfig, Seq2Seq};
use silentwave::segment::{segment_units, SegmenterParams, UnitSegment};
use silentwave::signal::IqRecording;

/// Call outcome. Non-zero values indicate failure; see
/// `sw_last_error_message` for details.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    IoError = 3,
    ProcessingError = 4,
    BufferTooSmall = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: SwStatus, message: impl std::fmt::Display) -> SwStatus {
    set_error(&message.to_string());
    status
}

/// Copy the last error message (NUL-terminated) into `buf`. Returns the
/// full message length in bytes, excluding the terminator; pass a null
/// buffer to query the required capacity.
#[no_mangle]
pub extern "C" fn sw_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn path_from(raw: *const c_char) -> Result<&'static Path, SwStatus> {
    if raw.is_null() {
        return Err(fail(SwStatus::NullArgument, "null path"));
    }
    match CStr::from_ptr(raw).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => Err(fail(SwStatus::InvalidArgument, "path is not valid UTF-8")),
    }
}

macro_rules! nonnull {
    ($ptr:expr) => {
        if $ptr.is_null() {
            return fail(SwStatus::NullArgument, concat!(stringify!($ptr), " is null"));
        }
    };
}

// ---------------------------------------------------------------------------
// IQ recordings

/// Opaque complex baseband recording.
pub struct SwIqRecording(IqRecording);

/// Read an IQ file (interleaved little-endian f32 pairs with a sidecar
/// manifest) into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sw_iq_read(
    path: *const c_char,
    out: *mut *mut SwIqRecording,
) -> SwStatus {
    nonnull!(out);
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::read_iq(path) {
        Ok(iq) => {
            *out = Box::into_raw(Box::new(SwIqRecording(iq)));
            SwStatus::Ok
        }
        Err(e) => fail(SwStatus::IoError, e),
    }
}

/// Build a recording from interleaved I/Q floats (`n_pairs` complex
/// samples).
///
/// # Safety
/// `iq_interleaved` must point to `2 * n_pairs` floats.
#[no_mangle]
pub unsafe extern "C" fn sw_iq_from_samples(
    iq_interleaved: *const f32,
    n_pairs: usize,
    sample_rate_hz: f64,
    out: *mut *mut SwIqRecording,
) -> SwStatus {
    nonnull!(out);
    nonnull!(iq_interleaved);
    if sample_rate_hz <= 0.0 {
        return fail(SwStatus::InvalidArgument, "sample rate must be positive");
    }
    let raw = std::slice::from_raw_parts(iq_interleaved, 2 * n_pairs);
    let samples = raw
        .chunks_exact(2)
        .map(|c| num_complex_new(c[0] as f64, c[1] as f64))
        .collect();
    *out = Box::into_raw(Box::new(SwIqRecording(IqRecording {
        samples,
        sample_rate_hz,
        t0_s: 0.0,
    })));
    SwStatus::Ok
}

fn num_complex_new(re: f64, im: f64) -> silentwave::signal::IqSample {
    silentwave::signal::IqSample::new(re, im)
}

/// # Safety
/// `iq` must be a handle from this library (or null).
#[no_mangle]
pub unsafe extern "C" fn sw_iq_free(iq: *mut SwIqRecording) {
    if !iq.is_null() {
        drop(Box::from_raw(iq));
    }
}

/// # Safety
/// `iq` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sw_iq_len(iq: *const SwIqRecording) -> usize {
    if iq.is_null() {
        0
    } else {
        (*iq).0.len()
    }
}

/// # Safety
/// `iq` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sw_iq_sample_rate(iq: *const SwIqRecording) -> f64 {
    if iq.is_null() {
        0.0
    } else {
        (*iq).0.sample_rate_hz
    }
}

// ---------------------------------------------------------------------------
// Isolation

/// Isolation-chain settings; mirror of the library defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SwIsolationParams {
    pub delta_f1_hz: f64,
    pub bandwidth_hz: f64,
    pub trace_rate_hz: f64,
    pub smooth_len: usize,
    pub lowpass_high_hz: f64,
    pub lowpass_taps: usize,
    pub gate_window_s: f64,
    pub gate_alpha: f64,
    pub vmd_modes: usize,
    pub vmd_penalty: f64,
    pub vmd_tol: f64,
    pub vmd_max_iter: usize,
    pub keep_low_hz: f64,
    pub keep_high_hz: f64,
}

impl From<SwIsolationParams> for IsolationParams {
    fn from(p: SwIsolationParams) -> Self {
        IsolationParams {
            delta_f1_hz: p.delta_f1_hz,
            bandwidth_hz: p.bandwidth_hz,
            trace_rate_hz: p.trace_rate_hz,
            smooth_len: p.smooth_len,
            lowpass_high_hz: p.lowpass_high_hz,
            lowpass_taps: p.lowpass_taps,
            gate_window_s: p.gate_window_s,
            gate_alpha: p.gate_alpha,
            vmd_modes: p.vmd_modes,
            vmd_penalty: p.vmd_penalty,
            vmd_tol: p.vmd_tol,
            vmd_max_iter: p.vmd_max_iter,
            keep_low_hz: p.keep_low_hz,
            keep_high_hz: p.keep_high_hz,
        }
    }
}

/// Fill `out` with the default isolation parameters.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sw_isolation_params_default(out: *mut SwIsolationParams) -> SwStatus {
    nonnull!(out);
    let d = IsolationParams::default();
    *out = SwIsolationParams {
        delta_f1_hz: d.delta_f1_hz,
        bandwidth_hz: d.bandwidth_hz,
        trace_rate_hz: d.trace_rate_hz,
        smooth_len: d.smooth_len,
        lowpass_high_hz: d.lowpass_high_hz,
        lowpass_taps: d.lowpass_taps,
        gate_window_s: d.gate_window_s,
        gate_alpha: d.gate_alpha,
        vmd_modes: d.vmd_modes,
        vmd_penalty: d.vmd_penalty,
        vmd_tol: d.vmd_tol,
        vmd_max_iter: d.vmd_max_iter,
        keep_low_hz: d.keep_low_hz,
        keep_high_hz: d.keep_high_hz,
    };
    SwStatus::Ok
}

/// Opaque lip-motion trace.
pub struct SwMotionTrace(MotionTrace);

/// Run the full isolation chain (sideband isolation, phase differences,
/// gating, VMD) on a recording.
///
/// # Safety
/// All pointers must be valid; `params` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn sw_extract_trace(
    iq: *const SwIqRecording,
    params: *const SwIsolationParams,
    out: *mut *mut SwMotionTrace,
) -> SwStatus {
    nonnull!(out);
    nonnull!(iq);
    let p: IsolationParams =
        if params.is_null() { IsolationParams::default() } else { (*params).into() };
    match extract_motion_trace(&(*iq).0, &p) {
        Ok((trace, _gate)) => {
            *out = Box::into_raw(Box::new(SwMotionTrace(trace)));
            SwStatus::Ok
        }
        Err(e) => fail(SwStatus::ProcessingError, e),
    }
}

/// # Safety
/// `trace` must be a handle from this library (or null).
#[no_mangle]
pub unsafe extern "C" fn sw_trace_free(trace: *mut SwMotionTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `trace` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sw_trace_len(trace: *const SwMotionTrace) -> usize {
    if trace.is_null() {
        0
    } else {
        (*trace).0.values.len()
    }
}

/// # Safety
/// `trace` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sw_trace_sample_rate(trace: *const SwMotionTrace) -> f64 {
    if trace.is_null() {
        0.0
    } else {
        (*trace).0.values.sample_rate_hz
    }
}

/// Copy trace samples into `buf`; writes at most `cap` values and stores
/// the copied count in `written`.
///
/// # Safety
/// `buf` must point to at least `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn sw_trace_values(
    trace: *const SwMotionTrace,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> SwStatus {
    nonnull!(trace);
    nonnull!(buf);
    nonnull!(written);
    let values = &(*trace).0.values.values;
    if cap < values.len() {
        *written = values.len();
        return fail(
            SwStatus::BufferTooSmall,
            format!("need capacity {}, got {cap}", values.len()),
        );
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    *written = values.len();
    SwStatus::Ok
}

/// Number of gated-out intervals.
///
/// # Safety
/// `trace` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sw_trace_gap_count(trace: *const SwMotionTrace) -> usize {
    if trace.is_null() {
        0
    } else {
        (*trace).0.gaps.len()
    }
}

/// Fetch one gated-out interval in seconds.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_trace_gap(
    trace: *const SwMotionTrace,
    index: usize,
    start_s: *mut f64,
    end_s: *mut f64,
) -> SwStatus {
    nonnull!(trace);
    nonnull!(start_s);
    nonnull!(end_s);
    let gaps = &(*trace).0.gaps;
    match gaps.get(index) {
        Some(&(a, b)) => {
            *start_s = a;
            *end_s = b;
            SwStatus::Ok
        }
        None => fail(SwStatus::InvalidArgument, format!("gap index {index} out of range")),
    }
}

/// Read a trace file written by the pipeline.
///
/// # Safety
/// `path` must be NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sw_trace_read(
    path: *const c_char,
    out: *mut *mut SwMotionTrace,
) -> SwStatus {
    nonnull!(out);
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::read_trace(path) {
        Ok(trace) => {
            *out = Box::into_raw(Box::new(SwMotionTrace(trace)));
            SwStatus::Ok
        }
        Err(e) => fail(SwStatus::IoError, e),
    }
}

/// Write a trace (values, gaps, provenance) to `path` with its sidecar.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_trace_write(
    path: *const c_char,
    trace: *const SwMotionTrace,
) -> SwStatus {
    nonnull!(trace);
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::write_trace(path, &(*trace).0) {
        Ok(()) => SwStatus::Ok,
        Err(e) => fail(SwStatus::IoError, e),
    }
}

// ---------------------------------------------------------------------------
// Segmentation

/// Segmenter thresholds (see library docs for semantics).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SwSegmenterParams {
    pub w_s: f64,
    pub w_l: f64,
    pub w_f: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub min_region_s: f64,
    pub activity_ratio: f64,
}

/// Fill `out` with the default segmenter parameters.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_segmenter_params_default(out: *mut SwSegmenterParams) -> SwStatus {
    nonnull!(out);
    let d = SegmenterParams::default();
    *out = SwSegmenterParams {
        w_s: d.w_s,
        w_l: d.w_l,
        w_f: d.w_f,
        lambda1: d.lambda1,
        lambda2: d.lambda2,
        min_region_s: d.min_region_s,
        activity_ratio: d.activity_ratio,
    };
    SwStatus::Ok
}

/// Opaque list of unit segments.
pub struct SwSegmentList(Vec<UnitSegment>);

/// Segment a trace into lip-motion units.
///
/// # Safety
/// Pointers must be valid; `params` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn sw_segment(
    trace: *const SwMotionTrace,
    params: *const SwSegmenterParams,
    out: *mut *mut SwSegmentList,
) -> SwStatus {
    nonnull!(out);
    nonnull!(trace);
    let p = if params.is_null() {
        SegmenterParams::default()
    } else {
        let s = *params;
        SegmenterParams {
            w_s: s.w_s,
            w_l: s.w_l,
            w_f: s.w_f,
            lambda1: s.lambda1,
            lambda2: s.lambda2,
            min_region_s: s.min_region_s,
            activity_ratio: s.activity_ratio,
        }
    };
    match segment_units(&(*trace).0, &p) {
        Ok(result) => {
            *out = Box::into_raw(Box::new(SwSegmentList(result.segments)));
            SwStatus::Ok
        }
        Err(e) => fail(SwStatus::ProcessingError, e),
    }
}

/// # Safety
/// `list` must be a handle from this library (or null).
#[no_mangle]
pub unsafe extern "C" fn sw_segments_free(list: *mut SwSegmentList) {
    if !list.is_null() {
        drop(Box::from_raw(list));
    }
}

/// # Safety
/// `list` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sw_segments_len(list: *const SwSegmentList) -> usize {
    if list.is_null() {
        0
    } else {
        (*list).0.len()
    }
}

/// Fetch one segment's boundaries in seconds.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_segments_get(
    list: *const SwSegmentList,
    index: usize,
    start_s: *mut f64,
    end_s: *mut f64,
) -> SwStatus {
    nonnull!(list);
    nonnull!(start_s);
    nonnull!(end_s);
    let segs = &(*list).0;
    match segs.get(index) {
        Some(seg) => {
            *start_s = seg.start_s;
            *end_s = seg.end_s;
            SwStatus::Ok
        }
        None => fail(SwStatus::InvalidArgument, format!("segment index {index} out of range")),
    }
}

// ---------------------------------------------------------------------------
// Lexicon

/// Opaque subword lexicon.
pub struct SwLexicon(Lexicon);

/// Load a lexicon file.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_lexicon_load(
    path: *const c_char,
    out: *mut *mut SwLexicon,
) -> SwStatus {
    nonnull!(out);
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match Lexicon::load(path) {
        Ok(lex) => {
            *out = Box::into_raw(Box::new(SwLexicon(lex)));
            SwStatus::Ok
        }
        Err(e) => fail(SwStatus::IoError, e),
    }
}

/// # Safety
/// `lex` must be a handle from this library (or null).
#[no_mangle]
pub unsafe extern "C" fn sw_lexicon_free(lex: *mut SwLexicon) {
    if !lex.is_null() {
        drop(Box::from_raw(lex));
    }
}

/// # Safety
/// `lex` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sw_lexicon_size(lex: *const SwLexicon) -> usize {
    if lex.is_null() {
        0
    } else {
        (*lex).0.size()
    }
}

/// Tokenize `text` into ids (ending with `<eos>`). Writes up to `cap` ids
/// and stores the full count in `written`; returns `SW_STATUS_BUFFER_TOO_SMALL`
/// when `cap` is insufficient.
///
/// # Safety
/// Pointers must be valid; `ids` must hold `cap` entries.
#[no_mangle]
pub unsafe extern "C" fn sw_lexicon_tokenize(
    lex: *const SwLexicon,
    text: *const c_char,
    ids: *mut u32,
    cap: usize,
    written: *mut usize,
) -> SwStatus {
    nonnull!(lex);
    nonnull!(text);
    nonnull!(written);
    let text = match CStr::from_ptr(text).to_str() {
        Ok(s) => s,
        Err(_) => return fail(SwStatus::InvalidArgument, "text is not valid UTF-8"),
    };
    match (*lex).0.tokenize(text) {
        Ok(seq) => {
            *written = seq.ids.len();
            if seq.ids.len() > cap {
                return fail(
                    SwStatus::BufferTooSmall,
                    format!("need capacity {}, got {cap}", seq.ids.len()),
                );
            }
            if !ids.is_null() {
                std::ptr::copy_nonoverlapping(seq.ids.as_ptr(), ids, seq.ids.len());
            }
            SwStatus::Ok
        }
        Err(e) => fail(SwStatus::ProcessingError, e),
    }
}

/// Detokenize ids back to text (NUL-terminated). Stores the full byte
/// length (excluding the terminator) in `written`.
///
/// # Safety
/// Pointers must be valid; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn sw_lexicon_detokenize(
    lex: *const SwLexicon,
    ids: *const u32,
    n_ids: usize,
    buf: *mut c_char,
    cap: usize,
    written: *mut usize,
) -> SwStatus {
    nonnull!(lex);
    nonnull!(ids);
    nonnull!(written);
    let seq = TokenSequence { ids: std::slice::from_raw_parts(ids, n_ids).to_vec() };
    match (*lex).0.detokenize(&seq) {
        Ok(text) => {
            let bytes = text.as_bytes();
            *written = bytes.len();
            if bytes.len() + 1 > cap {
                return fail(
                    SwStatus::BufferTooSmall,
                    format!("need capacity {}, got {cap}", bytes.len() + 1),
                );
            }
            if !buf.is_null() {
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
                *buf.add(bytes.len()) = 0;
            }
            SwStatus::Ok
        }
        Err(e) => fail(SwStatus::ProcessingError, e),
    }
}

// ---------------------------------------------------------------------------
// Decoding

/// Opaque trained sequence model.
pub struct SwModel(Seq2Seq);

/// Load a model checkpoint.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_model_load(path: *const c_char, out: *mut *mut SwModel) -> SwStatus {
    nonnull!(out);
    let path = match path_from(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match checkpoint::load_seq2seq(path) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(SwModel(model)));
            SwStatus::Ok
        }
        Err(e) => fail(SwStatus::IoError, e),
    }
}

/// # Safety
/// `model` must be a handle from this library (or null).
#[no_mangle]
pub unsafe extern "C" fn sw_model_free(model: *mut SwModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// STFT frontend settings for decoding.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SwFrontendParams {
    pub resample_hz: f64,
    pub window_len: usize,
    pub hop: usize,
    pub log_floor: f64,
}

/// Fill `out` with the reference frontend (1 kHz, 256-sample window,
/// 10-sample hop).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_frontend_params_default(out: *mut SwFrontendParams) -> SwStatus {
    nonnull!(out);
    let d = FrontendConfig::default();
    *out = SwFrontendParams {
        resample_hz: d.resample_hz,
        window_len: d.window_len,
        hop: d.hop,
        log_floor: d.log_floor,
    };
    SwStatus::Ok
}

/// Beam-decode a trace into token ids (ending with `<eos>`). Stores the
/// full token count in `written`.
///
/// # Safety
/// Pointers must be valid; `ids` must hold `cap` entries; `frontend` may
/// be null for the reference framing.
#[no_mangle]
pub unsafe extern "C" fn sw_decode_trace(
    model: *const SwModel,
    trace: *const SwMotionTrace,
    frontend: *const SwFrontendParams,
    beam_width: u32,
    max_len: u32,
    ids: *mut u32,
    cap: usize,
    written: *mut usize,
) -> SwStatus {
    nonnull!(model);
    nonnull!(trace);
    nonnull!(written);
    let fc = if frontend.is_null() {
        FrontendConfig::default()
    } else {
        let f = *frontend;
        FrontendConfig {
            resample_hz: f.resample_hz,
            window_len: f.window_len,
            hop: f.hop,
            log_floor: f.log_floor,
        }
    };
    let frames = match featurize_series(&(*trace).0.values, &fc) {
        Ok(f) => f,
        Err(e) => return fail(SwStatus::ProcessingError, e),
    };
    let beam = BeamConfig {
        width: beam_width.max(1) as usize,
        max_len: max_len.max(1) as usize,
        length_penalty: None,
    };
    match beam_search(&(*model).0, &frames, beam) {
        Ok((tokens, _score)) => {
            *written = tokens.ids.len();
            if tokens.ids.len() > cap {
                return fail(
                    SwStatus::BufferTooSmall,
                    format!("need capacity {}, got {cap}", tokens.ids.len()),
                );
            }
            if !ids.is_null() {
                std::ptr::copy_nonoverlapping(tokens.ids.as_ptr(), ids, tokens.ids.len());
            }
            SwStatus::Ok
        }
        Err(e) => fail(SwStatus::ProcessingError, e),
    }
}

// ---------------------------------------------------------------------------
// Metrics

/// Word-level alignment counts and derived metrics.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SwEvalResult {
    pub wer: f64,
    pub word_accuracy: f64,
    pub correct: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

/// Word error rate of `hypothesis` against `reference`.
///
/// # Safety
/// Pointers must be valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sw_wer(
    reference: *const c_char,
    hypothesis: *const c_char,
    out: *mut SwEvalResult,
) -> SwStatus {
    nonnull!(reference);
    nonnull!(hypothesis);
    nonnull!(out);
    let (r, h) = match (CStr::from_ptr(reference).to_str(), CStr::from_ptr(hypothesis).to_str()) {
        (Ok(r), Ok(h)) => (r, h),
        _ => return fail(SwStatus::InvalidArgument, "strings are not valid UTF-8"),
    };
    match eval::wer(r, h) {
        Ok(e) => {
            *out = SwEvalResult {
                wer: e.wer,
                word_accuracy: e.word_accuracy,
                correct: e.correct,
                substitutions: e.substitutions,
                deletions: e.deletions,
                insertions: e.insertions,
            };
            SwStatus::Ok
        }
        Err(e) => fail(SwStatus::InvalidArgument, e),
    }
}
