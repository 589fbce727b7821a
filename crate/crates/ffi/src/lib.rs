//! C interface to the hybp codec.
//!
//! Every function returns a [`HybpStatus`]; on failure a description is
//! available from [`hybp_last_error`] on the same thread. Handles are opaque
//! and owned by the caller, who releases them with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hybp::container::{decode_stream, DecodeMode, PipelineConfig};
use hybp::encode::{encode_sequence, EncodedStream, EncoderConfig, Method};
use hybp::frame::{Frame, VideoSequence};
use hybp::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybpStatus {
    Ok = 0,
    /// Null pointer, zero size or out-of-range setting.
    InvalidArgument = 1,
    Io = 2,
    /// Malformed stream or inconsistent coded data.
    Format = 3,
    Checksum = 4,
    Divergence = 5,
    /// Internal failure, including a caught panic.
    Internal = 6,
}

impl From<&Error> for HybpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io(_) => HybpStatus::Io,
            Error::Checksum { .. } => HybpStatus::Checksum,
            Error::Divergence(_) => HybpStatus::Divergence,
            Error::Precondition(_) | Error::QpRange { .. } => HybpStatus::InvalidArgument,
            Error::CoefficientOverflow { .. } | Error::Pipeline(_) => HybpStatus::Internal,
            _ => HybpStatus::Format,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybpMethod {
    Hybrid = 0,
    NoRefine = 1,
    PromptOnly = 2,
    Traditional = 3,
}

impl From<HybpMethod> for Method {
    fn from(m: HybpMethod) -> Self {
        match m {
            HybpMethod::Hybrid => Method::Hybrid,
            HybpMethod::NoRefine => Method::NoRefine,
            HybpMethod::PromptOnly => Method::PromptOnly,
            HybpMethod::Traditional => Method::Traditional,
        }
    }
}

/// Encoder settings.
pub struct HybpEncoder {
    cfg: EncoderConfig,
}

/// An encoded HYBP stream.
pub struct HybpStream {
    inner: EncodedStream,
}

/// Decoded 8-bit luma frames.
pub struct HybpDecoded {
    seq: VideoSequence,
    samples: Vec<Vec<u8>>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(HybpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(HybpStatus::from(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(HybpStatus::InvalidArgument, msg.to_owned())
}

/// Runs `f`, records any failure and converts panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HybpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HybpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside the codec".into());
            HybpStatus::Internal
        }
    }
}

unsafe fn handle<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller passes a handle obtained from this library or null.
    unsafe { p.as_mut() }.ok_or_else(|| invalid("null handle"))
}

fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(invalid("null output pointer"));
    }
    // SAFETY: checked non-null; the caller provides writable storage.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn hybp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates an encoder with default settings.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hybp_encoder_new(out: *mut *mut HybpEncoder) -> HybpStatus {
    guard(|| store(out, HybpEncoder { cfg: EncoderConfig::default() }))
}

/// # Safety
/// `enc` must be null or a handle from `hybp_encoder_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hybp_encoder_free(enc: *mut HybpEncoder) {
    if !enc.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(enc) });
    }
}

/// Sets the method, GOP length, latent dimension and generator seed.
///
/// # Safety
/// `enc` must be a live encoder handle.
#[no_mangle]
pub unsafe extern "C" fn hybp_encoder_configure(
    enc: *mut HybpEncoder,
    method: HybpMethod,
    gop_length: u32,
    latent_dim: u32,
    seed: u64,
) -> HybpStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let enc = unsafe { handle(enc) }?;
        if gop_length == 0 || latent_dim == 0 {
            return Err(invalid("gop length and latent dimension must be positive"));
        }
        enc.cfg.method = method.into();
        enc.cfg.codec.gop_length = gop_length as usize;
        enc.cfg.generator.latent_dim = latent_dim as usize;
        enc.cfg.generator.seed = seed;
        Ok(())
    })
}

/// Sets the inversion and refinement iteration counts and worker threads.
///
/// # Safety
/// `enc` must be a live encoder handle.
#[no_mangle]
pub unsafe extern "C" fn hybp_encoder_set_effort(
    enc: *mut HybpEncoder,
    invert_iters: u32,
    refine_iters: u32,
    jobs: u32,
) -> HybpStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let enc = unsafe { handle(enc) }?;
        if jobs == 0 {
            return Err(invalid("jobs must be at least 1"));
        }
        enc.cfg.invert.iters = invert_iters as usize;
        enc.cfg.refine.iters = refine_iters as usize;
        enc.cfg.jobs = jobs as usize;
        Ok(())
    })
}

/// Encodes `frame_count` planar 8-bit luma frames of `width * height`
/// samples each at `target_kbps`.
///
/// # Safety
/// `enc` must be a live encoder handle, `samples` must point to
/// `width * height * frame_count` readable bytes and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hybp_encode(
    enc: *const HybpEncoder,
    samples: *const u8,
    width: u32,
    height: u32,
    frame_count: u32,
    fps: u32,
    target_kbps: f64,
    out: *mut *mut HybpStream,
) -> HybpStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let enc = unsafe { enc.as_ref() }.ok_or_else(|| invalid("null handle"))?;
        let (w, h, n) = (width as usize, height as usize, frame_count as usize);
        if samples.is_null() || w == 0 || h == 0 || n == 0 {
            return Err(invalid("empty input"));
        }
        let len = w.checked_mul(h).and_then(|p| p.checked_mul(n)).ok_or_else(|| invalid("input too large"))?;
        // SAFETY: the caller guarantees `len` readable bytes.
        let data = unsafe { std::slice::from_raw_parts(samples, len) };
        let frames = data.chunks_exact(w * h).map(|c| Frame::from_u8(w, h, c)).collect::<Result<Vec<_>, _>>()?;
        let seq = VideoSequence::new(frames, fps, "ffi")?;
        let inner = encode_sequence(&seq, target_kbps * 1000.0, &enc.cfg)?;
        store(out, HybpStream { inner })
    })
}

/// Borrowed view of the stream bytes, valid until the stream is freed.
///
/// # Safety
/// `stream` must be a live stream handle and `len` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hybp_stream_bytes(stream: *const HybpStream, len: *mut usize) -> *const u8 {
    // SAFETY: forwarded caller contract.
    match (unsafe { stream.as_ref() }, unsafe { len.as_mut() }) {
        (Some(s), Some(len)) => {
            *len = s.inner.bytes.len();
            s.inner.bytes.as_ptr()
        }
        _ => ptr::null(),
    }
}

/// Whether every GOP met its byte budget; a stream over budget is still decodable.
///
/// # Safety
/// `stream` must be null or a live stream handle.
#[no_mangle]
pub unsafe extern "C" fn hybp_stream_within_budget(stream: *const HybpStream) -> bool {
    // SAFETY: forwarded caller contract.
    unsafe { stream.as_ref() }.is_some_and(|s| s.inner.all_within_budget())
}

/// # Safety
/// `stream` must be null or a stream handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hybp_stream_free(stream: *mut HybpStream) {
    if !stream.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(stream) });
    }
}

/// Decodes a HYBP stream. `stitched` selects the re-encoded keyframe path;
/// both paths give identical pictures.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hybp_decode(
    data: *const u8,
    len: usize,
    stitched: bool,
    out: *mut *mut HybpDecoded,
) -> HybpStatus {
    guard(|| {
        if data.is_null() {
            return Err(invalid("null stream"));
        }
        // SAFETY: the caller guarantees `len` readable bytes.
        let bytes = unsafe { std::slice::from_raw_parts(data, len) };
        let mode = if stitched { DecodeMode::Stitched } else { DecodeMode::Direct };
        let (seq, _) = decode_stream(bytes, mode, PipelineConfig::default())?;
        let samples = seq.frames.iter().map(Frame::to_u8).collect();
        store(out, HybpDecoded { seq, samples })
    })
}

/// Picture size, frame count and frame rate of a decoded sequence.
///
/// # Safety
/// `dec` must be a live decoded handle; each output pointer must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hybp_decoded_info(
    dec: *const HybpDecoded,
    width: *mut u32,
    height: *mut u32,
    frame_count: *mut u32,
    fps: *mut u32,
) -> HybpStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let dec = unsafe { dec.as_ref() }.ok_or_else(|| invalid("null handle"))?;
        if width.is_null() || height.is_null() || frame_count.is_null() || fps.is_null() {
            return Err(invalid("null output pointer"));
        }
        let (w, h) = dec.seq.dims().unwrap_or((0, 0));
        // SAFETY: checked non-null above.
        unsafe {
            *width = w as u32;
            *height = h as u32;
            *frame_count = dec.seq.len() as u32;
            *fps = dec.seq.fps;
        }
        Ok(())
    })
}

/// Borrowed 8-bit samples of frame `index`, `width * height` bytes, valid
/// until the sequence is freed; null when out of range.
///
/// # Safety
/// `dec` must be null or a live decoded handle.
#[no_mangle]
pub unsafe extern "C" fn hybp_decoded_frame(dec: *const HybpDecoded, index: u32) -> *const u8 {
    // SAFETY: forwarded caller contract.
    unsafe { dec.as_ref() }.and_then(|d| d.samples.get(index as usize)).map_or(ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `dec` must be null or a decoded handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hybp_decoded_free(dec: *mut HybpDecoded) {
    if !dec.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(dec) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(HybpStatus::from(&Error::Checksum { gop: 1 }), HybpStatus::Checksum);
        assert_eq!(HybpStatus::from(&Error::BadMagic(*b"ABCD")), HybpStatus::Format);
        assert_eq!(HybpStatus::from(&Error::Truncated { offset: 3 }), HybpStatus::Format);
        assert_eq!(HybpStatus::from(&Error::Divergence("x".into())), HybpStatus::Divergence);
        assert_eq!(HybpStatus::from(&Error::Precondition("x".into())), HybpStatus::InvalidArgument);
        assert_eq!(HybpStatus::from(&Error::Io(std::io::Error::other("x"))), HybpStatus::Io);
    }

    #[test]
    fn panics_become_internal_errors() {
        let st = guard(|| panic!("boom"));
        assert_eq!(st, HybpStatus::Internal);
        assert!(!hybp_last_error().is_null());
        assert_eq!(guard(|| Ok(())), HybpStatus::Ok);
        assert!(hybp_last_error().is_null());
    }
}
