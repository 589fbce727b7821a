//! Raw sequence files.
//!
//! `rawv` layout: magic `RAWV`, then little-endian `u32` width, height,
//! frame count and fps, followed by the frames in order at one byte per
//! sample, row-major.
//!
//! `y4m-luma` reads YUV4MPEG2 streams with `C420*` or `C400` colour spaces
//! and keeps only the luma plane. Writing emits `C400`.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{Frame, VideoSequence};
use crate::error::{Error, Result};

pub const RAWV_MAGIC: &[u8; 4] = b"RAWV";
pub const RAWV_HEADER_LEN: usize = 20;

const Y4M_MAGIC: &str = "YUV4MPEG2";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceFormat {
    Rawv,
    Y4mLuma,
}

impl SequenceFormat {
    /// Guesses the format from a file extension, defaulting to rawv.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("y4m") => SequenceFormat::Y4mLuma,
            _ => SequenceFormat::Rawv,
        }
    }
}

impl FromStr for SequenceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rawv" => Ok(SequenceFormat::Rawv),
            "y4m" | "y4m-luma" => Ok(SequenceFormat::Y4mLuma),
            other => Err(Error::format(format!("unknown sequence format {other:?}"))),
        }
    }
}

pub fn read_sequence(path: impl AsRef<Path>, format: SequenceFormat) -> Result<VideoSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sequence").to_string();
    match format {
        SequenceFormat::Rawv => decode_rawv(&bytes, name),
        SequenceFormat::Y4mLuma => decode_y4m(&bytes, name),
    }
}

pub fn write_sequence(seq: &VideoSequence, path: impl AsRef<Path>, format: SequenceFormat) -> Result<usize> {
    let bytes = match format {
        SequenceFormat::Rawv => encode_rawv(seq)?,
        SequenceFormat::Y4mLuma => encode_y4m(seq)?,
    };
    fs::write(path, &bytes)?;
    Ok(bytes.len())
}

pub(crate) fn encode_rawv(seq: &VideoSequence) -> Result<Vec<u8>> {
    let (w, h) = seq.dims().ok_or_else(|| Error::precondition("cannot write an empty sequence"))?;
    let mut out = Vec::with_capacity(RAWV_HEADER_LEN + w * h * seq.len());
    out.extend_from_slice(RAWV_MAGIC);
    for v in [w as u32, h as u32, seq.len() as u32, seq.fps] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for f in &seq.frames {
        out.extend(f.to_u8());
    }
    Ok(out)
}

pub(crate) fn decode_rawv(bytes: &[u8], name: String) -> Result<VideoSequence> {
    if bytes.len() < RAWV_HEADER_LEN {
        return Err(Error::format("rawv header shorter than 20 bytes"));
    }
    if &bytes[..4] != RAWV_MAGIC {
        return Err(Error::format("missing RAWV magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (w, h, n, fps) = (word(0), word(1), word(2), word(3) as u32);
    if w == 0 || h == 0 || fps == 0 {
        return Err(Error::format(format!("invalid rawv header {w}x{h} @ {fps} fps")));
    }
    let plane = w * h;
    let payload = &bytes[RAWV_HEADER_LEN..];
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let chunk = payload.get(i * plane..(i + 1) * plane).ok_or(Error::TruncatedFrame { frame: i })?;
        frames.push(Frame::from_u8(w, h, chunk)?);
    }
    VideoSequence::new(frames, fps, name)
}

fn encode_y4m(seq: &VideoSequence) -> Result<Vec<u8>> {
    let (w, h) = seq.dims().ok_or_else(|| Error::precondition("cannot write an empty sequence"))?;
    let mut out = format!("{Y4M_MAGIC} W{w} H{h} F{}:1 Ip A1:1 C400\n", seq.fps).into_bytes();
    for f in &seq.frames {
        out.extend_from_slice(b"FRAME\n");
        out.extend(f.to_u8());
    }
    Ok(out)
}

fn decode_y4m(bytes: &[u8], name: String) -> Result<VideoSequence> {
    let eol = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::format("y4m header not terminated"))?;
    let header = std::str::from_utf8(&bytes[..eol]).map_err(|_| Error::format("y4m header is not ASCII"))?;
    let mut tokens = header.split(' ');
    if tokens.next() != Some(Y4M_MAGIC) {
        return Err(Error::format("missing YUV4MPEG2 magic"));
    }
    let (mut w, mut h, mut fps) = (0usize, 0usize, 30u32);
    let mut chroma_420 = true;
    for tok in tokens.filter(|t| !t.is_empty()) {
        let (tag, val) = tok.split_at(1);
        match tag {
            "W" => w = val.parse().map_err(|_| Error::format("bad y4m width"))?,
            "H" => h = val.parse().map_err(|_| Error::format("bad y4m height"))?,
            "F" => {
                let (num, den) = val.split_once(':').ok_or_else(|| Error::format("bad y4m frame rate"))?;
                let num: f64 = num.parse().map_err(|_| Error::format("bad y4m frame rate"))?;
                let den: f64 = den.parse().map_err(|_| Error::format("bad y4m frame rate"))?;
                if den <= 0.0 || num <= 0.0 {
                    return Err(Error::format("bad y4m frame rate"));
                }
                fps = ((num / den).round() as u32).max(1);
            }
            "C" => {
                chroma_420 = if val.starts_with("420") {
                    true
                } else if val == "400" {
                    false
                } else {
                    return Err(Error::format(format!("unsupported y4m colour space C{val}")));
                }
            }
            _ => {}
        }
    }
    if w == 0 || h == 0 {
        return Err(Error::format("y4m header lacks dimensions"));
    }
    let luma = w * h;
    let chroma = if chroma_420 { 2 * w.div_ceil(2) * h.div_ceil(2) } else { 0 };

    let mut frames = Vec::new();
    let mut pos = eol + 1;
    while pos < bytes.len() {
        let idx = frames.len();
        let line_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| pos + p)
            .ok_or(Error::TruncatedFrame { frame: idx })?;
        if !bytes[pos..line_end].starts_with(b"FRAME") {
            return Err(Error::format(format!("frame {idx} lacks FRAME marker")));
        }
        let start = line_end + 1;
        let plane = bytes.get(start..start + luma).ok_or(Error::TruncatedFrame { frame: idx })?;
        if bytes.len() < start + luma + chroma {
            return Err(Error::TruncatedFrame { frame: idx });
        }
        frames.push(Frame::from_u8(w, h, plane)?);
        pos = start + luma + chroma;
    }
    VideoSequence::new(frames, fps, name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{synth_sequence, SynthKind};

    #[test]
    fn rawv_layout_size() {
        let seq = synth_sequence(SynthKind::Translate, 32, 32, 3, 7).unwrap();
        let bytes = encode_rawv(&seq).unwrap();
        // 20-byte header + 3 frames of 32*32 one-byte samples.
        assert_eq!(bytes.len(), 20 + 3 * 1024);
        assert_eq!(&bytes[..4], b"RAWV");
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
    }

    #[test]
    fn rawv_roundtrip_via_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.rawv");
        let seq = synth_sequence(SynthKind::Noise, 16, 16, 2, 1).unwrap();
        write_sequence(&seq, &path, SequenceFormat::Rawv).unwrap();
        let back = read_sequence(&path, SequenceFormat::Rawv).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.frames[0].data().len(), 256);
        for (a, b) in seq.frames.iter().zip(&back.frames) {
            assert_eq!(a.to_u8(), b.to_u8());
        }
    }

    #[test]
    fn empty_sequence_rejected() {
        let seq = VideoSequence::new(vec![], 30, "e").unwrap();
        assert!(matches!(encode_rawv(&seq), Err(Error::Precondition(_))));
    }

    #[test]
    fn empty_file_is_format_error() {
        assert!(matches!(decode_rawv(&[], "x".into()), Err(Error::Format(_))));
        assert!(matches!(decode_y4m(&[], "x".into()), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_rawv_reports_frame() {
        let seq = synth_sequence(SynthKind::Noise, 16, 16, 3, 1).unwrap();
        let bytes = encode_rawv(&seq).unwrap();
        let err = decode_rawv(&bytes[..bytes.len() - 10], "x".into()).unwrap_err();
        assert!(matches!(err, Error::TruncatedFrame { frame: 2 }));
    }

    #[test]
    fn y4m_420_discards_chroma() {
        let (w, h) = (16, 16);
        let mut bytes = b"YUV4MPEG2 W16 H16 F25:1 Ip A1:1 C420jpeg\n".to_vec();
        for i in 0..2u8 {
            bytes.extend_from_slice(b"FRAME\n");
            bytes.extend(std::iter::repeat_n(10 * (i + 1), w * h));
            bytes.extend(std::iter::repeat_n(200, 2 * 8 * 8));
        }
        let seq = decode_y4m(&bytes, "c".into()).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.fps, 25);
        assert!(seq.frames[1].to_u8().iter().all(|&v| v == 20));
    }

    #[test]
    fn y4m_rejects_444() {
        let bytes = b"YUV4MPEG2 W16 H16 F25:1 C444\nFRAME\n".to_vec();
        assert!(matches!(decode_y4m(&bytes, "c".into()), Err(Error::Format(_))));
    }

    #[test]
    fn y4m_roundtrip() {
        let seq = synth_sequence(SynthKind::CheckerPan, 16, 32, 3, 2).unwrap();
        let bytes = encode_y4m(&seq).unwrap();
        let back = decode_y4m(&bytes, "c".into()).unwrap();
        for (a, b) in seq.frames.iter().zip(&back.frames) {
            assert_eq!(a.to_u8(), b.to_u8());
        }
    }
}
