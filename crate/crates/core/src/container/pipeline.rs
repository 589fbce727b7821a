//! Dual decoding: keyframe generation for GOP `n + 1` overlaps legacy decoding
//! of GOP `n`, handed over through a queue of depth one.

use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use super::{demux, stitch, GopRecord, StreamHeader, TrackLayout};
use crate::codec::{decode_gop, CodedGop};
use crate::error::{Error, Result};
use crate::frame::{Frame, VideoSequence};
use crate::genprior::{deserialize_latent, Generator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Legacy units decode against the injected keyframe.
    #[default]
    Direct,
    /// The keyframe is re-encoded losslessly and stitched in front of the legacy units.
    Stitched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    /// Run the two stages on separate threads.
    pub pipelined: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { pipelined: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GopTiming {
    pub generate: Duration,
    /// Lossless re-encode of the keyframe (stitched mode only).
    pub stitch: Duration,
    pub legacy: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecodeTiming {
    pub gops: Vec<GopTiming>,
    pub wall: Duration,
}

impl DecodeTiming {
    pub fn total_generate(&self) -> Duration {
        self.gops.iter().map(|g| g.generate).sum()
    }

    pub fn total_stitch(&self) -> Duration {
        self.gops.iter().map(|g| g.stitch).sum()
    }

    pub fn total_legacy(&self) -> Duration {
        self.gops.iter().map(|g| g.legacy).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("gop,generate_ms,stitch_ms,legacy_ms\n");
        for (i, g) in self.gops.iter().enumerate() {
            let ms = |d: Duration| d.as_secs_f64() * 1e3;
            out.push_str(&format!("{i},{:.3},{:.3},{:.3}\n", ms(g.generate), ms(g.stitch), ms(g.legacy)));
        }
        out.push_str(&format!("wall,,,{:.3}\n", self.wall.as_secs_f64() * 1e3));
        out
    }
}

/// Runs `produce` for items `0..n` and feeds the results to `consume` in order.
///
/// When pipelined, the producer runs on its own thread and may be at most one
/// finished item ahead of the consumer. An error from either side stops both.
pub fn run_pipeline<A, B, P, C>(n: usize, pipelined: bool, produce: P, mut consume: C) -> Result<Vec<B>>
where
    A: Send,
    P: Fn(usize) -> Result<A> + Send,
    C: FnMut(usize, A) -> Result<B>,
{
    if !pipelined {
        return (0..n).map(|i| consume(i, produce(i)?)).collect();
    }
    thread::scope(|s| {
        let (tx, rx) = mpsc::sync_channel::<(usize, Result<A>)>(1);
        let producer = s.spawn(move || {
            for i in 0..n {
                let item = produce(i);
                let failed = item.is_err();
                // A closed channel means the consumer has stopped.
                if tx.send((i, item)).is_err() || failed {
                    break;
                }
            }
        });
        let mut out = Vec::with_capacity(n);
        for expected in 0..n {
            let (i, item) = rx.recv().map_err(|_| Error::Pipeline("producer stopped early".into()))?;
            if i != expected {
                return Err(Error::Pipeline(format!("item {i} arrived in place of {expected}")));
            }
            out.push(consume(i, item?)?);
        }
        drop(rx);
        producer.join().map_err(|_| Error::Pipeline("producer panicked".into()))?;
        Ok(out)
    })
}

struct Keyframe {
    frame: Option<Frame>,
    elapsed: Duration,
}

fn generate_keyframe(generator: Option<&Generator>, record: &GopRecord) -> Result<Keyframe> {
    let started = Instant::now();
    let frame = match generator {
        None => {
            if !record.neural.is_empty() {
                return Err(Error::format("neural payload in a stream without a neural track"));
            }
            None
        }
        Some(g) => {
            let latent = deserialize_latent(&record.neural)?;
            latent.check_spec(g.spec())?;
            Some(g.generate_iframe(&latent.z)?.quantized())
        }
    };
    Ok(Keyframe { frame, elapsed: started.elapsed() })
}

fn decode_legacy(
    header: &StreamHeader,
    mode: DecodeMode,
    gop: usize,
    record: &GopRecord,
    key: Keyframe,
) -> Result<(Vec<Frame>, GopTiming)> {
    let dims = header.padded_dims();
    let cfg = &header.codec;
    let n = header.gop_frames(gop);
    let mut timing = GopTiming { generate: key.elapsed, ..Default::default() };
    let started = Instant::now();
    let frames = match (header.layout, key.frame) {
        (TrackLayout::PromptOnly, Some(i_frame)) => {
            if !record.legacy.is_empty() {
                return Err(Error::format(format!("GOP {gop}: legacy payload in a prompt-only stream")));
            }
            vec![i_frame; n]
        }
        (TrackLayout::Hybrid, Some(i_frame)) => match mode {
            DecodeMode::Direct => {
                let coded = CodedGop::from_bytes(&record.legacy)?;
                if coded.i_unit.is_some() {
                    return Err(Error::format(format!("GOP {gop}: I unit in the legacy track")));
                }
                decode_gop(&coded, Some(&i_frame), dims, cfg)?
            }
            DecodeMode::Stitched => {
                let stitch_started = Instant::now();
                let stitched = stitch(&i_frame, &record.legacy, cfg)?;
                timing.stitch = stitch_started.elapsed();
                stitched.decode(dims, cfg)?
            }
        },
        (TrackLayout::Traditional, None) => {
            let coded = CodedGop::from_bytes(&record.legacy)?;
            decode_gop(&coded, None, dims, cfg)?
        }
        _ => unreachable!("keyframe presence follows the layout"),
    };
    if frames.len() != n {
        return Err(Error::Structure(format!("GOP {gop} decodes to {} frames, header says {n}", frames.len())));
    }
    timing.legacy = started.elapsed() - timing.stitch;
    let frames = frames.into_iter().map(|f| f.crop(header.width, header.height)).collect();
    Ok((frames, timing))
}

/// Demuxes and decodes a HYBP stream. Both modes and both pipeline settings
/// give bit-identical pictures.
pub fn decode_stream(
    bytes: &[u8],
    mode: DecodeMode,
    pipeline: PipelineConfig,
) -> Result<(VideoSequence, DecodeTiming)> {
    let started = Instant::now();
    let (header, records) = demux(bytes)?;
    let generator = match header.layout {
        TrackLayout::Traditional => None,
        _ => Some(Generator::new(header.generator)?),
    };
    let per_gop = run_pipeline(
        records.len(),
        pipeline.pipelined,
        |g| generate_keyframe(generator.as_ref(), &records[g]),
        |g, key| decode_legacy(&header, mode, g, &records[g], key),
    )?;
    let mut frames = Vec::with_capacity(header.frame_count);
    let mut timing = DecodeTiming::default();
    for (f, t) in per_gop {
        frames.extend(f);
        timing.gops.push(t);
    }
    timing.wall = started.elapsed();
    Ok((VideoSequence::new(frames, header.fps, "decoded")?, timing))
}
