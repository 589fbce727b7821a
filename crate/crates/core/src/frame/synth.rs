use std::f64::consts::TAU;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Frame, VideoSequence};
use crate::error::{Error, Result};

const SYNTH_FPS: u32 = 30;
const CHECKER_PERIOD: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SynthKind {
    /// Seeded periodic smooth texture moving right by one pixel per frame, wrapping around.
    Translate,
    /// Linear ramp whose direction turns by 0.1 rad per frame.
    RotateGradient,
    /// Independent uniform noise per frame.
    Noise,
    /// Soft-edged checkerboard panning diagonally by (1, 1) pixels per frame.
    CheckerPan,
}

impl SynthKind {
    pub const ALL: [SynthKind; 4] =
        [SynthKind::Translate, SynthKind::RotateGradient, SynthKind::Noise, SynthKind::CheckerPan];

    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Translate => "translate",
            SynthKind::RotateGradient => "rotate-gradient",
            SynthKind::Noise => "noise",
            SynthKind::CheckerPan => "checker-pan",
        }
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SynthKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::precondition(format!("unknown synthetic kind {s:?}")))
    }
}

struct Wave {
    fx: f64,
    fy: f64,
    amp: f64,
    phase: f64,
}

pub fn synth_sequence(kind: SynthKind, w: usize, h: usize, n_frames: usize, seed: u64) -> Result<VideoSequence> {
    if w < 16 || h < 16 {
        return Err(Error::precondition(format!("synthetic frames must be at least 16x16, got {w}x{h}")));
    }
    if n_frames == 0 {
        return Err(Error::precondition("n_frames must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (wf, hf) = (w as f64, h as f64);

    let frames: Vec<Frame> = match kind {
        SynthKind::Translate => {
            let waves: Vec<Wave> = (0..4)
                .map(|i| {
                    let (mut fx, mut fy) = (0i32, 0i32);
                    while fx == 0 && fy == 0 {
                        fx = rng.random_range(-3..=3);
                        fy = rng.random_range(-3..=3);
                    }
                    Wave {
                        fx: f64::from(fx),
                        fy: f64::from(fy),
                        amp: 0.12 / (1.0 + i as f64 * 0.5),
                        phase: rng.random_range(0.0..TAU),
                    }
                })
                .collect();
            let texture = Frame::from_fn(w, h, |x, y| {
                0.5 + waves
                    .iter()
                    .map(|wv| wv.amp * (TAU * (wv.fx * x as f64 / wf + wv.fy * y as f64 / hf) + wv.phase).cos())
                    .sum::<f64>()
            })
            .quantized();
            (0..n_frames).map(|t| Frame::from_fn(w, h, |x, y| texture.at((x + w - t % w) % w, y))).collect()
        }
        SynthKind::RotateGradient => {
            let theta0 = rng.random_range(0.0..TAU);
            let radius = (wf * wf + hf * hf).sqrt() / 2.0;
            (0..n_frames)
                .map(|t| {
                    let theta = theta0 + 0.1 * t as f64;
                    let (s, c) = theta.sin_cos();
                    Frame::from_fn(w, h, |x, y| {
                        let u = (x as f64 + 0.5 - wf / 2.0) * c + (y as f64 + 0.5 - hf / 2.0) * s;
                        0.5 + 0.4 * u / radius
                    })
                    .quantized()
                })
                .collect()
        }
        SynthKind::Noise => {
            (0..n_frames).map(|_| Frame::from_fn(w, h, |_, _| rng.random::<f64>()).quantized()).collect()
        }
        SynthKind::CheckerPan => {
            let ox = rng.random_range(0.0..CHECKER_PERIOD);
            let oy = rng.random_range(0.0..CHECKER_PERIOD);
            (0..n_frames)
                .map(|t| {
                    let shift = t as f64;
                    Frame::from_fn(w, h, |x, y| {
                        let sx = (TAU * (x as f64 - shift + ox) / CHECKER_PERIOD).sin();
                        let sy = (TAU * (y as f64 - shift + oy) / CHECKER_PERIOD).sin();
                        0.5 + 0.3 * (2.0 * sx * sy).tanh()
                    })
                    .quantized()
                })
                .collect()
        }
    };
    VideoSequence::new(frames, SYNTH_FPS, format!("{}-{w}x{h}-s{seed}", kind.name()))
}
