//! Per-GOP bitrate allocation over the P/B quantizer.
//!
//! The search looks for the smallest qp whose legacy bytes, plus the fixed
//! keyframe bytes, fit the GOP budget. Sizes are assumed non-increasing in qp;
//! when the probes contradict that, every qp below the search result is
//! probed as well.

use std::collections::BTreeMap;

use crate::codec::{encode_gop, CodecConfig, CodedGop};
use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBudget {
    pub target_bps: f64,
    pub fps: u32,
    pub gop_length: usize,
}

impl RateBudget {
    pub fn new(target_bps: f64, fps: u32, gop_length: usize) -> Result<Self> {
        let b = RateBudget { target_bps, fps, gop_length };
        b.validate()?;
        Ok(b)
    }

    pub fn from_kbps(kbps: f64, fps: u32, gop_length: usize) -> Result<Self> {
        Self::new(kbps * 1000.0, fps, gop_length)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_bps.is_finite() && self.target_bps > 0.0) || self.fps == 0 || self.gop_length == 0 {
            return Err(Error::precondition(format!("invalid rate budget {self:?}")));
        }
        Ok(())
    }

    /// Byte budget of a full GOP: `target * gop_length / (8 * fps)`.
    pub fn gop_bytes(&self) -> usize {
        self.bytes_for(self.gop_length)
    }

    /// Byte budget for a GOP of `n_frames` (the last GOP may be short).
    pub fn bytes_for(&self, n_frames: usize) -> usize {
        (self.target_bps * n_frames as f64 / (8.0 * f64::from(self.fps))).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationResult {
    pub qp: u8,
    /// Fixed keyframe bytes: the latent record, or the lossless I unit for the traditional path.
    pub latent_bytes: usize,
    pub legacy_bytes: usize,
    pub total_bytes: usize,
    pub budget_bytes: usize,
    pub within_budget: bool,
    pub probes: usize,
    /// Whether the non-monotone sweep replaced the binary search.
    pub fallback: bool,
}

/// Upper bound on encode probes when sizes are monotone in qp.
pub fn probe_bound(qp_max: u8) -> usize {
    let n = usize::from(qp_max) + 1;
    (usize::BITS - (n - 1).leading_zeros()) as usize + 1
}

/// Codec-independent search. `probe(qp)` returns the legacy size and whatever
/// payload the caller wants back for the chosen qp.
pub fn search_qp<T: Clone>(
    qp_max: u8,
    fixed_bytes: usize,
    budget_bytes: usize,
    mut probe: impl FnMut(u8) -> Result<(usize, T)>,
) -> Result<(T, AllocationResult)> {
    let mut memo: BTreeMap<u8, (usize, T)> = BTreeMap::new();
    let mut eval = |qp: u8, memo: &mut BTreeMap<u8, (usize, T)>| -> Result<usize> {
        if let Some((size, _)) = memo.get(&qp) {
            return Ok(*size);
        }
        let (size, payload) = probe(qp)?;
        memo.insert(qp, (size, payload));
        Ok(size)
    };
    let fits = |size: usize| fixed_bytes.saturating_add(size) <= budget_bytes;

    // Smallest feasible qp in [0, qp_max], or qp_max + 1 when none is.
    let (mut lo, mut hi) = (0u16, u16::from(qp_max) + 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if fits(eval(mid as u8, &mut memo)?) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let mut chosen = if hi > u16::from(qp_max) { qp_max } else { hi as u8 };
    eval(chosen, &mut memo)?;

    let sizes: Vec<(u8, usize)> = memo.iter().map(|(&q, (s, _))| (q, *s)).collect();
    let monotone = sizes.windows(2).all(|w| w[0].1 >= w[1].1);
    let feasible = fits(memo[&chosen].0);
    let fallback = !monotone && (chosen > 0 || !feasible);
    if fallback {
        // Sweep outward (downward) from the search result for a smaller feasible qp.
        for q in (0..chosen).rev() {
            if fits(eval(q, &mut memo)?) {
                chosen = q;
            }
        }
    }
    let (legacy, payload) = memo.get(&chosen).cloned().expect("chosen qp was probed");
    let total = fixed_bytes + legacy;
    let result = AllocationResult {
        qp: chosen,
        latent_bytes: fixed_bytes,
        legacy_bytes: legacy,
        total_bytes: total,
        budget_bytes,
        within_budget: total <= budget_bytes,
        probes: memo.len(),
        fallback,
    };
    Ok((payload, result))
}

/// Legacy-track bytes of `gop` coded against `reference` at `qp`.
pub fn size_probe(gop: &[Frame], reference: &Frame, qp: u8, cfg: &CodecConfig) -> Result<usize> {
    Ok(encode_gop(gop, reference, qp, false, cfg)?.legacy_len())
}

/// Chooses the P/B qp for a GOP whose keyframe is `reference` and costs `latent_bytes`.
pub fn allocate(
    gop: &[Frame],
    reference: &Frame,
    latent_bytes: usize,
    budget: &RateBudget,
    cfg: &CodecConfig,
) -> Result<(CodedGop, AllocationResult)> {
    budget.validate()?;
    let budget_bytes = budget.bytes_for(gop.len());
    search_qp(cfg.qp_max, latent_bytes, budget_bytes, |qp| {
        let coded = encode_gop(gop, reference, qp, false, cfg)?;
        Ok((coded.legacy_len(), coded))
    })
}

/// Traditional baseline: the source keyframe travels as a lossless I unit
/// whose bytes take the place of the latent.
pub fn allocate_traditional(
    gop: &[Frame],
    budget: &RateBudget,
    cfg: &CodecConfig,
) -> Result<(CodedGop, AllocationResult)> {
    budget.validate()?;
    let first = gop.first().ok_or_else(|| Error::precondition("empty GOP"))?;
    let i_bytes = crate::codec::encode_i_unit(first, cfg)?.len();
    let budget_bytes = budget.bytes_for(gop.len());
    search_qp(cfg.qp_max, i_bytes, budget_bytes, |qp| {
        let coded = encode_gop(gop, first, qp, true, cfg)?;
        Ok((coded.legacy_len(), coded))
    })
}
