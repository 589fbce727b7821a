//! Block-based predictive codec: motion-compensated P/B coding of a GOP
//! against an injectable, losslessly coded I-frame.

pub mod bits;
mod config;
mod deblock;
mod gop;
mod motion;
mod transform;
mod unit;

pub use config::{CodecConfig, TRANSFORM_BLOCK};
pub use deblock::{compute_boundary_mask, deblock, deblock_adjoint, deblock_raster, BoundaryMask};
pub use gop::{
    decode_gop, decode_gop_frozen, encode_gop, encode_gop_with_recon, encode_i_unit, gop_plan, CodedGop, EncodedGop,
    FrozenGop, FrozenUnit, UnitPlan,
};
pub use motion::{motion_estimate, warp, warp_adjoint, warp_raster, MotionField, Mv};
pub use transform::{dct2, dequant_itransform, idct2, qstep, transform_quant, Block, Coeffs, BLOCK_LEN, ZIGZAG};
pub use unit::{FrameType, UnitHeader, UNIT_HEADER_LEN};
