//! Hybrid video codec: each GOP's keyframe travels as a compact latent code
//! for a fixed generator, the remaining frames as a block-codec legacy track
//! predicted from the generated keyframe.

pub mod cli;
pub mod codec;
pub mod container;
pub mod diff;
pub mod encode;
pub mod error;
pub mod eval;
pub mod frame;
pub mod genprior;
pub mod ratectl;
pub mod refine;

pub use error::{Error, Result};
