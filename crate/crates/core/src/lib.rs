//! Cross-scale geo-localization: learn a shared categorical representation
//! between an overhead map and ground observations, turn map patches into
//! belief maps, and use those beliefs to localize with a particle filter.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contrastive;
pub mod encoders;
pub mod error;
pub mod filter;
pub mod inference;
pub mod io;
pub mod sampler;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    BeliefMap, PatchFrame, PixelCoord, Raster, SimplexVec, WorldPose, EPS_CLAMP, SIMPLEX_TOL,
};
