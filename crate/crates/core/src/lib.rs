//! Maritime radio channel toolkit: shore-to-ship path loss, sea-wave
//! induced fading, small-scale envelope statistics, multipath sparsity and
//! delay dispersion, and a Zadoff-Chu channel sounder.

// `!(x > 0.0)` is used on purpose so NaN is rejected with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod geometry;
pub mod numeric;
pub mod pathloss;
pub mod plfit;
pub mod seastate;
pub mod smallscale;
pub mod sounder;
pub mod sparsity;
pub mod swift;
pub mod temporal;

pub use error::{Error, Result};
