//! Real-valued Slepian-Wolf codes.
//!
//! A source `Y` correlated with side information `X` is compressed by
//! multiplying it with a random matrix over a small real coefficient set and
//! uniformly quantizing the result. The decoder recovers `Y` by searching for
//! the unique candidate that is jointly typical with `X` and reproduces the
//! received quantization indices. For binary sources that search is an integer
//! feasibility problem, solved here by branch-and-bound with interval
//! propagation.
//!
//! Module map:
//!
//! * [`source_model`]: joint pmfs, sampling, types, entropies, typicality.
//! * [`encoder`]: coefficient distributions, random matrices, the quantizer
//!   and rate bookkeeping.
//! * [`decoders`]: exhaustive typicality, joint two-encoder, multistage and
//!   minimum-entropy decoders.
//! * [`ip`]: integer-program construction and the exact counting solver.
//! * [`bounds`]: analytic error bounds and their Monte Carlo checks.
//! * [`nsn`]: normal source networks without helpers.
//! * [`harness`]: reproducible Monte Carlo campaigns and output files.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod decoders;
pub mod encoder;
mod enumerate;
mod error;
pub mod harness;
pub mod ip;
pub mod nsn;
pub mod seeds;
pub mod source_model;
pub mod stats;

pub use error::{Error, Result};

/// Ceiling that ignores floating-point noise just above an integer.
///
/// The rate formulas take ceilings of products like `0.7 * log2(1024)`, which
/// evaluate to `7.000000000000001` in binary floating point.
pub(crate) fn ceil_tol(x: f64) -> f64 {
    (x - 1e-9).ceil()
}
