//! Finite-truncation laboratory for weighted backward shifts on sequence
//! algebras: sparse vectors, weight families, parameter coverings,
//! criterion checkers and explicit convolution witnesses.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod covering;
pub mod criteria;
pub mod error;
pub mod job;
pub mod orbit;
pub mod seqspace;
pub mod weights;
pub mod witness;

pub use error::{Error, Result};
pub use seqspace::{ProductKind, SeqVec, SpaceNorm};
pub use weights::{LipschitzProfile, WeightFamily};
