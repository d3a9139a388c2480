//! Panorama-to-panorama matching for visual location recognition.
//!
//! Images taken at one location are aggregated into a single *memory vector*
//! (a plain sum, or the pseudo-inverse construction that down-weights
//! mutually similar views). Matching aggregated queries against aggregated
//! dataset locations replaces `views²` image comparisons by one, and tends to
//! be more accurate than image-to-image search.
//!
//! - [`linalg`]: Gram matrices, SPD solves, PCA.
//! - [`memvec`]: sum / pinv memory vectors and panorama similarities.
//! - [`corpus`]: images, locations, geographic distance, synthetic benchmark.
//! - [`format`]: descriptor, index and PCA files; CSV metadata.
//! - [`retrieval`]: memory indexes and the im2im / im2pan / pan2im / pan2pan regimes.
//! - [`eval`]: recall@N, sparse-query sampling, the democratization toy.
//! - [`cli`]: reproducible command runs behind the `panomatch` binary.

// `!(x > tol)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod format;
pub mod linalg;
pub mod memvec;
pub mod retrieval;

pub use error::{Error, Result};
