//! Latent multi-view semi-supervised classification.
//!
//! A shared latent representation `H` is factored out of every view
//! (`X^v ≈ W^v H`, `W^v ≥ 0`), an adaptive-neighbor similarity graph is
//! learned on `H` and on the current label scores, and labels are propagated
//! over that graph with the harmonic solution. The three blocks are optimized
//! jointly by [`solver::fit`].
//!
//! The crate also carries the comparison methods ([`propagate::gfhf_baseline`],
//! [`baselines::amgl_fit`], [`baselines::mlan_fit`]), dataset I/O and the
//! repeated-trial experiment runner used by the `lmssc` command-line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod check;
pub mod data;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod latent;
pub mod propagate;
pub mod solver;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    one_hot, permute_labeled_first, LabelIndicator, Laplacian, LatentModel, LmsscConfig,
    MultiViewDataset, SimilarityGraph,
};
