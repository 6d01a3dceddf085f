//! Estimation and inference for Shapley curves.
//!
//! A Shapley curve measures the local contribution of each covariate to the
//! conditional mean of a response. This crate provides:
//!
//! - a component-based estimator that fits one local linear regression per
//!   variable subset and combines them with exact Shapley weights,
//! - an integration-based estimator that fits a single full-model pilot and
//!   integrates it against (known Gaussian or empirical) covariate laws,
//! - wild-bootstrap and analytic pointwise confidence intervals,
//! - population-level ground truth for a family of synthetic data generating
//!   processes, and
//! - a Monte Carlo harness for MISE and coverage experiments.

pub mod component;
pub mod data;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod inference;
pub mod integration;
pub mod oracle;
pub mod quadrature;
pub mod smoothing;
pub mod weights;

pub use data::{
    all_subsets, subsets_excluding, CurveEstimate, Dataset, EstimatorKind, Grid, SubsetMask,
    MAX_DIMENSION,
};
pub use error::{Result, ShapError};

/// Deterministically derives a child seed from a base seed and an index.
/// Used to hand independent substreams to replications and subsets.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // splitmix64 on the combined word
    let mut z = base ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
