//! High-temperature approximation of quantum spin-system partition functions
//! through the truncated quantum cluster expansion.
//!
//! A spin model is a simple graph with a Hermitian two-site interaction on
//! every edge. With traces normalized so that `tr(I) = 1`, the partition
//! function is rewritten as an abstract polymer model whose polymers are
//! connected edge multisets, and `log Z` is the sum over clusters of polymers
//! weighted by Ursell functions. Truncating at total cluster size `m` gives an
//! approximation with additive error at most `|V| e^{-m}` whenever
//! `|beta| <= 1/(e^4 Delta)`.
//!
//! The pipeline is:
//!
//! 1. [`polymer::enumerate_polymers`] lists every polymer of size `< m`,
//! 2. [`polymer::WeightTable`] evaluates their weights by inclusion-exclusion,
//! 3. [`cluster::enumerate_clusters`] lists connected polymer multisets,
//! 4. [`cluster::ClusterExpansion`] combines Ursell coefficients and weights.
//!
//! [`oracle`] computes `Z` exactly by diagonalization for validation.

pub mod cli;
pub mod cluster;
pub mod error;
pub mod model;
pub mod operator;
pub mod oracle;
pub mod polymer;

pub use error::{Error, Result};

/// Complex scalar used for `beta`, traces, weights and `log Z`.
pub type Complex = num_complex::Complex64;
