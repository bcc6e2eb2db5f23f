//! Robust graph-based two-sample testing and change-point detection.
//!
//! The crate builds similarity graphs on pooled observations (K-NNG, K-MST and
//! the hub-penalized K-robust nearest-neighbor graph), counts within-sample
//! edges, and standardizes them with exact permutation-null moments to produce
//! the generalized (GET), weighted (WET), max-type (MET) and original (OET)
//! edge-count statistics.
//!
//! Module map:
//! - [`data`]: observation matrices, pairwise distances, neighbor ranks.
//! - [`graphs`]: graph builders, degree statistics, limit-theory diagnostics.
//! - [`edgecount`]: edge counts, permutation-null moments, test statistics.
//! - [`inference`]: two-sample test driver, p-values, sample-size calculators.
//! - [`changepoint`]: single change-point scan.
//! - [`simulate`]: scenario samplers, perturbations, power studies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod changepoint;
pub mod data;
pub mod edgecount;
mod error;
pub mod graphs;
pub mod inference;
pub mod seed;
pub mod simulate;

pub use error::{Error, Result};

/// Version tag written into every serialized result.
pub const SCHEMA_VERSION: u32 = 1;
