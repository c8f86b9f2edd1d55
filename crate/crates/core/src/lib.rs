//! Chebyshev ensemble graph networks.
//!
//! The crate is split along the pipeline:
//!
//! - [`graph`]: correlation graphs, Laplacians and the Chebyshev basis.
//! - [`nn`]: layers with hand-written forward/backward passes.
//! - [`train`]: the two-branch ensemble model, optimizers, k-fold
//!   cross-validation and metrics.
//! - [`data`]: DataCo / SupplyGraph ingestion, windowing, normalization and
//!   synthetic generators.
//!
//! Graph layer variants and optimizers are looked up by name at runtime
//! through [`nn::GraphLayerRegistry`] and [`train::OptimizerRegistry`].

pub mod data;
pub mod error;
pub mod graph;
pub mod nn;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
