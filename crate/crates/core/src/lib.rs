//! Popularity adjusted block models (PABM) viewed as generalized random dot
//! product graphs.
//!
//! - [`graph_model`]: PABM parameters, the latent-position form `Π̃ X U`,
//!   edge probabilities and Bernoulli sampling.
//! - [`spectral`]: symmetric eigendecomposition and adjacency spectral embedding.
//! - [`community`]: orthogonal spectral clustering, sparse subspace clustering
//!   and the affinity partitioning step.
//! - [`estimation`]: blockwise rank-one popularity estimates and `P̂`.
//! - [`metrics`]: misclustering count, adjusted Rand index, RMSE.
//! - [`harness`]: simulation grid, edge-list ingestion, detection driver.

pub mod community;
pub mod error;
pub mod estimation;
pub mod graph_model;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result, Stage};
