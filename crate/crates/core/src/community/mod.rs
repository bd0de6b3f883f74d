//! Community detection from an embedding: affinity construction (orthogonal
//! spectral clustering or sparse subspace clustering) followed by a
//! partitioning step.

mod laplacian;
mod lasso;
mod mixture;
mod osc;
mod partition;
mod ssc;

use ndarray::Array2;
use serde::Serialize;

pub use laplacian::{laplacian_eigenmap, Eigenmap};
pub use lasso::{lasso_cd, lasso_objective, stationarity_residual, LassoFit, LassoProblem};
pub use mixture::{gmm_cluster, kmeans_cluster, GmmOptions, KMeansOptions};
pub use osc::osc_affinity;
pub use partition::{connected_components, partition_affinity, FinalClusterer, PartitionMode, PartitionOptions};
pub use ssc::{default_theta, ssc_affinity, ssc_coefficients};

/// How an affinity matrix was built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum AffinityMethod {
    Osc,
    Ssc { theta: f64, tol: f64 },
}

/// Symmetric nonnegative similarity matrix.
#[derive(Debug, Clone)]
pub struct AffinityMatrix {
    pub matrix: Array2<f64>,
    pub method: AffinityMethod,
}

impl AffinityMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Bookkeeping from the partitioning step.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Connected components found in threshold mode.
    pub components: Option<usize>,
    /// Threshold used in threshold mode.
    pub threshold: Option<f64>,
    /// Threshold mode did not give `K` components; the spectral route ran instead.
    pub fell_back: bool,
    /// Zero-degree vertices mapped to the origin of the eigenmap.
    pub isolated: Vec<usize>,
    /// Restarts of the final clusterer that hit an empty cluster.
    pub degenerate_restarts: usize,
    /// Log-likelihood (GMM) or negated inertia (k-means) of the kept fit.
    pub fit_score: Option<f64>,
    /// Fewer than `K` distinct labels in the output.
    pub degenerate_partition: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringResult {
    /// Labels in `0..k`.
    pub labels: Vec<usize>,
    pub k: usize,
    pub diagnostics: Diagnostics,
}

impl ClusteringResult {
    /// Builds a result, renumbering clusters by first appearance and flagging
    /// a degenerate partition when fewer than `k` labels occur.
    pub(crate) fn canonical(raw: &[usize], k: usize, mut diagnostics: Diagnostics) -> Self {
        let mut map = vec![usize::MAX; raw.iter().copied().max().map_or(0, |m| m + 1)];
        let mut next = 0;
        let labels = raw
            .iter()
            .map(|&c| {
                if map[c] == usize::MAX {
                    map[c] = next;
                    next += 1;
                }
                map[c]
            })
            .collect();
        diagnostics.degenerate_partition = next < k;
        ClusteringResult {
            labels,
            k,
            diagnostics,
        }
    }
}
