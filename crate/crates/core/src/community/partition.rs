use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::laplacian::laplacian_eigenmap;
use super::mixture::{gmm_cluster, kmeans_cluster, GmmOptions, KMeansOptions};
use super::{AffinityMatrix, ClusteringResult, Diagnostics};
use crate::error::{Error, Result};
use crate::linalg;

/// Relative default threshold: `τ = 1e-3 · max B`.
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PartitionMode {
    /// Drop entries below `tau` and take connected components; falls back to
    /// `Spectral` when the component count is not `K`.
    Threshold { tau: Option<f64> },
    /// Laplacian eigenmap of dimension `K`, then the final clusterer.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalClusterer {
    Gmm,
    KMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionOptions {
    pub mode: PartitionMode,
    pub clusterer: FinalClusterer,
    pub seed: u64,
    pub gmm: GmmOptions,
    pub kmeans: KMeansOptions,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        PartitionOptions {
            mode: PartitionMode::Spectral,
            clusterer: FinalClusterer::Gmm,
            seed: 0,
            gmm: GmmOptions::default(),
            kmeans: KMeansOptions::default(),
        }
    }
}

impl PartitionOptions {
    pub fn threshold(tau: Option<f64>) -> Self {
        PartitionOptions {
            mode: PartitionMode::Threshold { tau },
            ..Default::default()
        }
    }
}

/// Connected components of the graph with an edge wherever `B_ij ≥ tau` and
/// `B_ij > 0`, `i ≠ j`. Components are numbered by their smallest vertex.
pub fn connected_components(b: ArrayView2<'_, f64>, tau: f64) -> Vec<usize> {
    let n = b.nrows();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for root in 0..n {
        if label[root] != usize::MAX {
            continue;
        }
        label[root] = next;
        stack.push(root);
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = b[[i, j]];
                if j != i && label[j] == usize::MAX && w > 0.0 && w >= tau {
                    label[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    label
}

/// Splits the affinity graph into `k` groups.
pub fn partition_affinity(b: &AffinityMatrix, k: usize, opts: &PartitionOptions) -> Result<ClusteringResult> {
    let n = b.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cannot partition {n} vertices into {k} groups")));
    }
    match opts.mode {
        PartitionMode::Spectral => spectral(b, k, opts, Diagnostics::default()),
        PartitionMode::Threshold { tau } => {
            let tau = tau.unwrap_or_else(|| DEFAULT_RELATIVE_THRESHOLD * linalg::max_abs(b.matrix.view()));
            let comps = connected_components(b.matrix.view(), tau);
            let count = comps.iter().max().map_or(0, |m| m + 1);
            let diagnostics = Diagnostics {
                components: Some(count),
                threshold: Some(tau),
                ..Diagnostics::default()
            };
            if count == k {
                Ok(ClusteringResult::canonical(&comps, k, diagnostics))
            } else {
                log::debug!("threshold {tau:e} gave {count} components, wanted {k}; using spectral partition");
                spectral(
                    b,
                    k,
                    opts,
                    Diagnostics {
                        fell_back: true,
                        ..diagnostics
                    },
                )
            }
        }
    }
}

fn spectral(b: &AffinityMatrix, k: usize, opts: &PartitionOptions, mut diagnostics: Diagnostics) -> Result<ClusteringResult> {
    let map = laplacian_eigenmap(b.matrix.view(), k)?;
    let fit = match opts.clusterer {
        FinalClusterer::Gmm => gmm_cluster(map.embedding.view(), k, opts.seed, &opts.gmm)?,
        FinalClusterer::KMeans => kmeans_cluster(map.embedding.view(), k, opts.seed, &opts.kmeans)?,
    };
    diagnostics.isolated = map.isolated;
    diagnostics.degenerate_restarts = fit.diagnostics.degenerate_restarts;
    diagnostics.fit_score = fit.diagnostics.fit_score;
    diagnostics.degenerate_partition = fit.diagnostics.degenerate_partition;
    Ok(ClusteringResult {
        labels: fit.labels,
        k,
        diagnostics,
    })
}
