//! Popularity estimates from rank-one block fits, and edge-probability
//! reconstruction with or without community labels.
//!
//! Block `(k, ℓ)` of the adjacency matrix is approximated by `σ² u vᵀ`, its
//! leading singular triple, giving `λ̂^{(kℓ)} = σ u` and `λ̂^{(ℓk)} = σ v`.
//! Only the products `λ̂^{(kℓ)} (λ̂^{(ℓk)})ᵀ` are identifiable; the even split
//! of `σ` is a convention.

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph_model::{community_sizes, signature_for};
use crate::linalg;
use crate::spectral::{ase, sym_eigen, SpectralEmbedding};

#[derive(Debug, Clone)]
pub struct LambdaEstimates {
    k: usize,
    labels: Vec<usize>,
    /// Vertices of each community in increasing order.
    members: Vec<Vec<usize>>,
    /// `lambda[k][l]` is `λ̂^{(kℓ)}`, indexed like `members[k]`.
    lambda: Vec<Vec<Array1<f64>>>,
    sigma: Array2<f64>,
    degenerate: Vec<(usize, usize)>,
}

impl LambdaEstimates {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn members(&self, k: usize) -> &[usize] {
        &self.members[k]
    }

    /// `λ̂^{(kℓ)}`: the affinities of community `k` toward community `ℓ`.
    pub fn lambda(&self, k: usize, l: usize) -> &Array1<f64> {
        &self.lambda[k][l]
    }

    /// Symmetric `K x K` matrix of `σ̂^{(kℓ)}`, the square root of the block's
    /// leading singular value.
    pub fn sigma(&self) -> &Array2<f64> {
        &self.sigma
    }

    /// Blocks `(k, ℓ)` with `k ≤ ℓ` whose fit was zero.
    pub fn degenerate_blocks(&self) -> &[(usize, usize)] {
        &self.degenerate
    }

    /// Per-vertex popularity estimates as an `n x K` matrix; row `i` holds
    /// `λ̂_{i·}` under the even split.
    pub fn popularity_matrix(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n(), self.k));
        for (k, members) in self.members.iter().enumerate() {
            for l in 0..self.k {
                for (a, &i) in members.iter().enumerate() {
                    out[[i, l]] = self.lambda[k][l][a];
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Blockwise,
    LabelFree,
}

#[derive(Debug, Clone)]
pub struct ReconstructedP {
    pub matrix: Array2<f64>,
    pub route: Route,
}

struct BlockFit {
    sigma: f64,
    row: Array1<f64>,
    col: Array1<f64>,
    degenerate: bool,
}

fn submatrix(a: ArrayView2<'_, f64>, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), cols.len()), |(r, c)| a[[rows[r], cols[c]]])
}

fn zero_fit(rows: usize, cols: usize) -> BlockFit {
    BlockFit {
        sigma: 0.0,
        row: Array1::zeros(rows),
        col: Array1::zeros(cols),
        degenerate: true,
    }
}

fn off_diagonal_fit(block: &Array2<f64>) -> Result<BlockFit> {
    let (rows, cols) = block.dim();
    if block.iter().all(|&x| x == 0.0) {
        return Ok(zero_fit(rows, cols));
    }
    let svd = linalg::to_faer(block.view())
        .thin_svd()
        .map_err(|e| Error::numeric(format!("block SVD did not converge: {e:?}")))?;
    let s = svd.S().column_vector();
    let top = (0..s.nrows()).fold(0, |best, i| if s[i] > s[best] { i } else { best });
    let sigma = s[top].max(0.0).sqrt();
    let mut u = Array1::from_shape_fn(rows, |i| svd.U()[(i, top)]);
    let mut v = Array1::from_shape_fn(cols, |j| svd.V()[(j, top)]);
    if u.sum() < 0.0 {
        u.mapv_inplace(|x| -x);
        v.mapv_inplace(|x| -x);
    }
    Ok(BlockFit {
        sigma,
        row: u * sigma,
        col: v * sigma,
        degenerate: sigma == 0.0,
    })
}

fn diagonal_fit(block: &Array2<f64>) -> Result<BlockFit> {
    let m = block.nrows();
    if block.iter().all(|&x| x == 0.0) {
        return Ok(zero_fit(m, m));
    }
    let eig = sym_eigen(block.view())?;
    let sigma = eig.values[0].max(0.0).sqrt();
    let mut u = eig.vectors.column(0).to_owned();
    if u.sum() < 0.0 {
        u.mapv_inplace(|x| -x);
    }
    let lambda = u * sigma;
    Ok(BlockFit {
        sigma,
        row: lambda.clone(),
        col: lambda,
        degenerate: sigma == 0.0,
    })
}

/// Rank-one popularity estimates for every pair of communities.
///
/// `a` is usually an adjacency matrix but any symmetric matrix works; the
/// diagonal blocks are used as given.
pub fn estimate_lambdas(a: ArrayView2<'_, f64>, labels: &[usize], k: usize) -> Result<LambdaEstimates> {
    let n = labels.len();
    if a.dim() != (n, n) {
        return Err(Error::invalid(format!(
            "matrix is {:?} but there are {n} labels",
            a.dim()
        )));
    }
    if k == 0 {
        return Err(Error::invalid("need at least one community"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!("label {bad} out of range for {k} communities")));
    }
    if let Some(empty) = community_sizes(labels, k).iter().position(|&s| s == 0) {
        return Err(Error::invalid(format!("community {empty} is empty")));
    }
    let mut members = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }

    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|p| (p..k).map(move |q| (p, q))).collect();
    let fits: Vec<Result<BlockFit>> = pairs
        .par_iter()
        .map(|&(p, q)| {
            let block = submatrix(a, &members[p], &members[q]);
            if p == q {
                diagonal_fit(&block)
            } else {
                off_diagonal_fit(&block)
            }
        })
        .collect();

    let mut lambda = vec![vec![Array1::zeros(0); k]; k];
    let mut sigma = Array2::zeros((k, k));
    let mut degenerate = Vec::new();
    for (&(p, q), fit) in pairs.iter().zip(fits) {
        let fit = fit?;
        if fit.degenerate {
            degenerate.push((p, q));
        }
        sigma[[p, q]] = fit.sigma;
        sigma[[q, p]] = fit.sigma;
        lambda[p][q] = fit.row;
        lambda[q][p] = fit.col;
    }
    Ok(LambdaEstimates {
        k,
        labels: labels.to_vec(),
        members,
        lambda,
        sigma,
        degenerate,
    })
}

/// `P̂` with block `(k, ℓ)` equal to `λ̂^{(kℓ)} (λ̂^{(ℓk)})ᵀ`, in the original
/// vertex order.
pub fn reconstruct_p_blockwise(est: &LambdaEstimates) -> ReconstructedP {
    let n = est.n();
    let mut position = vec![0; n];
    for members in &est.members {
        for (a, &i) in members.iter().enumerate() {
            position[i] = a;
        }
    }
    let labels = &est.labels;
    let matrix = Array2::from_shape_fn((n, n), |(i, j)| {
        let (k, l) = (labels[i], labels[j]);
        est.lambda[k][l][position[i]] * est.lambda[l][k][position[j]]
    });
    ReconstructedP {
        matrix,
        route: Route::Blockwise,
    }
}

/// `P̂ = Ẑ I_{p,q} Ẑᵀ` from the embedding with the `K`-community signature.
/// With `clip`, entries are clamped to `[0, 1]`.
pub fn reconstruct_p_labelfree(a: ArrayView2<'_, f64>, k: usize, clip: bool) -> Result<ReconstructedP> {
    let sig = signature_for(k)?;
    let n = a.nrows();
    if sig.dim() > n {
        return Err(Error::invalid(format!("{k} communities need at least {} vertices, got {n}", sig.dim())));
    }
    let emb = ase(a, sig)?;
    Ok(labelfree_from_embedding(&emb, clip))
}

/// `Ẑ I_{p,q} Ẑᵀ` for an embedding already at hand, symmetrized exactly.
pub fn labelfree_from_embedding(emb: &SpectralEmbedding, clip: bool) -> ReconstructedP {
    let n = emb.positions.nrows();
    let mut matrix = emb.reconstruct();
    for i in 0..n {
        for j in (i + 1)..n {
            matrix[[j, i]] = matrix[[i, j]];
        }
    }
    if clip {
        matrix.mapv_inplace(|x| x.clamp(0.0, 1.0));
    }
    ReconstructedP {
        matrix,
        route: Route::LabelFree,
    }
}
