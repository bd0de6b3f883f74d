//! Popularity adjusted block models and their latent-position form.
//!
//! A PABM on `n` vertices with `K` communities is given by a label vector
//! `z`, an `n x K` popularity matrix `Λ` and a sparsity `ρ`:
//!
//! ```text
//! P_ij = ρ · Λ[i, z_j] · Λ[j, z_i]
//! ```
//!
//! After sorting vertices by community, `P = X U I_{p,q} (X U)ᵀ` where `X` is
//! block diagonal with the rows of `Λ` as blocks and `U` is a fixed orthonormal
//! matrix diagonalising the "transpose" permutation of `K x K` index pairs.
//! So a PABM is a generalized random dot product graph with signature
//! `(K(K+1)/2, K(K-1)/2)`.
//!
//! Labels are 0-based throughout the library (`0..K`).

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::Beta;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, max_abs_diff};
use crate::rng;

/// Counts of `+1` and `-1` entries of the metric `I_{p,q}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub p: usize,
    pub q: usize,
}

impl Signature {
    pub fn new(p: usize, q: usize) -> Self {
        Signature { p, q }
    }

    /// Signature of a `k`-community PABM.
    pub fn for_communities(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("community count must be at least 1"));
        }
        Ok(Signature {
            p: k * (k + 1) / 2,
            q: k * (k - 1) / 2,
        })
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    /// Diagonal of `I_{p,q}`.
    pub fn metric(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.dim(), |i| if i < self.p { 1.0 } else { -1.0 })
    }

    pub fn metric_matrix(&self) -> Array2<f64> {
        Array2::from_diag(&self.metric())
    }
}

pub fn signature_for(k: usize) -> Result<Signature> {
    Signature::for_communities(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PabmParams {
    labels: Vec<usize>,
    k: usize,
    popularity: Array2<f64>,
    sparsity: f64,
}

impl PabmParams {
    /// Validates labels in `0..k`, popularities in `[0, 1]` of shape `n x k`,
    /// and sparsity in `(0, 1]`. Empty communities are allowed here.
    pub fn new(labels: Vec<usize>, k: usize, popularity: Array2<f64>, sparsity: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("community count must be at least 1"));
        }
        let n = labels.len();
        if popularity.dim() != (n, k) {
            return Err(Error::invalid(format!(
                "popularity matrix is {:?}, expected ({n}, {k})",
                popularity.dim()
            )));
        }
        if let Some(i) = labels.iter().position(|&z| z >= k) {
            return Err(Error::invalid(format!(
                "label {} of vertex {i} outside 0..{k}",
                labels[i]
            )));
        }
        if let Some(((i, j), v)) = popularity
            .indexed_iter()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::invalid(format!("popularity ({i}, {j}) = {v} outside [0, 1]")));
        }
        if !(sparsity > 0.0 && sparsity <= 1.0) {
            return Err(Error::invalid(format!("sparsity {sparsity} outside (0, 1]")));
        }
        Ok(PabmParams {
            labels,
            k,
            popularity,
            sparsity,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn popularity(&self) -> &Array2<f64> {
        &self.popularity
    }

    pub fn sparsity(&self) -> f64 {
        self.sparsity
    }

    pub fn community_sizes(&self) -> Vec<usize> {
        community_sizes(&self.labels, self.k)
    }

    /// Whether `λ_{i z_i} > 0` for every vertex.
    pub fn own_community_positive(&self) -> bool {
        self.labels
            .iter()
            .enumerate()
            .all(|(i, &z)| self.popularity[[i, z]] > 0.0)
    }

    pub fn require_own_community_positive(&self) -> Result<()> {
        match self
            .labels
            .iter()
            .enumerate()
            .find(|&(i, &z)| self.popularity[[i, z]] <= 0.0)
        {
            Some((i, _)) => Err(Error::invalid(format!(
                "vertex {i} has zero popularity toward its own community"
            ))),
            None => Ok(()),
        }
    }
}

pub(crate) fn community_sizes(labels: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &z in labels {
        sizes[z] += 1;
    }
    sizes
}

/// Rescales `Λ` to Frobenius norm `√n`.
///
/// Returns the scaled matrix and the factor `c` applied; the same edge
/// probabilities are obtained with sparsity `ρ / c²`. Entries may leave
/// `[0, 1]`, so the result is a plain matrix rather than [`PabmParams`].
pub fn normalize_popularity(popularity: ArrayView2<'_, f64>) -> Result<(Array2<f64>, f64)> {
    let norm = linalg::frobenius(popularity);
    if norm == 0.0 {
        return Err(Error::invalid("cannot normalize an all-zero popularity matrix"));
    }
    let c = (popularity.nrows() as f64).sqrt() / norm;
    Ok((popularity.mapv(|x| x * c), c))
}

/// The involution on `0..k²` swapping index `a·k + b` with `b·k + a`.
pub fn transpose_permutation(k: usize) -> Vec<usize> {
    (0..k * k).map(|s| (s % k) * k + s / k).collect()
}

/// The `k² x k²` permutation matrix `Π` with `Y = X Π`.
///
/// Fixed points sit at `r(k+1)`; every pair `a < b` contributes a 2-cycle
/// between `a·k + b` and `b·k + a` (0-based indices).
pub fn build_permutation(k: usize) -> Result<Array2<f64>> {
    if k == 0 {
        return Err(Error::invalid("community count must be at least 1"));
    }
    let map = transpose_permutation(k);
    let mut pi = Array2::zeros((k * k, k * k));
    for (s, &t) in map.iter().enumerate() {
        pi[[s, t]] = 1.0;
    }
    Ok(pi)
}

/// Orthonormal eigenbasis of [`build_permutation`] with `U I_{p,q} Uᵀ = Π`.
///
/// Columns: the `k` fixed-point basis vectors, then `(e_s + e_t)/√2` for each
/// 2-cycle in lexicographic `(a, b)` order, then `(e_s - e_t)/√2` in the same
/// order.
pub fn build_u(k: usize) -> Result<Array2<f64>> {
    let sig = Signature::for_communities(k)?;
    let d = k * k;
    let mut u = Array2::zeros((d, d));
    for r in 0..k {
        u[[r * (k + 1), r]] = 1.0;
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut col = 0;
    for a in 0..k {
        for b in (a + 1)..k {
            let s = a * k + b;
            let t = b * k + a;
            u[[s, k + col]] = h;
            u[[t, k + col]] = h;
            u[[s, sig.p + col]] = h;
            u[[t, sig.p + col]] = -h;
            col += 1;
        }
    }
    Ok(u)
}

/// Edge probability matrix: symmetric, entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeProbMatrix(Array2<f64>);

impl EdgeProbMatrix {
    pub fn new(p: Array2<f64>) -> Result<Self> {
        match linalg::asymmetry(p.view()) {
            None => return Err(Error::invalid("edge probability matrix must be square")),
            Some(a) if a > 0.0 => {
                return Err(Error::invalid(format!(
                    "edge probability matrix is not symmetric (max asymmetry {a:e})"
                )))
            }
            _ => {}
        }
        if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::invalid("edge probabilities must lie in [0, 1]"));
        }
        Ok(EdgeProbMatrix(p))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// `P_ij = ρ λ_{i z_j} λ_{j z_i}`, including the diagonal.
pub fn edge_prob_matrix(params: &PabmParams) -> EdgeProbMatrix {
    let n = params.n();
    let z = params.labels();
    let lam = params.popularity();
    let rho = params.sparsity();
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = rho * lam[[i, z[j]]] * lam[[j, z[i]]];
            p[[i, j]] = v;
            p[[j, i]] = v;
        }
    }
    EdgeProbMatrix(p)
}

/// GRDPG latent configuration `Π̃ X U` of a PABM.
#[derive(Debug, Clone)]
pub struct LatentConfig {
    /// Block-diagonal `n x K²` matrix, rows in community-sorted order.
    pub x: Array2<f64>,
    pub u: Array2<f64>,
    /// `U I_{p,q} Uᵀ`, stored as the exact 0/1 permutation.
    pub pi: Array2<f64>,
    /// `order[r]` is the original index of sorted row `r`, i.e. `Π̃[order[r], r] = 1`.
    pub order: Vec<usize>,
    pub signature: Signature,
    pub sparsity: f64,
    /// Accumulated `O(p, q)` transform `T`; latent rows are `T x_i`.
    pub transform: Array2<f64>,
}

impl LatentConfig {
    pub fn n(&self) -> usize {
        self.order.len()
    }

    /// `Π̃` as an explicit `n x n` matrix.
    pub fn vertex_permutation(&self) -> Array2<f64> {
        let n = self.n();
        let mut m = Array2::zeros((n, n));
        for (r, &i) in self.order.iter().enumerate() {
            m[[i, r]] = 1.0;
        }
        m
    }

    /// Latent positions `Π̃ X U Tᵀ`, one row per vertex in original order.
    pub fn latent_positions(&self) -> Array2<f64> {
        let sorted = self.x.dot(&self.u).dot(&self.transform.t());
        let mut out = Array2::zeros(sorted.dim());
        for (r, &i) in self.order.iter().enumerate() {
            out.row_mut(i).assign(&sorted.row(r));
        }
        out
    }

    pub fn edge_probabilities(&self) -> Array2<f64> {
        grdpg_probabilities(self.latent_positions().view(), self.signature, self.sparsity)
    }
}

/// `ρ Y I_{p,q} Yᵀ`, symmetrised exactly from the upper triangle.
pub fn grdpg_probabilities(latent: ArrayView2<'_, f64>, sig: Signature, sparsity: f64) -> Array2<f64> {
    assert_eq!(latent.ncols(), sig.dim(), "latent dimension must equal p + q");
    let n = latent.nrows();
    let mut weighted = latent.to_owned();
    for (mut col, s) in weighted.axis_iter_mut(Axis(1)).zip(sig.metric().iter()) {
        col *= *s;
    }
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = sparsity * weighted.row(i).dot(&latent.row(j));
            p[[i, j]] = v;
            p[[j, i]] = v;
        }
    }
    p
}

pub fn latent_config(params: &PabmParams) -> Result<LatentConfig> {
    let k = params.k();
    let sizes = params.community_sizes();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::invalid(format!("community {empty} is empty")));
    }
    let sig = Signature::for_communities(k)?;
    let mut order: Vec<usize> = (0..params.n()).collect();
    order.sort_by_key(|&i| params.labels()[i]);

    let lam = params.popularity();
    let mut x = Array2::zeros((params.n(), k * k));
    for (r, &i) in order.iter().enumerate() {
        let z = params.labels()[i];
        for l in 0..k {
            x[[r, z * k + l]] = lam[[i, l]];
        }
    }
    let u = build_u(k)?;
    let pi = build_permutation(k)?;
    Ok(LatentConfig {
        x,
        u,
        pi,
        order,
        signature: sig,
        sparsity: params.sparsity(),
        transform: Array2::eye(k * k),
    })
}

/// Whether `Q I_{p,q} Qᵀ = I_{p,q}` within `tol` entrywise.
pub fn is_indefinite_orthogonal(q: ArrayView2<'_, f64>, sig: Signature, tol: f64) -> bool {
    let d = sig.dim();
    if q.dim() != (d, d) {
        return false;
    }
    let metric = sig.metric_matrix();
    let lhs = q.dot(&metric).dot(&q.t());
    max_abs_diff(lhs.view(), metric.view()) <= tol
}

const OPQ_TOL: f64 = 1e-10;

/// Maps every latent row `x` to `Q x`. `Q` must lie in `O(p, q)`.
pub fn indefinite_transform(latent: ArrayView2<'_, f64>, q: ArrayView2<'_, f64>, sig: Signature) -> Result<Array2<f64>> {
    if !is_indefinite_orthogonal(q, sig, OPQ_TOL) {
        return Err(Error::invalid(format!(
            "matrix is not in the indefinite orthogonal group O({}, {})",
            sig.p, sig.q
        )));
    }
    Ok(latent.dot(&q.t()))
}

pub fn apply_indefinite_orthogonal(config: &LatentConfig, q: ArrayView2<'_, f64>) -> Result<LatentConfig> {
    if !is_indefinite_orthogonal(q, config.signature, OPQ_TOL) {
        return Err(Error::invalid(format!(
            "matrix is not in the indefinite orthogonal group O({}, {})",
            config.signature.p, config.signature.q
        )));
    }
    let mut out = config.clone();
    out.transform = q.dot(&config.transform);
    Ok(out)
}

/// A random element of `O(p, q)`: `exp(I_{p,q} S)` for skew-symmetric `S`
/// with entries uniform in `[-scale, scale]`.
pub fn random_indefinite_orthogonal(sig: Signature, scale: f64, rng: &mut impl rand::Rng) -> Array2<f64> {
    let d = sig.dim();
    let metric = sig.metric();
    let mut s = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in (i + 1)..d {
            let v = rng.random_range(-scale..=scale);
            s[[i, j]] = v;
            s[[j, i]] = -v;
        }
    }
    let generator = Array2::from_shape_fn((d, d), |(i, j)| metric[i] * s[[i, j]]);
    linalg::expm(generator.view())
}

/// Hollow symmetric 0/1 adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    matrix: Array2<f64>,
    seed: Option<u64>,
}

impl Adjacency {
    pub fn from_matrix(matrix: Array2<f64>) -> Result<Self> {
        let n = matrix.nrows();
        match linalg::asymmetry(matrix.view()) {
            None => return Err(Error::invalid("adjacency matrix must be square")),
            Some(a) if a > 0.0 => return Err(Error::invalid("adjacency matrix must be symmetric")),
            _ => {}
        }
        if matrix.iter().any(|&x| x != 0.0 && x != 1.0) {
            return Err(Error::invalid("adjacency entries must be 0 or 1"));
        }
        if (0..n).any(|i| matrix[[i, i]] != 0.0) {
            return Err(Error::invalid("adjacency matrix must have a zero diagonal"));
        }
        Ok(Adjacency { matrix, seed: None })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.matrix
    }

    /// Seed the matrix was sampled with, if it was sampled.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n)
            .map(|i| ((i + 1)..n).filter(|&j| self.matrix[[i, j]] != 0.0).count())
            .sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.matrix
            .rows()
            .into_iter()
            .map(|r| r.iter().filter(|&&x| x != 0.0).count())
            .collect()
    }

    /// `A[perm[i], perm[j]]` as a new adjacency matrix.
    pub fn permuted(&self, perm: &[usize]) -> Adjacency {
        let n = self.n();
        assert_eq!(perm.len(), n);
        let matrix = Array2::from_shape_fn((n, n), |(i, j)| self.matrix[[perm[i], perm[j]]]);
        Adjacency { matrix, seed: self.seed }
    }
}

/// Draws `A_ij ~ Bernoulli(P_ij)` independently for `i < j`, row-major, from
/// the adjacency stream of `seed`.
pub fn sample_adjacency(p: &EdgeProbMatrix, seed: u64) -> Adjacency {
    let mut rng = rng::stream(seed, rng::STREAM_ADJACENCY);
    let n = p.n();
    let pm = p.matrix();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < pm[[i, j]] {
                a[[i, j]] = 1.0;
                a[[j, i]] = 1.0;
            }
        }
    }
    Adjacency {
        matrix: a,
        seed: Some(seed),
    }
}

/// Mixture weights for community labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Balance {
    /// `α_k = 1/K`.
    Balanced,
    /// `α_k ∝ 1/k`.
    Imbalanced,
}

impl Balance {
    pub fn weights(&self, k: usize) -> Vec<f64> {
        match self {
            Balance::Balanced => vec![1.0 / k as f64; k],
            Balance::Imbalanced => {
                let h: f64 = (1..=k).map(|l| 1.0 / l as f64).sum();
                (1..=k).map(|l| (1.0 / l as f64) / h).collect()
            }
        }
    }
}

/// Generative prior for simulated PABMs: multinomial labels, Beta popularities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopularityPrior {
    pub balance: Balance,
    /// Beta shapes of `λ_{i z_i}`.
    pub within: (f64, f64),
    /// Beta shapes of `λ_{ik}`, `k ≠ z_i`.
    pub between: (f64, f64),
    pub sparsity: f64,
}

impl Default for PopularityPrior {
    fn default() -> Self {
        PopularityPrior {
            balance: Balance::Balanced,
            within: (2.0, 1.0),
            between: (1.0, 2.0),
            sparsity: 1.0,
        }
    }
}

/// Labels from the label stream of `seed`, popularities from its popularity stream.
///
/// Communities may come out empty; callers check [`PabmParams::community_sizes`].
pub fn draw_params(n: usize, k: usize, prior: &PopularityPrior, seed: u64) -> Result<PabmParams> {
    if k == 0 {
        return Err(Error::invalid("community count must be at least 1"));
    }
    let beta = |(a, b): (f64, f64)| {
        Beta::new(a, b).map_err(|e| Error::invalid(format!("beta shapes ({a}, {b}): {e}")))
    };
    let within = beta(prior.within)?;
    let between = beta(prior.between)?;
    let weights = WeightedIndex::new(prior.balance.weights(k))
        .map_err(|e| Error::invalid(format!("mixture weights: {e}")))?;

    let mut label_rng = rng::stream(seed, rng::STREAM_LABELS);
    let labels: Vec<usize> = (0..n).map(|_| weights.sample(&mut label_rng)).collect();

    let mut pop_rng = rng::stream(seed, rng::STREAM_POPULARITY);
    let mut popularity = Array2::zeros((n, k));
    for i in 0..n {
        for l in 0..k {
            popularity[[i, l]] = if l == labels[i] {
                within.sample(&mut pop_rng)
            } else {
                between.sample(&mut pop_rng)
            };
        }
    }
    PabmParams::new(labels, k, popularity, prior.sparsity)
}
