//! Dense symmetric eigendecomposition and adjacency spectral embedding.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph_model::Signature;
use crate::linalg;

const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenpairs of a symmetric matrix, values descending.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Array1<f64>,
    /// Column `j` pairs with `values[j]`.
    pub vectors: Array2<f64>,
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are returned in descending order. Each eigenvector is signed so
/// that its largest-magnitude entry (first one on ties) is positive.
/// Runs single-threaded, so identical input gives bit-identical output.
pub fn sym_eigen(m: ArrayView2<'_, f64>) -> Result<EigenSystem> {
    let n = m.nrows();
    let asym = linalg::asymmetry(m).ok_or_else(|| Error::invalid("matrix must be square"))?;
    let scale = linalg::max_abs(m).max(1.0);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::invalid(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    if n == 0 {
        return Ok(EigenSystem {
            values: Array1::zeros(0),
            vectors: Array2::zeros((0, 0)),
        });
    }
    let fm = linalg::to_faer(m);
    let evd = fm
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::numeric(format!("symmetric eigensolver did not converge for n = {n}: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();

    // faer returns ascending values.
    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for (dst, src) in (0..n).rev().enumerate() {
        values[dst] = s[src];
        let mut col = vectors.column_mut(dst);
        let mut pivot = 0;
        for i in 0..n {
            col[i] = u[(i, src)];
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
    Ok(EigenSystem { values, vectors })
}

/// Note attached to an embedding whose spectrum lacked enough eigenvalues of
/// the requested sign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerateSpectrum {
    pub positive_available: usize,
    pub negative_available: usize,
    /// Indices (into the descending spectrum) used as padding.
    pub padded: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// Selected eigenvectors, `n x (p + q)`.
    pub vectors: Array2<f64>,
    /// Selected eigenvalues: the `p` most positive (descending), then the `q`
    /// most negative (most negative first).
    pub values: Array1<f64>,
    /// `vectors · |values|^{1/2}` columnwise.
    pub positions: Array2<f64>,
    pub signature: Signature,
    pub degenerate: Option<DegenerateSpectrum>,
}

impl SpectralEmbedding {
    /// `Ẑ I_{p,q} Ẑᵀ`, exactly symmetric.
    pub fn reconstruct(&self) -> Array2<f64> {
        crate::graph_model::grdpg_probabilities(self.positions.view(), self.signature, 1.0)
    }
}

/// Adjacency spectral embedding with signature `sig`.
///
/// Takes the `p` most positive and `q` most negative eigenvalues. When the
/// spectrum has fewer than `p` positive or `q` negative eigenvalues, the
/// remaining slots are filled with the unselected eigenvalues of smallest
/// magnitude and the embedding carries a [`DegenerateSpectrum`] note.
pub fn ase(m: ArrayView2<'_, f64>, sig: Signature) -> Result<SpectralEmbedding> {
    let eig = sym_eigen(m)?;
    embed_from_eigen(&eig, sig)
}

pub fn embed_from_eigen(eig: &EigenSystem, sig: Signature) -> Result<SpectralEmbedding> {
    let n = eig.values.len();
    let d = sig.dim();
    if d == 0 || d > n {
        return Err(Error::invalid(format!("signature dimension {d} must be in 1..={n}")));
    }
    let vals = &eig.values;
    let positive: Vec<usize> = (0..n).filter(|&j| vals[j] > 0.0).collect();
    // Most negative first; the tail of a descending spectrum read backwards.
    let negative: Vec<usize> = (0..n).rev().filter(|&j| vals[j] < 0.0).collect();

    let mut taken = vec![false; n];
    let mut pos_sel: Vec<usize> = positive.iter().copied().take(sig.p).collect();
    let mut neg_sel: Vec<usize> = negative.iter().copied().take(sig.q).collect();
    for &j in pos_sel.iter().chain(neg_sel.iter()) {
        taken[j] = true;
    }
    let mut padded = Vec::new();
    if pos_sel.len() < sig.p || neg_sel.len() < sig.q {
        let mut spare: Vec<usize> = (0..n).filter(|&j| !taken[j]).collect();
        // smallest magnitude first, index ascending on ties
        spare.sort_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs()).then(a.cmp(&b)));
        let mut spare = spare.into_iter();
        while pos_sel.len() < sig.p {
            let j = spare.next().expect("d <= n leaves enough spare eigenvalues");
            pos_sel.push(j);
            padded.push(j);
        }
        while neg_sel.len() < sig.q {
            let j = spare.next().expect("d <= n leaves enough spare eigenvalues");
            neg_sel.push(j);
            padded.push(j);
        }
    }
    let degenerate = if padded.is_empty() {
        None
    } else {
        log::warn!(
            "degenerate spectrum: wanted ({}, {}), found {} positive and {} negative eigenvalues",
            sig.p,
            sig.q,
            positive.len(),
            negative.len()
        );
        Some(DegenerateSpectrum {
            positive_available: positive.len(),
            negative_available: negative.len(),
            padded,
        })
    };

    let selected: Vec<usize> = pos_sel.into_iter().chain(neg_sel).collect();
    let vectors = eig.vectors.select(Axis(1), &selected);
    let values = Array1::from_iter(selected.iter().map(|&j| vals[j]));
    let mut positions = vectors.clone();
    for (mut col, v) in positions.axis_iter_mut(Axis(1)).zip(values.iter()) {
        col *= v.abs().sqrt();
    }
    Ok(SpectralEmbedding {
        vectors,
        values,
        positions,
        signature: sig,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_model::{edge_prob_matrix, signature_for, PabmParams};
    use crate::rng;
    use ndarray::array;
    use rand::Rng;

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng::stream(seed, 0);
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        m
    }

    fn random_pabm(n: usize, k: usize, seed: u64) -> PabmParams {
        let mut rng = rng::stream(seed, 0);
        let labels = (0..n).map(|i| i % k).collect();
        let lam = Array2::from_shape_fn((n, k), |_| rng.random_range(0.1..1.0));
        PabmParams::new(labels, k, lam, 1.0).unwrap()
    }

    #[test]
    fn identity_spectrum() {
        let e = sym_eigen(Array2::<f64>::eye(3).view()).unwrap();
        assert_eq!(e.values.to_vec(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_spectrum_is_sorted_signed_permutation() {
        let m = Array2::from_diag(&array![3.0, -2.0, 1.0]);
        let e = sym_eigen(m.view()).unwrap();
        for (got, want) in e.values.iter().zip([3.0, 1.0, -2.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        let want = array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        assert!(linalg::max_abs_diff(e.vectors.view(), want.view()) < 1e-14);
    }

    #[test]
    fn random_reconstruction_and_residuals() {
        let m = random_symmetric(10, 3);
        let e = sym_eigen(m.view()).unwrap();
        let recon = e.vectors.dot(&Array2::from_diag(&e.values)).dot(&e.vectors.t());
        assert!(linalg::frobenius((&recon - &m).view()) < 1e-8);
        let gram = e.vectors.t().dot(&e.vectors);
        assert!(linalg::max_abs_diff(gram.view(), Array2::<f64>::eye(10).view()) < 1e-10);
        let norm = linalg::frobenius(m.view());
        for j in 0..10 {
            let v = e.vectors.column(j);
            let r = m.dot(&v) - &v * e.values[j];
            assert!(r.dot(&r).sqrt() <= 1e-8 * norm);
        }
        for w in e.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn sign_convention() {
        let m = random_symmetric(12, 8);
        let e = sym_eigen(m.view()).unwrap();
        for col in e.vectors.columns() {
            let big = col.iter().copied().fold(0.0_f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn deterministic_bits() {
        let m = random_symmetric(40, 1);
        let a = sym_eigen(m.view()).unwrap();
        let b = sym_eigen(m.view()).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.vectors, b.vectors);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = array![[1.0, 2.0], [2.1, 1.0]];
        assert!(matches!(sym_eigen(m.view()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rank_one_embedding() {
        let lam = array![0.2, 0.5, 0.9, 0.4];
        let p = Array2::from_shape_fn((4, 4), |(i, j)| lam[i] * lam[j]);
        let emb = ase(p.view(), Signature::new(1, 0)).unwrap();
        let z = emb.positions.column(0);
        let sign = z[2].signum();
        for i in 0..4 {
            assert!((sign * z[i] - lam[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_pabm_reconstruction_and_inertia() {
        let params = random_pabm(40, 2, 4);
        let p = edge_prob_matrix(&params);
        let emb = ase(p.matrix().view(), signature_for(2).unwrap()).unwrap();
        assert!(emb.degenerate.is_none());
        assert!(linalg::frobenius((&emb.reconstruct() - p.matrix()).view()) < 1e-8);

        let params = random_pabm(60, 3, 5);
        let p = edge_prob_matrix(&params);
        let e = sym_eigen(p.matrix().view()).unwrap();
        let tol = 1e-8;
        let pos = e.values.iter().filter(|&&v| v > tol).count();
        let neg = e.values.iter().filter(|&&v| v < -tol).count();
        assert_eq!((pos, neg), (6, 3));
        let emb = embed_from_eigen(&e, signature_for(3).unwrap()).unwrap();
        assert!(emb.values.iter().take(6).all(|&v| v > tol));
        assert!(emb.values.iter().skip(6).all(|&v| v < -tol));
    }

    #[test]
    fn pads_missing_negative_eigenvalues() {
        let m = Array2::from_diag(&array![4.0, 2.0, 1.0, 0.5]);
        let emb = ase(m.view(), Signature::new(2, 1)).unwrap();
        let deg = emb.degenerate.expect("no negative eigenvalues");
        assert_eq!(deg.negative_available, 0);
        assert_eq!(deg.padded, vec![3]);
        assert_eq!(emb.values.to_vec(), vec![4.0, 2.0, 0.5]);
    }

    #[test]
    fn embedding_columns_orthonormal() {
        let m = random_symmetric(25, 6);
        let emb = ase(m.view(), Signature::new(3, 2)).unwrap();
        let gram = emb.vectors.t().dot(&emb.vectors);
        assert!(linalg::max_abs_diff(gram.view(), Array2::<f64>::eye(5).view()) < 1e-10);
        for (j, v) in emb.values.iter().enumerate() {
            let want = &emb.vectors.column(j) * v.abs().sqrt();
            assert_eq!(emb.positions.column(j), want);
        }
    }
}
