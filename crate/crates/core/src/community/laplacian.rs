use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::spectral::sym_eigen;

#[derive(Debug, Clone)]
pub struct Eigenmap {
    /// `n x d`; isolated vertices get a zero row.
    pub embedding: Array2<f64>,
    /// Vertices of zero degree.
    pub isolated: Vec<usize>,
}

/// Normalized Laplacian eigenmap of an affinity matrix.
///
/// With `Deg` the degree matrix of `B` and `L = I − Deg^{-1/2} B Deg^{-1/2}`,
/// the columns are `Deg^{-1/2} v` for the eigenvectors `v` of the `d` smallest
/// eigenvalues of `L`, i.e. the bottom solutions of `L_rw y = μ y`. They are
/// orthonormal in the `Deg`-weighted inner product.
pub fn laplacian_eigenmap(b: ArrayView2<'_, f64>, d: usize) -> Result<Eigenmap> {
    let n = b.nrows();
    match linalg::asymmetry(b) {
        None => return Err(Error::invalid("affinity matrix must be square")),
        Some(a) if a > 1e-10 * linalg::max_abs(b).max(1.0) => {
            return Err(Error::invalid("affinity matrix must be symmetric"))
        }
        _ => {}
    }
    if b.iter().any(|&x| x < 0.0) {
        return Err(Error::invalid("affinity matrix must be nonnegative"));
    }
    if d == 0 || d > n {
        return Err(Error::invalid(format!("eigenmap dimension {d} must be in 1..={n}")));
    }
    let degree: Vec<f64> = b.rows().into_iter().map(|r| r.sum()).collect();
    let (active, isolated): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| degree[i] > 0.0);
    if active.is_empty() {
        return Err(Error::invalid("affinity matrix is all zero"));
    }
    let inv_sqrt: Vec<f64> = active.iter().map(|&i| 1.0 / degree[i].sqrt()).collect();
    let m = active.len();
    let mut normalized = Array2::zeros((m, m));
    for a in 0..m {
        for c in a..m {
            let x = inv_sqrt[a] * b[[active[a], active[c]]] * inv_sqrt[c];
            normalized[[a, c]] = x;
            normalized[[c, a]] = x;
        }
    }
    // Top eigenvectors of Deg^{-1/2} B Deg^{-1/2} are the bottom ones of L.
    let eig = sym_eigen(normalized.view())?;
    let mut embedding = Array2::zeros((n, d));
    for col in 0..d.min(m) {
        for (a, &i) in active.iter().enumerate() {
            embedding[[i, col]] = inv_sqrt[a] * eig.vectors[[a, col]];
        }
    }
    Ok(Eigenmap { embedding, isolated })
}
