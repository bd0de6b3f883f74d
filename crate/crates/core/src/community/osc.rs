use ndarray::{Array2, ArrayView2};

use super::{AffinityMatrix, AffinityMethod};

/// `B = |n V Vᵀ|` entrywise, for `V` with orthonormal columns.
///
/// For the eigenvectors of an exact PABM edge probability matrix, `B_ij = 0`
/// exactly when `i` and `j` lie in different communities. The result is
/// invariant to column sign flips of `V` and exactly symmetric.
pub fn osc_affinity(v: ArrayView2<'_, f64>) -> AffinityMatrix {
    let n = v.nrows();
    debug_assert!({
        let gram = v.t().dot(&v);
        let eye = Array2::<f64>::eye(v.ncols());
        crate::linalg::max_abs_diff(gram.view(), eye.view()) < 1e-8
    });
    let scale = n as f64;
    let mut b = Array2::zeros((n, n));
    for i in 0..n {
        let vi = v.row(i);
        for j in i..n {
            let x = (scale * vi.dot(&v.row(j))).abs();
            b[[i, j]] = x;
            b[[j, i]] = x;
        }
    }
    AffinityMatrix {
        matrix: b,
        method: AffinityMethod::Osc,
    }
}
