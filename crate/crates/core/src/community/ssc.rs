use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use super::lasso::{self, LassoProblem};
use super::{AffinityMatrix, AffinityMethod};
use crate::error::{Error, Result};

/// Default sparsity penalty for `n` vertices, `0.05 / √n`.
pub fn default_theta(n: usize) -> f64 {
    0.05 / (n as f64).sqrt()
}

/// Self-representation coefficients of the rows of `√n V`.
///
/// Row `i` of the result is `c̃_i`: the LASSO coefficients of row `i` on all
/// other rows, with an exact zero at position `i`. Rows are solved in
/// parallel; each solve is independent, so the output does not depend on
/// scheduling.
pub fn ssc_coefficients(v: ArrayView2<'_, f64>, prob: &LassoProblem) -> Result<Array2<f64>> {
    prob.validate()?;
    let n = v.nrows();
    if n < 2 {
        return Err(Error::invalid("sparse subspace clustering needs at least two points"));
    }
    let scaled = v.mapv(|x| x * (n as f64).sqrt());
    let norms: Vec<f64> = scaled.rows().into_iter().map(|r| r.dot(&r)).collect();

    let solved: Vec<Result<_>> = (0..n)
        .into_par_iter()
        .map(|i| {
            lasso::solve(scaled.row(i), scaled.view(), &norms, Some(i), prob)
                .map(|fit| fit.coefficients)
                .map_err(|e| e.at_row(i))
        })
        .collect();
    // lowest failing row wins, whatever the scheduling
    let rows: Vec<_> = solved.into_iter().collect::<Result<_>>()?;

    let mut c = Array2::zeros((n, n));
    for (mut dst, src) in c.axis_iter_mut(Axis(0)).zip(rows) {
        dst.assign(&src);
    }
    Ok(c)
}

/// Sparse subspace clustering affinity `B = |C| + |Cᵀ|`.
pub fn ssc_affinity(v: ArrayView2<'_, f64>, prob: &LassoProblem) -> Result<AffinityMatrix> {
    let c = ssc_coefficients(v, prob)?;
    Ok(affinity_from_coefficients(c.view(), prob))
}

pub(crate) fn affinity_from_coefficients(c: ArrayView2<'_, f64>, prob: &LassoProblem) -> AffinityMatrix {
    let n = c.nrows();
    let mut b = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let x = c[[i, j]].abs() + c[[j, i]].abs();
            b[[i, j]] = x;
            b[[j, i]] = x;
        }
    }
    AffinityMatrix {
        matrix: b,
        method: AffinityMethod::Ssc {
            theta: prob.theta,
            tol: prob.tol,
        },
    }
}
