//! Small dense helpers shared by the numerical modules.

use faer::Mat;
use ndarray::{Array2, ArrayView2};

pub(crate) fn to_faer(m: ArrayView2<'_, f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// Largest entrywise absolute difference. Panics on shape mismatch.
pub fn max_abs_diff(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

pub fn max_abs(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Largest `|m_ij - m_ji|`, or `None` if `m` is not square.
pub fn asymmetry(m: ArrayView2<'_, f64>) -> Option<f64> {
    let n = m.nrows();
    if m.ncols() != n {
        return None;
    }
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    Some(worst)
}

pub fn frobenius(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// Accurate to roughly machine precision for the small, well-conditioned
/// generators used to build indefinite orthogonal matrices.
pub fn expm(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "expm needs a square matrix");
    let norm = m
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = m.mapv(|x| x * scale);
    let mut result = Array2::<f64>::eye(n);
    let mut term = Array2::<f64>::eye(n);
    for k in 1..=20 {
        term = term.dot(&a) / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}
