//! Clustering and reconstruction error measures.

use ndarray::ArrayView2;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    /// Vertices whose predicted label, after the best relabeling, differs from the truth.
    pub miscluster_count: usize,
    pub miscluster_rate: f64,
    pub ari: f64,
    /// `best_permutation[c]` is the truth label assigned to predicted label
    /// `c`, or `None` when `c` is matched to a padding column.
    pub best_permutation: Vec<Option<usize>>,
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "label vectors differ in length ({} vs {})",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

fn label_count(labels: &[usize]) -> usize {
    labels.iter().copied().max().map_or(0, |m| m + 1)
}

/// `table[a][b]` counts vertices with predicted label `a` and true label `b`.
fn contingency(pred: &[usize], truth: &[usize]) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0usize; label_count(truth)]; label_count(pred)];
    for (&a, &b) in pred.iter().zip(truth) {
        table[a][b] += 1;
    }
    table
}

/// Minimum-cost perfect matching on a square cost matrix (Kuhn–Munkres with
/// potentials). Returns `assign[row] = column`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let m = cost.len();
    // 1-based arrays with a sentinel column 0.
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=m {
        owner[0] = row;
        let mut col = 0;
        let mut min_to = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[col] = true;
            let r = owner[col];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost[r - 1][j - 1] - u[r] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = col;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    next = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            col = next;
            if owner[col] == 0 {
                break;
            }
        }
        while col != 0 {
            let prev = way[col];
            owner[col] = owner[prev];
            col = prev;
        }
    }
    let mut assign = vec![0; m];
    for j in 1..=m {
        if owner[j] != 0 {
            assign[owner[j] - 1] = j - 1;
        }
    }
    assign
}

/// Misclustering count minimized over relabelings of `pred`, with the ARI.
///
/// Labels are 0-based. When the two sides use different numbers of labels
/// the confusion matrix is padded with zeros, so members of an unmatched
/// predicted cluster all count as errors.
pub fn community_error(pred: &[usize], truth: &[usize]) -> Result<ErrorReport> {
    check_lengths(pred, truth)?;
    let n = pred.len();
    let table = contingency(pred, truth);
    let kp = table.len();
    let kt = label_count(truth);
    let m = kp.max(kt);
    let cost: Vec<Vec<f64>> = (0..m)
        .map(|a| (0..m).map(|b| if a < kp && b < kt { -(table[a][b] as f64) } else { 0.0 }).collect())
        .collect();
    let assign = min_cost_assignment(&cost);
    let agreed: usize = (0..kp).filter(|&a| assign[a] < kt).map(|a| table[a][assign[a]]).sum();
    let best_permutation = (0..kp).map(|a| (assign[a] < kt).then_some(assign[a])).collect();
    let miscluster_count = n - agreed;
    Ok(ErrorReport {
        miscluster_count,
        miscluster_rate: if n == 0 { 0.0 } else { miscluster_count as f64 / n as f64 },
        ari: adjusted_rand(pred, truth)?,
        best_permutation,
    })
}

fn pairs(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index. Returns 1 when both partitions are trivial in the
/// same way, which leaves the index undefined.
pub fn adjusted_rand(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let table = contingency(pred, truth);
    let index: f64 = table.iter().flatten().map(|&c| pairs(c)).sum();
    let row_sums: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let col_sums: f64 = (0..label_count(truth)).map(|b| pairs(table.iter().map(|r| r[b]).sum())).sum();
    let total = pairs(pred.len());
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = row_sums * col_sums / total;
    let max_index = 0.5 * (row_sums + col_sums);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// `‖P̂ − P‖_F / n`.
pub fn rmse_p(p_hat: ArrayView2<'_, f64>, p: ArrayView2<'_, f64>) -> Result<f64> {
    if p_hat.dim() != p.dim() || !p.is_square() {
        return Err(Error::invalid(format!(
            "rmse needs two square matrices of the same shape, got {:?} and {:?}",
            p_hat.dim(),
            p.dim()
        )));
    }
    let n = p.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let ss: f64 = p_hat.iter().zip(p.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(ss.sqrt() / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn identical_and_swapped() {
        let truth = [0, 1, 0, 1, 1];
        let r = community_error(&truth, &truth).unwrap();
        assert_eq!(r.miscluster_count, 0);
        assert_eq!(r.ari, 1.0);
        let swapped: Vec<usize> = truth.iter().map(|&l| 1 - l).collect();
        let r = community_error(&swapped, &truth).unwrap();
        assert_eq!(r.miscluster_count, 0);
        assert_eq!(r.best_permutation, vec![Some(1), Some(0)]);
    }

    #[test]
    fn one_disagreement() {
        let r = community_error(&[0, 0, 0, 1], &[0, 1, 0, 1]).unwrap();
        assert_eq!(r.miscluster_count, 1);
        assert_eq!(r.miscluster_rate, 0.25);
    }

    #[test]
    fn unmatched_predicted_cluster_counts_as_errors() {
        // three predicted clusters against two true ones
        let r = community_error(&[0, 0, 1, 1, 2, 2], &[0, 0, 1, 1, 1, 1]).unwrap();
        assert_eq!(r.miscluster_count, 2);
        assert_eq!(r.best_permutation.iter().filter(|p| p.is_none()).count(), 1);
    }

    #[test]
    fn ari_single_cluster_is_zero() {
        let ari = adjusted_rand(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap();
        assert!(ari.abs() < 1e-15);
    }

    #[test]
    fn ari_hand_computed() {
        // contingency [[2,0,0],[0,1,0],[0,1,2]] (pred rows):
        // index = 1 + 1 = 2; rows 1+0+3 = 4; cols 1+1+1 = 3; total 15
        // expected 0.8, max 3.5 → (2 − 0.8)/(3.5 − 0.8) = 4/9
        let ari = adjusted_rand(&[0, 0, 1, 2, 2, 2], &[0, 0, 1, 1, 2, 2]).unwrap();
        assert!((ari - 4.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(community_error(&[0], &[0, 1]), Err(Error::InvalidArgument(_))));
        assert!(adjusted_rand(&[0], &[]).is_err());
    }

    #[test]
    fn rmse_constant_shift() {
        let p = Array2::from_shape_fn((6, 6), |(i, j)| ((i * j) % 5) as f64 / 5.0);
        assert_eq!(rmse_p(p.view(), p.view()).unwrap(), 0.0);
        let shifted = &p + 0.3;
        assert!((rmse_p(shifted.view(), p.view()).unwrap() - 0.3).abs() < 1e-14);
        assert!(rmse_p(p.view(), Array2::zeros((5, 5)).view()).is_err());
    }

    #[test]
    fn assignment_small() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = min_cost_assignment(&cost);
        let total: f64 = a.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        assert_eq!(total, 5.0);
    }
}
