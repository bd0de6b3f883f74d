//! Cyclic coordinate descent for the LASSO
//!
//! ```text
//! min_c  ½ ‖y − Dᵀ c‖² + θ ‖c‖₁
//! ```
//!
//! where the rows of `D` (`m x d`) are the dictionary points.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LassoProblem {
    /// L1 penalty, strictly positive.
    pub theta: f64,
    /// Bound on the stationarity residual.
    pub tol: f64,
    /// Cap on full coordinate sweeps.
    pub max_iter: usize,
}

impl LassoProblem {
    pub fn new(theta: f64) -> Result<Self> {
        let p = LassoProblem {
            theta,
            tol: 1e-8,
            max_iter: 20_000,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        self.tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::invalid(format!("lasso penalty must be positive, got {}", self.theta)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::invalid(format!("lasso tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coefficients: Array1<f64>,
    pub sweeps: usize,
    /// Stationarity residual of `coefficients`.
    pub residual: f64,
}

pub fn lasso_objective(y: ArrayView1<'_, f64>, dict: ArrayView2<'_, f64>, c: ArrayView1<'_, f64>, theta: f64) -> f64 {
    let r = &y - &dict.t().dot(&c);
    0.5 * r.dot(&r) + theta * c.iter().map(|x| x.abs()).sum::<f64>()
}

/// Largest violation of the LASSO optimality conditions:
/// `|g_j| ≤ θ` where `c_j = 0` and `g_j = −sign(c_j) θ` elsewhere, with `g`
/// the gradient of the quadratic term.
pub fn stationarity_residual(y: ArrayView1<'_, f64>, dict: ArrayView2<'_, f64>, c: ArrayView1<'_, f64>, theta: f64) -> f64 {
    let r = &y - &dict.t().dot(&c);
    let grad = -dict.dot(&r);
    kkt_violation(grad.view(), c, theta, None)
}

fn kkt_violation(grad: ArrayView1<'_, f64>, c: ArrayView1<'_, f64>, theta: f64, skip: Option<usize>) -> f64 {
    let mut worst = 0.0_f64;
    for (j, (&g, &cj)) in grad.iter().zip(c.iter()).enumerate() {
        if Some(j) == skip {
            continue;
        }
        let v = if cj == 0.0 {
            (g.abs() - theta).max(0.0)
        } else {
            (g + theta * cj.signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

pub fn lasso_cd(y: ArrayView1<'_, f64>, dict: ArrayView2<'_, f64>, prob: &LassoProblem) -> Result<LassoFit> {
    prob.validate()?;
    if dict.ncols() != y.len() {
        return Err(Error::invalid(format!(
            "dictionary has {} columns but the target has length {}",
            dict.ncols(),
            y.len()
        )));
    }
    let norms: Vec<f64> = dict.rows().into_iter().map(|r| r.dot(&r)).collect();
    solve(y, dict, &norms, None, prob)
}

/// Coordinate descent with dictionary row `skip` pinned at zero.
///
/// `norms[j]` must be `‖D_j‖²`.
pub(crate) fn solve(
    y: ArrayView1<'_, f64>,
    dict: ArrayView2<'_, f64>,
    norms: &[f64],
    skip: Option<usize>,
    prob: &LassoProblem,
) -> Result<LassoFit> {
    let m = dict.nrows();
    let theta = prob.theta;
    let mut c = Array1::<f64>::zeros(m);
    let mut r = y.to_owned();
    let mut active: Vec<usize> = Vec::new();
    let mut best: Option<(f64, Array1<f64>)> = None;

    let update = |j: usize, c: &mut Array1<f64>, r: &mut Array1<f64>| -> f64 {
        let xj = dict.row(j);
        let old = c[j];
        let rho = xj.dot(r) + norms[j] * old;
        let new = soft_threshold(rho, theta) / norms[j];
        if new != old {
            r.scaled_add(old - new, &xj);
            c[j] = new;
        }
        (new - old).abs() * norms[j].sqrt()
    };

    for sweep in 1..=prob.max_iter {
        for (j, &norm) in norms.iter().enumerate() {
            if Some(j) == skip || norm == 0.0 {
                continue;
            }
            update(j, &mut c, &mut r);
        }

        // Polish the support before paying for a full optimality check.
        active.clear();
        active.extend((0..m).filter(|&j| c[j] != 0.0));
        for _ in 0..1000 {
            let mut delta = 0.0_f64;
            for &j in &active {
                delta = delta.max(update(j, &mut c, &mut r));
            }
            if delta <= 0.1 * prob.tol {
                break;
            }
        }

        // Fresh residual so rounding drift in `r` cannot fake convergence.
        r.assign(&y);
        for j in (0..m).filter(|&j| c[j] != 0.0) {
            r.scaled_add(-c[j], &dict.row(j));
        }
        let grad = -dict.dot(&r);
        let residual = kkt_violation(grad.view(), c.view(), theta, skip);
        if residual <= prob.tol {
            return Ok(LassoFit {
                coefficients: c,
                sweeps: sweep,
                residual,
            });
        }
        if best.as_ref().is_none_or(|(b, _)| residual < *b) {
            best = Some((residual, c.clone()));
        }
    }
    let (residual, best) = best.expect("at least one sweep ran");
    Err(Error::LassoNotConverged {
        iterations: prob.max_iter,
        residual,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::{array, Array2};
    use rand::Rng;

    /// Accelerated proximal gradient, run for a fixed large budget. Slow and
    /// independent of the coordinate-descent path.
    fn reference_solve(y: ArrayView1<'_, f64>, dict: ArrayView2<'_, f64>, theta: f64) -> Array1<f64> {
        let gram = dict.dot(&dict.t());
        // Lipschitz constant of the gradient: largest eigenvalue of the Gram matrix.
        let mut v = Array1::<f64>::ones(gram.nrows());
        let mut lip = 0.0;
        for _ in 0..500 {
            let w = gram.dot(&v);
            lip = w.dot(&w).sqrt();
            if lip == 0.0 {
                return Array1::zeros(gram.nrows());
            }
            v = w / lip;
        }
        let step = 1.0 / (lip * 1.01);
        let dy = dict.dot(&y);
        let mut x = Array1::<f64>::zeros(gram.nrows());
        let mut z = x.clone();
        let mut t = 1.0_f64;
        for _ in 0..200_000 {
            let grad = gram.dot(&z) - &dy;
            let x_new = (&z - &(grad * step)).mapv(|u| soft_threshold(u, theta * step));
            let t_new = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            z = &x_new + &((&x_new - &x) * ((t - 1.0) / t_new));
            x = x_new;
            t = t_new;
        }
        x
    }

    fn random_instance(m: usize, d: usize, seed: u64) -> (Array1<f64>, Array2<f64>) {
        let mut rng = rng::stream(seed, 5);
        let dict = Array2::from_shape_fn((m, d), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0));
        (y, dict)
    }

    #[test]
    fn large_penalty_gives_zero() {
        let (y, dict) = random_instance(6, 4, 1);
        let max_corr = dict.dot(&y).iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        let fit = lasso_cd(y.view(), dict.view(), &LassoProblem::new(max_corr).unwrap()).unwrap();
        assert!(fit.coefficients.iter().all(|&x| x == 0.0));
        let fit = lasso_cd(y.view(), dict.view(), &LassoProblem::new(max_corr * 0.9).unwrap()).unwrap();
        assert!(fit.coefficients.iter().any(|&x| x != 0.0));
    }

    #[test]
    fn exact_representation_recovers_indicator() {
        let dict = array![
            [0.3, -0.2, 0.1],
            [2.0, 1.0, -1.0],
            [0.1, 0.4, 0.2],
            [-0.3, 0.1, 0.5]
        ];
        let y = dict.row(1).to_owned();
        let norm2 = y.dot(&y);
        for theta in [1e-2, 1e-4, 1e-6] {
            let fit = lasso_cd(y.view(), dict.view(), &LassoProblem::new(theta).unwrap()).unwrap();
            let mut target = Array1::zeros(4);
            target[1] = 1.0;
            let err = (&fit.coefficients - &target).iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            assert!(err <= 2.0 * theta / norm2, "theta {theta}: err {err}");
        }
    }

    #[test]
    fn matches_reference_on_small_instance() {
        let (y, dict) = random_instance(6, 4, 2);
        let theta = 0.05;
        let fit = lasso_cd(y.view(), dict.view(), &LassoProblem::new(theta).unwrap()).unwrap();
        let reference = reference_solve(y.view(), dict.view(), theta);
        let f_cd = lasso_objective(y.view(), dict.view(), fit.coefficients.view(), theta);
        let f_ref = lasso_objective(y.view(), dict.view(), reference.view(), theta);
        assert!((f_cd - f_ref).abs() < 1e-6, "{f_cd} vs {f_ref}");
        assert!(fit.residual <= 1e-8);
        assert!(
            (stationarity_residual(y.view(), dict.view(), fit.coefficients.view(), theta) - fit.residual).abs() < 1e-12
        );
    }

    #[test]
    fn skipped_row_stays_zero() {
        let (y, dict) = random_instance(8, 3, 3);
        let norms: Vec<f64> = dict.rows().into_iter().map(|r| r.dot(&r)).collect();
        let prob = LassoProblem::new(0.01).unwrap();
        let fit = solve(y.view(), dict.view(), &norms, Some(2), &prob).unwrap();
        assert_eq!(fit.coefficients[2], 0.0);
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let (y, dict) = random_instance(12, 8, 4);
        let prob = LassoProblem::new(1e-4).unwrap().with_max_iter(1);
        match lasso_cd(y.view(), dict.view(), &prob) {
            Err(Error::LassoNotConverged { iterations, residual, best }) => {
                assert_eq!(iterations, 1);
                assert!(residual > prob.tol);
                assert_eq!(best.len(), 12);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(LassoProblem::new(0.0).is_err());
        assert!(LassoProblem::new(-1.0).is_err());
        assert!(LassoProblem::new(0.1).unwrap().with_tol(0.0).is_err());
        let dict = Array2::<f64>::zeros((3, 2));
        let y = Array1::<f64>::zeros(4);
        assert!(lasso_cd(y.view(), dict.view(), &LassoProblem::new(0.1).unwrap()).is_err());
    }

    #[test]
    fn zero_dictionary_rows_are_ignored() {
        let dict = array![[0.0, 0.0], [1.0, 0.5]];
        let y = array![1.0, 0.5];
        let fit = lasso_cd(y.view(), dict.view(), &LassoProblem::new(0.01).unwrap()).unwrap();
        assert_eq!(fit.coefficients[0], 0.0);
        assert!(fit.coefficients[1] > 0.9);
    }
}
