//! Diagonal-covariance Gaussian mixtures fitted by EM, and Lloyd's k-means.
//! Both start from k-means++ seeding and keep the best of several restarts.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{ClusteringResult, Diagnostics};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmOptions {
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative change in log-likelihood that ends EM.
    pub tol: f64,
    /// Variance floor as a fraction of the mean per-dimension data variance.
    pub reg_covar: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
            reg_covar: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            restarts: 10,
            max_iter: 300,
        }
    }
}

fn sq_dist(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding. `None` when fewer than `k` distinct points exist.
fn kmeans_plus_plus(points: ArrayView2<'_, f64>, k: usize, rng: &mut Rng) -> Option<Array2<f64>> {
    let n = points.nrows();
    let mut centers = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, &w) in d2.iter().enumerate() {
            if w > 0.0 && target < w {
                pick = i;
                break;
            }
            target -= w;
        }
        if d2[pick] <= 0.0 {
            // Rounding ran off the end; take the last point with positive weight.
            pick = d2.iter().rposition(|&w| w > 0.0)?;
        }
        centers.row_mut(c).assign(&points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centers.row(c)));
        }
    }
    Some(centers)
}

fn nearest(points: ArrayView2<'_, f64>, centers: &Array2<f64>) -> Vec<usize> {
    points
        .rows()
        .into_iter()
        .map(|x| {
            let mut best = (f64::INFINITY, 0);
            for (c, center) in centers.rows().into_iter().enumerate() {
                let d = sq_dist(x, center);
                if d < best.0 {
                    best = (d, c);
                }
            }
            best.1
        })
        .collect()
}

fn validate(points: ArrayView2<'_, f64>, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("cluster count must be at least 1"));
    }
    if points.nrows() < k {
        return Err(Error::invalid(format!(
            "{} points cannot form {k} clusters",
            points.nrows()
        )));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("points contain non-finite values"));
    }
    Ok(())
}

struct Fit {
    labels: Vec<usize>,
    score: f64,
}

/// EM for a `k`-component diagonal Gaussian mixture, best of
/// `opts.restarts` by final log-likelihood. Deterministic given `seed`.
///
/// A restart in which a component loses all its mass is abandoned and
/// counted in the diagnostics; if every restart is abandoned the call fails.
pub fn gmm_cluster(points: ArrayView2<'_, f64>, k: usize, seed: u64, opts: &GmmOptions) -> Result<ClusteringResult> {
    validate(points, k)?;
    let mut rng = rng::stream(seed, rng::STREAM_CLUSTERING);
    let mean_var = points.var_axis(Axis(0), 0.0).mean().unwrap_or(0.0);
    let floor = opts.reg_covar * mean_var.max(f64::MIN_POSITIVE) + f64::MIN_POSITIVE;

    let mut best: Option<Fit> = None;
    let mut degenerate = 0;
    for _ in 0..opts.restarts.max(1) {
        match em_run(points, k, floor, opts, &mut rng) {
            Some(fit) => {
                if best.as_ref().is_none_or(|b| fit.score > b.score) {
                    best = Some(fit);
                }
            }
            None => degenerate += 1,
        }
    }
    let fit = best.ok_or_else(|| {
        Error::numeric(format!(
            "all {} mixture restarts hit an empty component",
            opts.restarts.max(1)
        ))
    })?;
    let diagnostics = Diagnostics {
        degenerate_restarts: degenerate,
        fit_score: Some(fit.score),
        ..Diagnostics::default()
    };
    Ok(ClusteringResult::canonical(&fit.labels, k, diagnostics))
}

fn em_run(points: ArrayView2<'_, f64>, k: usize, floor: f64, opts: &GmmOptions, rng: &mut Rng) -> Option<Fit> {
    let (n, d) = points.dim();
    let centers = kmeans_plus_plus(points, k, rng)?;
    let mut resp = Array2::<f64>::zeros((n, k));
    for (i, c) in nearest(points, &centers).into_iter().enumerate() {
        resp[[i, c]] = 1.0;
    }

    let mut weights = Array1::<f64>::zeros(k);
    let mut means = Array2::<f64>::zeros((k, d));
    let mut vars = Array2::<f64>::zeros((k, d));
    let mut prev_ll = f64::NEG_INFINITY;
    let mut ll = f64::NEG_INFINITY;
    let min_mass = 1e-10 * n as f64;

    for _ in 0..opts.max_iter {
        // M-step
        for c in 0..k {
            let mass: f64 = resp.column(c).sum();
            if mass < min_mass {
                return None;
            }
            weights[c] = mass / n as f64;
            let mut mean = Array1::<f64>::zeros(d);
            for i in 0..n {
                mean.scaled_add(resp[[i, c]], &points.row(i));
            }
            mean /= mass;
            let mut var = Array1::<f64>::zeros(d);
            for i in 0..n {
                let r = resp[[i, c]];
                for j in 0..d {
                    let diff = points[[i, j]] - mean[j];
                    var[j] += r * diff * diff;
                }
            }
            var.mapv_inplace(|v| v / mass + floor);
            means.row_mut(c).assign(&mean);
            vars.row_mut(c).assign(&var);
        }

        // E-step
        let log_norm: Vec<f64> = (0..k)
            .map(|c| {
                weights[c].ln()
                    - 0.5 * vars.row(c).iter().map(|v| (2.0 * std::f64::consts::PI * v).ln()).sum::<f64>()
            })
            .collect();
        ll = 0.0;
        let mut logp = vec![0.0; k];
        for i in 0..n {
            let x = points.row(i);
            for c in 0..k {
                let maha: f64 = (0..d)
                    .map(|j| {
                        let diff = x[j] - means[[c, j]];
                        diff * diff / vars[[c, j]]
                    })
                    .sum();
                logp[c] = log_norm[c] - 0.5 * maha;
            }
            let top = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = top + logp.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
            ll += lse;
            for c in 0..k {
                resp[[i, c]] = (logp[c] - lse).exp();
            }
        }
        if !ll.is_finite() {
            return None;
        }
        if (ll - prev_ll).abs() <= opts.tol * ll.abs().max(1.0) {
            break;
        }
        prev_ll = ll;
    }

    let labels = resp
        .rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (c, &v)| if v > acc.1 { (c, v) } else { acc })
                .0
        })
        .collect();
    Some(Fit { labels, score: ll })
}

/// Lloyd's algorithm, best of `opts.restarts` by inertia.
pub fn kmeans_cluster(points: ArrayView2<'_, f64>, k: usize, seed: u64, opts: &KMeansOptions) -> Result<ClusteringResult> {
    validate(points, k)?;
    let mut rng = rng::stream(seed, rng::STREAM_CLUSTERING);
    let (n, d) = points.dim();
    let mut best: Option<Fit> = None;
    let mut degenerate = 0;
    for _ in 0..opts.restarts.max(1) {
        let Some(mut centers) = kmeans_plus_plus(points, k, &mut rng) else {
            degenerate += 1;
            continue;
        };
        let mut labels = nearest(points, &centers);
        let mut empty = false;
        for _ in 0..opts.max_iter {
            let mut sums = Array2::<f64>::zeros((k, d));
            let mut counts = vec![0usize; k];
            for (i, &c) in labels.iter().enumerate() {
                sums.row_mut(c).scaled_add(1.0, &points.row(i));
                counts[c] += 1;
            }
            if counts.contains(&0) {
                empty = true;
                break;
            }
            for (c, &count) in counts.iter().enumerate() {
                centers.row_mut(c).assign(&(&sums.row(c) / count as f64));
            }
            let next = nearest(points, &centers);
            if next == labels {
                break;
            }
            labels = next;
        }
        if empty {
            degenerate += 1;
            continue;
        }
        let inertia: f64 = (0..n).map(|i| sq_dist(points.row(i), centers.row(labels[i]))).sum();
        let fit = Fit { labels, score: -inertia };
        if best.as_ref().is_none_or(|b| fit.score > b.score) {
            best = Some(fit);
        }
    }
    let fit = best.ok_or_else(|| Error::numeric("all k-means restarts produced an empty cluster"))?;
    let diagnostics = Diagnostics {
        degenerate_restarts: degenerate,
        fit_score: Some(fit.score),
        ..Diagnostics::default()
    };
    Ok(ClusteringResult::canonical(&fit.labels, k, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{adjusted_rand, community_error};
    use ndarray::array;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn two_clouds(seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = rng::stream(seed, 0);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let n = 60;
        let truth: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let pts = Array2::from_shape_fn((n, 2), |(i, _)| 10.0 * truth[i] as f64 + noise.sample(&mut rng));
        (pts, truth)
    }

    #[test]
    fn separated_clouds() {
        let (pts, truth) = two_clouds(1);
        let gmm = gmm_cluster(pts.view(), 2, 7, &GmmOptions::default()).unwrap();
        assert_eq!(community_error(&gmm.labels, &truth).unwrap().miscluster_count, 0);
        let km = kmeans_cluster(pts.view(), 2, 7, &KMeansOptions::default()).unwrap();
        assert_eq!(community_error(&km.labels, &truth).unwrap().miscluster_count, 0);
    }

    #[test]
    fn one_point_per_cluster() {
        let pts = array![[0.0, 0.0], [1.0, 5.0], [-3.0, 2.0]];
        let gmm = gmm_cluster(pts.view(), 3, 1, &GmmOptions::default()).unwrap();
        assert_eq!(gmm.labels, vec![0, 1, 2]);
        let km = kmeans_cluster(pts.view(), 3, 1, &KMeansOptions::default()).unwrap();
        assert_eq!(km.labels, vec![0, 1, 2]);
    }

    #[test]
    fn three_component_mixture_recovered() {
        let mut rng = rng::stream(5, 0);
        let sigma = 1.0;
        let noise = Normal::new(0.0, sigma).unwrap();
        let centers = [[0.0, 0.0], [5.0 * sigma, 0.0], [0.0, 5.0 * sigma]];
        let n = 600;
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let pts = Array2::from_shape_fn((n, 2), |(i, j)| centers[truth[i]][j] + noise.sample(&mut rng));
        let fit = gmm_cluster(pts.view(), 3, 11, &GmmOptions::default()).unwrap();
        let ari = adjusted_rand(&fit.labels, &truth).unwrap();
        assert!(ari > 0.9, "ari {ari}");
    }

    #[test]
    fn deterministic_given_seed() {
        let (pts, _) = two_clouds(2);
        let a = gmm_cluster(pts.view(), 3, 4, &GmmOptions::default()).unwrap();
        let b = gmm_cluster(pts.view(), 3, 4, &GmmOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_points_fail_numerically() {
        let pts = Array2::<f64>::ones((5, 2));
        let err = gmm_cluster(pts.view(), 2, 0, &GmmOptions::default()).unwrap_err();
        assert!(err.is_numeric());
        let err = kmeans_cluster(pts.view(), 2, 0, &KMeansOptions::default()).unwrap_err();
        assert!(err.is_numeric());
    }

    #[test]
    fn too_few_points() {
        let pts = Array2::<f64>::zeros((2, 2));
        assert!(matches!(gmm_cluster(pts.view(), 3, 0, &GmmOptions::default()), Err(Error::InvalidArgument(_))));
    }
}
