use ndarray::Array2;
use pabm::estimation::{estimate_lambdas, reconstruct_p_blockwise, reconstruct_p_labelfree};
use pabm::graph_model::{draw_params, edge_prob_matrix, sample_adjacency, PabmParams, PopularityPrior};
use pabm::linalg::max_abs_diff;
use pabm::metrics::rmse_p;
use pabm::rng::{self, replicate_seed};
use proptest::prelude::*;
use rand::Rng;

fn params(n: usize, k: usize, seed: u64) -> PabmParams {
    let mut r = rng::stream(seed, 3);
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let lam = Array2::from_shape_fn((n, k), |_| r.random_range(0.05..1.0));
    PabmParams::new(labels, k, lam, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exact_p_is_reproduced(n in 8usize..150, k in 1usize..=4, seed in any::<u64>()) {
        let params = params(n, k, seed);
        let p = edge_prob_matrix(&params).into_inner();
        let est = estimate_lambdas(p.view(), params.labels(), k).unwrap();
        let rebuilt = reconstruct_p_blockwise(&est).matrix;
        prop_assert!(max_abs_diff(rebuilt.view(), p.view()) < 1e-10);
    }

    #[test]
    fn popularities_scale_with_square_root(n in 8usize..100, k in 1usize..=3, c in 0.01f64..4.0, seed in any::<u64>()) {
        let params = params(n, k, seed);
        let p = edge_prob_matrix(&params).into_inner();
        let base = estimate_lambdas(p.view(), params.labels(), k).unwrap();
        let scaled = estimate_lambdas((&p * c).view(), params.labels(), k).unwrap();
        for a in 0..k {
            for b in 0..k {
                let expect = base.lambda(a, b) * c.sqrt();
                let got = scaled.lambda(a, b);
                prop_assert!(max_abs_diff(got.view().insert_axis(ndarray::Axis(0)), expect.view().insert_axis(ndarray::Axis(0))) < 1e-9);
            }
        }
    }
}

struct Errors {
    lambda_max: f64,
    rmse_blockwise: f64,
    rmse_labelfree: f64,
}

fn median_errors(n: usize, k: usize, reps: usize) -> Errors {
    let prior = PopularityPrior::default();
    let mut lam = Vec::new();
    let mut block = Vec::new();
    let mut free = Vec::new();
    for r in 0..reps {
        let seed = replicate_seed(99, n, k, r);
        let params = draw_params(n, k, &prior, seed).unwrap();
        let p = edge_prob_matrix(&params).into_inner();
        let a = sample_adjacency(&edge_prob_matrix(&params), seed).into_inner();
        let truth = estimate_lambdas(p.view(), params.labels(), k).unwrap();
        let est = estimate_lambdas(a.view(), params.labels(), k).unwrap();
        let mut worst: f64 = 0.0;
        for x in 0..k {
            for y in 0..k {
                let d = est.lambda(x, y) - truth.lambda(x, y);
                worst = worst.max(d.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
            }
        }
        lam.push(worst);
        block.push(rmse_p(reconstruct_p_blockwise(&est).matrix.view(), p.view()).unwrap());
        free.push(rmse_p(reconstruct_p_labelfree(a.view(), k, false).unwrap().matrix.view(), p.view()).unwrap());
    }
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    Errors { lambda_max: median(lam), rmse_blockwise: median(block), rmse_labelfree: median(free) }
}

#[test]
fn estimation_errors_shrink_with_n() {
    let small = median_errors(128, 2, 5);
    let large = median_errors(1024, 2, 5);
    assert!(large.lambda_max < small.lambda_max);
    assert!(large.rmse_blockwise < small.rmse_blockwise);
    assert!(large.rmse_labelfree < small.rmse_labelfree);
}

#[test]
fn labelfree_error_shrinks_with_three_communities() {
    let small = median_errors(256, 3, 3);
    let large = median_errors(1024, 3, 3);
    assert!(large.rmse_labelfree < small.rmse_labelfree);
}
