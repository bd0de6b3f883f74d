use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detect::{detect_embedded, DetectOptions, Method};
use crate::community::{FinalClusterer, GmmOptions, KMeansOptions, PartitionMode, PartitionOptions};
use crate::error::{Error, Result};
use crate::estimation::{estimate_lambdas, labelfree_from_embedding, reconstruct_p_blockwise};
use crate::graph_model::{draw_params, edge_prob_matrix, sample_adjacency, signature_for, Balance, PopularityPrior};
use crate::metrics::rmse_p;
use crate::rng::replicate_seed;
use crate::spectral::ase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Osc,
    Ssc,
    Both,
}

impl MethodChoice {
    pub fn methods(&self) -> Vec<Method> {
        match self {
            MethodChoice::Osc => vec![Method::Osc],
            MethodChoice::Ssc => vec![Method::Ssc],
            MethodChoice::Both => vec![Method::Osc, Method::Ssc],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_list: Vec<usize>,
    #[serde(rename = "K_list")]
    pub k_list: Vec<usize>,
    pub balance: Balance,
    pub replicates: usize,
    pub seed: u64,
    pub method: MethodChoice,
    pub within_beta: (f64, f64),
    pub between_beta: (f64, f64),
    pub sparsity: f64,
    /// SSC penalty; `None` scales with the vertex count.
    pub theta: Option<f64>,
    pub lasso_tol: f64,
    pub lasso_max_iter: usize,
    pub partition: PartitionMode,
    pub clusterer: FinalClusterer,
    pub gmm: GmmOptions,
    pub kmeans: KMeansOptions,
    /// Clamp the label-free `P̂` to `[0, 1]` before scoring it.
    pub clip: bool,
    /// Fill `wall_ms`. Off by default so that output is reproducible byte for byte.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let prior = PopularityPrior::default();
        ExperimentConfig {
            n_list: vec![128, 256, 512, 1024],
            k_list: vec![2, 3],
            balance: prior.balance,
            replicates: 10,
            seed: 0,
            method: MethodChoice::Osc,
            within_beta: prior.within,
            between_beta: prior.between,
            sparsity: prior.sparsity,
            theta: None,
            lasso_tol: 1e-8,
            lasso_max_iter: 20_000,
            partition: PartitionMode::Spectral,
            clusterer: FinalClusterer::Gmm,
            gmm: GmmOptions::default(),
            kmeans: KMeansOptions::default(),
            clip: false,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.k_list.is_empty() {
            return Err(Error::invalid("n_list and K_list must be nonempty"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        for &k in &self.k_list {
            signature_for(k)?;
            for &n in &self.n_list {
                if n < k * k {
                    return Err(Error::invalid(format!("n = {n} is below K² = {} for K = {k}", k * k)));
                }
            }
        }
        for (a, b) in [self.within_beta, self.between_beta] {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::invalid(format!("beta shapes ({a}, {b}) must be positive")));
            }
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(Error::invalid(format!("sparsity {} must be in (0, 1]", self.sparsity)));
        }
        if let Some(t) = self.theta {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid(format!("theta {t} must be positive")));
            }
        }
        Ok(())
    }

    pub fn prior(&self) -> PopularityPrior {
        PopularityPrior {
            balance: self.balance,
            within: self.within_beta,
            between: self.between_beta,
            sparsity: self.sparsity,
        }
    }

    pub fn detect_options(&self, method: Method, seed: u64) -> DetectOptions {
        DetectOptions {
            method,
            theta: self.theta,
            lasso_tol: self.lasso_tol,
            lasso_max_iter: self.lasso_max_iter,
            partition: PartitionOptions {
                mode: self.partition,
                clusterer: self.clusterer,
                seed,
                gmm: self.gmm,
                kmeans: self.kmeans,
            },
        }
    }
}

/// One row of the records CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub method: Method,
    pub replicate: usize,
    pub seed: u64,
    pub miscluster_count: Option<usize>,
    pub miscluster_rate: Option<f64>,
    pub ari: Option<f64>,
    pub rmse_blockwise: Option<f64>,
    pub rmse_labelfree: Option<f64>,
    pub wall_ms: Option<f64>,
    /// `;`-separated markers, empty when the replicate ran cleanly.
    pub flags: String,
}

impl ExperimentRecord {
    /// Detection and estimation both failed or were skipped.
    pub fn failed(&self) -> bool {
        self.miscluster_count.is_none()
    }
}

fn run_replicate(cfg: &ExperimentConfig, n: usize, k: usize, replicate: usize) -> Result<Vec<ExperimentRecord>> {
    let seed = replicate_seed(cfg.seed, n, k, replicate);
    let methods = cfg.methods_sorted();
    let blank = |method, flags: Vec<String>| ExperimentRecord {
        n,
        k,
        method,
        replicate,
        seed,
        miscluster_count: None,
        miscluster_rate: None,
        ari: None,
        rmse_blockwise: None,
        rmse_labelfree: None,
        wall_ms: None,
        flags: flags.join(";"),
    };

    let params = draw_params(n, k, &cfg.prior(), seed)?;
    if params.community_sizes().contains(&0) {
        log::warn!("n={n} K={k} replicate {replicate}: empty community");
        return Ok(methods.into_iter().map(|m| blank(m, vec!["empty-community".into()])).collect());
    }
    let p = edge_prob_matrix(&params);
    let a = sample_adjacency(&p, seed);
    let truth = params.labels();

    let mut shared_flags = Vec::new();
    let rmse_blockwise = match estimate_lambdas(a.matrix().view(), truth, k) {
        Ok(est) => {
            if !est.degenerate_blocks().is_empty() {
                shared_flags.push("degenerate-block".to_string());
            }
            Some(rmse_p(reconstruct_p_blockwise(&est).matrix.view(), p.matrix().view())?)
        }
        Err(e) if e.is_numeric() => {
            shared_flags.push("estimation-failed".to_string());
            None
        }
        Err(e) => return Err(e),
    };

    let emb = match ase(a.matrix().view(), signature_for(k)?) {
        Ok(emb) => emb,
        Err(e) if e.is_numeric() => {
            shared_flags.push("embedding-failed".to_string());
            return Ok(methods
                .into_iter()
                .map(|m| ExperimentRecord {
                    rmse_blockwise,
                    ..blank(m, shared_flags.clone())
                })
                .collect());
        }
        Err(e) => return Err(e),
    };
    if emb.degenerate.is_some() {
        shared_flags.push("degenerate-spectrum".to_string());
    }
    let rmse_labelfree = Some(rmse_p(labelfree_from_embedding(&emb, cfg.clip).matrix.view(), p.matrix().view())?);

    let mut out = Vec::new();
    for method in methods {
        let mut flags = shared_flags.clone();
        let start = Instant::now();
        let detection = detect_embedded(&emb, k, &cfg.detect_options(method, seed), Some(truth));
        let wall_ms = cfg.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
        let record = match detection {
            Ok(d) => {
                let diag = &d.clustering.diagnostics;
                if diag.fell_back {
                    flags.push("threshold-fallback".into());
                }
                if diag.degenerate_partition {
                    flags.push("degenerate-partition".into());
                }
                if !diag.isolated.is_empty() {
                    flags.push(format!("isolated={}", diag.isolated.len()));
                }
                let r = d.report.expect("truth supplied");
                ExperimentRecord {
                    miscluster_count: Some(r.miscluster_count),
                    miscluster_rate: Some(r.miscluster_rate),
                    ari: Some(r.ari),
                    rmse_blockwise,
                    rmse_labelfree,
                    wall_ms,
                    flags: flags.join(";"),
                    ..blank(method, Vec::new())
                }
            }
            Err(e) if e.is_numeric() => {
                log::warn!("n={n} K={k} {method} replicate {replicate}: {e}");
                flags.push("detection-failed".into());
                ExperimentRecord {
                    rmse_blockwise,
                    rmse_labelfree,
                    wall_ms,
                    ..blank(method, flags)
                }
            }
            Err(e) => return Err(e),
        };
        out.push(record);
    }
    Ok(out)
}

impl ExperimentConfig {
    fn methods_sorted(&self) -> Vec<Method> {
        let mut m = self.method.methods();
        m.sort();
        m
    }
}

/// Runs every grid cell and replicate. Records come back sorted by
/// `(n, K, method, replicate)` whatever order the workers finish in.
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let tasks: Vec<(usize, usize, usize)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| cfg.k_list.iter().flat_map(move |&k| (0..cfg.replicates).map(move |r| (n, k, r))))
        .collect();
    let results: Vec<Result<Vec<ExperimentRecord>>> =
        tasks.par_iter().map(|&(n, k, r)| run_replicate(cfg, n, k, r)).collect();
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    records.sort_by_key(|r| (r.n, r.k, r.method, r.replicate));
    Ok(records)
}

pub fn write_records_csv(records: &[ExperimentRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record([
            "n",
            "K",
            "method",
            "replicate",
            "seed",
            "miscluster_count",
            "miscluster_rate",
            "ari",
            "rmse_blockwise",
            "rmse_labelfree",
            "wall_ms",
            "flags",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(input: impl std::io::Read) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Median and spread of one metric over the replicates of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

/// Linear-interpolation quantile of sorted data (Hyndman–Fan type 7).
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Spread {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Spread> {
        let mut v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
        Some(Spread {
            count: v.len(),
            median: quantile(&v, 0.5),
            q1,
            q3,
            iqr: q3 - q1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub method: Method,
    pub replicates: usize,
    pub failures: usize,
    pub miscluster_count: Option<Spread>,
    pub miscluster_rate: Option<Spread>,
    pub ari: Option<Spread>,
    pub rmse_blockwise: Option<Spread>,
    pub rmse_labelfree: Option<Spread>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub cells: Vec<CellSummary>,
}

/// Aggregates per `(n, K, method)` over the non-missing values of each metric.
pub fn summarize(cfg: &ExperimentConfig, records: &[ExperimentRecord]) -> Summary {
    let mut groups: BTreeMap<(usize, usize, Method), Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.n, r.k, r.method)).or_default().push(r);
    }
    let cells = groups
        .into_iter()
        .map(|((n, k, method), rs)| {
            let spread = |f: &dyn Fn(&ExperimentRecord) -> Option<f64>| Spread::of(rs.iter().filter_map(|r| f(r)));
            CellSummary {
                n,
                k,
                method,
                replicates: rs.len(),
                failures: rs.iter().filter(|r| r.failed()).count(),
                miscluster_count: spread(&|r| r.miscluster_count.map(|c| c as f64)),
                miscluster_rate: spread(&|r| r.miscluster_rate),
                ari: spread(&|r| r.ari),
                rmse_blockwise: spread(&|r| r.rmse_blockwise),
                rmse_labelfree: spread(&|r| r.rmse_labelfree),
            }
        })
        .collect();
    Summary {
        config: cfg.clone(),
        cells,
    }
}

pub fn write_summary_json(summary: &Summary, mut out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, summary)?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            n_list: vec![16, 40],
            k_list: vec![2],
            replicates: 2,
            seed: 99,
            ..Default::default()
        }
    }

    #[test]
    fn one_record_per_cell() {
        let cfg = ExperimentConfig {
            n_list: vec![9, 12],
            k_list: vec![2, 3],
            replicates: 1,
            seed: 1,
            ..Default::default()
        };
        let records = run_simulation(&cfg).unwrap();
        assert_eq!(records.len(), 4);
    }

    #[test]
    fn sorted_and_deterministic() {
        let cfg = ExperimentConfig {
            method: MethodChoice::Both,
            ..tiny()
        };
        let a = run_simulation(&cfg).unwrap();
        let b = run_simulation(&cfg).unwrap();
        assert_eq!(a, b);
        let keys: Vec<_> = a.iter().map(|r| (r.n, r.k, r.method, r.replicate)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(a.len(), 8);
        assert!(a.iter().all(|r| r.wall_ms.is_none()));
    }

    #[test]
    fn csv_header_and_round_trip() {
        let records = run_simulation(&tiny()).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "n,K,method,replicate,seed,miscluster_count,miscluster_rate,ari,rmse_blockwise,rmse_labelfree,wall_ms,flags\n"
        ));
        assert_eq!(read_records_csv(buf.as_slice()).unwrap(), records);
        let mut empty = Vec::new();
        write_records_csv(&[], &mut empty).unwrap();
        assert!(String::from_utf8(empty).unwrap().starts_with("n,K,method"));
    }

    #[test]
    fn empty_community_is_flagged() {
        // imbalanced weights with K = 4 at n = 16 leave community 4 empty for some seeds
        let cfg = ExperimentConfig {
            n_list: vec![16],
            k_list: vec![4],
            balance: Balance::Imbalanced,
            replicates: 40,
            seed: 3,
            ..Default::default()
        };
        let records = run_simulation(&cfg).unwrap();
        assert_eq!(records.len(), 40);
        let flagged: Vec<_> = records.iter().filter(|r| r.flags.contains("empty-community")).collect();
        assert!(!flagged.is_empty());
        assert!(flagged.iter().all(|r| r.failed() && r.rmse_blockwise.is_none()));
    }

    #[test]
    fn summary_matches_records() {
        let cfg = tiny();
        let records = run_simulation(&cfg).unwrap();
        let s = summarize(&cfg, &records);
        assert_eq!(s.cells.len(), 2);
        for cell in &s.cells {
            let mut counts: Vec<f64> = records
                .iter()
                .filter(|r| r.n == cell.n)
                .filter_map(|r| r.miscluster_count.map(|c| c as f64))
                .collect();
            counts.sort_by(f64::total_cmp);
            assert_eq!(cell.miscluster_count.unwrap().median, quantile(&counts, 0.5));
        }
    }

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn validation() {
        let bad = [
            ExperimentConfig {
                replicates: 0,
                ..tiny()
            },
            ExperimentConfig {
                n_list: vec![3],
                ..tiny()
            },
            ExperimentConfig {
                within_beta: (0.0, 1.0),
                ..tiny()
            },
            ExperimentConfig {
                sparsity: 0.0,
                ..tiny()
            },
        ];
        for cfg in bad {
            assert!(matches!(run_simulation(&cfg), Err(Error::InvalidArgument(_))));
        }
    }
}
