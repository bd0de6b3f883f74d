use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::community::{
    default_theta, osc_affinity, partition_affinity, ssc_affinity, AffinityMatrix, ClusteringResult, LassoProblem,
    PartitionOptions,
};
use crate::error::{Error, Result, Stage};
use crate::graph_model::signature_for;
use crate::metrics::{community_error, ErrorReport};
use crate::spectral::{ase, DegenerateSpectrum, SpectralEmbedding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Osc,
    Ssc,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Osc => "osc",
            Method::Ssc => "ssc",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "osc" => Ok(Method::Osc),
            "ssc" | "ssc-ase" => Ok(Method::Ssc),
            _ => Err(Error::invalid(format!("unknown method {s:?} (expected osc or ssc)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    pub method: Method,
    /// SSC penalty; `None` means [`default_theta`] of the vertex count.
    pub theta: Option<f64>,
    pub lasso_tol: f64,
    pub lasso_max_iter: usize,
    pub partition: PartitionOptions,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            method: Method::Osc,
            theta: None,
            lasso_tol: 1e-8,
            lasso_max_iter: 20_000,
            partition: PartitionOptions::default(),
        }
    }
}

impl DetectOptions {
    pub fn new(method: Method) -> Self {
        DetectOptions {
            method,
            ..Default::default()
        }
    }

    pub fn lasso_problem(&self, n: usize) -> Result<LassoProblem> {
        Ok(LassoProblem::new(self.theta.unwrap_or_else(|| default_theta(n)))?
            .with_tol(self.lasso_tol)?
            .with_max_iter(self.lasso_max_iter))
    }
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub clustering: ClusteringResult,
    pub affinity: AffinityMatrix,
    pub degenerate_spectrum: Option<DegenerateSpectrum>,
    /// Present when true labels were supplied.
    pub report: Option<ErrorReport>,
}

/// Embedding, affinity and partition in one call. Errors carry the stage
/// they came from.
pub fn run_detect(a: ArrayView2<'_, f64>, k: usize, opts: &DetectOptions, truth: Option<&[usize]>) -> Result<Detection> {
    let sig = signature_for(k)?;
    let emb = ase(a, sig).map_err(|e| e.at_stage(Stage::Embedding))?;
    detect_embedded(&emb, k, opts, truth)
}

/// Affinity and partition from an existing embedding with the signature of
/// `k` communities.
pub fn detect_embedded(
    emb: &SpectralEmbedding,
    k: usize,
    opts: &DetectOptions,
    truth: Option<&[usize]>,
) -> Result<Detection> {
    let n = emb.vectors.nrows();
    if let Some(t) = truth {
        if t.len() != n {
            return Err(Error::invalid(format!("{} labels for {n} vertices", t.len())));
        }
    }
    let affinity = match opts.method {
        Method::Osc => osc_affinity(emb.vectors.view()),
        Method::Ssc => {
            let prob = opts.lasso_problem(n).map_err(|e| e.at_stage(Stage::Affinity))?;
            ssc_affinity(emb.vectors.view(), &prob).map_err(|e| e.at_stage(Stage::Affinity))?
        }
    };
    let clustering = partition_affinity(&affinity, k, &opts.partition).map_err(|e| e.at_stage(Stage::Partition))?;
    let report = truth.map(|t| community_error(&clustering.labels, t)).transpose()?;
    Ok(Detection {
        clustering,
        affinity,
        degenerate_spectrum: emb.degenerate.clone(),
        report,
    })
}

/// `points` penalties spaced evenly in log scale from `min` to `max`.
pub fn theta_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && points >= 1) || (points == 1 && min != max) {
        return Err(Error::invalid(format!("bad theta grid [{min}, {max}] with {points} points")));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let (lo, hi) = (min.ln(), max.ln());
    Ok((0..points)
        .map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaPoint {
    pub theta: f64,
    pub miscluster_count: Option<usize>,
    pub miscluster_rate: Option<f64>,
    pub ari: Option<f64>,
    /// Failure message when detection did not complete.
    pub error: Option<String>,
}

/// SSC error against `truth` for each penalty, sharing one embedding.
pub fn sweep_theta(
    a: ArrayView2<'_, f64>,
    k: usize,
    truth: &[usize],
    thetas: &[f64],
    opts: &DetectOptions,
) -> Result<Vec<ThetaPoint>> {
    let emb = ase(a, signature_for(k)?).map_err(|e| e.at_stage(Stage::Embedding))?;
    thetas
        .iter()
        .map(|&theta| {
            let o = DetectOptions {
                method: Method::Ssc,
                theta: Some(theta),
                ..*opts
            };
            match detect_embedded(&emb, k, &o, Some(truth)) {
                Ok(d) => {
                    let r = d.report.expect("truth supplied");
                    Ok(ThetaPoint {
                        theta,
                        miscluster_count: Some(r.miscluster_count),
                        miscluster_rate: Some(r.miscluster_rate),
                        ari: Some(r.ari),
                        error: None,
                    })
                }
                Err(e) if e.is_numeric() => Ok(ThetaPoint {
                    theta,
                    miscluster_count: None,
                    miscluster_rate: None,
                    ari: None,
                    error: Some(e.to_string()),
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}
