use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use pabm::community::{FinalClusterer, PartitionMode, PartitionOptions};
use pabm::estimation::{estimate_lambdas, reconstruct_p_blockwise, reconstruct_p_labelfree};
use pabm::graph_model::{draw_params, edge_prob_matrix, sample_adjacency, Adjacency, Balance, PopularityPrior};
use pabm::harness::{
    self, density_threshold, load_edgelist, load_labels, read_label_lines, read_matrix, run_detect, run_simulation,
    summarize, theta_grid, threshold_similarity, top_classes, write_labels, write_records_csv, write_summary_json,
    DetectOptions, EdgeList, ExperimentConfig, Labels, Method, MethodChoice,
};
use pabm::rng::replicate_seed;

use super::{
    BalanceArg, ClustererArg, DetectArgs, EstimateArgs, EvalArgs, MethodArg, MethodChoiceArg, PartitionArg,
    PipelineArgs, RouteArg, SimulateArgs, SweepArgs,
};

/// A command line that parsed but asks for something impossible.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// 1 for usage errors, 3 for numerical failures, 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    match err.downcast_ref::<pabm::Error>() {
        Some(e) if e.is_numeric() => 3,
        _ => 2,
    }
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Osc => Method::Osc,
            MethodArg::Ssc => Method::Ssc,
        }
    }
}

impl From<BalanceArg> for Balance {
    fn from(b: BalanceArg) -> Self {
        match b {
            BalanceArg::Balanced => Balance::Balanced,
            BalanceArg::Imbalanced => Balance::Imbalanced,
        }
    }
}

impl From<ClustererArg> for FinalClusterer {
    fn from(c: ClustererArg) -> Self {
        match c {
            ClustererArg::Gmm => FinalClusterer::Gmm,
            ClustererArg::Kmeans => FinalClusterer::KMeans,
        }
    }
}

impl PipelineArgs {
    fn partition_mode(&self, base: PartitionMode) -> Result<PartitionMode> {
        let mode = match self.partition {
            Some(PartitionArg::Spectral) => PartitionMode::Spectral,
            Some(PartitionArg::Threshold) => PartitionMode::Threshold { tau: self.tau },
            None => match base {
                PartitionMode::Threshold { tau } => PartitionMode::Threshold { tau: self.tau.or(tau) },
                spectral => spectral,
            },
        };
        if self.tau.is_some() && mode == PartitionMode::Spectral {
            return Err(usage("--tau only applies with --partition threshold"));
        }
        Ok(mode)
    }

    fn detect_options(&self, method: Method, seed: u64) -> Result<DetectOptions> {
        let base = DetectOptions::default();
        let mut partition = PartitionOptions {
            mode: self.partition_mode(base.partition.mode)?,
            clusterer: self.clusterer.map_or(base.partition.clusterer, Into::into),
            seed,
            ..base.partition
        };
        if let Some(r) = self.restarts {
            partition.gmm.restarts = r;
            partition.kmeans.restarts = r;
        }
        Ok(DetectOptions {
            method,
            theta: self.theta,
            lasso_tol: self.lasso_tol.unwrap_or(base.lasso_tol),
            lasso_max_iter: self.lasso_max_iter.unwrap_or(base.lasso_max_iter),
            partition,
        })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

/// Runs `write` against the file at `path`, or stdout.
fn with_output(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    with_output(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn pair(values: &[f64], flag: &str) -> Result<(f64, f64)> {
    match values {
        [a, b] => Ok((*a, *b)),
        _ => Err(usage(format!("--{flag} takes two numbers a,b"))),
    }
}

fn build_config(args: &SimulateArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            serde_json::from_reader(BufReader::new(file))
                .map_err(pabm::Error::from)
                .with_context(|| format!("bad config {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    cfg.seed = args.seed;
    if let Some(v) = &args.n_list {
        cfg.n_list = v.clone();
    }
    if let Some(v) = &args.k_list {
        cfg.k_list = v.clone();
    }
    if let Some(b) = args.balance {
        cfg.balance = b.into();
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if let Some(m) = args.method {
        cfg.method = match m {
            MethodChoiceArg::Osc => MethodChoice::Osc,
            MethodChoiceArg::Ssc => MethodChoice::Ssc,
            MethodChoiceArg::Both => MethodChoice::Both,
        };
    }
    if let Some(v) = &args.within_beta {
        cfg.within_beta = pair(v, "within-beta")?;
    }
    if let Some(v) = &args.between_beta {
        cfg.between_beta = pair(v, "between-beta")?;
    }
    if let Some(s) = args.sparsity {
        cfg.sparsity = s;
    }
    let p = &args.pipeline;
    if p.theta.is_some() {
        cfg.theta = p.theta;
    }
    if let Some(t) = p.lasso_tol {
        cfg.lasso_tol = t;
    }
    if let Some(m) = p.lasso_max_iter {
        cfg.lasso_max_iter = m;
    }
    cfg.partition = p.partition_mode(cfg.partition)?;
    if let Some(c) = p.clusterer {
        cfg.clusterer = c.into();
    }
    if let Some(r) = p.restarts {
        cfg.gmm.restarts = r;
        cfg.kmeans.restarts = r;
    }
    cfg.clip |= args.clip;
    cfg.timing |= args.timing;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = build_config(&args)?;
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let records = run_simulation(&cfg)?;
    let failures = records.iter().filter(|r| r.failed()).count();
    if failures > 0 {
        log::warn!("{failures} of {} records have no detection result", records.len());
    }
    let mut w = create(&args.out.join("records.csv"))?;
    write_records_csv(&records, &mut w)?;
    w.flush()?;
    let mut w = create(&args.out.join("summary.json"))?;
    write_summary_json(&summarize(&cfg, &records), &mut w)?;
    w.flush()?;
    log::info!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

fn load_graph(path: &Path, drop_isolated: bool) -> Result<EdgeList> {
    let el = load_edgelist(path, drop_isolated)?;
    if el.self_loops > 0 {
        log::warn!("dropped {} self-loops", el.self_loops);
    }
    if el.duplicates > 0 {
        log::info!("collapsed {} duplicate edges", el.duplicates);
    }
    if !el.dropped_isolated.is_empty() {
        log::info!("dropped {} isolated vertices", el.dropped_isolated.len());
    }
    Ok(el)
}

#[derive(Serialize)]
struct DetectReport<'a> {
    vertices: usize,
    edges: usize,
    self_loops: usize,
    duplicate_edges: usize,
    dropped_isolated: usize,
    #[serde(rename = "K")]
    k: usize,
    method: Method,
    diagnostics: &'a pabm::community::Diagnostics,
    degenerate_spectrum: &'a Option<pabm::spectral::DegenerateSpectrum>,
    report: Option<&'a pabm::metrics::ErrorReport>,
    classes: Option<&'a [String]>,
}

pub fn detect(args: DetectArgs) -> Result<()> {
    let el = load_graph(&args.graph.edges, args.graph.drop_isolated)?;
    let truth = args.labels.as_deref().map(|p| load_labels(p, &el.vertices)).transpose()?;
    let opts = args.pipeline.detect_options(args.method.into(), args.seed)?;
    let d = run_detect(
        el.adjacency.matrix().view(),
        args.k,
        &opts,
        truth.as_ref().map(|l| l.ids.as_slice()),
    )?;
    with_output(args.out.as_deref(), |w| Ok(write_labels(&el.vertices, &d.clustering.labels, w)?))?;
    let report = DetectReport {
        vertices: el.vertices.len(),
        edges: el.adjacency.edge_count(),
        self_loops: el.self_loops,
        duplicate_edges: el.duplicates,
        dropped_isolated: el.dropped_isolated.len(),
        k: args.k,
        method: opts.method,
        diagnostics: &d.clustering.diagnostics,
        degenerate_spectrum: &d.degenerate_spectrum,
        report: d.report.as_ref(),
        classes: truth.as_ref().map(|l| l.classes.as_slice()),
    };
    if let Some(r) = &d.report {
        log::info!("miscluster count {}, ARI {:.4}", r.miscluster_count, r.ari);
    }
    match &args.report {
        Some(p) => write_json(Some(p), &report),
        None => Ok(()),
    }
}

fn write_matrix(m: ArrayView2<'_, f64>, w: &mut dyn Write) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in m.rows() {
        out.write_record(row.iter().map(|x| x.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn estimate(args: EstimateArgs) -> Result<()> {
    let el = load_graph(&args.graph.edges, args.graph.drop_isolated)?;
    let a = el.adjacency.matrix().view();
    let labels: Vec<usize> = match &args.labels {
        Some(p) => {
            let l = load_labels(p, &el.vertices)?;
            if l.k() != args.k {
                return Err(usage(format!("--k is {} but the labels file has {} classes", args.k, l.k())));
            }
            l.ids
        }
        None => {
            let opts = args.pipeline.detect_options(args.method.into(), args.seed)?;
            run_detect(a, args.k, &opts, None)?.clustering.labels
        }
    };
    let est = estimate_lambdas(a, &labels, args.k)?;
    if !est.degenerate_blocks().is_empty() {
        log::warn!("blocks without edges: {:?}", est.degenerate_blocks());
    }
    let pop = est.popularity_matrix();
    with_output(args.out.as_deref(), |w| {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["vertex".to_string(), "community".to_string()];
        header.extend((1..=args.k).map(|l| format!("lambda_{l}")));
        out.write_record(&header)?;
        for (i, v) in el.vertices.iter().enumerate() {
            let mut row = vec![v.clone(), (labels[i] + 1).to_string()];
            row.extend(pop.row(i).iter().map(|x| x.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    })?;
    if let Some(path) = &args.p_hat {
        let p_hat = match args.route {
            RouteArg::Blockwise => {
                let mut m = reconstruct_p_blockwise(&est).matrix;
                if args.clip {
                    m.mapv_inplace(|x| x.clamp(0.0, 1.0));
                }
                m
            }
            RouteArg::LabelFree => reconstruct_p_labelfree(a, args.k, args.clip)?.matrix,
        };
        with_output(Some(path), |w| write_matrix(p_hat.view(), w))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    replicate: usize,
    theta: f64,
    miscluster_count: Option<usize>,
    miscluster_rate: Option<f64>,
    ari: Option<f64>,
    error: Option<String>,
}

pub fn sweep_theta(args: SweepArgs) -> Result<()> {
    let thetas = theta_grid(args.theta_min, args.theta_max, args.points).map_err(|e| usage(e.to_string()))?;
    let opts = args.pipeline.detect_options(Method::Ssc, args.seed)?;
    let mut rows = Vec::new();
    let mut push = |replicate: usize, graph: ArrayView2<'_, f64>, truth: &[usize]| -> Result<()> {
        for pt in harness::sweep_theta(graph, args.k, truth, &thetas, &opts)? {
            rows.push(SweepRow {
                replicate,
                theta: pt.theta,
                miscluster_count: pt.miscluster_count,
                miscluster_rate: pt.miscluster_rate,
                ari: pt.ari,
                error: pt.error,
            });
        }
        Ok(())
    };
    match (&args.edges, &args.labels) {
        (Some(edges), Some(labels)) => {
            let el = load_graph(edges, args.drop_isolated)?;
            let truth = load_labels(labels, &el.vertices)?;
            push(0, el.adjacency.matrix().view(), &truth.ids)?;
        }
        _ => {
            if args.n < args.k * args.k || args.replicates == 0 {
                return Err(usage(format!(
                    "need n >= K² and at least one replicate (n = {}, K = {})",
                    args.n, args.k
                )));
            }
            let prior = PopularityPrior {
                balance: args.balance.into(),
                ..PopularityPrior::default()
            };
            for r in 0..args.replicates {
                let seed = replicate_seed(args.seed, args.n, args.k, r);
                let params = draw_params(args.n, args.k, &prior, seed)?;
                if params.community_sizes().contains(&0) {
                    log::warn!("replicate {r} has an empty community; skipped");
                    continue;
                }
                let a = sample_adjacency(&edge_prob_matrix(&params), seed);
                push(r, a.matrix().view(), params.labels())?;
            }
        }
    }
    with_output(args.out.as_deref(), |w| {
        let mut out = csv::Writer::from_writer(w);
        for row in &rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    })
}

#[derive(Serialize)]
struct EvalReport {
    vertices: usize,
    edges: usize,
    threshold: f64,
    #[serde(rename = "K")]
    k: usize,
    classes: Vec<String>,
    dropped_isolated: usize,
    method: Method,
    miscluster_count: usize,
    miscluster_rate: f64,
    ari: f64,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let src = args.similarity.display().to_string();
    let file = File::open(&args.similarity).with_context(|| format!("cannot open {src}"))?;
    let s = read_matrix(BufReader::new(file), &src)?;
    let file = File::open(&args.labels).with_context(|| format!("cannot open {}", args.labels.display()))?;
    let tokens = read_label_lines(BufReader::new(file))?;
    if s.nrows() != s.ncols() || tokens.len() != s.nrows() {
        return Err(pabm::Error::InvalidArgument(format!(
            "similarity matrix is {}x{} with {} labels",
            s.nrows(),
            s.ncols(),
            tokens.len()
        ))
        .into());
    }
    if args.top_classes == 0 {
        return Err(usage("--top-classes must be at least 1"));
    }
    let all = Labels::from_tokens(&tokens);
    let keep = top_classes(&all.ids, args.top_classes);
    let sub = Array2::from_shape_fn((keep.len(), keep.len()), |(i, j)| s[[keep[i], keep[j]]]);
    let threshold = match args.threshold {
        Some(t) => t,
        None => density_threshold(sub.view(), args.density.unwrap_or(0.1)).map_err(|e| usage(e.to_string()))?,
    };
    let mut adjacency = threshold_similarity(sub.view(), threshold)?;
    let mut kept_tokens: Vec<&str> = keep.iter().map(|&i| tokens[i].as_str()).collect();
    let mut dropped = 0;
    if args.drop_isolated {
        let active: Vec<usize> = adjacency
            .degrees()
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0)
            .map(|(i, _)| i)
            .collect();
        dropped = kept_tokens.len() - active.len();
        let m = adjacency.matrix();
        adjacency = Adjacency::from_matrix(Array2::from_shape_fn((active.len(), active.len()), |(i, j)| {
            m[[active[i], active[j]]]
        }))?;
        kept_tokens = active.iter().map(|&i| kept_tokens[i]).collect();
    }
    let truth = Labels::from_tokens(&kept_tokens);
    let opts = args.pipeline.detect_options(args.method.into(), args.seed)?;
    let d = run_detect(adjacency.matrix().view(), truth.k(), &opts, Some(&truth.ids))?;
    let r = d.report.expect("truth supplied");
    write_json(
        args.out.as_deref(),
        &EvalReport {
            vertices: adjacency.n(),
            edges: adjacency.edge_count(),
            threshold,
            k: truth.k(),
            classes: truth.classes,
            dropped_isolated: dropped,
            method: opts.method,
            miscluster_count: r.miscluster_count,
            miscluster_rate: r.miscluster_rate,
            ari: r.ari,
        },
    )
}
