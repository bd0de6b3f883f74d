//! `pabm`: simulate popularity adjusted block models, detect communities and
//! estimate popularities from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "pabm", version, about = "Popularity adjusted block model toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation grid and write records.csv and summary.json.
    Simulate(SimulateArgs),
    /// Detect communities in an edge-list graph.
    Detect(DetectArgs),
    /// Estimate popularity parameters of an edge-list graph.
    Estimate(EstimateArgs),
    /// Error of sparse subspace clustering over a log-spaced penalty grid.
    SweepTheta(SweepArgs),
    /// Threshold a similarity matrix and score detection against class labels.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Osc,
    Ssc,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodChoiceArg {
    Osc,
    Ssc,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum BalanceArg {
    Balanced,
    Imbalanced,
}

#[derive(Clone, Copy, ValueEnum)]
enum PartitionArg {
    Spectral,
    Threshold,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClustererArg {
    Gmm,
    Kmeans,
}

/// Options shared by every command that partitions an affinity matrix.
#[derive(Args, Clone)]
struct PipelineArgs {
    /// SSC penalty [default: 0.05/sqrt(n)].
    #[arg(long)]
    theta: Option<f64>,
    /// Stationarity tolerance of the LASSO solver [default: 1e-8].
    #[arg(long)]
    lasso_tol: Option<f64>,
    /// Coordinate-descent sweep cap per LASSO problem [default: 20000].
    #[arg(long)]
    lasso_max_iter: Option<usize>,
    /// Partitioning of the affinity matrix [default: spectral].
    #[arg(long, value_enum)]
    partition: Option<PartitionArg>,
    /// Affinity cutoff in threshold mode [default: 1e-3 * max affinity].
    #[arg(long)]
    tau: Option<f64>,
    /// Final clustering of the Laplacian eigenmap [default: gmm].
    #[arg(long, value_enum)]
    clusterer: Option<ClustererArg>,
    /// Restarts of the final mixture or k-means fit [default: 10].
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Base seed; every replicate derives its own from it.
    #[arg(long)]
    seed: u64,
    /// JSON experiment config; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Vertex counts, comma separated.
    #[arg(long = "n-list", value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Community counts, comma separated.
    #[arg(long = "k-list", value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    balance: Option<BalanceArg>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodChoiceArg>,
    /// Beta shapes of own-community popularities, as `a,b`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    within_beta: Option<Vec<f64>>,
    /// Beta shapes of other-community popularities, as `a,b`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    between_beta: Option<Vec<f64>>,
    #[arg(long)]
    sparsity: Option<f64>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Clamp the label-free reconstruction to [0, 1].
    #[arg(long)]
    clip: bool,
    /// Record wall-clock time per detection (output is then not reproducible).
    #[arg(long)]
    timing: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list: two whitespace-separated vertex tokens per line.
    #[arg(long)]
    edges: PathBuf,
    /// Remove zero-degree vertices after loading.
    #[arg(long)]
    drop_isolated: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Number of communities.
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Osc)]
    method: MethodArg,
    /// Ground truth `vertex,label` CSV; adds an error report.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Where to write the `vertex,label` CSV (labels 1..K) [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the JSON diagnostics and error report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    Blockwise,
    LabelFree,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Number of communities.
    #[arg(long)]
    k: usize,
    /// Community `vertex,label` CSV; communities are detected when absent.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::Osc)]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Per-vertex popularity CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the estimated edge-probability matrix here.
    #[arg(long)]
    p_hat: Option<PathBuf>,
    /// Reconstruction written to --p-hat.
    #[arg(long, value_enum, default_value_t = RouteArg::Blockwise)]
    route: RouteArg,
    /// Clamp the label-free reconstruction to [0, 1].
    #[arg(long)]
    clip: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Edge list to sweep on; needs --labels. Without it graphs are simulated.
    #[arg(long, requires = "labels")]
    edges: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    drop_isolated: bool,
    /// Number of communities.
    #[arg(long)]
    k: usize,
    /// Vertex count of simulated graphs.
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = BalanceArg::Balanced)]
    balance: BalanceArg,
    #[arg(long, default_value_t = 1e-4)]
    theta_min: f64,
    #[arg(long, default_value_t = 1e-1)]
    theta_max: f64,
    #[arg(long, default_value_t = 10)]
    points: usize,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Dense similarity matrix, one row per line, comma or space separated.
    #[arg(long)]
    similarity: PathBuf,
    /// Class labels, one token per line in matrix row order.
    #[arg(long)]
    labels: PathBuf,
    /// Keep only vertices from this many most frequent classes; also the K of detection.
    #[arg(long, default_value_t = 4)]
    top_classes: usize,
    /// Edge when the symmetrized similarity is at least this value.
    #[arg(long, conflicts_with = "density")]
    threshold: Option<f64>,
    /// Choose the threshold keeping this fraction of vertex pairs [default: 0.1].
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    drop_isolated: bool,
    #[arg(long, value_enum, default_value_t = MethodArg::Osc)]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// JSON report [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Detect(a) => commands::detect(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::SweepTheta(a) => commands::sweep_theta(a),
        Command::Eval(a) => commands::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
