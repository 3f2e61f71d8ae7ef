//! Command surface shared by the `misinfo` binary and the test harness.
//!
//! Every command reads its settings from a [`RunConfig`] (defaults, then an
//! optional `--config` JSON file, then flags) and writes plain files: TSV for
//! graphs, JSON lines for traces, JSON for models and reports, CSV for
//! tables and curves.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{
    cmd_detect, cmd_eval, cmd_simulate, cmd_thresholds, cmd_train, split_indices, DetectRecord, EvalReport,
    RuleBreakdown,
};
pub use config::{PolicyKind, RunConfig, SplitPart};

use crate::markov::Topology;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("solver did not converge: {0}")]
    Unconverged(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) | CliError::Parse(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Unconverged(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "misinfo", version, about = "Sequential misinformation detection on social graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate labeled cascades and write the implied graph.
    Simulate(SimulateArgs),
    /// Train the edge classifier and estimate the chain parameters.
    Train(TrainArgs),
    /// Run the detector on one trace.
    Detect(DetectArgs),
    /// Evaluate a policy on a labeled corpus.
    Eval(EvalArgs),
    /// Solve for the optimal stopping thresholds.
    Thresholds(ThresholdArgs),
}

/// Flags shared by all commands. Unset flags fall back to the config file,
/// then to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model document (JSON). Defaults to the reference four-class tables.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory holding edges.tsv, nodes.tsv and traces.jsonl.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Edge list (`u<TAB>v`).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Node features (`id<TAB>f1,...`).
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// Trace file (JSON lines).
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub zclasses: Option<usize>,
    #[arg(long = "ci")]
    pub c_i: Option<f64>,
    #[arg(long = "cii")]
    pub c_ii: Option<f64>,
    #[arg(long = "c")]
    pub c: Option<f64>,
    /// Convergence tolerance of the posterior.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Fraction of events observed.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyKind>,
    #[arg(long)]
    pub max_path_len: Option<usize>,
    #[arg(long)]
    pub max_paths: Option<usize>,
    /// Fail instead of skipping observations no path reaches.
    #[arg(long)]
    pub fail_unreachable: bool,
    /// Give unobserved candidate paths weight 1.
    #[arg(long)]
    pub unit_empty_paths: bool,
    /// Posterior threshold of the convergence rule.
    #[arg(long)]
    pub decision_threshold: Option<f64>,
    /// Target error probabilities for Wald's SPRT boundaries.
    #[arg(long)]
    pub sprt_p: Option<f64>,
    #[arg(long)]
    pub sprt_q: Option<f64>,
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Training fraction of the stratified split.
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of traces.
    #[arg(long)]
    pub n: Option<usize>,
    /// Force every trace to this label (0 genuine, 1 fake).
    #[arg(long)]
    pub label: Option<u8>,
    #[arg(long, value_enum)]
    pub topology: Option<TopologyArg>,
    #[arg(long)]
    pub max_events: Option<usize>,
    #[arg(long)]
    pub branching: Option<f64>,
    /// Source node when cascading over `--graph`.
    #[arg(long)]
    pub source: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TopologyArg {
    Tree,
    Chain,
}

impl From<TopologyArg> for Topology {
    fn from(t: TopologyArg) -> Self {
        match t {
            TopologyArg::Tree => Topology::Tree,
            TopologyArg::Chain => Topology::Chain,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitPart,
    /// Add-one smoothing of the estimated tables.
    #[arg(long)]
    pub smoothing: bool,
    /// Standardize features before training.
    #[arg(long)]
    pub standardize: bool,
    /// Use the followee features in both halves of the trace feature.
    #[arg(long)]
    pub literal_features: bool,
    /// Estimate the tables from classifier-assigned classes.
    #[arg(long)]
    pub reclassify: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Which trace of the file to observe.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitPart,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

impl CommonArgs {
    /// Defaults, then the config file, then flags.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_json(&read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($flag:expr, $field:expr) => {
                if let Some(v) = $flag {
                    $field = v;
                }
            };
        }
        set!(self.seed, cfg.seed);
        set!(self.zclasses, cfg.zclasses);
        set!(self.c_i, cfg.costs.c_i);
        set!(self.c_ii, cfg.costs.c_ii);
        set!(self.c, cfg.costs.c);
        set!(self.epsilon, cfg.epsilon);
        set!(self.rho, cfg.keep_fraction);
        set!(self.policy, cfg.policy);
        set!(self.max_path_len, cfg.paths.max_path_length);
        set!(self.max_paths, cfg.paths.max_paths);
        set!(self.sprt_p, cfg.sprt_targets[0]);
        set!(self.sprt_q, cfg.sprt_targets[1]);
        set!(self.grid_step, cfg.solver.grid_step);
        set!(self.max_sweeps, cfg.solver.max_sweeps);
        set!(self.tol, cfg.solver.tolerance);
        if let Some(t) = self.decision_threshold {
            cfg.decision_threshold = Some(t);
        }
        if let Some(f) = self.train_fraction {
            cfg.split = [f, 1.0 - f];
        }
        if self.fail_unreachable {
            cfg.unreachable = crate::inference::UnreachablePolicy::Fail;
        }
        if self.unit_empty_paths {
            cfg.empty_path_weight = crate::inference::EmptyPathWeight::Unit;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn data_file(&self, explicit: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
        explicit.clone().or_else(|| self.data.as_ref().map(|d| d.join(name)))
    }

    pub fn graph_path(&self) -> Option<PathBuf> {
        self.data_file(&self.graph, "edges.tsv")
    }

    pub fn nodes_path(&self) -> Option<PathBuf> {
        self.data_file(&self.nodes, "nodes.tsv")
    }

    pub fn traces_path(&self) -> Option<PathBuf> {
        self.data_file(&self.traces, "traces.jsonl")
    }
}

pub(crate) fn read_to_string(p: &std::path::Path) -> Result<String, CliError> {
    std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => with_jobs(a.common.jobs, || cmd_simulate(&a).map(|_| ()))?,
        Command::Train(a) => with_jobs(a.common.jobs, || cmd_train(&a).map(|_| ()))?,
        Command::Detect(a) => with_jobs(a.common.jobs, || {
            cmd_detect(&a).map(|r| println!("{}", serde_json::to_string(&r).expect("record serializes")))
        })?,
        Command::Eval(a) => with_jobs(a.common.jobs, || {
            cmd_eval(&a).map(|r| {
                println!(
                    "accuracy={} fp={} fn={} mean_detection_events={} n={}",
                    r.accuracy, r.fp, r.fn_rate, r.mean_detection_events, r.n
                )
            })
        })?,
        Command::Thresholds(a) => with_jobs(a.common.jobs, || cmd_thresholds(&a).map(|_| ()))?,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("misinfo: {e}");
            e.exit_code()
        }
    }
}
