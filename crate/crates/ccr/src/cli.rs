//! Command-line orchestration: task generation, ground truth, response
//! collection, evaluation, visualization, and numeric simulations.
//!
//! Each task gets one run directory (keyed by its id) holding every
//! artifact of the pipeline — `task.json`, `corpus.jsonl`,
//! `responses.jsonl`, `truth.json`, `report.json`, `estimates.csv`, a
//! `plots/` bundle, `cct.dot`, and an append-only `manifest.json` of
//! content hashes. Most flags can also come from a JSON config file
//! (`--config`); explicit flags win over file values, which win over
//! built-in defaults.
//!
//! Failures print a single machine-readable JSON object on stderr and
//! exit nonzero: 2 for usage/configuration problems, 3 for data problems
//! (missing or inconsistent artifacts), 4 for backend failures.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::estimand::{linear_ate_paths, linear_ate_regress, EstimandError};
use crate::evaluate::{compute_truth, run_evaluation, EvalConfig, EvalError};
use crate::fixtures;
use crate::graph::GraphError;
use crate::reasoner::{
    run_batch, Extractor, FlipPolicy, NoisyOracle, OracleReasoner, ReasonerError, RunOptions,
    WrongModelOracle,
};
use crate::remote::{EndpointConfig, RemoteError, RemoteReasoner};
use crate::report::{
    export_cct_dot, export_plot_data, read_report, write_estimates_csv, write_report,
    ReportError, RunManifest,
};
use crate::scm::ScmError;
use crate::task::{
    gen_corpus, gen_task, read_corpus, write_corpus, BccShape, GenConfig, TaskError, TaskSpec,
    Theme,
};

// ── Errors and exit codes ───────────────────────────────────────────────────

/// CLI failure, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration — exit 2.
    Usage(String),
    /// A backend (remote endpoint, extraction fallback) failed — exit 3.
    Transport(String),
    /// Missing, malformed, or inconsistent data — exit 4.
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Transport(_) => 3,
            CliError::Data(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "validation",
            CliError::Transport(_) => "transport",
            CliError::Data(_) => "data",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Transport(m) | CliError::Data(m) => m,
        }
    }

    /// The machine-readable form printed to stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "code": self.exit_code(),
                "message": self.message(),
            }
        })
        .to_string()
    }
}

impl From<TaskError> for CliError {
    fn from(e: TaskError) -> Self {
        match e {
            TaskError::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ReasonerError> for CliError {
    fn from(e: ReasonerError) -> Self {
        match e {
            ReasonerError::Backend(_) | ReasonerError::Fallback(_) => {
                CliError::Transport(e.to_string())
            }
            ReasonerError::ReplicateBudget(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<RemoteError> for CliError {
    fn from(e: RemoteError) -> Self {
        match e {
            RemoteError::MissingCredential { .. } => CliError::Usage(e.to_string()),
            other => CliError::Transport(other.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ScmError> for CliError {
    fn from(e: ScmError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EstimandError> for CliError {
    fn from(e: EstimandError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

// ── Command definitions ─────────────────────────────────────────────────────

#[derive(Debug, Parser)]
#[command(
    name = "ccr",
    version,
    about = "Evaluate compositional causal reasoning over cut-point decompositions"
)]
pub struct Cli {
    /// JSON config file; explicit flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a task and its query corpus into a run directory.
    Generate(GenerateArgs),
    /// Compute exact estimands for a task's full quantity plan.
    Truth(TruthArgs),
    /// Collect reasoner responses for a corpus into the response store.
    Run(RunArgs),
    /// Score a response store: subsampled estimates, validity, consistency.
    Evaluate(EvaluateArgs),
    /// Render the cut-point tree with validity styling as DOT.
    Viz(VizArgs),
    /// Numeric reproductions that need no reasoner.
    #[command(subcommand)]
    Simulate(SimulateCmd),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ShapeArg {
    Cycle,
    Wheel,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ThemeArg {
    Candyparty,
    Flowergarden,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReasonerArg {
    /// Answer from the task's own mechanisms — the known-good reference.
    Oracle,
    /// Answer from a systematically biased copy of the task.
    WrongModel,
    /// Answer from the oracle with structured response flips.
    Noisy,
    /// Query a chat-completions endpoint.
    Remote,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NoiseArg {
    /// Flip answers on pairs with at least two mediators.
    Mediator,
    /// Flip probability grows with each mediator.
    Distance,
    /// Flip every pair with one probability.
    Uniform,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Pinned fixture name instead of random generation.
    #[arg(long, conflicts_with_all = ["bccs", "nodes_per_bcc", "bcc_type", "theme", "and_fraction"])]
    pub fixture: Option<String>,
    /// Number of biconnected blocks.
    #[arg(long)]
    pub bccs: Option<usize>,
    /// Nodes per block, cut points included.
    #[arg(long)]
    pub nodes_per_bcc: Option<usize>,
    /// Block shape.
    #[arg(long, value_enum)]
    pub bcc_type: Option<ShapeArg>,
    /// Story theme.
    #[arg(long, value_enum)]
    pub theme: Option<ThemeArg>,
    /// Probability that a multi-parent node uses AND.
    #[arg(long)]
    pub and_fraction: Option<f64>,
    /// Generation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exogenous samples per pair in the corpus.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Root directory for run directories.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TruthArgs {
    /// Run directory holding task.json.
    #[arg(long, required_unless_present = "task")]
    pub dir: Option<PathBuf>,
    /// Explicit task file (overrides --dir).
    #[arg(long)]
    pub task: Option<PathBuf>,
    /// Output file; defaults to truth.json next to the task.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run directory holding task.json and corpus.jsonl.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, value_enum)]
    pub reasoner: Option<ReasonerArg>,
    /// Replicates per query.
    #[arg(long)]
    pub replicates: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Continue an existing response store.
    #[arg(long)]
    pub resume: bool,
    /// Additive noise shift for the wrong-model reasoner.
    #[arg(long, allow_hyphen_values = true)]
    pub bias: Option<f64>,
    /// Flip structure for the noisy reasoner.
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    /// Flip probability for uniform noise.
    #[arg(long)]
    pub flip_p: Option<f64>,
    /// Chat-completions base URL for the remote reasoner.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name for the remote reasoner.
    #[arg(long)]
    pub model: Option<String>,
    /// Sampling temperature for the remote reasoner.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Completion token budget for the remote reasoner.
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Environment variable naming the bearer token.
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// Wrap each query in the worked demonstration exchanges.
    #[arg(long)]
    pub cot: bool,
    /// Resolve answers the rule extractor cannot read with a second
    /// remote call (remote reasoner only).
    #[arg(long)]
    pub extract_fallback: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Run directory holding task.json, corpus.jsonl, responses.jsonl.
    #[arg(long)]
    pub dir: PathBuf,
    /// Subsample rounds per quantity.
    #[arg(long)]
    pub subsamples: Option<usize>,
    /// Relative-error tolerance.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Validity fraction threshold.
    #[arg(long)]
    pub validity: Option<f64>,
    /// Near-validity fraction threshold.
    #[arg(long)]
    pub near: Option<f64>,
    /// Classification floor for exact truths.
    #[arg(long)]
    pub min_truth: Option<f64>,
    /// Tolerated UNKNOWN verdict fraction.
    #[arg(long)]
    pub max_unknown: Option<f64>,
    /// Seed for subsample draws.
    #[arg(long)]
    pub eval_seed: Option<u64>,
    /// Skip ground truth: consistency-only evaluation.
    #[arg(long)]
    pub no_truth: bool,
    /// Skip the plots/ CSV bundle.
    #[arg(long)]
    pub no_plots: bool,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    /// Run directory holding report.json.
    #[arg(long, required_unless_present = "report")]
    pub dir: Option<PathBuf>,
    /// Explicit report file (overrides --dir).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Output file; defaults to cct.dot next to the report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCmd {
    /// Regression convergence on the seven-node linear walkthrough.
    LinearAte(LinearAteArgs),
    /// Sampling convergence of path compositions on a pinned task.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Args)]
pub struct LinearAteArgs {
    /// Include the edge that bypasses the cut point.
    #[arg(long)]
    pub edge_x5x6: bool,
    /// Sample-size grid, comma separated.
    #[arg(long, default_value = "100,1000,10000,100000")]
    pub sizes: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV.
    #[arg(long, default_value = "linear_ate.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    /// Pinned task fixture to sample.
    #[arg(long, default_value = "candyparty-eight")]
    pub fixture: String,
    /// Seeds to sweep.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// Sample-size grid, comma separated.
    #[arg(long, default_value = "1000,100000")]
    pub sizes: String,
    /// Output CSV.
    #[arg(long, default_value = "convergence.csv")]
    pub out: PathBuf,
}

// ── Config file ─────────────────────────────────────────────────────────────

/// JSON mirror of the flag surface; any section and any field may be
/// omitted.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct FileConfig {
    #[serde(default)]
    pub generate: GenerateFile,
    #[serde(default)]
    pub run: RunFile,
    #[serde(default)]
    pub evaluate: EvaluateFile,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct GenerateFile {
    pub fixture: Option<String>,
    pub bccs: Option<usize>,
    pub nodes_per_bcc: Option<usize>,
    pub bcc_type: Option<BccShape>,
    pub theme: Option<Theme>,
    pub and_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct RunFile {
    pub reasoner: Option<String>,
    pub replicates: Option<u64>,
    pub concurrency: Option<usize>,
    pub bias: Option<f64>,
    pub noise: Option<String>,
    pub flip_p: Option<f64>,
    /// Endpoint settings for the remote reasoner; the credential itself
    /// always comes from the named environment variable.
    pub endpoint: Option<EndpointConfig>,
    pub cot: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct EvaluateFile {
    pub subsamples: Option<usize>,
    pub delta: Option<f64>,
    pub validity: Option<f64>,
    pub near: Option<f64>,
    pub min_truth: Option<f64>,
    pub max_unknown: Option<f64>,
    pub seed: Option<u64>,
    pub use_truth: Option<bool>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
        }
    }
}

// ── Entry points ────────────────────────────────────────────────────────────

/// Parse the process arguments, run, and report: the whole CLI. Returns
/// the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

/// Run one parsed command.
pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = load_file_config(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(args) => cmd_generate(args, &file.generate),
        Command::Truth(args) => cmd_truth(args),
        Command::Run(args) => cmd_run(args, &file.run),
        Command::Evaluate(args) => cmd_evaluate(args, &file.evaluate),
        Command::Viz(args) => cmd_viz(args),
        Command::Simulate(SimulateCmd::LinearAte(args)) => cmd_linear_ate(args),
        Command::Simulate(SimulateCmd::Convergence(args)) => cmd_convergence(args),
    }
}

// ── Shared artifact helpers ─────────────────────────────────────────────────

const TASK_FILE: &str = "task.json";
const CORPUS_FILE: &str = "corpus.jsonl";
const RESPONSES_FILE: &str = "responses.jsonl";
const TRUTH_FILE: &str = "truth.json";
const REPORT_FILE: &str = "report.json";
const ESTIMATES_FILE: &str = "estimates.csv";
const MANIFEST_FILE: &str = "manifest.json";
const DOT_FILE: &str = "cct.dot";

fn load_task(path: &Path) -> Result<TaskSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read task {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("task {}: {e}", path.display())))
}

fn save_pretty<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn record_artifacts(
    dir: &Path,
    task_id: &str,
    files: &[(&str, &str)],
) -> Result<(), CliError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut manifest = RunManifest::load_or_new(&manifest_path, task_id)?;
    for &(kind, name) in files {
        manifest.record(dir, kind, name)?;
    }
    manifest.save(&manifest_path)?;
    Ok(())
}

fn parse_sizes(raw: &str) -> Result<Vec<usize>, CliError> {
    let sizes: Result<Vec<usize>, _> =
        raw.split(',').map(|s| s.trim().parse::<usize>()).collect();
    let sizes =
        sizes.map_err(|e| CliError::Usage(format!("bad --sizes value {raw:?}: {e}")))?;
    if sizes.is_empty() || sizes.iter().any(|&n| n == 0) {
        return Err(CliError::Usage(format!("--sizes needs positive entries, got {raw:?}")));
    }
    Ok(sizes)
}

// ── generate ────────────────────────────────────────────────────────────────

fn cmd_generate(args: GenerateArgs, file: &GenerateFile) -> Result<(), CliError> {
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let samples = args.samples.or(file.samples).unwrap_or(1000);
    if samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let fixture = args.fixture.clone().or_else(|| file.fixture.clone());
    let task = match fixture {
        Some(name) => fixtures::fixture_by_name(&name, seed)?,
        None => {
            let defaults = GenConfig::default();
            let cfg = GenConfig {
                n_bccs: args.bccs.or(file.bccs).unwrap_or(defaults.n_bccs),
                nodes_per_bcc: args
                    .nodes_per_bcc
                    .or(file.nodes_per_bcc)
                    .unwrap_or(defaults.nodes_per_bcc),
                shape: args
                    .bcc_type
                    .map(|s| match s {
                        ShapeArg::Cycle => BccShape::Cycle,
                        ShapeArg::Wheel => BccShape::Wheel,
                    })
                    .or(file.bcc_type)
                    .unwrap_or(defaults.shape),
                theme: args
                    .theme
                    .map(|t| match t {
                        ThemeArg::Candyparty => Theme::CandyParty,
                        ThemeArg::Flowergarden => Theme::FlowerGarden,
                    })
                    .or(file.theme)
                    .unwrap_or(defaults.theme),
                seed,
                and_fraction: args
                    .and_fraction
                    .or(file.and_fraction)
                    .unwrap_or(defaults.and_fraction),
            };
            gen_task(&cfg)?
        }
    };
    let corpus = gen_corpus(&task, samples, task.seed())?;

    let root = args.out.or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("runs"));
    let dir = root.join(task.id());
    std::fs::create_dir_all(&dir)?;
    save_pretty(&task, &dir.join(TASK_FILE))?;
    write_corpus(&dir.join(CORPUS_FILE), &corpus)?;
    record_artifacts(&dir, task.id(), &[("task", TASK_FILE), ("corpus", CORPUS_FILE)])?;

    println!("task {}", task.id());
    println!("wrote {}", dir.join(TASK_FILE).display());
    println!("wrote {} ({} queries)", dir.join(CORPUS_FILE).display(), corpus.len());
    Ok(())
}

// ── truth ───────────────────────────────────────────────────────────────────

fn cmd_truth(args: TruthArgs) -> Result<(), CliError> {
    let task_path = match (&args.task, &args.dir) {
        (Some(task), _) => task.clone(),
        (None, Some(dir)) => dir.join(TASK_FILE),
        (None, None) => return Err(CliError::Usage("pass --dir or --task".into())),
    };
    let task = load_task(&task_path)?;
    let truth = compute_truth(&task)?;
    let out = args.out.unwrap_or_else(|| {
        task_path.parent().unwrap_or(Path::new(".")).join(TRUTH_FILE)
    });
    save_pretty(&truth, &out)?;
    if let Some(dir) = &args.dir {
        record_artifacts(dir, task.id(), &[("truth", TRUTH_FILE)])?;
    }

    println!("task {}", task.id());
    println!(
        "global PNS {:.6}; {} pairs, {} paths, commutation residual {:.3e}",
        truth.pairs[0].pns,
        truth.pairs.len(),
        truth.paths.len(),
        truth.commutation_residual
    );
    println!("wrote {}", out.display());
    Ok(())
}

// ── run ─────────────────────────────────────────────────────────────────────

fn endpoint_config(args: &RunArgs, file: &RunFile) -> Result<EndpointConfig, CliError> {
    let mut cfg = match (&args.endpoint, &file.endpoint) {
        (Some(url), Some(base)) => {
            let mut cfg = base.clone();
            cfg.base_url = url.clone();
            cfg
        }
        (Some(url), None) => {
            let model = args.model.clone().ok_or_else(|| {
                CliError::Usage("remote reasoner needs --model (or a config endpoint)".into())
            })?;
            EndpointConfig::new(url, model)
        }
        (None, Some(base)) => base.clone(),
        (None, None) => {
            return Err(CliError::Usage(
                "remote reasoner needs --endpoint (or a config endpoint)".into(),
            ))
        }
    };
    if let Some(model) = &args.model {
        cfg.model = model.clone();
    }
    if let Some(t) = args.temperature {
        cfg.temperature = t;
    }
    if let Some(m) = args.max_tokens {
        cfg.max_tokens = m;
    }
    if let Some(var) = &args.api_key_env {
        cfg.api_key_env = var.clone();
    }
    Ok(cfg)
}

fn flip_policy(args: &RunArgs, file: &RunFile) -> Result<FlipPolicy, CliError> {
    let noise = match args.noise {
        Some(NoiseArg::Mediator) => "mediator".to_string(),
        Some(NoiseArg::Distance) => "distance".to_string(),
        Some(NoiseArg::Uniform) => "uniform".to_string(),
        None => file.noise.clone().unwrap_or_else(|| "mediator".into()),
    };
    match noise.as_str() {
        "mediator" => Ok(fixtures::mediator_noise_policy()),
        "distance" => Ok(fixtures::distance_noise_policy()),
        "uniform" => {
            let p = args.flip_p.or(file.flip_p).unwrap_or(0.15);
            if !(0.0..=1.0).contains(&p) {
                return Err(CliError::Usage(format!("--flip-p {p} outside [0, 1]")));
            }
            Ok(FlipPolicy::Uniform { p })
        }
        other => Err(CliError::Usage(format!(
            "unknown noise policy {other:?}; expected mediator, distance, or uniform"
        ))),
    }
}

fn cmd_run(args: RunArgs, file: &RunFile) -> Result<(), CliError> {
    let dir = args.dir.clone();
    let task = load_task(&dir.join(TASK_FILE))?;
    let corpus = read_corpus(&dir.join(CORPUS_FILE))?;
    let store = dir.join(RESPONSES_FILE);
    let opts = RunOptions {
        replicates: args.replicates.or(file.replicates).unwrap_or(5),
        concurrency: args.concurrency.or(file.concurrency).unwrap_or(1),
        resume: args.resume,
    };

    let kind = match args.reasoner {
        Some(kind) => kind,
        None => match file.reasoner.as_deref() {
            Some("oracle") | None => ReasonerArg::Oracle,
            Some("wrong-model") => ReasonerArg::WrongModel,
            Some("noisy") => ReasonerArg::Noisy,
            Some("remote") => ReasonerArg::Remote,
            Some(other) => {
                return Err(CliError::Usage(format!("unknown reasoner {other:?} in config")))
            }
        },
    };

    let extractor = Extractor::rules_only();
    let stats = match kind {
        ReasonerArg::Oracle => {
            let reasoner = OracleReasoner::new(&task);
            run_batch(&corpus, &reasoner, &extractor, &store, &opts)?
        }
        ReasonerArg::WrongModel => {
            let bias = args.bias.or(file.bias).unwrap_or(WrongModelOracle::DEFAULT_BIAS);
            let reasoner = WrongModelOracle::new(&task, bias)?;
            run_batch(&corpus, &reasoner, &extractor, &store, &opts)?
        }
        ReasonerArg::Noisy => {
            let reasoner = NoisyOracle::new(&task, flip_policy(&args, file)?)?;
            run_batch(&corpus, &reasoner, &extractor, &store, &opts)?
        }
        ReasonerArg::Remote => {
            let cfg = endpoint_config(&args, file)?;
            let cot = if args.cot { true } else { file.cot.unwrap_or(false) };
            let exemplars = if cot { fixtures::cot_exemplars() } else { Vec::new() };
            let reasoner = RemoteReasoner::new(cfg.clone(), exemplars)?;
            if args.extract_fallback {
                let fallback = RemoteReasoner::new(cfg, Vec::new())?;
                let extractor = Extractor::with_fallback(Box::new(move |prompt: &str| {
                    fallback.complete(prompt).map(|(text, _)| text).map_err(|e| e.to_string())
                }));
                run_batch(&corpus, &reasoner, &extractor, &store, &opts)?
            } else {
                run_batch(&corpus, &reasoner, &extractor, &store, &opts)?
            }
        }
    };
    record_artifacts(&dir, task.id(), &[("responses", RESPONSES_FILE)])?;

    println!("task {}", task.id());
    println!(
        "responses {} requested, {} answered, {} resumed, {} unknown",
        stats.requested, stats.answered, stats.resumed, stats.unknown
    );
    println!("wrote {}", store.display());
    Ok(())
}

// ── evaluate ────────────────────────────────────────────────────────────────

fn cmd_evaluate(args: EvaluateArgs, file: &EvaluateFile) -> Result<(), CliError> {
    let dir = args.dir.clone();
    let task = load_task(&dir.join(TASK_FILE))?;
    // Refuse to score artifacts that were edited since they were recorded.
    let manifest_path = dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        RunManifest::load(&manifest_path)?.verify(&dir)?;
    }
    let corpus = read_corpus(&dir.join(CORPUS_FILE))?;
    let records = crate::reasoner::read_responses(&dir.join(RESPONSES_FILE))?;

    let defaults = EvalConfig::default();
    let cfg = EvalConfig {
        n_subsamples: args.subsamples.or(file.subsamples).unwrap_or(defaults.n_subsamples),
        delta: args.delta.or(file.delta).unwrap_or(defaults.delta),
        validity_threshold: args
            .validity
            .or(file.validity)
            .unwrap_or(defaults.validity_threshold),
        near_threshold: args.near.or(file.near).unwrap_or(defaults.near_threshold),
        min_truth: args.min_truth.or(file.min_truth).unwrap_or(defaults.min_truth),
        max_unknown: args.max_unknown.or(file.max_unknown).unwrap_or(defaults.max_unknown),
        seed: args.eval_seed.or(file.seed).unwrap_or(defaults.seed),
        use_truth: if args.no_truth { false } else { file.use_truth.unwrap_or(true) },
    };

    let eval = run_evaluation(&task, &corpus, &records, &cfg)?;
    let summary = write_report(&eval, &dir.join(REPORT_FILE))?;
    write_estimates_csv(&eval, &dir.join(ESTIMATES_FILE))?;
    let mut recorded = vec![("report", REPORT_FILE), ("estimates", ESTIMATES_FILE)];
    if !args.no_plots {
        export_plot_data(&eval, &dir.join("plots"))?;
    }
    let mut manifest = RunManifest::load_or_new(&manifest_path, task.id())?;
    manifest.set_config(&cfg)?;
    for (kind, name) in recorded.drain(..) {
        manifest.record(&dir, kind, name)?;
    }
    if !args.no_plots {
        for name in ["scatter.csv", "validity.csv", "mediation.csv", "schema.json"] {
            // Paths in the manifest stay relative to the run directory.
            manifest.record(&dir, "plot", &format!("plots/{name}"))?;
        }
    }
    manifest.save(&manifest_path)?;

    println!("task {}", task.id());
    match summary.label {
        Some(label) => println!(
            "label {} (consistent: {})",
            serde_json::to_string(&label)?.trim_matches('"'),
            summary.consistent
        ),
        None => println!("label none (consistent: {})", summary.consistent),
    }
    for q in &summary.quantities {
        let within = q
            .fraction_within
            .map(|f| format!("{:.1}% within", f * 100.0))
            .unwrap_or_else(|| "no truth".into());
        println!(
            "  {} -> {}: mean {:.4}, {}",
            q.cause, q.effect, q.mean_estimate, within
        );
    }
    println!("wrote {}", dir.join(REPORT_FILE).display());
    println!("wrote {}", dir.join(ESTIMATES_FILE).display());
    Ok(())
}

// ── viz ─────────────────────────────────────────────────────────────────────

fn cmd_viz(args: VizArgs) -> Result<(), CliError> {
    let report_path = match (&args.report, &args.dir) {
        (Some(report), _) => report.clone(),
        (None, Some(dir)) => dir.join(REPORT_FILE),
        (None, None) => return Err(CliError::Usage("pass --dir or --report".into())),
    };
    let report = read_report(&report_path)?;
    let dot = export_cct_dot(&report)?;
    let out = args.out.unwrap_or_else(|| {
        report_path.parent().unwrap_or(Path::new(".")).join(DOT_FILE)
    });
    std::fs::write(&out, &dot)?;
    if let Some(dir) = &args.dir {
        record_artifacts(dir, &report.task_id, &[("dot", DOT_FILE)])?;
    }
    println!("task {}", report.task_id);
    println!("wrote {}", out.display());
    Ok(())
}

// ── simulate ────────────────────────────────────────────────────────────────

fn cmd_linear_ate(args: LinearAteArgs) -> Result<(), CliError> {
    let sizes = parse_sizes(&args.sizes)?;
    let scm = fixtures::linear_seven(args.edge_x5x6);
    let dag = scm.dag();
    let x1 = dag.index_of("X1").expect("pinned node");
    let x3 = dag.index_of("X3").expect("pinned node");
    let x5 = dag.index_of("X5").expect("pinned node");
    let y = dag.index_of("Y").expect("pinned node");
    let adjust: &[usize] = if args.edge_x5x6 { &[x5] } else { &[] };

    let true_x1x3 = linear_ate_paths(&scm, x1, x3);
    let true_x3y = linear_ate_paths(&scm, x3, y);
    let true_x1y = linear_ate_paths(&scm, x1, y);

    let mut w = csv::Writer::from_path(&args.out)?;
    w.write_record([
        "n",
        "ate_x1x3",
        "ate_x3y",
        "ate_x3y_unadjusted",
        "ate_x1y",
        "composition",
        "true_x1x3",
        "true_x3y",
        "true_x1y",
    ])?;
    for (i, &n) in sizes.iter().enumerate() {
        let batch = scm.sample(n, args.seed.wrapping_add(i as u64), None);
        let ate_x1x3 = linear_ate_regress(&batch, x1, x3, &[])?;
        let ate_x3y = linear_ate_regress(&batch, x3, y, adjust)?;
        let ate_x3y_unadjusted = linear_ate_regress(&batch, x3, y, &[])?;
        let ate_x1y = linear_ate_regress(&batch, x1, y, &[])?;
        w.write_record([
            n.to_string(),
            ate_x1x3.to_string(),
            ate_x3y.to_string(),
            ate_x3y_unadjusted.to_string(),
            ate_x1y.to_string(),
            (ate_x1x3 * ate_x3y).to_string(),
            true_x1x3.to_string(),
            true_x3y.to_string(),
            true_x1y.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))?;

    println!(
        "true ATEs: x1->x3 {true_x1x3}, x3->y {true_x3y}, x1->y {true_x1y} (extra edge: {})",
        args.edge_x5x6
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_convergence(args: ConvergenceArgs) -> Result<(), CliError> {
    let sizes = parse_sizes(&args.sizes)?;
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be positive".into()));
    }
    let task = fixtures::fixture_by_name(&args.fixture, 0)?;
    let analysis = task.analysis()?;
    let scm = task.scm();
    let name = |v: usize| task.dag().name(v).to_string();

    let mut w = csv::Writer::from_path(&args.out)?;
    w.write_record(["seed", "n", "path", "estimate"])?;
    for seed in 0..args.seeds {
        for &n in &sizes {
            for path in analysis.cct.paths() {
                let mut product = 1.0f64;
                for (k, &(from, to)) in path.edges.iter().enumerate() {
                    // Independent draws per edge: derive one sub-seed per
                    // (seed, edge slot).
                    let edge_seed =
                        seed.wrapping_mul(1009).wrapping_add(k as u64).wrapping_add(1);
                    product *= scm.sample_pns(from, to, n, edge_seed);
                }
                let label = path
                    .nodes
                    .iter()
                    .map(|&v| name(v))
                    .collect::<Vec<_>>()
                    .join("->");
                w.write_record([
                    seed.to_string(),
                    n.to_string(),
                    label,
                    product.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))?;

    println!(
        "sampled {} paths x {} sizes x {} seeds on {}",
        analysis.cct.paths().len(),
        sizes.len(),
        args.seeds,
        task.id()
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

// ── Tests ───────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_into_the_expected_commands() {
        let cli = Cli::try_parse_from([
            "ccr", "generate", "--fixture", "candyparty-eight", "--seed", "1", "--samples", "50",
        ])
        .unwrap();
        match cli.command {
            Command::Generate(args) => {
                assert_eq!(args.fixture.as_deref(), Some("candyparty-eight"));
                assert_eq!(args.seed, Some(1));
                assert_eq!(args.samples, Some(50));
            }
            other => panic!("unexpected command {other:?}"),
        }

        let cli = Cli::try_parse_from([
            "ccr", "run", "--dir", "runs/t", "--reasoner", "wrong-model", "--bias", "-0.25",
        ])
        .unwrap();
        match cli.command {
            Command::Run(args) => {
                assert!(matches!(args.reasoner, Some(ReasonerArg::WrongModel)));
                assert_eq!(args.bias, Some(-0.25));
            }
            other => panic!("unexpected command {other:?}"),
        }

        let cli =
            Cli::try_parse_from(["ccr", "simulate", "linear-ate", "--edge-x5x6"]).unwrap();
        match cli.command {
            Command::Simulate(SimulateCmd::LinearAte(args)) => assert!(args.edge_x5x6),
            other => panic!("unexpected command {other:?}"),
        }
    }

    #[test]
    fn fixture_conflicts_with_structural_flags() {
        assert!(Cli::try_parse_from([
            "ccr", "generate", "--fixture", "candyparty-eight", "--bccs", "3",
        ])
        .is_err());
    }

    #[test]
    fn errors_map_to_exit_codes_and_json() {
        let usage = CliError::Usage("bad flag".into());
        assert_eq!(usage.exit_code(), 2);
        let transport = CliError::Transport("bad endpoint".into());
        assert_eq!(transport.exit_code(), 3);
        let data = CliError::Data("bad file".into());
        assert_eq!(data.exit_code(), 4);

        let parsed: serde_json::Value = serde_json::from_str(&usage.to_json()).unwrap();
        assert_eq!(parsed["error"]["kind"], "validation");
        assert_eq!(parsed["error"]["code"], 2);
        assert_eq!(parsed["error"]["message"], "bad flag");
    }

    #[test]
    fn sizes_parse_and_reject_garbage() {
        assert_eq!(parse_sizes("100, 1000").unwrap(), vec![100, 1000]);
        assert!(parse_sizes("").is_err());
        assert!(parse_sizes("10,x").is_err());
        assert!(parse_sizes("0").is_err());
    }

    #[test]
    fn config_file_fills_unset_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(
            &path,
            r#"{"generate": {"samples": 25, "seed": 9}, "evaluate": {"subsamples": 11}}"#,
        )
        .unwrap();
        let cfg = load_file_config(Some(&path)).unwrap();
        assert_eq!(cfg.generate.samples, Some(25));
        assert_eq!(cfg.generate.seed, Some(9));
        assert_eq!(cfg.evaluate.subsamples, Some(11));
        assert!(cfg.run.reasoner.is_none());

        assert!(load_file_config(Some(Path::new("/nonexistent/config.json"))).is_err());
    }
}
