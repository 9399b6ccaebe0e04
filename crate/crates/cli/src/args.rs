use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "agentattr", version, about = "Attribute an agent's action to its trajectory")]
pub struct Cli {
    /// Log filter, e.g. `info` or `agentattr_core=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank components and sentences of one trajectory.
    Attribute(AttributeArgs),
    /// Hit@k of each method over a directory of cases.
    Eval(EvalArgs),
    /// Write planted-driver cases with ground truth and their reference model.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerKind {
    Ngram,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HoldModeArg {
    Literal,
    Contextual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Loo,
    Contextcite,
}

/// Scorer and attribution settings shared by `attribute` and `eval`.
#[derive(Debug, Clone, Args)]
pub struct ScoringArgs {
    #[arg(long, value_enum, default_value = "ngram")]
    pub scorer: ScorerKind,
    /// Serialized n-gram model.
    #[arg(long)]
    pub model_path: Option<PathBuf>,
    /// Base URL of a completions endpoint.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name sent to the HTTP backend.
    #[arg(long, default_value = "default")]
    pub http_model: String,
    /// Environment variable holding the HTTP bearer key.
    #[arg(long, default_value = "SCORER_API_KEY")]
    pub api_key_env: String,
    #[arg(long, default_value_t = 3)]
    pub top_k: usize,
    /// Select components by gain z-score instead of top-k.
    #[arg(long, conflicts_with = "top_k")]
    pub z_threshold: Option<f64>,
    #[arg(long, value_enum, default_value = "literal")]
    pub hold_mode: HoldModeArg,
    /// Seed for sampled baselines.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Upper bound on concurrent scorer calls.
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    #[arg(long)]
    pub no_cache: bool,
    #[arg(long, default_value_t = 64)]
    pub contextcite_samples: usize,
    #[arg(long, default_value_t = 0.01)]
    pub contextcite_lambda: f64,
}

#[derive(Debug, Clone, Args)]
pub struct AttributeArgs {
    #[arg(long)]
    pub trajectory: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub baselines: Vec<BaselineArg>,
    /// Report JSON path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional static HTML rendering of the report.
    #[arg(long)]
    pub html: Option<PathBuf>,
    /// Sentences listed as evidence per selected component.
    #[arg(long, default_value_t = 5)]
    pub evidence: usize,
    /// Record wall-clock timings (makes the report non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Directory of trajectory files, one case per file.
    #[arg(long)]
    pub cases: PathBuf,
    /// Directory of ground-truth files.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "drop_hold,loo,contextcite")]
    pub methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    pub k: Vec<usize>,
    /// Evaluation result JSON path.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the text table here.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Copies of each trigger line in the reference corpus.
    #[arg(long, default_value_t = 20)]
    pub strength: usize,
}
