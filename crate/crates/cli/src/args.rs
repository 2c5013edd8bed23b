use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "text2sql", version, about = "Evaluation, reranking and split tooling for conversational text-to-SQL")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Root of the official dataset releases, used to resolve names like `cosql-dev`.
    #[arg(long, global = true, env = "TEXT2SQL_DATA_ROOT")]
    pub data_root: Option<PathBuf>,
    /// Directory holding `<db_id>/<db_id>.sqlite`.
    #[arg(long, global = true, env = "TEXT2SQL_DB_ROOT")]
    pub db_root: Option<PathBuf>,
    /// Schema files (official tables JSON). Defaults to the tables file of each named dataset.
    #[arg(long = "tables", global = true)]
    pub tables: Vec<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "TEXT2SQL_WORKERS")]
    pub workers: Option<usize>,
    /// Run on the calling thread only.
    #[arg(long, global = true)]
    pub sequential: bool,
    /// Text columns with at most this many distinct values are categorical.
    #[arg(long, global = true, default_value_t = text2sql_core::schema::DEFAULT_CATEGORICAL_THRESHOLD)]
    pub categorical_threshold: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score predictions against gold with exact-set and execution match.
    Evaluate(EvaluateArgs),
    /// Filter, score and reorder n-best lists.
    Rerank(RerankArgs),
    /// Compare 1-best and any-hypothesis accuracy of n-best lists.
    Oracle(OracleArgs),
    /// Export query-plan labels of gold queries.
    QpExtract(QpExtractArgs),
    /// Dump schema-linking candidates and hypothesis grounding per example.
    SlDiagnose(SlDiagnoseArgs),
    /// Build model inputs for every SQL turn of a dataset.
    Serialize(SerializeArgs),
    /// Build the weighted multi-task training mixture.
    MtMix(MtMixArgs),
    /// Partition a dev set by whether its templates occur in training data.
    SplitZsg(SplitZsgArgs),
    /// Re-split pooled data so dev templates are unseen in train.
    SplitCg(SplitCgArgs),
    /// Dataset counts, difficulty mix and per-turn series.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "predictions")]
pub struct PredSource {
    /// Predictions, one `{example_id, sql}` per line.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// N-best lists; the rank-0 hypothesis is the prediction.
    #[arg(long)]
    pub nbest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub source: PredSource,
    /// `cosql-dev` style name or `KIND:PATH`.
    #[arg(long)]
    pub dataset: String,
    /// Context-dependency labels, one `{interaction_id, turn_index, label}` per line.
    #[arg(long)]
    pub context: Option<PathBuf>,
    /// Per-query execution timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Lexicographic,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AgreementArg {
    Count,
    Weighted,
}

#[derive(Debug, Args)]
pub struct RerankArgs {
    #[arg(long)]
    pub nbest: PathBuf,
    /// Query-plan probabilities, one `{example_id, probs}` per line.
    #[arg(long)]
    pub qp: Option<PathBuf>,
    #[arg(long)]
    pub dataset: String,
    #[arg(long, value_enum, default_value_t = PolicyArg::Lexicographic)]
    pub policy: PolicyArg,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = AgreementArg::Count)]
    pub agreement: AgreementArg,
    #[arg(long, default_value_t = 0.5)]
    pub qp_threshold: f64,
    /// Reranked lists with per-hypothesis diagnostics.
    #[arg(long)]
    pub out: PathBuf,
    /// Also score the lists before and after reranking into this directory.
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub nbest: PathBuf,
    #[arg(long)]
    pub dataset: String,
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct QpExtractArgs {
    #[arg(long, required = true)]
    pub dataset: Vec<String>,
    /// Labels, one `{example_id, bitstring}` per line.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write gold plans as one-hot probabilities.
    #[arg(long)]
    pub oracle_probs: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SlDiagnoseArgs {
    #[arg(long)]
    pub dataset: String,
    /// Score these hypotheses against the links as well.
    #[arg(long)]
    pub nbest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ContextOpts {
    /// Whitespace-token budget for the utterance window.
    #[arg(long)]
    pub max_context_tokens: Option<usize>,
    /// Append matching database values to columns; needs --db-root.
    #[arg(long)]
    pub with_content: bool,
}

#[derive(Debug, Args)]
pub struct SerializeArgs {
    #[arg(long)]
    pub dataset: String,
    /// Prompt word; defaults to the dataset kind.
    #[arg(long)]
    pub prompt: Option<String>,
    #[command(flatten)]
    pub context: ContextOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MtMixArgs {
    #[arg(long, required = true)]
    pub dataset: Vec<String>,
    /// One positive weight per dataset, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub context: ContextOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitZsgArgs {
    #[arg(long, required = true)]
    pub train: Vec<String>,
    #[arg(long)]
    pub dev: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitCgArgs {
    #[arg(long, required = true)]
    pub dataset: Vec<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub dev_fraction: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, required = true)]
    pub dataset: Vec<String>,
    /// Add EM/EX per turn bin for these predictions (first dataset only).
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
    #[arg(long)]
    pub out: PathBuf,
}
