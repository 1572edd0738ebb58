use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use compsum::model::{DecodeMode, Profile};

#[derive(Parser, Debug)]
#[command(name = "compsum", version, about = "Unsupervised extract-then-compress summarization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train both agents with self-critical policy gradient.
    Train(TrainArgs),
    /// Summarize every document of a JSON-lines file with a trained model.
    Summarize(SummarizeArgs),
    /// Print the reward of a summary for a document.
    Score(ScoreArgs),
    /// Write the transport plan behind the coverage reward as a matrix and heatmap.
    Explain(ExplainArgs),
    /// ROUGE evaluation of baselines and trained models against references.
    Evaluate(EvaluateArgs),
}

/// Summary length limits; a profile sets both, explicit flags win.
#[derive(Args, Debug, Clone, Default)]
pub struct BudgetArgs {
    /// Dataset profile: cnndm, newsroom or xsum.
    #[arg(long)]
    pub profile: Option<Profile>,
    /// Sentences to extract.
    #[arg(long = "L_E")]
    pub l_e: Option<usize>,
    /// Words to keep after compression.
    #[arg(long = "L_C")]
    pub l_c: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct WeightArgs {
    /// Weight of the coverage reward.
    #[arg(long = "w-cov")]
    pub w_cov: Option<f64>,
    /// Weight of the fluency reward.
    #[arg(long = "w-flu")]
    pub w_flu: Option<f64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// TOML file with training settings; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training documents (JSON lines).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for checkpoint and metrics.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pretrained word vectors (text format).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[command(flatten)]
    pub budgets: BudgetArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
}

#[derive(Args, Debug)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Documents to summarize (JSON lines); reference summaries are ignored.
    #[arg(long)]
    pub data: PathBuf,
    /// Write JSON lines here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "greedy")]
    pub mode: DecodeMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub budgets: BudgetArgs,
}

/// Inputs shared by `score` and `explain`.
#[derive(Args, Debug)]
pub struct RewardInputs {
    /// Document text.
    #[arg(long, conflicts_with = "document_file", required_unless_present = "document_file")]
    pub document: Option<String>,
    /// File holding the document text.
    #[arg(long = "document-file")]
    pub document_file: Option<PathBuf>,
    /// Summary text.
    #[arg(long)]
    pub summary: String,
    /// Take vocabulary and vectors from a trained model.
    #[arg(long, conflicts_with = "embeddings")]
    pub checkpoint: Option<PathBuf>,
    /// Pretrained word vectors (text format).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Settings file; supplies embedding width, LM order and solver choice.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Documents to fit the fluency language model on (defaults to the input document).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Use the exact transport solver instead of Sinkhorn.
    #[arg(long)]
    pub exact: bool,
    /// Seed for vectors of words without a pretrained embedding.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub weights: WeightArgs,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub inputs: RewardInputs,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub inputs: RewardInputs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// File stem of the outputs.
    #[arg(long, default_value = "plan")]
    pub name: String,
    /// Skip the PNG heatmap.
    #[arg(long = "no-heatmap")]
    pub no_heatmap: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Test set with reference summaries (JSON lines).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated systems: lead, leadword, model:<checkpoint>.
    #[arg(long, value_delimiter = ',', default_value = "lead,leadword")]
    pub systems: Vec<String>,
    #[arg(long = "sample-size", default_value_t = 1000)]
    pub sample_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Decoding mode of model systems.
    #[arg(long, default_value = "greedy")]
    pub mode: DecodeMode,
    /// Directory for report.json and report.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub budgets: BudgetArgs,
}
