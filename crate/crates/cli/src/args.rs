use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use survey_dcn::folds::TaskKind;
use survey_dcn::missing::{MaskScope, Mechanism};

#[derive(Debug, Parser)]
#[command(
    name = "survey-dcn",
    version,
    about = "Opinion prediction on sparse survey responses"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

/// Flags shared by every subcommand. Each overrides the config file, which
/// overrides the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Response CSV (canonical, or raw labels when --binarize-map is given).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Question-embedding manifest (or `variable,v1,...` CSV).
    #[arg(long, global = true)]
    pub embeddings: Option<PathBuf>,
    /// Binarization table `option_set_key,option_label,bit`; switches ingestion to raw labels.
    #[arg(long = "binarize-map", global = true)]
    pub binarize_map: Option<PathBuf>,
    /// Per-respondent categorical demographics keyed by `yearid`.
    #[arg(long, global = true)]
    pub demographics: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_task)]
    /// Hold-out scheme: imputation, retrodiction or unasked.
    pub task: Option<TaskKind>,
    #[arg(long, global = true)]
    /// Number of cross-validation folds.
    pub folds: Option<usize>,
    #[arg(long, global = true)]
    /// Master seed; required by every stochastic subcommand.
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    /// Maximum training epochs per round.
    pub epochs: Option<usize>,
    #[arg(long = "batch-size", global = true)]
    /// Minibatch size.
    pub batch_size: Option<usize>,
    #[arg(long = "learning-rate", global = true)]
    /// Base Adam learning rate before staircase decay.
    pub learning_rate: Option<f64>,
    #[arg(long, global = true)]
    /// Epochs without validation-AUC improvement before stopping.
    pub patience: Option<usize>,
    /// Run only the first N cross-validation rounds.
    #[arg(long, global = true)]
    pub rounds: Option<usize>,
    /// Margin of error for cell-level correctness.
    #[arg(long, global = true)]
    pub margin: Option<f64>,
    /// Share of points in each local trend fit.
    #[arg(long, global = true)]
    pub span: Option<f64>,
    /// Output directory (default: $SURVEY_DCN_OUT/<subcommand>).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Keep only these variables (repeatable).
    #[arg(long, global = true)]
    pub include: Vec<String>,
    /// Drop these variables (repeatable).
    #[arg(long, global = true)]
    pub exclude: Vec<String>,
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse().map_err(|e: survey_dcn::Error| e.to_string())
}

fn parse_mechanism(s: &str) -> Result<Mechanism, String> {
    match s.to_ascii_lowercase().as_str() {
        "mcar" => Ok(Mechanism::Mcar),
        "mar" => Ok(Mechanism::Mar),
        "mnar" => Ok(Mechanism::Mnar),
        other => Err(format!("unknown mechanism {other:?}; expected mcar, mar or mnar")),
    }
}

fn parse_scope(s: &str) -> Result<MaskScope, String> {
    match s {
        "per-variable" => Ok(MaskScope::PerVariable),
        "global" => Ok(MaskScope::Global),
        other => Err(format!("unknown scope {other:?}; expected per-variable or global")),
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Validate responses and write the canonical CSV and per-cell statistics.
    Ingest,
    /// Check embeddings against the dataset and write aligned vectors and prompts.
    EmbedValidate,
    /// Train one network on all responses and save a checkpoint.
    Train,
    /// Cross-validate the network under --task.
    Cv,
    /// Cross-validate the ALS matrix-factorization baseline under --task.
    Mf {
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Mask observed responses under a missingness mechanism.
    Simulate {
        #[arg(long, value_parser = parse_mechanism)]
        mechanism: Option<Mechanism>,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long, value_parser = parse_scope)]
        scope: Option<MaskScope>,
    },
    /// Generate the planted synthetic survey and its embeddings.
    Synth {
        #[arg(long)]
        individuals: Option<usize>,
        #[arg(long)]
        questions: Option<usize>,
        #[arg(long)]
        years: Option<usize>,
        #[arg(long = "observed-fraction")]
        observed_fraction: Option<f64>,
    },
    /// Weighted (question, year) proportions from prediction files, with the rescaling line.
    Aggregate {
        #[arg(long, required = true)]
        predictions: Vec<PathBuf>,
    },
    /// Predict every respondent in every year for chosen variables and smooth the trends.
    Retrodict {
        /// Variables to retrodict (default: all).
        #[arg(long = "variable")]
        variables: Vec<String>,
        /// Out-of-fold prediction files used to fit the rescaling line.
        #[arg(long)]
        predictions: Vec<PathBuf>,
    },
    /// Block-norm feature importance of a checkpoint.
    Importance {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Summary metrics per prediction file.
    Report {
        #[arg(long, required = true)]
        predictions: Vec<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::EmbedValidate => "embed-validate",
            Command::Train => "train",
            Command::Cv => "cv",
            Command::Mf { .. } => "mf",
            Command::Simulate { .. } => "simulate",
            Command::Synth { .. } => "synth",
            Command::Aggregate { .. } => "aggregate",
            Command::Retrodict { .. } => "retrodict",
            Command::Importance { .. } => "importance",
            Command::Report { .. } => "report",
        }
    }

    /// Whether the subcommand draws random numbers and so needs a seed.
    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            Command::Train
                | Command::Cv
                | Command::Mf { .. }
                | Command::Simulate { .. }
                | Command::Synth { .. }
                | Command::Retrodict { .. }
        )
    }
}
