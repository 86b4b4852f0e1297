use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use survey_dcn::dcn::DcnConfig;
use survey_dcn::folds::{CvConfig, TaskKind};
use survey_dcn::mf::MfConfig;
use survey_dcn::missing::{MaskOptions, Mechanism, SyntheticConfig};
use survey_dcn::store::IngestOptions;

use crate::args::{Command, Flags};
use crate::error::{CliError, CliResult};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SURVEY_DCN_OUT";

/// Everything a subcommand reads, after layering defaults < config file < flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub binarize_map: Option<PathBuf>,
    pub demographics: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub include: Option<Vec<String>>,
    pub exclude: Vec<String>,
    pub ignore_weights: bool,
    pub task: TaskKind,
    pub seed: Option<u64>,
    pub folds: usize,
    pub validation_fraction: f64,
    pub stratify_years: bool,
    pub rounds: Option<usize>,
    pub margin: f64,
    pub span: f64,
    pub mechanism: Mechanism,
    pub variables: Vec<String>,
    pub predictions: Vec<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub dcn: DcnConfig,
    pub mf: MfConfig,
    pub mask: MaskOptions,
    pub synth: SyntheticConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            embeddings: None,
            binarize_map: None,
            demographics: None,
            out: None,
            include: None,
            exclude: Vec::new(),
            ignore_weights: false,
            task: TaskKind::Imputation,
            seed: None,
            folds: 10,
            validation_fraction: 0.1,
            stratify_years: true,
            rounds: None,
            margin: 0.03,
            span: 0.75,
            mechanism: Mechanism::Mcar,
            variables: Vec::new(),
            predictions: Vec::new(),
            checkpoint: None,
            dcn: DcnConfig::default(),
            mf: MfConfig::default(),
            mask: MaskOptions::default(),
            synth: SyntheticConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a TOML config file.
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Dependency(format!("config file {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
    }

    /// Builds the effective configuration for `command`.
    pub fn resolve(command: &Command, flags: &Flags) -> CliResult<Self> {
        let mut cfg = match &flags.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        cfg.apply_flags(flags);
        cfg.apply_command(command);
        if command.is_stochastic() && cfg.seed.is_none() {
            return Err(CliError::Usage(format!(
                "`{}` is stochastic; pass --seed or set `seed` in the config file",
                command.name()
            )));
        }
        if let Some(seed) = cfg.seed {
            cfg.dcn.seed = seed;
            cfg.mf.seed = seed;
            cfg.mask.seed = seed;
            cfg.synth.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_flags(&mut self, f: &Flags) {
        fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        fn set_opt<T: Clone>(slot: &mut Option<T>, value: &Option<T>) {
            if value.is_some() {
                *slot = value.clone();
            }
        }
        set_opt(&mut self.data, &f.data);
        set_opt(&mut self.embeddings, &f.embeddings);
        set_opt(&mut self.binarize_map, &f.binarize_map);
        set_opt(&mut self.demographics, &f.demographics);
        set_opt(&mut self.out, &f.out);
        set_opt(&mut self.seed, &f.seed);
        set_opt(&mut self.rounds, &f.rounds);
        set(&mut self.task, &f.task);
        set(&mut self.folds, &f.folds);
        set(&mut self.margin, &f.margin);
        set(&mut self.span, &f.span);
        set(&mut self.dcn.max_epochs, &f.epochs);
        set(&mut self.dcn.batch_size, &f.batch_size);
        set(&mut self.dcn.learning_rate, &f.learning_rate);
        set(&mut self.dcn.patience, &f.patience);
        if !f.include.is_empty() {
            self.include = Some(f.include.clone());
        }
        if !f.exclude.is_empty() {
            self.exclude = f.exclude.clone();
        }
    }

    fn apply_command(&mut self, command: &Command) {
        match command {
            Command::Mf {
                rank,
                lambda,
                iterations,
            } => {
                self.mf.rank = rank.unwrap_or(self.mf.rank);
                self.mf.lambda = lambda.unwrap_or(self.mf.lambda);
                self.mf.iterations = iterations.unwrap_or(self.mf.iterations);
            }
            Command::Simulate { mechanism, rate, scope } => {
                self.mechanism = mechanism.unwrap_or(self.mechanism);
                self.mask.rate = rate.unwrap_or(self.mask.rate);
                self.mask.scope = scope.unwrap_or(self.mask.scope);
            }
            Command::Synth {
                individuals,
                questions,
                years,
                observed_fraction,
            } => {
                self.synth.individuals = individuals.unwrap_or(self.synth.individuals);
                self.synth.questions = questions.unwrap_or(self.synth.questions);
                self.synth.years = years.unwrap_or(self.synth.years);
                self.synth.observed_fraction = observed_fraction.unwrap_or(self.synth.observed_fraction);
            }
            Command::Aggregate { predictions } | Command::Report { predictions } => {
                self.predictions = predictions.clone();
            }
            Command::Retrodict { variables, predictions } => {
                if !variables.is_empty() {
                    self.variables = variables.clone();
                }
                if !predictions.is_empty() {
                    self.predictions = predictions.clone();
                }
            }
            Command::Importance { checkpoint } => {
                if checkpoint.is_some() {
                    self.checkpoint = checkpoint.clone();
                }
            }
            Command::Ingest | Command::EmbedValidate | Command::Train | Command::Cv => {}
        }
    }

    fn validate(&self) -> CliResult<()> {
        if self.folds < 2 {
            return Err(CliError::Usage(format!(
                "--folds must be at least 2, got {}",
                self.folds
            )));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(CliError::Usage(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.margin >= 0.0) {
            return Err(CliError::Usage(format!(
                "--margin must be non-negative, got {}",
                self.margin
            )));
        }
        if !(self.span > 0.0) {
            return Err(CliError::Usage(format!("--span must be positive, got {}", self.span)));
        }
        self.dcn.validate().map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            ignore_weights: self.ignore_weights,
            include: self.include.clone(),
            exclude: self.exclude.clone(),
        }
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            dcn: self.dcn.clone(),
            folds: self.folds,
            validation_fraction: self.validation_fraction,
            stratify_years: self.stratify_years,
            rounds: self.rounds,
        }
    }

    /// The run seed; only called by subcommands that `resolve` guaranteed one for.
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.dcn.seed)
    }

    /// Output directory: `--out`, else `$SURVEY_DCN_OUT/<subcommand>`, else `runs/<subcommand>`.
    pub fn output_dir(&self, command: &Command) -> PathBuf {
        match &self.out {
            Some(dir) => dir.clone(),
            None => std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs"))
                .join(command.name()),
        }
    }

    pub fn require_data(&self) -> CliResult<&Path> {
        require_path(&self.data, "--data")
    }

    pub fn require_embeddings(&self) -> CliResult<&Path> {
        require_path(&self.embeddings, "--embeddings")
    }
}

/// Checks that an input named by `flag` was given and exists.
pub fn require_path<'a>(path: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    let path = path
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("{flag} is required for this subcommand")))?;
    if !path.exists() {
        return Err(CliError::Dependency(format!(
            "{flag} {} does not exist",
            path.display()
        )));
    }
    Ok(path)
}
