//! Command-line orchestration of the survey opinion-prediction pipeline.
//!
//! Every subcommand resolves a [`RunConfig`] (defaults < TOML config file <
//! flags), claims its output directory with a lock file, writes its
//! artifacts, and finishes with `manifest.json`: the config echo, the run
//! seed and derived sub-seeds, content hashes of inputs and artifacts, and
//! wall time.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::time::Instant;

pub use args::{Cli, Command, Flags};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use manifest::{content_hash, RunContext, RunManifest};

/// Runs one subcommand end to end and returns its manifest.
pub fn run(command: &Command, flags: &Flags) -> CliResult<RunManifest> {
    let start = Instant::now();
    let cfg = RunConfig::resolve(command, flags)?;
    let out = cfg.output_dir(command);
    let _lock = manifest::OutputLock::acquire(&out)?;
    if let Some(path) = &flags.config {
        log::debug!("configuration layered from {}", path.display());
    }
    let mut ctx = RunContext::new(out, cfg.seed);
    match command {
        Command::Ingest => commands::cmd_ingest(&cfg, &mut ctx),
        Command::EmbedValidate => commands::cmd_embed_validate(&cfg, &mut ctx),
        Command::Train => commands::cmd_train(&cfg, &mut ctx),
        Command::Cv => commands::cmd_cv(&cfg, &mut ctx),
        Command::Mf { .. } => commands::cmd_mf(&cfg, &mut ctx),
        Command::Simulate { .. } => commands::cmd_simulate(&cfg, &mut ctx),
        Command::Synth { .. } => commands::cmd_synth(&cfg, &mut ctx),
        Command::Aggregate { .. } => commands::cmd_aggregate(&cfg, &mut ctx),
        Command::Retrodict { .. } => commands::cmd_retrodict(&cfg, &mut ctx),
        Command::Importance { .. } => commands::cmd_importance(&cfg, &mut ctx),
        Command::Report { .. } => commands::cmd_report(&cfg, &mut ctx),
    }?;
    if let Some(path) = &flags.config {
        ctx.input(path);
    }
    ctx.finish(command.name(), &cfg, start.elapsed().as_secs_f64())
}
