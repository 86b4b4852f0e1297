use std::process::ExitCode;

use clap::Parser;
use survey_dcn_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli.command, &cli.flags) {
        Ok(manifest) => {
            log::info!(
                "{} finished in {:.1}s; {} artifacts",
                manifest.subcommand,
                manifest.wall_seconds,
                manifest.artifacts.len()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            e.exit_code()
        }
    }
}
