use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use degen_lab::{run, ExperimentConfig, ExperimentKind, LabError};

/// Runs a degenerate-diffusion experiment and writes CSV tables and a JSON
/// summary.
///
/// Exit status: 0 all checks pass, 1 a check failed, 2 invalid config,
/// 3 numerical or output failure.
#[derive(Debug, Parser)]
#[command(name = "degen-lab", version)]
struct Cli {
    #[arg(value_enum)]
    experiment: ExperimentKind,
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's `output`, else `degen-lab-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

fn execute(cli: &Cli) -> Result<bool, LabError> {
    let config = ExperimentConfig::load(&cli.config)?;
    let out = cli
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("degen-lab-out"));
    let summary = match cli.jobs {
        Some(0) => return Err(LabError::Config { field: "jobs", reason: "must be at least 1".into() }),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| LabError::Io(e.to_string()))?
            .install(|| run(cli.experiment, &config, &out))?,
        None => run(cli.experiment, &config, &out)?,
    };
    for part in std::iter::once(&summary).chain(&summary.parts) {
        for c in &part.checks {
            println!("{} {}/{}: {}", if c.passed { "PASS" } else { "FAIL" }, part.experiment, c.name, c.detail);
        }
    }
    Ok(summary.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("degen-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
