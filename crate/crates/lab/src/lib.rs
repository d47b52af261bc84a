//! Batch driver for the degenerate-diffusion experiments: reads a TOML
//! configuration, runs one experiment (or all of them) and writes CSV tables
//! plus a `summary.json` with the outcome of every check.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::Path;

pub use config::{Domain, ExperimentConfig, ExperimentKind};
pub use report::{Check, Report, Summary};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("cannot parse config: {0}")]
    Parse(String),

    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: degen_core::Error,
    },

    #[error("output: {0}")]
    Io(String),
}

impl LabError {
    /// 2 for configuration problems, 3 for numerical or output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config { .. } | LabError::Parse(_) => 2,
            LabError::Numerical { .. } | LabError::Io(_) => 3,
        }
    }
}

pub(crate) trait Context<T> {
    fn context(self, what: &str) -> Result<T, LabError>;
}

impl<T> Context<T> for degen_core::Result<T> {
    fn context(self, what: &str) -> Result<T, LabError> {
        self.map_err(|source| LabError::Numerical { context: what.into(), source })
    }
}

const PARTS: [ExperimentKind; 6] = [
    ExperimentKind::Spectrum,
    ExperimentKind::Evolve,
    ExperimentKind::Hardy,
    ExperimentKind::DeltaSweep,
    ExperimentKind::Carleman,
    ExperimentKind::Observability,
];

/// Validates `config`, runs `kind` and writes its outputs into `out`.
///
/// A full report writes each part into `out/<experiment>/` and a combined
/// summary into `out`.
pub fn run(kind: ExperimentKind, config: &ExperimentConfig, out: &Path) -> Result<Summary, LabError> {
    config.validate(kind)?;
    let summary = if kind == ExperimentKind::FullReport {
        let mut parts = Vec::new();
        for part in PARTS {
            let report = experiments::run_one(part, config)?;
            let dir = out.join(part.name());
            report::write_tables(&dir, &report)?;
            let s = Summary::from_report(part.name(), &report);
            report::write_summary(&dir, &s)?;
            parts.push(s);
        }
        Summary {
            experiment: kind.name().into(),
            passed: parts.iter().all(|p| p.passed),
            checks: Vec::new(),
            values: Default::default(),
            tables: Vec::new(),
            parts,
        }
    } else {
        let report = experiments::run_one(kind, config)?;
        report::write_tables(out, &report)?;
        Summary::from_report(kind.name(), &report)
    };
    report::write_summary(out, &summary)?;
    Ok(summary)
}
