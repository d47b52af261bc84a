//! Experiment configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spectrum,
    Evolve,
    Hardy,
    DeltaSweep,
    Carleman,
    Observability,
    FullReport,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Evolve => "evolve",
            ExperimentKind::Hardy => "hardy",
            ExperimentKind::DeltaSweep => "delta-sweep",
            ExperimentKind::Carleman => "carleman",
            ExperimentKind::Observability => "observability",
            ExperimentKind::FullReport => "full-report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Interval,
    Square,
}

fn default_t() -> f64 {
    1.0
}
fn default_n() -> usize {
    128
}
fn default_grading() -> f64 {
    1.0
}
fn default_steps() -> usize {
    200
}
fn default_deltas() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}
fn default_delta() -> f64 {
    0.1
}
fn default_modes() -> usize {
    5
}
fn default_samples() -> usize {
    20
}

/// One experiment. Every field except `alpha` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must agree with the experiment named on the command line when present.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default = "default_domain")]
    pub domain: Domain,
    pub alpha: f64,
    #[serde(default = "default_t")]
    pub t_final: f64,
    /// Cells per axis.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_grading")]
    pub grading: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Truncation levels of the δ-sweep, strictly decreasing.
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    /// Truncation level of the Carleman experiment.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Carleman parameters; twenty log-spaced values in [1, 200] when absent.
    #[serde(default)]
    pub s_grid: Option<Vec<f64>>,
    /// Eigenmodes (spectrum size, Hardy and Carleman suites, observability K).
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// Random vectors per suite.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Output directory, overridden by `--out`.
    #[serde(default)]
    pub output: Option<String>,
}

fn default_domain() -> Domain {
    Domain::Interval
}

fn invalid(field: &'static str, reason: impl Into<String>) -> LabError {
    LabError::Config { field, reason: reason.into() }
}

fn node_aligned(delta: f64, n: usize) -> bool {
    let k = delta * n as f64;
    (k - k.round()).abs() <= 1e-9
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn dimension(&self) -> usize {
        match self.domain {
            Domain::Interval => 1,
            Domain::Square => 2,
        }
    }

    pub fn s_grid(&self) -> Vec<f64> {
        self.s_grid.clone().unwrap_or_else(degen_core::carleman::default_s_grid)
    }

    /// Range checks for `kind`.
    pub fn validate(&self, kind: ExperimentKind) -> Result<(), LabError> {
        if let Some(k) = self.experiment {
            if k != kind {
                return Err(invalid("experiment", format!("config is for `{}`, not `{}`", k.name(), kind.name())));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("{} is not in (0, 1)", self.alpha)));
        }
        if !(self.t_final > 0.0 && self.t_final <= 100.0) {
            return Err(invalid("t_final", format!("{} is not in (0, 100]", self.t_final)));
        }
        let max_n = if self.dimension() == 1 { 1 << 14 } else { 256 };
        if self.n < 4 || self.n > max_n {
            return Err(invalid("n", format!("{} is not in [4, {max_n}]", self.n)));
        }
        if !(1.0..=8.0).contains(&self.grading) {
            return Err(invalid("grading", format!("{} is not in [1, 8]", self.grading)));
        }
        if self.steps < 8 || self.steps > 100_000 {
            return Err(invalid("steps", format!("{} is not in [8, 100000]", self.steps)));
        }
        let dofs = (self.n - 1).pow(self.dimension() as u32);
        if self.modes == 0 || self.modes > dofs.min(400) {
            return Err(invalid("modes", format!("{} is not in [1, {}]", self.modes, dofs.min(400))));
        }
        if self.samples == 0 || self.samples > 1000 {
            return Err(invalid("samples", format!("{} is not in [1, 1000]", self.samples)));
        }
        let delta0 = degen_core::geometry::DEFAULT_DELTA0;
        let check_delta = |field: &'static str, d: f64| {
            if !(d > 0.0 && d < delta0) {
                return Err(invalid(field, format!("{d} is not in (0, {delta0})")));
            }
            if !node_aligned(d, self.n) {
                return Err(invalid(field, format!("{d} is not a node of the uniform mesh with n = {}", self.n)));
            }
            Ok(())
        };
        if matches!(kind, ExperimentKind::DeltaSweep | ExperimentKind::FullReport) {
            if self.deltas.is_empty() || self.deltas.windows(2).any(|w| w[1] >= w[0]) {
                return Err(invalid("deltas", "must be non-empty and strictly decreasing"));
            }
            for &d in &self.deltas {
                check_delta("deltas", d)?;
            }
        }
        if matches!(kind, ExperimentKind::Carleman | ExperimentKind::FullReport) {
            check_delta("delta", self.delta)?;
            let g = self.s_grid();
            if g.is_empty() || g[0] < 1.0 || g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("s_grid", "must be non-empty, strictly ascending and start at s ≥ 1"));
            }
        }
        Ok(())
    }
}
