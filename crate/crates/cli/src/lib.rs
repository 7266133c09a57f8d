//! Reproducible experiment runs on top of `wz-core`.
//!
//! A run reads one JSON [`RunConfig`], writes CSV/JSON outputs into a
//! directory and finishes with `manifest.json`, which records the resolved
//! config and a SHA-256 of every output so the run can be replayed.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::Path;

pub use config::{Experiment, RunConfig};
pub use output::{OutputFile, RunOutput, MANIFEST_NAME};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] wz_core::Error),
    #[error("numerical check failed: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// 2 for invalid input, 3 for resource guards, 4 for numerical aborts.
    pub fn exit_code(&self) -> i32 {
        use wz_core::Error as E;
        match self {
            RunError::Config(_) => 2,
            RunError::Core(E::ResourceGuard(_)) => 3,
            RunError::Core(E::ZeroNorm | E::NormDrift { .. }) | RunError::Numerical(_) => 4,
            RunError::Core(_) => 2,
            RunError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub summary: serde_json::Value,
    pub outputs: Vec<OutputFile>,
}

/// Validate `config`, run it into `out_dir` and write the manifest.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunSummary, RunError> {
    config.validate()?;
    let mut out = RunOutput::create(out_dir)?;
    let summary = match config.experiment {
        Experiment::BoxEvolve => experiments::box_evolve(config, &mut out)?,
        Experiment::ConvergenceSpatial | Experiment::ConvergenceTemporal => {
            experiments::convergence(config, &mut out)?
        }
        Experiment::Molecule2d => experiments::molecule2d(config, &mut out)?,
        Experiment::Sample => experiments::sample(config, &mut out)?,
        Experiment::SynthReport => experiments::synth_report(config, &mut out)?,
    };
    let outputs = out.finish(config)?;
    Ok(RunSummary { summary, outputs })
}

/// Result of re-running a manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    /// Output paths whose hash differs or which were not produced.
    pub mismatches: Vec<String>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-run the config stored in `manifest` into `out_dir` and compare hashes.
pub fn replay(manifest: &Path, out_dir: &Path) -> Result<ReplayReport, RunError> {
    let config = RunConfig::load(manifest)?;
    let expected = output::manifest_outputs(manifest)?;
    let got = run(&config, out_dir)?.outputs;
    let mut mismatches: Vec<String> = expected
        .iter()
        .filter(|e| !got.contains(e))
        .map(|e| e.path.clone())
        .collect();
    mismatches.extend(
        got.iter()
            .filter(|g| !expected.iter().any(|e| e.path == g.path))
            .map(|g| g.path.clone()),
    );
    Ok(ReplayReport { mismatches })
}
