//! Output files, content hashes and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::RunError;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

/// Seventeen significant digits, enough to round-trip any f64.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects the files written by one run.
#[derive(Debug)]
pub struct RunOutput {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl RunOutput {
    pub fn create(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir)?;
        Ok(RunOutput {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(OutputFile {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), RunError> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| RunError::Numerical(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Write the manifest describing this run. The manifest is not listed
    /// among its own outputs.
    pub fn finish(self, config: &RunConfig) -> Result<Vec<OutputFile>, RunError> {
        let manifest = json!({
            "manifest_version": MANIFEST_VERSION,
            "tool": "wzsim",
            "version": env!("CARGO_PKG_VERSION"),
            "experiment": config.experiment.name(),
            "config": config,
            "outputs": self.files,
        });
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| RunError::Numerical(e.to_string()))?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST_NAME), text)?;
        Ok(self.files)
    }
}

/// Output list recorded in a manifest file.
pub fn manifest_outputs(path: &Path) -> Result<Vec<OutputFile>, RunError> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    let list = value
        .get("outputs")
        .and_then(|v| v.as_array())
        .ok_or_else(|| RunError::Config("manifest has no outputs list".into()))?;
    list.iter()
        .map(|o| {
            let field = |k: &str| {
                o.get(k)
                    .and_then(|v| v.as_str())
                    .map(str::to_string)
                    .ok_or_else(|| RunError::Config(format!("manifest output missing {k}")))
            };
            Ok(OutputFile {
                path: field("path")?,
                sha256: field("sha256")?,
            })
        })
        .collect()
}
