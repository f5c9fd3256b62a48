//! Run manifest: everything needed to reproduce a run bit-exactly.
//!
//! The manifest embeds the canonical config text and master seed; passing a
//! manifest to `--config` re-runs the experiment it describes.

use crate::{sha256_file, RunArgs};
use secor::config::ExperimentConfig;
use secor::experiments::ExperimentResult;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub library_version: String,
    pub experiment: String,
    pub master_seed: u64,
    /// Canonical config text; parse it back to reproduce the run.
    pub canonical_config: String,
    pub started_utc: String,
    pub finished_utc: String,
    pub threads: usize,
    pub format: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Extracts the embedded config from manifest JSON text.
pub fn config_from_manifest(text: &str) -> Result<ExperimentConfig, String> {
    let manifest: RunManifest =
        serde_json::from_str(text).map_err(|e| format!("not a valid manifest: {e}"))?;
    let mut config = secor::config::parse_config_str(&manifest.canonical_config)
        .map_err(|e| format!("manifest embeds an invalid config: {e}"))?;
    config.master_seed = manifest.master_seed;
    Ok(config)
}

#[allow(clippy::too_many_arguments)]
pub fn write_manifest(
    out: &Path,
    result: &ExperimentResult,
    args: &RunArgs,
    written: &[PathBuf],
    schema_path: &Path,
    started: chrono::DateTime<chrono::Utc>,
    finished: chrono::DateTime<chrono::Utc>,
) -> Result<PathBuf, String> {
    let mut inputs = Vec::new();
    for path in [&args.config, &args.data].into_iter().flatten() {
        inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path).map_err(|e| format!("hash {}: {e}", path.display()))?,
        });
    }
    let mut outputs = Vec::new();
    for path in written.iter().chain(std::iter::once(&schema_path.to_path_buf())) {
        outputs.push(FileDigest {
            path: path
                .file_name()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_default(),
            sha256: sha256_file(path).map_err(|e| format!("hash {}: {e}", path.display()))?,
        });
    }
    let manifest = RunManifest {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: result.experiment.clone(),
        master_seed: result.master_seed,
        canonical_config: result.config_canonical.clone(),
        started_utc: started.to_rfc3339(),
        finished_utc: finished.to_rfc3339(),
        threads: args.threads,
        format: match args.format {
            crate::OutputFormat::Csv => "csv".into(),
            crate::OutputFormat::Json => "json".into(),
        },
        inputs,
        outputs,
    };
    let path = out.join("manifest.json");
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| format!("serialize manifest: {e}"))?;
    crate::writers::write_atomic(&path, text.as_bytes())?;
    Ok(path)
}
