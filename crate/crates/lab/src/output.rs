//! Artifact directory with write-once atomic files, and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Writes `bytes` to `path` via a sibling temp file and a rename, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path
        .file_name()
        .context("artifact path has no file name")?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub wall_clock_seconds: f64,
    /// Artifact paths relative to the output directory, in completion order.
    pub artifacts: Vec<String>,
    pub verdicts: BTreeMap<String, bool>,
    /// False when a step failed and the run aborted.
    pub complete: bool,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }
}

/// Output directory of one run. Every file goes through [`Self::write`] so
/// the manifest lists all of them.
pub struct RunOutput {
    dir: PathBuf,
    started: Instant,
    manifest: RunManifest,
}

impl RunOutput {
    pub fn new(dir: &Path, command: &str, config: &ExperimentConfig) -> Self {
        Self {
            dir: dir.to_path_buf(),
            started: Instant::now(),
            manifest: RunManifest {
                command: command.into(),
                config_hash: config.hash(),
                tool_version: env!("CARGO_PKG_VERSION").into(),
                seed: config.seed,
                wall_clock_seconds: 0.0,
                artifacts: Vec::new(),
                verdicts: BTreeMap::new(),
                complete: false,
            },
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes.as_ref())?;
        self.manifest.artifacts.push(name.into());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn verdict(&mut self, name: &str, pass: bool) {
        self.manifest.verdicts.insert(name.into(), pass);
    }

    /// Writes the manifest and returns it; `complete = false` marks an
    /// aborted run.
    pub fn finish(mut self, complete: bool) -> Result<RunManifest> {
        self.manifest.complete = complete;
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        write_atomic(&self.dir.join(MANIFEST_NAME), text.as_bytes())?;
        Ok(self.manifest)
    }
}
