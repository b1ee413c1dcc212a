//! Output directories and atomic file writes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use scour_core::experiment::ExperimentConfig;
use serde::Serialize;

use crate::Failure;

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let name = path.file_name().ok_or_else(|| Failure::usage(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
    write_atomic(path, format!("{text}\n").as_bytes())
}

/// An output directory for one command.
pub struct RunDir {
    pub path: PathBuf,
    started: Instant,
    command: &'static str,
}

#[derive(Serialize)]
struct Timing<'a> {
    command: &'a str,
    wall_seconds: f64,
}

impl RunDir {
    pub fn create(path: PathBuf, command: &'static str) -> Result<Self, Failure> {
        fs::create_dir_all(&path)?;
        Ok(RunDir { path, started: Instant::now(), command })
    }

    /// The directory from `--out`, else from the config.
    pub fn for_config(out: Option<&Path>, cfg: &ExperimentConfig, command: &'static str) -> Result<Self, Failure> {
        let path = out
            .map(Path::to_path_buf)
            .or_else(|| cfg.output_dir.clone())
            .ok_or_else(|| Failure::usage("no output directory: pass --out or set `output_dir`"))?;
        Self::create(path, command)
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    /// `config.toml` and `seed` make the directory self-describing.
    pub fn write_config(&self, cfg: &ExperimentConfig) -> Result<(), Failure> {
        write_atomic(&self.file("config.toml"), cfg.to_toml().as_bytes())?;
        self.write_seed(cfg.seed)
    }

    pub fn write_seed(&self, seed: u64) -> Result<(), Failure> {
        write_atomic(&self.file("seed"), format!("{seed}\n").as_bytes())
    }

    /// Writes wall-clock time to `timing.json`.
    pub fn finish(self) -> Result<(), Failure> {
        write_json(
            &self.file("timing.json"),
            &Timing { command: self.command, wall_seconds: self.started.elapsed().as_secs_f64() },
        )
    }
}
