//! Global configuration: one JSON file of defaults that explicit flags
//! override.
//!
//! Path discipline: input paths given as flags resolve against `corpus_dir`
//! when relative; output paths resolve against `runs_dir`, except corpus
//! outputs (`generate --out`), which are corpora and live under
//! `corpus_dir`. Both directories default to the working directory, so
//! without a config file every path is plain cwd-relative.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curation::BinSpec;
use crate::error::{Error, Result};
use crate::recognizer::{FrameConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalConfig {
    /// Seed used when a subcommand does not pass its own.
    pub seed: u64,
    /// Root for corpora (inputs, and `generate` outputs).
    pub corpus_dir: PathBuf,
    /// Root for run artifacts (models, reports, studies).
    pub runs_dir: PathBuf,
    /// Default frame geometry for commands not bound to a checkpoint.
    pub frame: FrameConfig,
    /// Default training configuration, field-overridable by flags.
    pub train: TrainConfig,
    /// Default confidence bin boundaries for curation plans without any.
    pub bins: BinSpec,
    /// env_logger filter (e.g. "info", "debug"); RUST_LOG overrides.
    pub log_level: String,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            seed: 0,
            corpus_dir: PathBuf::from("."),
            runs_dir: PathBuf::from("."),
            frame: FrameConfig::default(),
            train: TrainConfig::default(),
            bins: BinSpec::default(),
            log_level: "info".to_string(),
        }
    }
}

impl GlobalConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: GlobalConfig = serde_json::from_str(&text)
            .map_err(|e| Error::usage(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        self.train.validate()?;
        self.bins.validate()?;
        Ok(())
    }

    /// Resolves an input path against `corpus_dir` when relative.
    pub fn input(&self, path: &Path) -> PathBuf {
        resolve(&self.corpus_dir, path)
    }

    /// Resolves an output path against `runs_dir` when relative.
    pub fn output(&self, path: &Path) -> PathBuf {
        resolve(&self.runs_dir, path)
    }

    /// Resolves a corpus output path against `corpus_dir` when relative.
    pub fn corpus_output(&self, path: &Path) -> PathBuf {
        resolve(&self.corpus_dir, path)
    }
}

fn resolve(root: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        root.join(path)
    }
}
