//! Output-file writing. Every command writes its resolved config snapshot
//! next to its outputs; all serialization is deterministic given the same
//! inputs and seed.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thoughtrag_core::config::RunConfig;

use crate::CliError;

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn prepare(config: &RunConfig) -> Result<Self, CliError> {
        std::fs::create_dir_all(&config.out_dir)?;
        Ok(Self {
            root: config.out_dir.clone(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::new("encode", e.to_string()))?;
        std::fs::write(&path, format!("{text}\n"))?;
        Ok(path)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        std::fs::write(&path, text)?;
        Ok(path)
    }

    /// The resolved config plus an echo of the invoked command.
    pub fn write_snapshot<C: Serialize>(
        &self,
        config: &RunConfig,
        command: &C,
    ) -> Result<PathBuf, CliError> {
        let snapshot = serde_json::json!({
            "config": config.snapshot(),
            "command": serde_json::to_value(command)
                .map_err(|e| CliError::new("encode", e.to_string()))?,
        });
        self.write_json("config_snapshot.json", &snapshot)
    }
}

/// Strategy strings carry `:`; keep file names plain.
pub fn file_token(raw: &str) -> String {
    raw.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}

pub fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}
