//! Run configuration: defaults, config-file loading, environment
//! overrides, and the resolved snapshot stamped into every output.
//!
//! Precedence, lowest to highest: built-in defaults, config file,
//! environment variables, CLI flags. The CLI layer applies its own flags
//! last; this module owns the first three layers.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bm25::Bm25Params;
use crate::dpo::DpoConfig;
use crate::eval::PhaseSampling;
use crate::llm::{HttpGenerator, HttpGeneratorConfig, LlmError, MockGenerator, TextGenerator};
use crate::prompts::PromptTemplates;
use crate::scaling::ScalingStrategy;

pub const ENV_API_BASE: &str = "THOUGHTRAG_API_BASE";
pub const ENV_API_KEY: &str = "THOUGHTRAG_API_KEY";
pub const ENV_MODEL: &str = "THOUGHTRAG_MODEL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    pub backend: BackendKind,
    pub api_base: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mock_script: Option<PathBuf>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub max_parallel: usize,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            backend: BackendKind::Http,
            api_base: "http://localhost:8000/v1".into(),
            api_key: None,
            model: String::new(),
            mock_script: None,
            timeout_secs: 120,
            max_retries: 3,
            max_parallel: 8,
        }
    }
}

impl LlmSettings {
    /// Builds the configured generator backend.
    pub fn build_generator(&self) -> Result<std::sync::Arc<dyn TextGenerator>, LlmError> {
        match self.backend {
            BackendKind::Mock => {
                let path = self.mock_script.as_ref().ok_or_else(|| {
                    LlmError::ScriptFormat("mock backend selected but no mock script configured".into())
                })?;
                Ok(std::sync::Arc::new(MockGenerator::from_script_file(path)?))
            }
            BackendKind::Http => Ok(std::sync::Arc::new(HttpGenerator::new(
                HttpGeneratorConfig {
                    base_url: self.api_base.clone(),
                    api_key: self.api_key.clone(),
                    model: self.model.clone(),
                    timeout_secs: self.timeout_secs,
                    max_retries: self.max_retries,
                    initial_backoff_ms: 250,
                    max_parallel: self.max_parallel,
                },
            )?)),
        }
    }
}

/// Preference-construction counts. Sampling parameters live in
/// [`PhaseSampling`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrefsSettings {
    pub n_thoughts: usize,
    pub n_answers: usize,
    pub answer_pairs_per_item: usize,
}

impl Default for PrefsSettings {
    fn default() -> Self {
        Self {
            n_thoughts: 15,
            n_answers: 5,
            answer_pairs_per_item: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingSettings {
    pub strategy: ScalingStrategy,
    pub m: usize,
}

impl Default for ScalingSettings {
    fn default() -> Self {
        Self {
            strategy: ScalingStrategy::Parallel,
            m: 1,
        }
    }
}

/// The full effective configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    /// Root seed; every randomized phase derives its own stream from it.
    pub seed: u64,
    /// Bounded worker-pool size for item-parallel phases.
    pub workers: usize,
    /// Abort runs on the first item failure instead of recording it.
    pub strict: bool,
    pub out_dir: PathBuf,
    pub bm25: Bm25Params,
    pub sampling: PhaseSampling,
    pub prefs: PrefsSettings,
    pub scaling: ScalingSettings,
    pub dpo: DpoConfig,
    pub llm: LlmSettings,
    pub templates: PromptTemplates,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl RunConfig {
    /// Defaults, then the config file when given, then environment
    /// variables.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match file {
            Some(path) => Self::from_file(path)?,
            None => Self::defaults(),
        };
        config.apply_env(|name| std::env::var(name).ok());
        Ok(config)
    }

    pub fn defaults() -> Self {
        Self {
            seed: 0,
            workers: 1,
            strict: false,
            out_dir: PathBuf::from("out"),
            bm25: Bm25Params::default(),
            sampling: PhaseSampling::default(),
            prefs: PrefsSettings::default(),
            scaling: ScalingSettings::default(),
            dpo: DpoConfig::default(),
            llm: LlmSettings::default(),
            templates: PromptTemplates::default(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Applies the LLM environment variables through an injected getter so
    /// tests can drive it without mutating the process environment.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(base) = get(ENV_API_BASE) {
            self.llm.api_base = base;
        }
        if let Some(key) = get(ENV_API_KEY) {
            self.llm.api_key = Some(key);
        }
        if let Some(model) = get(ENV_MODEL) {
            self.llm.model = model;
        }
    }

    /// The resolved configuration as a JSON document, with credentials
    /// redacted. This is what gets written next to every output.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut redacted = self.clone();
        if redacted.llm.api_key.is_some() {
            redacted.llm.api_key = Some("<redacted>".into());
        }
        serde_json::to_value(&redacted).expect("config serializes")
    }
}
