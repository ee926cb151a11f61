//! Uniform interface to a text-generation model: an HTTP chat-completions
//! backend for real runs and a deterministic scripted mock for tests.

mod http;
mod mock;

pub use http::{HttpGenerator, HttpGeneratorConfig};
pub use mock::{Matcher, MockGenerator, MockRule};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Decoding parameters for one generation call.
///
/// Temperature 0 requests deterministic decoding and is used for all
/// annotation calls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: 0.2,
            top_p: 0.9,
            max_tokens: 1024,
            seed: None,
        }
    }
}

impl SamplingParams {
    /// Deterministic decoding for annotation calls.
    pub fn annotation() -> Self {
        Self {
            temperature: 0.0,
            top_p: 1.0,
            ..Self::default()
        }
    }

    /// High-diversity decoding for parallel test-time scaling.
    pub fn scaling() -> Self {
        Self {
            temperature: 1.0,
            top_p: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(LlmError::InvalidSampling(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if !self.top_p.is_finite() || !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(LlmError::InvalidSampling(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidSampling("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// One completed generation call. `output_text` is the completion verbatim,
/// with no trimming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt_messages: Vec<ChatMessage>,
    pub output_text: String,
    pub sampling: SamplingParams,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("generate called with no messages")]
    EmptyMessages,
    #[error("user message {index} has empty content")]
    EmptyUserContent { index: usize },
    #[error("invalid sampling parameters: {0}")]
    InvalidSampling(String),
    #[error("transport failed after {attempts} attempts: {message}")]
    RetriesExhausted { attempts: u32, message: String },
    #[error("model service returned status {status}: {body}")]
    Service { status: u16, body: String },
    #[error("malformed model response: {0}")]
    MalformedResponse(String),
    #[error("mock script has no rule matching prompt: {excerpt:?}")]
    UnmatchedPrompt { excerpt: String },
    #[error("mock script is empty or has a rule with no responses")]
    EmptyScript,
    #[error("failed to read mock script: {0}")]
    ScriptIo(#[from] std::io::Error),
    #[error("malformed mock script: {0}")]
    ScriptFormat(String),
}

/// A text-generation backend. Implementations never mutate their input
/// messages and are safe to share across threads.
#[async_trait]
pub trait TextGenerator: Send + Sync {
    async fn generate(
        &self,
        messages: &[ChatMessage],
        sampling: &SamplingParams,
    ) -> Result<GenerationRecord, LlmError>;
}

/// Shared request validation: at least one message, and no empty user
/// messages.
pub(crate) fn validate_messages(messages: &[ChatMessage]) -> Result<(), LlmError> {
    if messages.is_empty() {
        return Err(LlmError::EmptyMessages);
    }
    for (index, message) in messages.iter().enumerate() {
        if message.role == Role::User && message.content.is_empty() {
            return Err(LlmError::EmptyUserContent { index });
        }
    }
    Ok(())
}
