//! Chat-completions HTTP backend.
//!
//! Speaks the de facto standard wire protocol for hosted and self-hosted
//! model servers: POST `{base_url}/chat/completions` with a JSON body of
//! `{model, messages, temperature, top_p, max_tokens, seed?}`, reading the
//! completion from `choices[0].message.content`.

use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use super::{validate_messages, ChatMessage, GenerationRecord, LlmError, SamplingParams, TextGenerator};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpGeneratorConfig {
    /// Endpoint prefix, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    pub model: String,
    /// Per-call timeout. Reasoning outputs run long, so the default is
    /// generous.
    pub timeout_secs: u64,
    /// Transient failures (transport errors, 429, 5xx) are retried this many
    /// times with exponential backoff before surfacing an error.
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    /// Upper bound on concurrent in-flight calls.
    pub max_parallel: usize,
}

impl Default for HttpGeneratorConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            api_key: None,
            model: String::new(),
            timeout_secs: 120,
            max_retries: 3,
            initial_backoff_ms: 250,
            max_parallel: 8,
        }
    }
}

pub struct HttpGenerator {
    config: HttpGeneratorConfig,
    http: reqwest::Client,
    permits: Arc<Semaphore>,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

impl HttpGenerator {
    pub fn new(config: HttpGeneratorConfig) -> Result<Self, LlmError> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::MalformedResponse(format!("failed to build HTTP client: {e}")))?;
        let permits = Arc::new(Semaphore::new(config.max_parallel.max(1)));
        Ok(Self {
            config,
            http,
            permits,
        })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    async fn attempt(
        &self,
        messages: &[ChatMessage],
        sampling: &SamplingParams,
    ) -> Result<Result<String, (u16, String)>, reqwest::Error> {
        let body = CompletionRequest {
            model: &self.config.model,
            messages,
            temperature: sampling.temperature,
            top_p: sampling.top_p,
            max_tokens: sampling.max_tokens,
            seed: sampling.seed,
        };
        let mut request = self.http.post(self.endpoint()).json(&body);
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let response = request.send().await?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            return Ok(Err((status.as_u16(), truncate(&body, 512))));
        }
        let text = response.text().await?;
        Ok(Ok(text))
    }
}

fn truncate(text: &str, max_chars: usize) -> String {
    text.chars().take(max_chars).collect()
}

fn retryable_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

#[async_trait]
impl TextGenerator for HttpGenerator {
    async fn generate(
        &self,
        messages: &[ChatMessage],
        sampling: &SamplingParams,
    ) -> Result<GenerationRecord, LlmError> {
        validate_messages(messages)?;
        sampling.validate()?;

        let _permit = self
            .permits
            .acquire()
            .await
            .expect("semaphore never closed");

        let start = Instant::now();
        let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
        let attempts = self.config.max_retries + 1;
        let mut last_failure: Option<LlmError> = None;

        for attempt in 0..attempts {
            if attempt > 0 {
                tokio::time::sleep(backoff).await;
                backoff *= 2;
            }
            match self.attempt(messages, sampling).await {
                Ok(Ok(body)) => {
                    let parsed: CompletionResponse = serde_json::from_str(&body)
                        .map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
                    let content = parsed
                        .choices
                        .into_iter()
                        .next()
                        .map(|c| c.message.content)
                        .ok_or_else(|| {
                            LlmError::MalformedResponse("response has no choices".into())
                        })?;
                    return Ok(GenerationRecord {
                        prompt_messages: messages.to_vec(),
                        output_text: content,
                        sampling: *sampling,
                        latency_ms: start.elapsed().as_millis() as u64,
                    });
                }
                Ok(Err((status, body))) => {
                    let error = LlmError::Service { status, body };
                    if !retryable_status(status) {
                        return Err(error);
                    }
                    last_failure = Some(error);
                }
                Err(transport) => {
                    last_failure = Some(LlmError::RetriesExhausted {
                        attempts,
                        message: transport.to_string(),
                    });
                }
            }
        }

        Err(match last_failure {
            Some(LlmError::Service { status, body }) => LlmError::Service { status, body },
            Some(LlmError::RetriesExhausted { message, .. }) | Some(LlmError::MalformedResponse(message)) => {
                LlmError::RetriesExhausted { attempts, message }
            }
            _ => LlmError::RetriesExhausted {
                attempts,
                message: "unknown transport failure".into(),
            },
        })
    }
}
