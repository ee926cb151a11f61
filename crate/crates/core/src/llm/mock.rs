//! Deterministic scripted generator for offline tests.
//!
//! A script is an ordered list of rules. Each rule pairs a matcher with a
//! bounded response sequence: repeated hits on the same rule consume its
//! responses in order, and an exhausted sequence repeats its last entry.
//! The first matching rule wins. Matching runs against the concatenation
//! of all message contents, joined by newlines.

use std::path::Path;
use std::sync::Mutex;

use async_trait::async_trait;
use serde::Deserialize;

use super::{validate_messages, ChatMessage, GenerationRecord, LlmError, SamplingParams, TextGenerator};

#[derive(Debug, Clone)]
pub enum Matcher {
    Contains(String),
    Equals(String),
}

impl Matcher {
    fn matches(&self, prompt: &str) -> bool {
        match self {
            Matcher::Contains(needle) => prompt.contains(needle),
            Matcher::Equals(expected) => prompt == expected,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockRule {
    pub matcher: Matcher,
    pub responses: Vec<String>,
}

impl MockRule {
    pub fn contains(needle: impl Into<String>, responses: Vec<String>) -> Self {
        Self {
            matcher: Matcher::Contains(needle.into()),
            responses,
        }
    }
}

/// Script file layout: a JSON array of rules, each with exactly one of
/// `contains` or `equals` plus a non-empty `responses` array.
#[derive(Deserialize)]
struct ScriptRule {
    #[serde(default)]
    contains: Option<String>,
    #[serde(default)]
    equals: Option<String>,
    responses: Vec<String>,
}

pub struct MockGenerator {
    rules: Vec<MockRule>,
    // Per-rule sequence cursors plus the call log, updated under one lock
    // so concurrent use stays deterministic per rule order.
    state: Mutex<MockState>,
}

struct MockState {
    cursors: Vec<usize>,
    calls: Vec<GenerationRecord>,
}

impl MockGenerator {
    pub fn from_rules(rules: Vec<MockRule>) -> Result<Self, LlmError> {
        if rules.is_empty() || rules.iter().any(|r| r.responses.is_empty()) {
            return Err(LlmError::EmptyScript);
        }
        let cursors = vec![0; rules.len()];
        Ok(Self {
            rules,
            state: Mutex::new(MockState {
                cursors,
                calls: Vec::new(),
            }),
        })
    }

    pub fn from_script_file(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_script_str(&text)
    }

    pub fn from_script_str(text: &str) -> Result<Self, LlmError> {
        let raw: Vec<ScriptRule> =
            serde_json::from_str(text).map_err(|e| LlmError::ScriptFormat(e.to_string()))?;
        let rules = raw
            .into_iter()
            .map(|rule| {
                let matcher = match (rule.contains, rule.equals) {
                    (Some(needle), None) => Matcher::Contains(needle),
                    (None, Some(expected)) => Matcher::Equals(expected),
                    _ => {
                        return Err(LlmError::ScriptFormat(
                            "each rule needs exactly one of `contains` or `equals`".into(),
                        ))
                    }
                };
                Ok(MockRule {
                    matcher,
                    responses: rule.responses,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_rules(rules)
    }

    /// Every generation call made so far, in call order.
    pub fn calls(&self) -> Vec<GenerationRecord> {
        self.state.lock().unwrap().calls.clone()
    }

    pub fn call_count(&self) -> usize {
        self.state.lock().unwrap().calls.len()
    }
}

#[async_trait]
impl TextGenerator for MockGenerator {
    async fn generate(
        &self,
        messages: &[ChatMessage],
        sampling: &SamplingParams,
    ) -> Result<GenerationRecord, LlmError> {
        validate_messages(messages)?;
        let prompt = messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");

        let rule_idx = self
            .rules
            .iter()
            .position(|rule| rule.matcher.matches(&prompt))
            .ok_or_else(|| LlmError::UnmatchedPrompt {
                excerpt: prompt.chars().take(120).collect(),
            })?;

        let mut state = self.state.lock().unwrap();
        let responses = &self.rules[rule_idx].responses;
        let cursor = state.cursors[rule_idx];
        let output = responses[cursor.min(responses.len() - 1)].clone();
        state.cursors[rule_idx] = cursor + 1;

        let record = GenerationRecord {
            prompt_messages: messages.to_vec(),
            output_text: output,
            sampling: *sampling,
            latency_ms: 0,
        };
        state.calls.push(record.clone());
        Ok(record)
    }
}
