//! Prompt construction for thought sampling, context answering, and
//! answer completion.
//!
//! The layout around each prompt is overridable through
//! [`PromptTemplates`], but the three instruction sentences themselves are
//! fixed: they are the contract the rest of the pipeline (annotation,
//! preference building, evaluation) is built on, so code appends them
//! rather than trusting a template to keep them intact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::DocumentChunk;

/// Instruction appended to every thought-sampling prompt.
pub const THOUGHT_INSTRUCTION: &str =
    "Please reason step by step to identify the relevant knowledge that may be involved.";

/// Instruction appended to every context-answering prompt.
pub const ANSWER_INSTRUCTION: &str =
    "Please reason step by step and choose one option from the above";

/// Completion cue appended after a thought to elicit a bare answer label.
pub const ANSWER_COMPLETION_CUE: &str = "The answer is: ";

/// Overridable prompt layout. Placeholders `{question}`, `{options}`,
/// `{documents}`, and `{thought}` are substituted; the instruction
/// sentence for each prompt kind is appended afterwards and cannot be
/// overridden.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplates {
    pub thought: String,
    pub answer: String,
    pub completion: String,
    /// Whether option texts appear in thought-sampling prompts. Options are
    /// always excluded from retrieval queries either way.
    pub include_options_in_thought: bool,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            thought: "{question}\n\n{options}".into(),
            answer: "{documents}\n\n{question}\n\n{options}".into(),
            completion: "{question}\n\n{options}\n\n{thought}".into(),
            include_options_in_thought: true,
        }
    }
}

pub fn render_options(options: &BTreeMap<char, String>) -> String {
    options
        .iter()
        .map(|(label, text)| format!("{label}. {text}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Numbered document section. Titles are kept next to their chunk text
/// since they carry topical signal.
pub fn render_documents(chunks: &[DocumentChunk]) -> String {
    if chunks.is_empty() {
        return String::new();
    }
    let body = chunks
        .iter()
        .enumerate()
        .map(|(i, chunk)| {
            if chunk.title.is_empty() {
                format!("{}. {}", i + 1, chunk.text)
            } else {
                format!("{}. {}: {}", i + 1, chunk.title, chunk.text)
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    format!("Documents:\n{body}")
}

fn fill(template: &str, question: &str, options: &str, documents: &str, thought: &str) -> String {
    let filled = template
        .replace("{question}", question)
        .replace("{options}", options)
        .replace("{documents}", documents)
        .replace("{thought}", thought);
    // Collapse the blank-section gaps left by empty substitutions.
    let mut text = filled.trim().to_string();
    while text.contains("\n\n\n") {
        text = text.replace("\n\n\n", "\n\n");
    }
    text
}

pub fn thought_prompt(
    templates: &PromptTemplates,
    question: &str,
    options: &BTreeMap<char, String>,
) -> String {
    let options_text = if templates.include_options_in_thought {
        render_options(options)
    } else {
        String::new()
    };
    let body = fill(&templates.thought, question, &options_text, "", "");
    format!("{body}\n\n{THOUGHT_INSTRUCTION}")
}

pub fn answer_prompt(
    templates: &PromptTemplates,
    question: &str,
    options: &BTreeMap<char, String>,
    chunks: &[DocumentChunk],
) -> String {
    let body = fill(
        &templates.answer,
        question,
        &render_options(options),
        &render_documents(chunks),
        "",
    );
    format!("{body}\n\n{ANSWER_INSTRUCTION}")
}

pub fn completion_prompt(
    templates: &PromptTemplates,
    question: &str,
    options: &BTreeMap<char, String>,
    thought: &str,
) -> String {
    let body = fill(
        &templates.completion,
        question,
        &render_options(options),
        "",
        thought,
    );
    format!("{body}\n{ANSWER_COMPLETION_CUE}")
}

/// Thought prompt for iterative scaling rounds past the first: the previous
/// round's retrieved documents are placed ahead of the question.
pub fn iterative_thought_prompt(
    templates: &PromptTemplates,
    question: &str,
    options: &BTreeMap<char, String>,
    chunks: &[DocumentChunk],
) -> String {
    let options_text = if templates.include_options_in_thought {
        render_options(options)
    } else {
        String::new()
    };
    let body = fill(
        &templates.answer,
        question,
        &options_text,
        &render_documents(chunks),
        "",
    );
    format!("{body}\n\n{THOUGHT_INSTRUCTION}")
}
