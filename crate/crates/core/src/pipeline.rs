//! Question-RAG, Thought-RAG, direct answer completion, and option
//! extraction.
//!
//! The two retrieval strategies differ only in the query string handed to
//! BM25: Question-RAG queries with the bare question text, Thought-RAG
//! queries with the question plus a sampled thought. The answering prompt
//! is identical given identical retrieved chunks. Option letters never
//! enter retrieval queries; they would only add noise terms.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bm25::Searcher;
use crate::corpus::DocumentChunk;
use crate::llm::{ChatMessage, LlmError, SamplingParams, TextGenerator};
use crate::mcqa::McqaItem;
use crate::prompts::{self, PromptTemplates};

/// How an answer was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    QuestionRag,
    ThoughtRag,
    DirectFromThought,
    ParallelScale,
    IterativeScale,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Strategy::QuestionRag => "question_rag",
            Strategy::ThoughtRag => "thought_rag",
            Strategy::DirectFromThought => "direct_from_thought",
            Strategy::ParallelScale => "parallel_scale",
            Strategy::IterativeScale => "iterative_scale",
        };
        f.write_str(name)
    }
}

/// A sampled reasoning trace for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThoughtSample {
    pub qid: String,
    pub text: String,
    pub sampling: SamplingParams,
    pub sample_index: usize,
}

impl ThoughtSample {
    pub fn new(
        qid: String,
        text: String,
        sampling: SamplingParams,
        sample_index: usize,
    ) -> Result<Self, PipelineError> {
        if text.trim().is_empty() {
            return Err(PipelineError::EmptyThought { qid, sample_index });
        }
        Ok(Self {
            qid,
            text,
            sampling,
            sample_index,
        })
    }
}

/// One answering attempt, with the retrieval context it saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub qid: String,
    pub raw_text: String,
    pub extracted_label: Option<char>,
    pub context_chunk_ids: Vec<String>,
    pub strategy: Strategy,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("model returned an empty thought for {qid} (sample {sample_index})")]
    EmptyThought { qid: String, sample_index: usize },
    #[error("thought sample {sample_index} failed: {source}")]
    ScaleSample {
        sample_index: usize,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("iterative round {round} failed: {source}")]
    ScaleRound {
        round: usize,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("scaling budget m must be between 1 and 8, got {m}")]
    InvalidScaleBudget { m: usize },
}

/// The retrieval query for Thought-RAG: question text, newline, thought
/// text.
pub fn thought_query(item: &McqaItem, thought_text: &str) -> String {
    format!("{}\n{}", item.question(), thought_text)
}

/// Samples one reasoning trace for `item`. The prompt is the question
/// (with options, unless configured otherwise) followed by the fixed
/// thought instruction.
pub async fn sample_thought(
    generator: &dyn TextGenerator,
    item: &McqaItem,
    sampling: &SamplingParams,
    sample_index: usize,
    templates: &PromptTemplates,
) -> Result<ThoughtSample, PipelineError> {
    let prompt = prompts::thought_prompt(templates, item.question(), item.options());
    let record = generator
        .generate(&[ChatMessage::user(prompt)], sampling)
        .await?;
    ThoughtSample::new(item.qid().to_string(), record.output_text, *sampling, sample_index)
}

/// Answers `item` from the given retrieved chunks. An empty chunk list is
/// the degenerate no-retrieval case: the prompt simply has no document
/// section.
pub async fn answer_with_context(
    generator: &dyn TextGenerator,
    item: &McqaItem,
    chunks: &[DocumentChunk],
    sampling: &SamplingParams,
    strategy: Strategy,
    templates: &PromptTemplates,
) -> Result<AnswerRecord, PipelineError> {
    let prompt = prompts::answer_prompt(templates, item.question(), item.options(), chunks);
    let record = generator
        .generate(&[ChatMessage::user(prompt)], sampling)
        .await?;
    let extracted = extract_option(&record.output_text, &item.label_set());
    Ok(AnswerRecord {
        qid: item.qid().to_string(),
        raw_text: record.output_text,
        extracted_label: extracted,
        context_chunk_ids: chunks.iter().map(|c| c.id.clone()).collect(),
        strategy,
    })
}

/// Standard question-keyed retrieval followed by context answering.
pub async fn question_rag(
    generator: &dyn TextGenerator,
    searcher: &Searcher,
    item: &McqaItem,
    sampling: &SamplingParams,
    templates: &PromptTemplates,
) -> Result<AnswerRecord, PipelineError> {
    let result = searcher.retrieve(item.question());
    let chunks = searcher.fetch_chunks(&result);
    answer_with_context(generator, item, &chunks, sampling, Strategy::QuestionRag, templates).await
}

/// Thought-keyed retrieval followed by context answering.
pub async fn thought_rag(
    generator: &dyn TextGenerator,
    searcher: &Searcher,
    item: &McqaItem,
    thought: &ThoughtSample,
    sampling: &SamplingParams,
    templates: &PromptTemplates,
) -> Result<AnswerRecord, PipelineError> {
    let result = searcher.retrieve(&thought_query(item, &thought.text));
    let chunks = searcher.fetch_chunks(&result);
    answer_with_context(generator, item, &chunks, sampling, Strategy::ThoughtRag, templates).await
}

/// Completes "The answer is: " after a thought. Annotation context, so
/// decoding is forced deterministic regardless of the sampling argument.
pub async fn direct_answer_from_thought(
    generator: &dyn TextGenerator,
    item: &McqaItem,
    thought: &ThoughtSample,
    templates: &PromptTemplates,
) -> Result<AnswerRecord, PipelineError> {
    let sampling = SamplingParams::annotation();
    let prompt = prompts::completion_prompt(templates, item.question(), item.options(), &thought.text);
    let record = generator
        .generate(&[ChatMessage::user(prompt)], &sampling)
        .await?;
    let extracted = extract_option(&record.output_text, &item.label_set());
    Ok(AnswerRecord {
        qid: item.qid().to_string(),
        raw_text: record.output_text,
        extracted_label: extracted,
        context_chunk_ids: Vec::new(),
        strategy: Strategy::DirectFromThought,
    })
}

fn answer_is_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)answer\s+is\s*:?\s*\(?([A-J])\b").expect("pattern compiles")
    })
}

fn standalone_label_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b([A-J])\b").expect("pattern compiles"))
}

/// Pulls an option label out of free-form completion text.
///
/// The last occurrence of `answer is[:]? <label>` (case-insensitive) wins;
/// failing that, the last standalone uppercase label letter bounded by
/// non-alphanumerics. Only labels in `labels` count. Absence is a value,
/// not an error, and downstream it is scored as incorrect.
pub fn extract_option(text: &str, labels: &BTreeSet<char>) -> Option<char> {
    let explicit = answer_is_pattern()
        .captures_iter(text)
        .filter_map(|caps| {
            let letter = caps.get(1)?.as_str().chars().next()?;
            let upper = letter.to_ascii_uppercase();
            labels.contains(&upper).then_some(upper)
        })
        .last();
    if explicit.is_some() {
        return explicit;
    }
    standalone_label_pattern()
        .captures_iter(text)
        .filter_map(|caps| {
            let letter = caps.get(1)?.as_str().chars().next()?;
            labels.contains(&letter).then_some(letter)
        })
        .last()
}
