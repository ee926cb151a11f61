//! Test-time scaling: parallel thought concatenation and iterative
//! retrieval-conditioned thought refinement.
//!
//! Both strategies spend a budget of `m` thought generations. Parallel
//! scaling samples all `m` up front, joins them into one extended thought,
//! and retrieves once. Iterative scaling alternates thought generation and
//! retrieval `m` times, conditioning each round on the previous round's
//! documents, then answers from the final round's context. At `m = 1` both
//! reduce to plain Thought-RAG.

use serde::{Deserialize, Serialize};

use crate::bm25::Searcher;
use crate::llm::{ChatMessage, SamplingParams, TextGenerator};
use crate::mcqa::McqaItem;
use crate::pipeline::{
    answer_with_context, sample_thought, thought_query, AnswerRecord, PipelineError, Strategy,
    ThoughtSample,
};
use crate::prompts::{self, PromptTemplates};

pub const MAX_SCALE_BUDGET: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingStrategy {
    Parallel,
    Iterative,
}

impl std::fmt::Display for ScalingStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalingStrategy::Parallel => f.write_str("parallel"),
            ScalingStrategy::Iterative => f.write_str("iterative"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    /// Thought budget, 1 to 8.
    pub m: usize,
    pub strategy: ScalingStrategy,
    /// Decoding for the thought generations. Defaults to temperature 1.0,
    /// top-p 1.0 for diversity under parallel scaling.
    pub sampling: SamplingParams,
    /// In iterative mode, condition each round on every previously
    /// retrieved document instead of only the latest round's. Off by
    /// default; accumulation overflows model context at large `m`.
    pub accumulate_context: bool,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            m: 1,
            strategy: ScalingStrategy::Parallel,
            sampling: SamplingParams::scaling(),
            accumulate_context: false,
        }
    }
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.m == 0 || self.m > MAX_SCALE_BUDGET {
            return Err(PipelineError::InvalidScaleBudget { m: self.m });
        }
        Ok(())
    }
}

/// Samples `m` thoughts, concatenates them in sample order separated by
/// blank lines, retrieves once with the extended thought, and answers
/// once.
///
/// Thought generations run sequentially in index order so scripted
/// backends consume their response sequences deterministically.
pub async fn parallel_scale(
    generator: &dyn TextGenerator,
    searcher: &Searcher,
    item: &McqaItem,
    config: &ScalingConfig,
    answer_sampling: &SamplingParams,
    templates: &PromptTemplates,
) -> Result<AnswerRecord, PipelineError> {
    config.validate()?;
    let mut thoughts = Vec::with_capacity(config.m);
    for sample_index in 0..config.m {
        let thought = sample_thought(generator, item, &config.sampling, sample_index, templates)
            .await
            .map_err(|source| PipelineError::ScaleSample {
                sample_index,
                source: Box::new(source),
            })?;
        thoughts.push(thought.text);
    }
    let extended = thoughts.join("\n\n");

    let retrieval = searcher.retrieve(&format!("{}\n{}", item.question(), extended));
    let chunks = searcher.fetch_chunks(&retrieval);
    let mut record = answer_with_context(
        generator,
        item,
        &chunks,
        answer_sampling,
        Strategy::ParallelScale,
        templates,
    )
    .await?;
    if config.m == 1 {
        record.strategy = Strategy::ThoughtRag;
    }
    Ok(record)
}

/// Round 1 samples a thought from the bare question; each later round
/// samples a thought conditioned on the documents retrieved with the
/// previous round's thought-formed query. After round `m` the final
/// round's retrieval context feeds one answer generation.
pub async fn iterative_scale(
    generator: &dyn TextGenerator,
    searcher: &Searcher,
    item: &McqaItem,
    config: &ScalingConfig,
    answer_sampling: &SamplingParams,
    templates: &PromptTemplates,
) -> Result<AnswerRecord, PipelineError> {
    config.validate()?;

    let mut context = Vec::new();
    for round in 1..=config.m {
        let fail = |source: PipelineError| PipelineError::ScaleRound {
            round,
            source: Box::new(source),
        };
        let thought_text = if round == 1 {
            sample_thought(generator, item, &config.sampling, round - 1, templates)
                .await
                .map_err(fail)?
                .text
        } else {
            let prompt = prompts::iterative_thought_prompt(
                templates,
                item.question(),
                item.options(),
                &context,
            );
            let generation = generator
                .generate(&[ChatMessage::user(prompt)], &config.sampling)
                .await
                .map_err(|e| fail(e.into()))?;
            ThoughtSample::new(
                item.qid().to_string(),
                generation.output_text,
                config.sampling,
                round - 1,
            )
            .map_err(fail)?
            .text
        };

        let retrieval = searcher.retrieve(&thought_query(item, &thought_text));
        let round_chunks = searcher.fetch_chunks(&retrieval);
        if config.accumulate_context {
            for chunk in round_chunks {
                if !context.iter().any(|c: &crate::corpus::DocumentChunk| c.id == chunk.id) {
                    context.push(chunk);
                }
            }
        } else {
            context = round_chunks;
        }
    }

    let mut record = answer_with_context(
        generator,
        item,
        &context,
        answer_sampling,
        Strategy::IterativeScale,
        templates,
    )
    .await?;
    if config.m == 1 {
        record.strategy = Strategy::ThoughtRag;
    }
    Ok(record)
}
