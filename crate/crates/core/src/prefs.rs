//! Mixed preference-pair dataset construction.
//!
//! Thought pairs: each sampled thought is annotated on two criteria, the
//! direct answer completed after the thought and the answer produced by
//! retrieval keyed on the thought. A thought is chosen only when both
//! annotations are correct; one chosen and one rejected thought form a
//! pair. Answer pairs: completions sampled over a fixed retrieved context
//! are chosen when they extract to the gold label, and chosen/rejected
//! completions are paired off in sample order. All pairs are shuffled with
//! a seeded permutation before export.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bm25::Searcher;
use crate::llm::{SamplingParams, TextGenerator};
use crate::mcqa::McqaItem;
use crate::pipeline::{
    self, answer_with_context, direct_answer_from_thought, sample_thought, thought_rag,
    AnswerRecord, PipelineError, Strategy, ThoughtSample,
};
use crate::prompts::{self, PromptTemplates};
use crate::seed;

/// Dual-criterion annotation of one thought.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThoughtAnnotation {
    /// Completing the answer cue directly after the thought yields the gold
    /// label.
    pub direct_correct: bool,
    /// Retrieval-augmented answering keyed on the thought yields the gold
    /// label.
    pub rag_correct: bool,
    pub direct_record: AnswerRecord,
    pub rag_record: AnswerRecord,
}

impl ThoughtAnnotation {
    /// A thought is chosen only when both criteria hold.
    pub fn is_chosen(&self) -> bool {
        self.direct_correct && self.rag_correct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Thought,
    Answer,
}

impl std::fmt::Display for PairKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PairKind::Thought => f.write_str("thought"),
            PairKind::Answer => f.write_str("answer"),
        }
    }
}

/// A (chosen, rejected) completion pair sharing one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub qid: String,
    pub kind: PairKind,
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
}

impl PreferencePair {
    pub fn new(
        qid: String,
        kind: PairKind,
        prompt: String,
        chosen: String,
        rejected: String,
    ) -> Result<Self, PrefsError> {
        if chosen == rejected {
            return Err(PrefsError::DegeneratePair { qid });
        }
        Ok(Self {
            qid,
            kind,
            prompt,
            chosen,
            rejected,
        })
    }
}

/// The assembled dataset: pairs in seeded-shuffle order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceDataset {
    pub pairs: Vec<PreferencePair>,
    pub seed: u64,
}

/// Construction knobs. Defaults are 15 thought attempts, 5 answer
/// attempts, and 2 answer pairs per item against 1 thought pair, which
/// preserves a 1:2 thought-to-answer pair ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrefsConfig {
    pub n_thoughts: usize,
    pub n_answers: usize,
    pub answer_pairs_per_item: usize,
    pub sampling: SamplingParams,
    pub seed: u64,
}

impl Default for PrefsConfig {
    fn default() -> Self {
        Self {
            n_thoughts: 15,
            n_answers: 5,
            answer_pairs_per_item: 2,
            sampling: SamplingParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum PrefsError {
    #[error("item {qid:?} has no gold answer label")]
    MissingGold { qid: String },
    #[error("chosen and rejected texts are identical for {qid:?}")]
    DegeneratePair { qid: String },
    #[error("no preference pairs were produced; check the dataset and sampling configuration")]
    EmptyDataset,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("failed to read or write dataset file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed pair record on line {line}: {message}")]
    MalformedLine { line: usize, message: String },
}

/// Per-item and aggregate construction statistics, written alongside the
/// exported dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrefsSummary {
    pub items_processed: usize,
    pub thought_pairs: usize,
    pub answer_pairs: usize,
    pub thoughts_sampled: usize,
    pub thoughts_chosen: usize,
    pub thoughts_rejected: usize,
    pub answers_sampled: usize,
    pub degenerate_pairs_skipped: usize,
    pub per_item: Vec<ItemYield>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemYield {
    pub qid: String,
    pub thought_pairs: usize,
    pub answer_pairs: usize,
}

fn gold_label(item: &McqaItem) -> Result<char, PrefsError> {
    item.answer_label().ok_or_else(|| PrefsError::MissingGold {
        qid: item.qid().to_string(),
    })
}

/// Runs both annotation criteria for one thought at temperature 0 and
/// compares each extracted label to gold. An extraction failure counts as
/// incorrect, never as an error.
pub async fn annotate_thought(
    generator: &dyn TextGenerator,
    searcher: &Searcher,
    item: &McqaItem,
    thought: &ThoughtSample,
    templates: &PromptTemplates,
) -> Result<ThoughtAnnotation, PrefsError> {
    let gold = gold_label(item)?;
    let direct_record = direct_answer_from_thought(generator, item, thought, templates).await?;
    let annotation_sampling = SamplingParams::annotation();
    let rag_record =
        thought_rag(generator, searcher, item, thought, &annotation_sampling, templates).await?;
    Ok(ThoughtAnnotation {
        direct_correct: direct_record.extracted_label == Some(gold),
        rag_correct: rag_record.extracted_label == Some(gold),
        direct_record,
        rag_record,
    })
}

/// The thought-sampling phase of one item: every sample with its
/// annotation, plus the pair it yielded, if any.
#[derive(Debug)]
pub struct ThoughtPhase {
    pub samples: Vec<ThoughtSample>,
    pub annotations: Vec<ThoughtAnnotation>,
    pub pair: Option<PreferencePair>,
    pub degenerate_skipped: usize,
}

impl ThoughtPhase {
    /// The thought used to anchor answer-pair retrieval: the first chosen
    /// thought when one exists, else the first sampled thought.
    pub fn context_thought(&self) -> Option<&ThoughtSample> {
        self.annotations
            .iter()
            .position(ThoughtAnnotation::is_chosen)
            .map(|i| &self.samples[i])
            .or_else(|| self.samples.first())
    }
}

/// Samples `n_thoughts` thoughts, annotates each, and emits at most one
/// pair: the first chosen thought (by sample index) against the first
/// rejected one. Returns no pair when either side is missing.
pub async fn build_thought_pairs(
    generator: &dyn TextGenerator,
    searcher: &Searcher,
    item: &McqaItem,
    config: &PrefsConfig,
    templates: &PromptTemplates,
) -> Result<ThoughtPhase, PrefsError> {
    gold_label(item)?;
    let mut samples = Vec::with_capacity(config.n_thoughts);
    let mut annotations = Vec::with_capacity(config.n_thoughts);
    for sample_index in 0..config.n_thoughts {
        let thought =
            sample_thought(generator, item, &config.sampling, sample_index, templates).await?;
        let annotation = annotate_thought(generator, searcher, item, &thought, templates).await?;
        samples.push(thought);
        annotations.push(annotation);
    }

    let first_chosen = annotations.iter().position(ThoughtAnnotation::is_chosen);
    let first_rejected = annotations.iter().position(|a| !a.is_chosen());
    let mut degenerate_skipped = 0;
    let pair = match (first_chosen, first_rejected) {
        (Some(c), Some(r)) => {
            let prompt = prompts::thought_prompt(templates, item.question(), item.options());
            match PreferencePair::new(
                item.qid().to_string(),
                PairKind::Thought,
                prompt,
                samples[c].text.clone(),
                samples[r].text.clone(),
            ) {
                Ok(pair) => Some(pair),
                Err(PrefsError::DegeneratePair { .. }) => {
                    degenerate_skipped += 1;
                    None
                }
                Err(other) => return Err(other),
            }
        }
        _ => None,
    };

    Ok(ThoughtPhase {
        samples,
        annotations,
        pair,
        degenerate_skipped,
    })
}

/// Samples `n_answers` completions over the context retrieved with the
/// given thought and pairs chosen (correct) with rejected (incorrect)
/// completions in sample order, up to `answer_pairs_per_item`.
pub async fn build_answer_pairs(
    generator: &dyn TextGenerator,
    searcher: &Searcher,
    item: &McqaItem,
    thought: &ThoughtSample,
    config: &PrefsConfig,
    templates: &PromptTemplates,
) -> Result<(Vec<PreferencePair>, usize, usize), PrefsError> {
    let gold = gold_label(item)?;
    let retrieval = searcher.retrieve(&pipeline::thought_query(item, &thought.text));
    let chunks = searcher.fetch_chunks(&retrieval);
    let prompt = prompts::answer_prompt(templates, item.question(), item.options(), &chunks);

    let mut chosen_texts = Vec::new();
    let mut rejected_texts = Vec::new();
    for _ in 0..config.n_answers {
        let record = answer_with_context(
            generator,
            item,
            &chunks,
            &config.sampling,
            Strategy::ThoughtRag,
            templates,
        )
        .await?;
        if record.extracted_label == Some(gold) {
            chosen_texts.push(record.raw_text);
        } else {
            rejected_texts.push(record.raw_text);
        }
    }

    let sampled = chosen_texts.len() + rejected_texts.len();
    let mut pairs = Vec::new();
    let mut degenerate_skipped = 0;
    for (chosen, rejected) in chosen_texts.into_iter().zip(rejected_texts) {
        if pairs.len() == config.answer_pairs_per_item {
            break;
        }
        match PreferencePair::new(
            item.qid().to_string(),
            PairKind::Answer,
            prompt.clone(),
            chosen,
            rejected,
        ) {
            Ok(pair) => pairs.push(pair),
            Err(PrefsError::DegeneratePair { .. }) => degenerate_skipped += 1,
            Err(other) => return Err(other),
        }
    }
    Ok((pairs, sampled, degenerate_skipped))
}

struct ItemOutcome {
    qid: String,
    thought_pair: Option<PreferencePair>,
    answer_pairs: Vec<PreferencePair>,
    thoughts_sampled: usize,
    thoughts_chosen: usize,
    answers_sampled: usize,
    degenerate_skipped: usize,
}

async fn build_item_pairs(
    generator: &dyn TextGenerator,
    searcher: &Searcher,
    item: &McqaItem,
    config: &PrefsConfig,
    templates: &PromptTemplates,
) -> Result<ItemOutcome, PrefsError> {
    let phase = build_thought_pairs(generator, searcher, item, config, templates).await?;
    let thoughts_chosen = phase
        .annotations
        .iter()
        .filter(|a| a.is_chosen())
        .count();
    let mut degenerate_skipped = phase.degenerate_skipped;

    let (answer_pairs, answers_sampled) = match phase.context_thought() {
        Some(thought) => {
            let (pairs, sampled, degenerate) =
                build_answer_pairs(generator, searcher, item, thought, config, templates).await?;
            degenerate_skipped += degenerate;
            (pairs, sampled)
        }
        None => (Vec::new(), 0),
    };

    Ok(ItemOutcome {
        qid: item.qid().to_string(),
        thoughts_sampled: phase.samples.len(),
        thoughts_chosen,
        answers_sampled,
        degenerate_skipped,
        thought_pair: phase.pair,
        answer_pairs,
    })
}

/// Runs both builders over every item with a bounded worker pool, then
/// applies a seeded uniform permutation to the collected pairs. Item
/// results are folded in item order before the shuffle, so concurrency
/// cannot perturb the final order. Zero total pairs is an error, since an
/// empty dataset always signals misconfiguration.
pub async fn build_dataset(
    generator: &dyn TextGenerator,
    searcher: &Searcher,
    items: &[McqaItem],
    config: &PrefsConfig,
    templates: &PromptTemplates,
    concurrency: usize,
) -> Result<(PreferenceDataset, PrefsSummary), PrefsError> {
    use futures::stream::{self, StreamExt};

    let work: Vec<_> = items
        .iter()
        .map(|item| build_item_pairs(generator, searcher, item, config, templates))
        .collect();
    let outcomes: Vec<Result<ItemOutcome, PrefsError>> = stream::iter(work)
        .buffered(concurrency.max(1))
        .collect()
        .await;

    let mut pairs = Vec::new();
    let mut summary = PrefsSummary::default();
    for outcome in outcomes {
        let outcome = outcome?;
        summary.items_processed += 1;
        summary.thoughts_sampled += outcome.thoughts_sampled;
        summary.thoughts_chosen += outcome.thoughts_chosen;
        summary.thoughts_rejected += outcome.thoughts_sampled - outcome.thoughts_chosen;
        summary.answers_sampled += outcome.answers_sampled;
        summary.degenerate_pairs_skipped += outcome.degenerate_skipped;

        let thought_pairs = usize::from(outcome.thought_pair.is_some());
        summary.thought_pairs += thought_pairs;
        summary.answer_pairs += outcome.answer_pairs.len();
        summary.per_item.push(ItemYield {
            qid: outcome.qid,
            thought_pairs,
            answer_pairs: outcome.answer_pairs.len(),
        });

        pairs.extend(outcome.thought_pair);
        pairs.extend(outcome.answer_pairs);
    }

    if pairs.is_empty() {
        return Err(PrefsError::EmptyDataset);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, "prefs-shuffle"));
    pairs.shuffle(&mut rng);

    Ok((
        PreferenceDataset {
            pairs,
            seed: config.seed,
        },
        summary,
    ))
}

/// Writes one JSON record per pair:
/// `{"prompt", "chosen", "rejected", "kind", "qid"}`. Newlines inside
/// texts are escaped by JSON encoding, so re-import round-trips exactly.
pub fn export_dataset(pairs: &[PreferencePair], path: impl AsRef<Path>) -> Result<(), PrefsError> {
    #[derive(Serialize)]
    struct ExportRecord<'a> {
        prompt: &'a str,
        chosen: &'a str,
        rejected: &'a str,
        kind: PairKind,
        qid: &'a str,
    }

    let mut file = File::create(path.as_ref())?;
    for pair in pairs {
        let record = ExportRecord {
            prompt: &pair.prompt,
            chosen: &pair.chosen,
            rejected: &pair.rejected,
            kind: pair.kind,
            qid: &pair.qid,
        };
        let line = serde_json::to_string(&record).expect("pair record serializes");
        writeln!(file, "{line}")?;
    }
    Ok(())
}

pub fn import_dataset(path: impl AsRef<Path>) -> Result<Vec<PreferencePair>, PrefsError> {
    #[derive(Deserialize)]
    struct ImportRecord {
        prompt: String,
        chosen: String,
        rejected: String,
        kind: PairKind,
        qid: String,
    }

    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ImportRecord =
            serde_json::from_str(&line).map_err(|e| PrefsError::MalformedLine {
                line: idx + 1,
                message: e.to_string(),
            })?;
        pairs.push(PreferencePair::new(
            record.qid,
            record.kind,
            record.prompt,
            record.chosen,
            record.rejected,
        )?);
    }
    Ok(pairs)
}
