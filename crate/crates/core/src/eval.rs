//! Strategy evaluation over MCQA datasets: accuracy reports, strategy
//! comparison, and the top-k and scaling sweeps.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bm25::{Bm25Params, Searcher};
use crate::llm::{SamplingParams, TextGenerator};
use crate::mcqa::McqaItem;
use crate::pipeline::{self, AnswerRecord, PipelineError};
use crate::prompts::PromptTemplates;
use crate::scaling::{self, ScalingConfig, ScalingStrategy, MAX_SCALE_BUDGET};

/// Per-phase decoding defaults: thought and answer sampling at 0.2/0.9,
/// annotation deterministic, scaling at 1.0/1.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseSampling {
    pub thought: SamplingParams,
    pub answer: SamplingParams,
    pub annotation: SamplingParams,
    pub scaling: SamplingParams,
}

impl Default for PhaseSampling {
    fn default() -> Self {
        Self {
            thought: SamplingParams::default(),
            answer: SamplingParams::default(),
            annotation: SamplingParams::annotation(),
            scaling: SamplingParams::scaling(),
        }
    }
}

/// A runnable strategy choice. Scaled variants carry their thought budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum StrategySpec {
    QuestionRag,
    ThoughtRag,
    Parallel { m: usize },
    Iterative { m: usize },
}

impl std::fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StrategySpec::QuestionRag => write!(f, "question-rag"),
            StrategySpec::ThoughtRag => write!(f, "thought-rag"),
            StrategySpec::Parallel { m } => write!(f, "parallel:{m}"),
            StrategySpec::Iterative { m } => write!(f, "iterative:{m}"),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = String;

    /// Accepts `question-rag`, `thought-rag`, `parallel[:m]`, and
    /// `iterative[:m]`; the budget defaults to 1.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, budget) = match s.split_once(':') {
            Some((name, m)) => {
                let m: usize = m
                    .parse()
                    .map_err(|_| format!("invalid scaling budget in {s:?}"))?;
                (name, Some(m))
            }
            None => (s, None),
        };
        match (name, budget) {
            ("question-rag" | "question_rag", None) => Ok(StrategySpec::QuestionRag),
            ("thought-rag" | "thought_rag", None) => Ok(StrategySpec::ThoughtRag),
            ("parallel", m) => Ok(StrategySpec::Parallel { m: m.unwrap_or(1) }),
            ("iterative", m) => Ok(StrategySpec::Iterative { m: m.unwrap_or(1) }),
            _ => Err(format!(
                "unknown strategy {s:?}; expected question-rag, thought-rag, parallel[:m], or iterative[:m]"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation needs at least one item")]
    NoItems,
    #[error("item {qid:?} has no gold answer label")]
    MissingGold { qid: String },
    #[error("item {qid:?} failed in strict mode: {message}")]
    ItemFailed { qid: String, message: String },
    #[error("strategy comparison needs at least 2 strategies, got {0}")]
    TooFewStrategies(usize),
    #[error("sweep values must be positive and distinct: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// One evaluated item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub qid: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<char>,
    pub gold: char,
    pub correct: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub context_chunk_ids: Vec<String>,
}

/// Accuracy report for one strategy over one dataset.
///
/// `accuracy` is exactly `n_correct / n_items`; items whose completion
/// yields no extractable label count as incorrect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_name: String,
    pub strategy: String,
    pub n_items: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub per_item: Vec<ItemOutcome>,
    pub config_snapshot: serde_json::Value,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions<'a> {
    pub dataset_name: &'a str,
    /// Abort on the first item error instead of recording it as incorrect.
    pub strict: bool,
    pub concurrency: usize,
    pub config_snapshot: &'a serde_json::Value,
}

async fn run_strategy(
    generator: &dyn TextGenerator,
    searcher: &Searcher,
    item: &McqaItem,
    spec: StrategySpec,
    phases: &PhaseSampling,
    templates: &PromptTemplates,
) -> Result<AnswerRecord, PipelineError> {
    match spec {
        StrategySpec::QuestionRag => {
            pipeline::question_rag(generator, searcher, item, &phases.answer, templates).await
        }
        StrategySpec::ThoughtRag => {
            let thought =
                pipeline::sample_thought(generator, item, &phases.thought, 0, templates).await?;
            pipeline::thought_rag(generator, searcher, item, &thought, &phases.answer, templates)
                .await
        }
        StrategySpec::Parallel { m } => {
            let config = ScalingConfig {
                m,
                strategy: ScalingStrategy::Parallel,
                sampling: phases.scaling,
                accumulate_context: false,
            };
            scaling::parallel_scale(generator, searcher, item, &config, &phases.answer, templates)
                .await
        }
        StrategySpec::Iterative { m } => {
            let config = ScalingConfig {
                m,
                strategy: ScalingStrategy::Iterative,
                sampling: phases.scaling,
                accumulate_context: false,
            };
            scaling::iterative_scale(generator, searcher, item, &config, &phases.answer, templates)
                .await
        }
    }
}

/// Evaluates one strategy over a dataset.
///
/// Item failures are recorded as incorrect with the error message noted
/// and the run continues, unless strict mode is on. Outcomes are ordered
/// by qid so reports are stable under item-order permutations.
pub async fn evaluate(
    generator: &dyn TextGenerator,
    searcher: &Searcher,
    items: &[McqaItem],
    spec: StrategySpec,
    phases: &PhaseSampling,
    templates: &PromptTemplates,
    options: &EvalOptions<'_>,
) -> Result<EvalReport, EvalError> {
    use futures::stream::{self, StreamExt};

    if items.is_empty() {
        return Err(EvalError::NoItems);
    }
    for item in items {
        if item.answer_label().is_none() {
            return Err(EvalError::MissingGold {
                qid: item.qid().to_string(),
            });
        }
    }

    let work: Vec<_> = items
        .iter()
        .enumerate()
        .map(|(i, item)| async move {
            (i, run_strategy(generator, searcher, item, spec, phases, templates).await)
        })
        .collect();
    let results: Vec<(usize, Result<AnswerRecord, PipelineError>)> = stream::iter(work)
        .buffered(options.concurrency.max(1))
        .collect()
        .await;

    let mut per_item = Vec::with_capacity(items.len());
    for (i, result) in results {
        let item = &items[i];
        let gold = item.answer_label().expect("checked above");
        match result {
            Ok(record) => per_item.push(ItemOutcome {
                qid: item.qid().to_string(),
                predicted: record.extracted_label,
                gold,
                correct: record.extracted_label == Some(gold),
                error: None,
                context_chunk_ids: record.context_chunk_ids,
            }),
            Err(error) => {
                if options.strict {
                    return Err(EvalError::ItemFailed {
                        qid: item.qid().to_string(),
                        message: error.to_string(),
                    });
                }
                per_item.push(ItemOutcome {
                    qid: item.qid().to_string(),
                    predicted: None,
                    gold,
                    correct: false,
                    error: Some(error.to_string()),
                    context_chunk_ids: Vec::new(),
                });
            }
        }
    }
    per_item.sort_by(|a, b| a.qid.cmp(&b.qid));

    let n_correct = per_item.iter().filter(|o| o.correct).count();
    Ok(EvalReport {
        dataset_name: options.dataset_name.to_string(),
        strategy: spec.to_string(),
        n_items: items.len(),
        n_correct,
        accuracy: n_correct as f64 / items.len() as f64,
        per_item,
        config_snapshot: options.config_snapshot.clone(),
    })
}

/// Accuracy difference between two strategies over the same items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyDelta {
    pub strategy_a: String,
    pub strategy_b: String,
    /// accuracy(a) - accuracy(b)
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reports: Vec<EvalReport>,
    pub deltas: Vec<StrategyDelta>,
}

/// Evaluates two or more strategies over the same items and index, and
/// emits pairwise accuracy deltas.
pub async fn compare_strategies(
    generator: &dyn TextGenerator,
    searcher: &Searcher,
    items: &[McqaItem],
    specs: &[StrategySpec],
    phases: &PhaseSampling,
    templates: &PromptTemplates,
    options: &EvalOptions<'_>,
) -> Result<Comparison, EvalError> {
    if specs.len() < 2 {
        return Err(EvalError::TooFewStrategies(specs.len()));
    }
    let mut reports = Vec::with_capacity(specs.len());
    for spec in specs {
        reports.push(evaluate(generator, searcher, items, *spec, phases, templates, options).await?);
    }
    let mut deltas = Vec::new();
    for i in 0..reports.len() {
        for j in (i + 1)..reports.len() {
            deltas.push(StrategyDelta {
                strategy_a: reports[i].strategy.clone(),
                strategy_b: reports[j].strategy.clone(),
                delta: reports[i].accuracy - reports[j].accuracy,
            });
        }
    }
    Ok(Comparison { reports, deltas })
}

/// A plot-ready sweep table: one row per swept value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    /// Swept parameter name, `top_k` or `m`.
    pub parameter: String,
    pub strategy: String,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub accuracy: f64,
    pub n_correct: usize,
    pub n_items: usize,
}

impl SweepTable {
    /// Tab-separated rendering with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{}\taccuracy\tn_correct\tn_items\n", self.parameter);
        for row in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                row.value, row.accuracy, row.n_correct, row.n_items
            ));
        }
        out
    }
}

fn check_sweep_values(values: &[usize], max: Option<usize>) -> Result<(), EvalError> {
    if values.is_empty() {
        return Err(EvalError::InvalidSweep("no values given".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for &v in values {
        if v == 0 {
            return Err(EvalError::InvalidSweep("0 is not a valid value".into()));
        }
        if let Some(max) = max {
            if v > max {
                return Err(EvalError::InvalidSweep(format!("{v} exceeds maximum {max}")));
            }
        }
        if !seen.insert(v) {
            return Err(EvalError::InvalidSweep(format!("duplicate value {v}")));
        }
    }
    Ok(())
}

/// One evaluation run per retrieval depth, all else fixed.
#[allow(clippy::too_many_arguments)]
pub async fn sweep_top_k(
    generator: &dyn TextGenerator,
    searcher: &Searcher,
    items: &[McqaItem],
    spec: StrategySpec,
    k_values: &[usize],
    phases: &PhaseSampling,
    templates: &PromptTemplates,
    options: &EvalOptions<'_>,
) -> Result<SweepTable, EvalError> {
    check_sweep_values(k_values, None)?;
    let mut rows = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let params = Bm25Params {
            top_k: k,
            ..*searcher.params()
        };
        let scoped = searcher.with_params(params);
        let report = evaluate(generator, &scoped, items, spec, phases, templates, options).await?;
        rows.push(SweepRow {
            value: k,
            accuracy: report.accuracy,
            n_correct: report.n_correct,
            n_items: report.n_items,
        });
    }
    Ok(SweepTable {
        parameter: "top_k".into(),
        strategy: spec.to_string(),
        rows,
    })
}

/// One evaluation run per scaling budget, all else fixed. The strategy
/// must be one of the scaled variants; its stored `m` is replaced by each
/// swept value in turn.
#[allow(clippy::too_many_arguments)]
pub async fn sweep_scaling(
    generator: &dyn TextGenerator,
    searcher: &Searcher,
    items: &[McqaItem],
    strategy: ScalingStrategy,
    m_values: &[usize],
    phases: &PhaseSampling,
    templates: &PromptTemplates,
    options: &EvalOptions<'_>,
) -> Result<SweepTable, EvalError> {
    check_sweep_values(m_values, Some(MAX_SCALE_BUDGET))?;
    let mut rows = Vec::with_capacity(m_values.len());
    let mut spec_name = String::new();
    for &m in m_values {
        let spec = match strategy {
            ScalingStrategy::Parallel => StrategySpec::Parallel { m },
            ScalingStrategy::Iterative => StrategySpec::Iterative { m },
        };
        spec_name = spec.to_string();
        let report = evaluate(generator, searcher, items, spec, phases, templates, options).await?;
        rows.push(SweepRow {
            value: m,
            accuracy: report.accuracy,
            n_correct: report.n_correct,
            n_items: report.n_items,
        });
    }
    Ok(SweepTable {
        parameter: "m".into(),
        strategy: spec_name,
        rows,
    })
}

/// Renders sweep rows as a minimal static SVG line chart.
pub fn sweep_chart_svg(table: &SweepTable) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const MARGIN: f64 = 60.0;

    let xs: Vec<f64> = table.rows.iter().map(|r| r.value as f64).collect();
    let ys: Vec<f64> = table.rows.iter().map(|r| r.accuracy).collect();
    let x_min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let x_span = if (x_max - x_min).abs() < f64::EPSILON { 1.0 } else { x_max - x_min };

    let map_x = |x: f64| MARGIN + (x - x_min) / x_span * (W - 2.0 * MARGIN);
    let map_y = |y: f64| H - MARGIN - y.clamp(0.0, 1.0) * (H - 2.0 * MARGIN);

    let points: Vec<String> = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| format!("{:.1},{:.1}", map_x(x), map_y(y)))
        .collect();

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">accuracy vs {} ({})</text>\n",
        W / 2.0,
        table.parameter,
        table.strategy
    ));
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b:.1}\" x2=\"{r:.1}\" y2=\"{b:.1}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b:.1}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN,
        t = MARGIN
    ));
    for (row, point) in table.rows.iter().zip(&points) {
        let (px, py) = point.split_once(',').expect("point format");
        svg.push_str(&format!("<circle cx=\"{px}\" cy=\"{py}\" r=\"3\" fill=\"steelblue\"/>\n"));
        svg.push_str(&format!(
            "<text x=\"{px}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            H - MARGIN + 16.0,
            row.value
        ));
    }
    if points.len() > 1 {
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>\n",
            points.join(" ")
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
