//! Request and response types for the thoughtrag HTTP API.
//!
//! All endpoints are JSON over POST (plus two GETs) under the `/v1`
//! prefix. File paths in requests are resolved on the service host; when
//! the CLI hosts the service in-process they are ordinary local paths.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use thoughtrag_core::bm25::{Bm25Params, RetrievalResult};
use thoughtrag_core::dpo::{DpoReport, LogProbRecord};
use thoughtrag_core::eval::{EvalReport, PhaseSampling, StrategyDelta, StrategySpec, SweepTable};
use thoughtrag_core::llm::SamplingParams;
use thoughtrag_core::mcqa::McqaItem;
use thoughtrag_core::pipeline::{AnswerRecord, ThoughtSample};
use thoughtrag_core::prefs::{PreferencePair, PrefsSummary};
use thoughtrag_core::scaling::ScalingStrategy;

pub const API_PREFIX: &str = "/v1";

pub mod paths {
    pub const HEALTH: &str = "/v1/health";
    pub const INDEX_BUILD: &str = "/v1/index/build";
    pub const INDEX_LOAD: &str = "/v1/index/load";
    pub const INDEX_LIST: &str = "/v1/index";
    pub const RETRIEVE: &str = "/v1/retrieve";
    pub const ASK: &str = "/v1/ask";
    pub const PREFS_BUILD: &str = "/v1/prefs/build";
    pub const DPO_CHECK: &str = "/v1/dpo/check";
    pub const EVAL: &str = "/v1/eval";
}

/// Error payload returned with every non-2xx status. `category` is a
/// stable machine-parseable token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub category: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub version: String,
}

/// How a request names the index to run against: a session id returned by
/// a previous build or load, an index file on disk, or a corpus file to
/// index on demand. File-backed sources are cached by path, so repeating
/// them is cheap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum IndexSource {
    Id { id: String },
    IndexFile { path: PathBuf },
    Corpus { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexInfo {
    pub id: String,
    pub n_docs: usize,
    pub n_terms: usize,
    pub avg_doc_len: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildIndexRequest {
    pub corpus_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Bm25Params>,
    /// When set, the built index is also persisted to this path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub save_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildIndexResponse {
    pub index: IndexInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saved_to: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadIndexRequest {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListIndexesResponse {
    pub indexes: Vec<IndexInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveRequest {
    pub index: IndexSource,
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveResponse {
    pub result: RetrievalResult,
}

/// One question, either a dataset item or a bare question string.
/// Exactly one of `item` and `question` must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskRequest {
    pub index: IndexSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<McqaItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    pub strategy: StrategySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<PhaseSampling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResponse {
    pub record: AnswerRecord,
    /// The sampled thought, for strategies that produce exactly one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thought: Option<ThoughtSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildPrefsRequest {
    pub index: IndexSource,
    pub dataset_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_thoughts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_answers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_pairs_per_item: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concurrency: Option<usize>,
    /// When set, the service also writes the export file at this path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub export_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildPrefsResponse {
    pub pairs: Vec<PreferencePair>,
    pub summary: PrefsSummary,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exported_to: Option<PathBuf>,
}

/// Log-prob records may be inlined or read from a file on the service
/// host; exactly one of the two must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpoCheckRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<LogProbRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub length_normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpoCheckResponse {
    pub report: DpoReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EvalMode {
    Single {
        strategy: StrategySpec,
    },
    Compare {
        strategies: Vec<StrategySpec>,
    },
    SweepTopK {
        strategy: StrategySpec,
        k_values: Vec<usize>,
    },
    SweepScaling {
        strategy: ScalingStrategy,
        m_values: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub index: IndexSource,
    pub dataset_path: PathBuf,
    /// Defaults to the dataset file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_name: Option<String>,
    pub mode: EvalMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<PhaseSampling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concurrency: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResponse {
    pub reports: Vec<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<StrategyDelta>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<SweepTable>,
}
