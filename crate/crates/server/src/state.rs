//! Shared service state: the generator backend and the index cache.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use tokio::sync::RwLock;

use thoughtrag_api::{IndexInfo, IndexSource};
use thoughtrag_core::bm25::{self, Bm25Params, InvertedIndex, Searcher};
use thoughtrag_core::config::RunConfig;
use thoughtrag_core::corpus::{load_corpus, Corpus};
use thoughtrag_core::llm::{LlmError, TextGenerator};
use thoughtrag_core::seed;

use crate::error::ApiError;

/// One loaded index plus the corpus it came from. Chunks are needed to
/// materialize retrieval contexts, so an index without its corpus can
/// serve `retrieve` but not the answering pipelines.
pub struct IndexEntry {
    pub info: IndexInfo,
    pub corpus: Option<Arc<Corpus>>,
    pub index: Arc<InvertedIndex>,
}

impl IndexEntry {
    pub fn searcher(&self, params: Bm25Params) -> Result<Searcher, ApiError> {
        let corpus = self.corpus.clone().ok_or_else(|| {
            ApiError::bad_request(
                "index",
                format!(
                    "index {} was loaded from a bare index file; answering pipelines need the \
                     corpus, so name it by corpus path instead",
                    self.info.id
                ),
            )
        })?;
        Ok(Searcher::new(corpus, Arc::clone(&self.index), params))
    }
}

pub struct AppState {
    pub config: RunConfig,
    pub generator: Arc<dyn TextGenerator>,
    indexes: RwLock<HashMap<String, Arc<IndexEntry>>>,
}

/// Deterministic session id for a path-backed index.
fn path_id(kind: &str, path: &Path) -> String {
    let token = format!("{kind}:{}", path.display());
    format!("idx-{:016x}", seed::derive(0, &token))
}

impl AppState {
    pub fn new(config: RunConfig) -> Result<Arc<Self>, LlmError> {
        let generator = config.llm.build_generator()?;
        Ok(Arc::new(Self {
            config,
            generator,
            indexes: RwLock::new(HashMap::new()),
        }))
    }

    pub async fn list_indexes(&self) -> Vec<IndexInfo> {
        let map = self.indexes.read().await;
        let mut infos: Vec<IndexInfo> = map.values().map(|e| e.info.clone()).collect();
        infos.sort_by(|a, b| a.id.cmp(&b.id));
        infos
    }

    pub async fn build_from_corpus(&self, corpus_path: &Path) -> Result<Arc<IndexEntry>, ApiError> {
        let id = path_id("corpus", corpus_path);
        if let Some(entry) = self.indexes.read().await.get(&id) {
            return Ok(Arc::clone(entry));
        }
        let corpus = load_corpus(corpus_path)?;
        let index = InvertedIndex::build(&corpus)?;
        let entry = Arc::new(IndexEntry {
            info: IndexInfo {
                id: id.clone(),
                n_docs: index.n_docs(),
                n_terms: index.n_terms(),
                avg_doc_len: index.avg_doc_len(),
                corpus_path: Some(corpus_path.to_path_buf()),
            },
            corpus: Some(Arc::new(corpus)),
            index: Arc::new(index),
        });
        self.indexes.write().await.insert(id, Arc::clone(&entry));
        Ok(entry)
    }

    pub async fn load_from_index_file(&self, path: &Path) -> Result<Arc<IndexEntry>, ApiError> {
        let id = path_id("file", path);
        if let Some(entry) = self.indexes.read().await.get(&id) {
            return Ok(Arc::clone(entry));
        }
        let index = bm25::load_index(path)?;
        let entry = Arc::new(IndexEntry {
            info: IndexInfo {
                id: id.clone(),
                n_docs: index.n_docs(),
                n_terms: index.n_terms(),
                avg_doc_len: index.avg_doc_len(),
                corpus_path: None,
            },
            corpus: None,
            index: Arc::new(index),
        });
        self.indexes.write().await.insert(id, Arc::clone(&entry));
        Ok(entry)
    }

    pub async fn resolve(&self, source: &IndexSource) -> Result<Arc<IndexEntry>, ApiError> {
        match source {
            IndexSource::Id { id } => self
                .indexes
                .read()
                .await
                .get(id)
                .cloned()
                .ok_or_else(|| ApiError::not_found(format!("no index with id {id:?}"))),
            IndexSource::IndexFile { path } => self.load_from_index_file(path).await,
            IndexSource::Corpus { path } => self.build_from_corpus(path).await,
        }
    }

    /// Query parameters for a request: service defaults with an optional
    /// top-k override.
    pub fn params_with_top_k(&self, top_k: Option<usize>) -> Bm25Params {
        match top_k {
            Some(top_k) => Bm25Params {
                top_k,
                ..self.config.bm25
            },
            None => self.config.bm25,
        }
    }

    pub fn save_index_to(&self, entry: &IndexEntry, path: &PathBuf) -> Result<(), ApiError> {
        bm25::save_index(&entry.index, path)?;
        Ok(())
    }
}
