//! BM25 scoring and top-k query answering.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::index::{Bm25Params, InvertedIndex};
use crate::corpus::{Corpus, DocumentChunk};
use crate::tokenize::{tokenize, TokenStream};

/// One retrieval hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub id: String,
    pub score: f64,
}

/// Top-k retrieval output.
///
/// Hits are sorted by score descending, ties broken by chunk id ascending,
/// and chunks scoring 0 are excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub hits: Vec<ScoredHit>,
    pub query_tokens: TokenStream,
}

impl RetrievalResult {
    pub fn chunk_ids(&self) -> Vec<String> {
        self.hits.iter().map(|h| h.id.clone()).collect()
    }
}

/// Smoothed inverse document frequency: `ln((N - df + 0.5) / (df + 0.5) + 1)`.
///
/// Non-negative for every df in `[0, N]`, which keeps high-df terms from
/// producing negative scores.
fn idf(n_docs: usize, doc_freq: usize) -> f64 {
    let n = n_docs as f64;
    let df = doc_freq as f64;
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

fn term_weight(tf: u32, doc_len: u32, avg_doc_len: f64, params: &Bm25Params) -> f64 {
    let tf = f64::from(tf);
    let dl = f64::from(doc_len);
    tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * dl / avg_doc_len))
}

/// Scores one chunk against a query.
///
/// Each query token contributes `idf(t) * tf(k1+1) / (tf + k1(1-b+b*dl/avgdl))`;
/// tokens absent from the chunk contribute 0, and a token repeated in the
/// query contributes once per occurrence.
pub fn bm25_score(
    index: &InvertedIndex,
    query: &TokenStream,
    ordinal: usize,
    params: &Bm25Params,
) -> f64 {
    let Some(doc_len) = index.doc_len(ordinal) else {
        return 0.0;
    };
    let mut score = 0.0;
    for token in query {
        let Some(postings) = index.postings(token) else {
            continue;
        };
        let Ok(pos) = postings.binary_search_by_key(&(ordinal as u32), |p| p.ordinal) else {
            continue;
        };
        let tf = postings[pos].tf;
        score += idf(index.n_docs(), postings.len())
            * term_weight(tf, doc_len, index.avg_doc_len(), params);
    }
    score
}

/// Tokenizes `query_text` and returns up to `params.top_k` hits over the
/// chunks that share at least one term with the query.
///
/// A query that tokenizes to nothing yields an empty result, not an error.
pub fn retrieve_top_k(index: &InvertedIndex, query_text: &str, params: &Bm25Params) -> RetrievalResult {
    let query_tokens = tokenize(query_text);
    if query_tokens.is_empty() || params.top_k == 0 {
        return RetrievalResult {
            hits: Vec::new(),
            query_tokens,
        };
    }

    let mut scores: HashMap<u32, f64> = HashMap::new();
    for token in &query_tokens {
        let Some(postings) = index.postings(token) else {
            continue;
        };
        let term_idf = idf(index.n_docs(), postings.len());
        for posting in postings {
            let doc_len = index.doc_len(posting.ordinal as usize).unwrap_or(0);
            let weight = term_idf * term_weight(posting.tf, doc_len, index.avg_doc_len(), params);
            *scores.entry(posting.ordinal).or_insert(0.0) += weight;
        }
    }

    let mut hits: Vec<ScoredHit> = scores
        .into_iter()
        .filter(|&(_, score)| score > 0.0)
        .map(|(ordinal, score)| ScoredHit {
            id: index
                .doc_id(ordinal as usize)
                .expect("posting ordinal within corpus")
                .to_string(),
            score,
        })
        .collect();
    hits.sort_unstable_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("BM25 scores are finite")
            .then_with(|| a.id.cmp(&b.id))
    });
    hits.truncate(params.top_k);

    RetrievalResult { hits, query_tokens }
}

/// A corpus, its index, and query parameters bundled for pipeline use.
///
/// Immutable after construction; queries are counted so callers can audit
/// retrieval budgets, and can optionally be recorded in full for trace
/// inspection.
#[derive(Debug)]
pub struct Searcher {
    corpus: Arc<Corpus>,
    index: Arc<InvertedIndex>,
    params: Bm25Params,
    queries: AtomicU64,
    query_log: Option<std::sync::Mutex<Vec<String>>>,
}

impl Searcher {
    pub fn new(corpus: Arc<Corpus>, index: Arc<InvertedIndex>, params: Bm25Params) -> Self {
        Self {
            corpus,
            index,
            params,
            queries: AtomicU64::new(0),
            query_log: None,
        }
    }

    /// Records every query string verbatim. Intended for tests and trace
    /// debugging, not long-running service use.
    pub fn with_query_log(mut self) -> Self {
        self.query_log = Some(std::sync::Mutex::new(Vec::new()));
        self
    }

    pub fn logged_queries(&self) -> Vec<String> {
        self.query_log
            .as_ref()
            .map(|log| log.lock().unwrap().clone())
            .unwrap_or_default()
    }

    /// Builds the index from a corpus and wraps both.
    pub fn build(corpus: Corpus, params: Bm25Params) -> Result<Self, super::IndexError> {
        params.validate()?;
        let index = InvertedIndex::build(&corpus)?;
        Ok(Self::new(Arc::new(corpus), Arc::new(index), params))
    }

    /// Same corpus and index under different query parameters. The query
    /// counter starts at zero.
    pub fn with_params(&self, params: Bm25Params) -> Self {
        Self::new(Arc::clone(&self.corpus), Arc::clone(&self.index), params)
    }

    pub fn retrieve(&self, query_text: &str) -> RetrievalResult {
        self.queries.fetch_add(1, Ordering::Relaxed);
        if let Some(log) = &self.query_log {
            log.lock().unwrap().push(query_text.to_string());
        }
        retrieve_top_k(&self.index, query_text, &self.params)
    }

    /// Resolves hits back to their chunks, in hit order.
    pub fn fetch_chunks(&self, result: &RetrievalResult) -> Vec<DocumentChunk> {
        result
            .hits
            .iter()
            .filter_map(|hit| self.corpus.get_by_id(&hit.id).cloned())
            .collect()
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn params(&self) -> &Bm25Params {
        &self.params
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn index(&self) -> &Arc<InvertedIndex> {
        &self.index
    }
}
