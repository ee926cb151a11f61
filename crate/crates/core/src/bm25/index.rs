//! Inverted index construction and corpus statistics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::tokenize::tokenize;

/// Okapi BM25 parameters.
///
/// `top_k` bounds result-set size; a value of 0 is accepted at query time
/// and yields an empty result (the degenerate no-retrieval case).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    /// Term-frequency saturation.
    pub k1: f64,
    /// Length normalization, in `[0, 1]`.
    pub b: f64,
    /// Maximum number of hits returned per query.
    pub top_k: usize,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: 1.2,
            b: 0.75,
            top_k: 32,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), IndexError> {
        if !self.k1.is_finite() || self.k1 < 0.0 {
            return Err(IndexError::InvalidParams(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !self.b.is_finite() || !(0.0..=1.0).contains(&self.b) {
            return Err(IndexError::InvalidParams(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// One (chunk, term-frequency) entry in a postings list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    /// Position of the chunk in the source corpus.
    pub ordinal: u32,
    /// Occurrence count of the term in the chunk, always >= 1.
    pub tf: u32,
}

/// Immutable inverted index over a corpus.
///
/// Postings lists are sorted by chunk ordinal ascending. Title tokens are
/// prepended to content tokens, so titles contribute to both term
/// frequencies and document lengths.
#[derive(Debug, Clone)]
pub struct InvertedIndex {
    postings: HashMap<String, Vec<Posting>>,
    doc_len: Vec<u32>,
    avg_doc_len: f64,
    doc_ids: Vec<String>,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
    #[error("failed to read or write index file: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an index file (bad magic header)")]
    BadMagic,
    #[error("unsupported index format version {found}")]
    UnsupportedVersion { found: u8 },
    #[error("corrupt index file: {0}")]
    Corrupt(String),
}

impl InvertedIndex {
    /// Builds the index in one pass over the corpus.
    pub fn build(corpus: &Corpus) -> Result<Self, IndexError> {
        if corpus.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }

        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(corpus.len());
        let mut doc_ids = Vec::with_capacity(corpus.len());
        let mut total_len: u64 = 0;

        for (ordinal, chunk) in corpus.iter().enumerate() {
            let mut counts: HashMap<String, u32> = HashMap::new();
            let mut len = 0u32;
            for token in tokenize(&chunk.title).iter().chain(tokenize(&chunk.text).iter()) {
                *counts.entry(token.clone()).or_insert(0) += 1;
                len += 1;
            }
            // Chunks are visited in ordinal order, so each postings list
            // stays sorted by construction.
            for (term, tf) in counts {
                postings.entry(term).or_default().push(Posting {
                    ordinal: ordinal as u32,
                    tf,
                });
            }
            doc_len.push(len);
            doc_ids.push(chunk.id.clone());
            total_len += u64::from(len);
        }
        for list in postings.values_mut() {
            list.sort_unstable_by_key(|p| p.ordinal);
        }

        let avg_doc_len = total_len as f64 / doc_len.len() as f64;
        Ok(Self {
            postings,
            doc_len,
            avg_doc_len,
            doc_ids,
        })
    }

    pub(super) fn from_parts(
        postings: HashMap<String, Vec<Posting>>,
        doc_len: Vec<u32>,
        doc_ids: Vec<String>,
    ) -> Result<Self, IndexError> {
        if doc_len.is_empty() || doc_len.len() != doc_ids.len() {
            return Err(IndexError::Corrupt("document table size mismatch".into()));
        }
        let total: u64 = doc_len.iter().map(|&l| u64::from(l)).sum();
        let avg_doc_len = total as f64 / doc_len.len() as f64;
        Ok(Self {
            postings,
            doc_len,
            avg_doc_len,
            doc_ids,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.doc_len.len()
    }

    pub fn n_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn doc_len(&self, ordinal: usize) -> Option<u32> {
        self.doc_len.get(ordinal).copied()
    }

    pub fn doc_id(&self, ordinal: usize) -> Option<&str> {
        self.doc_ids.get(ordinal).map(String::as_str)
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.postings.get(term).map(Vec::as_slice)
    }

    /// Number of chunks containing `term`.
    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub(super) fn postings_map(&self) -> &HashMap<String, Vec<Posting>> {
        &self.postings
    }
}
