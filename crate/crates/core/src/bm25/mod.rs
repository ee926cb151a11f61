//! Okapi BM25 retrieval over an inverted index.
//!
//! The index is built once from a [`Corpus`](crate::corpus::Corpus) and is
//! immutable afterwards: many simultaneous readers, zero writers.

mod index;
mod search;
mod store;

pub use index::{Bm25Params, IndexError, InvertedIndex, Posting};
pub use search::{bm25_score, retrieve_top_k, RetrievalResult, ScoredHit, Searcher};
pub use store::{load_index, save_index};
