//! Thought-before-retrieval RAG over a BM25 corpus index, preference-pair
//! dataset construction with dual-criterion annotation, a numerically
//! verified DPO loss core, two test-time scaling strategies, and a
//! multiple-choice QA evaluation harness.

pub mod bm25;
pub mod config;
pub mod corpus;
pub mod dpo;
pub mod eval;
pub mod llm;
pub mod mcqa;
pub mod pipeline;
pub mod prefs;
pub mod prompts;
pub mod scaling;
pub mod seed;
pub mod tokenize;
