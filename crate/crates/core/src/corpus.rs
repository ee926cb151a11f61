//! Document-chunk corpora in a line-delimited record format.
//!
//! Each line is one JSON record with fields `id`, `title`, and `content`,
//! the layout used by pre-chunked corpus snapshots. Unknown fields are
//! ignored so real corpus files load without conversion.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One retrievable corpus unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentChunk {
    /// Unique within a corpus.
    pub id: String,
    /// May be empty.
    pub title: String,
    /// Non-empty after whitespace trimming.
    pub text: String,
}

/// An immutable, ordered collection of chunks with unique ids.
///
/// Safe to share across threads once loaded.
#[derive(Debug, Clone)]
pub struct Corpus {
    chunks: Vec<DocumentChunk>,
    by_id: HashMap<String, usize>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read corpus file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record on line {line}: {source}")]
    MalformedLine {
        line: usize,
        source: serde_json::Error,
    },
    #[error("duplicate chunk id {id:?} on line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("chunk {id:?} on line {line} has empty text")]
    EmptyText { id: String, line: usize },
    #[error("corpus file contains no records")]
    Empty,
}

/// On-disk record layout. Serialization field order is fixed so writing a
/// loaded corpus back out is byte-stable.
#[derive(Serialize, Deserialize)]
struct ChunkRecord {
    id: String,
    #[serde(default)]
    title: String,
    content: String,
}

impl Corpus {
    /// Builds a corpus from in-memory chunks, enforcing the same invariants
    /// as file loading (unique ids, non-empty text).
    pub fn from_chunks(chunks: Vec<DocumentChunk>) -> Result<Self, CorpusError> {
        if chunks.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut by_id = HashMap::with_capacity(chunks.len());
        for (i, chunk) in chunks.iter().enumerate() {
            if chunk.text.trim().is_empty() {
                return Err(CorpusError::EmptyText {
                    id: chunk.id.clone(),
                    line: i + 1,
                });
            }
            if by_id.insert(chunk.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId {
                    id: chunk.id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Self { chunks, by_id })
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> &[DocumentChunk] {
        &self.chunks
    }

    pub fn get(&self, ordinal: usize) -> Option<&DocumentChunk> {
        self.chunks.get(ordinal)
    }

    pub fn get_by_id(&self, id: &str) -> Option<&DocumentChunk> {
        self.by_id.get(id).map(|&i| &self.chunks[i])
    }

    pub fn ordinal_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DocumentChunk> {
        self.chunks.iter()
    }
}

/// Loads a corpus from a line-delimited record file, preserving file order.
///
/// Whitespace-only lines are skipped. Malformed lines, duplicate ids, empty
/// text, and files with zero records are all rejected with the offending
/// line number or id.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);

    let mut chunks = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ChunkRecord = serde_json::from_str(&line)
            .map_err(|source| CorpusError::MalformedLine { line: line_no, source })?;
        if record.content.trim().is_empty() {
            return Err(CorpusError::EmptyText {
                id: record.id,
                line: line_no,
            });
        }
        if by_id.contains_key(&record.id) {
            return Err(CorpusError::DuplicateId {
                id: record.id,
                line: line_no,
            });
        }
        by_id.insert(record.id.clone(), chunks.len());
        chunks.push(DocumentChunk {
            id: record.id,
            title: record.title,
            text: record.content,
        });
    }
    if chunks.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(Corpus { chunks, by_id })
}

/// Writes a corpus back out in the same line-delimited record format.
pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut file = File::create(path.as_ref())?;
    for chunk in corpus.iter() {
        let record = ChunkRecord {
            id: chunk.id.clone(),
            title: chunk.title.clone(),
            content: chunk.text.clone(),
        };
        let line = serde_json::to_string(&record).expect("chunk record serializes");
        writeln!(file, "{line}")?;
    }
    Ok(())
}
