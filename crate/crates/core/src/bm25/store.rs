//! On-disk index persistence.
//!
//! Format v1, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  "TRBM25IX"
//! version u8       1
//! n_docs  u32
//!   per doc:  id_len u32, id bytes (UTF-8), doc_len u32
//! n_terms u32
//!   per term (lexicographic order): term_len u32, term bytes,
//!     n_postings u32, then (ordinal u32, tf u32) pairs
//! ```
//!
//! Terms are written in sorted order so saving the same index twice
//! produces byte-identical files, and save then load round-trips exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::index::{IndexError, InvertedIndex, Posting};

const MAGIC: &[u8; 8] = b"TRBM25IX";
const VERSION: u8 = 1;

pub fn save_index(index: &InvertedIndex, path: impl AsRef<Path>) -> Result<(), IndexError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;

    write_u32(&mut w, index.n_docs() as u32)?;
    for ordinal in 0..index.n_docs() {
        write_str(&mut w, index.doc_id(ordinal).expect("ordinal in range"))?;
        write_u32(&mut w, index.doc_len(ordinal).expect("ordinal in range"))?;
    }

    let mut terms: Vec<&String> = index.postings_map().keys().collect();
    terms.sort_unstable();
    write_u32(&mut w, terms.len() as u32)?;
    for term in terms {
        write_str(&mut w, term)?;
        let postings = index.postings(term).expect("term exists");
        write_u32(&mut w, postings.len() as u32)?;
        for posting in postings {
            write_u32(&mut w, posting.ordinal)?;
            write_u32(&mut w, posting.tf)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<InvertedIndex, IndexError> {
    let mut r = BufReader::new(File::open(path.as_ref())?);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| IndexError::BadMagic)?;
    if &magic != MAGIC {
        return Err(IndexError::BadMagic);
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version)?;
    if version[0] != VERSION {
        return Err(IndexError::UnsupportedVersion { found: version[0] });
    }

    let n_docs = read_u32(&mut r)? as usize;
    let mut doc_ids = Vec::with_capacity(n_docs);
    let mut doc_len = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        doc_ids.push(read_str(&mut r)?);
        doc_len.push(read_u32(&mut r)?);
    }

    let n_terms = read_u32(&mut r)? as usize;
    let mut postings: HashMap<String, Vec<Posting>> = HashMap::with_capacity(n_terms);
    for _ in 0..n_terms {
        let term = read_str(&mut r)?;
        let n_postings = read_u32(&mut r)? as usize;
        let mut list = Vec::with_capacity(n_postings);
        for _ in 0..n_postings {
            let ordinal = read_u32(&mut r)?;
            let tf = read_u32(&mut r)?;
            if ordinal as usize >= n_docs {
                return Err(IndexError::Corrupt(format!(
                    "posting ordinal {ordinal} out of range for {n_docs} documents"
                )));
            }
            if tf == 0 {
                return Err(IndexError::Corrupt(format!("zero term frequency for {term:?}")));
            }
            list.push(Posting { ordinal, tf });
        }
        postings.insert(term, list);
    }

    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(IndexError::Corrupt("trailing bytes after postings".into()));
    }

    InvertedIndex::from_parts(postings, doc_len, doc_ids)
}

fn write_u32(w: &mut impl Write, value: u32) -> std::io::Result<()> {
    w.write_all(&value.to_le_bytes())
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_u32(r: &mut impl Read) -> Result<u32, IndexError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| IndexError::Corrupt("unexpected end of file".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_str(r: &mut impl Read) -> Result<String, IndexError> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|_| IndexError::Corrupt("unexpected end of file".into()))?;
    String::from_utf8(buf).map_err(|_| IndexError::Corrupt("invalid UTF-8 string".into()))
}
