//! Deterministic text analysis for BM25 indexing and querying.
//!
//! Lowercases the input and splits on every maximal run of non-alphanumeric
//! characters. No stemming, no stopword removal, so the same text always
//! produces the same tokens regardless of platform or locale.

use serde::{Deserialize, Serialize};

/// An ordered list of lowercase tokens.
///
/// Every token is non-empty and contains no whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenStream {
    tokens: Vec<String>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.tokens.iter()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.tokens
    }

    /// Joins tokens with single spaces. `tokenize(stream.join())` yields the
    /// same stream back.
    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }
}

impl From<TokenStream> for Vec<String> {
    fn from(stream: TokenStream) -> Self {
        stream.tokens
    }
}

impl<'a> IntoIterator for &'a TokenStream {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.tokens.iter()
    }
}

/// Splits `text` into lowercase alphanumeric runs.
///
/// Empty input yields an empty stream; this is never an error.
pub fn tokenize(text: &str) -> TokenStream {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lower in ch.to_lowercase() {
                current.push(lower);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    TokenStream { tokens }
}
