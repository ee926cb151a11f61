//! Multiple-choice question items and line-delimited dataset files.
//!
//! Dataset format, one JSON record per line:
//! `{"qid": str, "question": str, "options": {"A": str, ...}, "answer": "A"}`.
//! The `answer` field is required for training and evaluation; inference
//! items may omit it.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One multiple-choice question.
///
/// Options carry 4 to 10 entries labeled with consecutive letters starting
/// at `A`. When present, `answer_label` is one of the option labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "McqaRecord", into = "McqaRecord")]
pub struct McqaItem {
    qid: String,
    question: String,
    options: BTreeMap<char, String>,
    answer_label: Option<char>,
}

#[derive(Debug, Error)]
pub enum McqaError {
    #[error("failed to read dataset file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record on line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("item {qid:?}: {message}")]
    InvalidItem { qid: String, message: String },
    #[error("dataset file contains no records")]
    Empty,
}

#[derive(Serialize, Deserialize)]
struct McqaRecord {
    qid: String,
    question: String,
    options: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer: Option<String>,
}

impl TryFrom<McqaRecord> for McqaItem {
    type Error = McqaError;

    fn try_from(record: McqaRecord) -> Result<Self, Self::Error> {
        let mut options = BTreeMap::new();
        for (label, text) in record.options {
            let mut chars = label.chars();
            let (Some(ch), None) = (chars.next(), chars.next()) else {
                return Err(McqaError::InvalidItem {
                    qid: record.qid,
                    message: format!("option label {label:?} is not a single letter"),
                });
            };
            options.insert(ch, text);
        }
        let answer = match record.answer {
            None => None,
            Some(label) => {
                let mut chars = label.chars();
                let (Some(ch), None) = (chars.next(), chars.next()) else {
                    return Err(McqaError::InvalidItem {
                        qid: record.qid,
                        message: format!("answer label {label:?} is not a single letter"),
                    });
                };
                Some(ch)
            }
        };
        McqaItem::new(record.qid, record.question, options, answer)
    }
}

impl From<McqaItem> for McqaRecord {
    fn from(item: McqaItem) -> Self {
        McqaRecord {
            qid: item.qid,
            question: item.question,
            options: item
                .options
                .into_iter()
                .map(|(label, text)| (label.to_string(), text))
                .collect(),
            answer: item.answer_label.map(|c| c.to_string()),
        }
    }
}

impl McqaItem {
    pub fn new(
        qid: String,
        question: String,
        options: BTreeMap<char, String>,
        answer_label: Option<char>,
    ) -> Result<Self, McqaError> {
        let invalid = |message: String| McqaError::InvalidItem {
            qid: qid.clone(),
            message,
        };
        if question.trim().is_empty() {
            return Err(invalid("question text is empty".into()));
        }
        if !(4..=10).contains(&options.len()) {
            return Err(invalid(format!("expected 4 to 10 options, got {}", options.len())));
        }
        for (i, label) in options.keys().enumerate() {
            let expected = (b'A' + i as u8) as char;
            if *label != expected {
                return Err(invalid(format!(
                    "option labels must be consecutive letters from A; found {label:?} where {expected:?} was expected"
                )));
            }
        }
        if let Some(answer) = answer_label {
            if !options.contains_key(&answer) {
                return Err(invalid(format!("answer label {answer:?} is not an option")));
            }
        }
        Ok(Self {
            qid,
            question,
            options,
            answer_label,
        })
    }

    /// A free-form question with no options, for ad-hoc querying outside
    /// any dataset. Extraction always comes back absent because the label
    /// set is empty; dataset loading never produces such items.
    pub fn adhoc(question: String) -> Self {
        Self {
            qid: "adhoc".into(),
            question,
            options: BTreeMap::new(),
            answer_label: None,
        }
    }

    pub fn qid(&self) -> &str {
        &self.qid
    }

    pub fn question(&self) -> &str {
        &self.question
    }

    pub fn options(&self) -> &BTreeMap<char, String> {
        &self.options
    }

    pub fn answer_label(&self) -> Option<char> {
        self.answer_label
    }

    pub fn label_set(&self) -> BTreeSet<char> {
        self.options.keys().copied().collect()
    }
}

/// Loads a dataset file, preserving record order.
pub fn load_mcqa_dataset(path: impl AsRef<Path>) -> Result<Vec<McqaItem>, McqaError> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: McqaItem = serde_json::from_str(&line).map_err(|e| McqaError::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    if items.is_empty() {
        return Err(McqaError::Empty);
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    pub(crate) fn four_options() -> BTreeMap<char, String> {
        BTreeMap::from([
            ('A', "alpha".to_string()),
            ('B', "beta".to_string()),
            ('C', "gamma".to_string()),
            ('D', "delta".to_string()),
        ])
    }

    #[test]
    fn accepts_valid_item() {
        let item = McqaItem::new("q1".into(), "Which?".into(), four_options(), Some('B')).unwrap();
        assert_eq!(item.answer_label(), Some('B'));
        assert_eq!(item.label_set().len(), 4);
    }

    #[test]
    fn rejects_answer_outside_options() {
        assert!(McqaItem::new("q1".into(), "Which?".into(), four_options(), Some('E')).is_err());
    }

    #[test]
    fn rejects_gapped_labels() {
        let mut options = four_options();
        options.remove(&'B');
        options.insert('E', "epsilon".into());
        assert!(McqaItem::new("q1".into(), "Which?".into(), options, None).is_err());
    }

    #[test]
    fn rejects_too_few_options() {
        let mut options = four_options();
        options.remove(&'D');
        assert!(McqaItem::new("q1".into(), "Which?".into(), options, None).is_err());
    }

    #[test]
    fn loads_dataset_lines() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            r#"{{"qid": "q1", "question": "Which?", "options": {{"A": "a", "B": "b", "C": "c", "D": "d"}}, "answer": "C"}}"#
        )
        .unwrap();
        writeln!(
            file,
            r#"{{"qid": "q2", "question": "What?", "options": {{"A": "a", "B": "b", "C": "c", "D": "d"}}}}"#
        )
        .unwrap();
        file.flush().unwrap();

        let items = load_mcqa_dataset(file.path()).unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].answer_label(), Some('C'));
        assert_eq!(items[1].answer_label(), None);
    }

    #[test]
    fn dataset_errors_carry_line_numbers() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            r#"{{"qid": "q1", "question": "Which?", "options": {{"A": "a", "B": "b", "C": "c", "D": "d"}}}}"#
        )
        .unwrap();
        writeln!(file, "not json").unwrap();
        file.flush().unwrap();

        match load_mcqa_dataset(file.path()).unwrap_err() {
            McqaError::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("expected MalformedLine, got {other:?}"),
        }
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let file = tempfile::NamedTempFile::new().unwrap();
        assert!(matches!(load_mcqa_dataset(file.path()), Err(McqaError::Empty)));
    }

    #[test]
    fn item_serde_round_trip() {
        let item = McqaItem::new("q1".into(), "Which?".into(), four_options(), Some('A')).unwrap();
        let json = serde_json::to_string(&item).unwrap();
        let back: McqaItem = serde_json::from_str(&json).unwrap();
        assert_eq!(item, back);
    }
}
