use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub text: String,
    pub label: Label,
    pub split: Split,
}

/// Reads a JSON Lines label file. Unlike the corpus reader this is strict:
/// a malformed line or an empty sentence is an error.
pub fn read_label_file<R: BufRead>(input: R) -> Result<Vec<LabeledSentence>> {
    let mut out = Vec::new();
    for (index, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Input {
            index,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let s: LabeledSentence = serde_json::from_str(&line).map_err(|e| Error::Input {
            index,
            message: e.to_string(),
        })?;
        if s.text.trim().is_empty() {
            return Err(Error::Input {
                index,
                message: "empty sentence text".into(),
            });
        }
        out.push(s);
    }
    Ok(out)
}

/// Per-split class counts, indexed by `Label::index`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub train: [usize; 3],
    pub test: [usize; 3],
}

impl LabelCounts {
    pub fn tally(sentences: &[LabeledSentence]) -> Self {
        let mut c = LabelCounts::default();
        for s in sentences {
            let row = match s.split {
                Split::Train => &mut c.train,
                Split::Test => &mut c.test,
            };
            row[s.label.index()] += 1;
        }
        c
    }

    pub fn train_total(&self) -> usize {
        self.train.iter().sum()
    }

    pub fn test_total(&self) -> usize {
        self.test.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_and_tallies() {
        let data = r#"{"text": "We present X.", "label": "resolved", "split": "train"}
{"text": "Details follow.", "label": "neutral", "split": "test"}

{"text": "Future work may help.", "label": "finding", "split": "train"}
"#;
        let s = read_label_file(data.as_bytes()).unwrap();
        let c = LabelCounts::tally(&s);
        assert_eq!(c.train, [1, 0, 1]);
        assert_eq!(c.test, [0, 1, 0]);
        assert_eq!((c.train_total(), c.test_total()), (2, 1));
    }

    #[test]
    fn rejects_unknown_label_and_empty_text() {
        let bad = r#"{"text": "x", "label": "positive", "split": "train"}"#;
        assert!(matches!(read_label_file(bad.as_bytes()), Err(Error::Input { index: 0, .. })));
        let empty = "\n{\"text\": \" \", \"label\": \"neutral\", \"split\": \"train\"}";
        assert!(matches!(read_label_file(empty.as_bytes()), Err(Error::Input { index: 1, .. })));
    }
}
