//! Rule-based sentence segmentation for scientific prose.
//!
//! A boundary is placed after `.`, `!` or `?` (plus any trailing closing
//! quotes or brackets) when whitespace follows and the next token starts with
//! an uppercase letter, a digit or an opening bracket. A period that closes a
//! protected abbreviation ("et al.", "Fig.", "e.g.", single capital initials)
//! never ends a sentence. Paragraph breaks (`\n`) always do.
//!
//! Offsets are character offsets into the segmented text.

use std::collections::BTreeSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusId;
use crate::error::{Error, Result};
use crate::text::{is_stopword, parse_word_list};

const ABBREVIATIONS_DATA: &str = include_str!("../data/abbreviations.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub paper_id: CorpusId,
    pub index: usize,
    pub text: String,
    pub char_range: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverrideAction {
    Split,
    Join,
}

/// A manual correction: force (`split`) or suppress (`join`) a sentence
/// start at character `position` of a paper's insight text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentOverride {
    pub paper_id: CorpusId,
    pub position: usize,
    pub action: OverrideAction,
}

pub fn read_overrides<R: BufRead>(input: R) -> Result<Vec<SegmentOverride>> {
    let mut out = Vec::new();
    for (index, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let o = serde_json::from_str(&line).map_err(|e| Error::Input {
            index,
            message: e.to_string(),
        })?;
        out.push(o);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    /// Protected abbreviations, each ending in a period.
    pub abbreviations: Vec<String>,
    /// Treat a lone capital letter followed by a period as an initial.
    pub protect_initials: bool,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            abbreviations: parse_word_list(ABBREVIATIONS_DATA).map(str::to_owned).collect(),
            protect_initials: true,
        }
    }
}

impl SegmenterConfig {
    pub fn with_extra_abbreviations<I, S>(mut self, extra: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.abbreviations.extend(extra.into_iter().map(Into::into));
        self
    }
}

#[derive(Debug, Clone)]
pub struct Segmenter {
    abbreviations: Vec<Vec<char>>,
    protect_initials: bool,
}

impl Default for Segmenter {
    fn default() -> Self {
        Segmenter::new(&SegmenterConfig::default())
    }
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, ')' | ']' | '"' | '\'' | '\u{201d}' | '\u{2019}')
}

fn is_starter(c: char) -> bool {
    c.is_uppercase() || c.is_ascii_digit() || matches!(c, '(' | '[' | '"' | '\u{201c}')
}

impl Segmenter {
    pub fn new(cfg: &SegmenterConfig) -> Self {
        let mut abbreviations: Vec<Vec<char>> = cfg
            .abbreviations
            .iter()
            .map(|a| a.trim())
            .filter(|a| a.ends_with('.'))
            .map(|a| a.chars().collect())
            .collect();
        abbreviations.sort();
        abbreviations.dedup();
        Segmenter {
            abbreviations,
            protect_initials: cfg.protect_initials,
        }
    }

    /// True when the period at `dot` closes a protected token. `next` is the
    /// start of the following word.
    fn is_protected(&self, chars: &[char], dot: usize, next: usize) -> bool {
        let word_start = |at: usize| at == 0 || !chars[at - 1].is_alphanumeric();
        for abbr in &self.abbreviations {
            let len = abbr.len();
            if len > dot + 1 {
                continue;
            }
            let from = dot + 1 - len;
            if chars[from..=dot] == abbr[..] && word_start(from) {
                return true;
            }
        }
        // An initial precedes a name, not a function word: "J. Smith" vs "X. It".
        self.protect_initials
            && dot >= 1
            && chars[dot - 1].is_uppercase()
            && word_start(dot - 1)
            && !is_stopword(&next_word(chars, next))
    }

    /// Character offsets at which sentences start, before overrides.
    fn sentence_starts(&self, chars: &[char]) -> BTreeSet<usize> {
        let n = chars.len();
        let mut starts = BTreeSet::new();
        let skip_ws = |mut k: usize| {
            while k < n && chars[k].is_whitespace() {
                k += 1;
            }
            k
        };
        let first = skip_ws(0);
        if first < n {
            starts.insert(first);
        }
        let mut i = 0;
        while i < n {
            let c = chars[i];
            if c == '\n' {
                let k = skip_ws(i);
                if k < n {
                    starts.insert(k);
                }
                i = k.max(i + 1);
                continue;
            }
            if !is_terminal(c) {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j < n && is_terminal(chars[j]) {
                j += 1;
            }
            while j < n && is_closer(chars[j]) {
                j += 1;
            }
            let last_terminal = {
                let mut t = j - 1;
                while !is_terminal(chars[t]) {
                    t -= 1;
                }
                t
            };
            if j < n && chars[j].is_whitespace() {
                let k = skip_ws(j);
                let protected = chars[last_terminal] == '.'
                    && last_terminal == i
                    && self.is_protected(chars, i, k);
                if k < n && is_starter(chars[k]) && !protected {
                    starts.insert(k);
                }
            }
            i = j;
        }
        starts
    }

    /// Character ranges of the sentences of `text`.
    pub fn segment_ranges(&self, text: &str) -> Vec<(usize, usize)> {
        let chars: Vec<char> = text.chars().collect();
        ranges_from_starts(&chars, &self.sentence_starts(&chars))
    }

    /// Segments one paper's insight text, applying that paper's overrides.
    pub fn segment(
        &self,
        paper_id: CorpusId,
        text: &str,
        overrides: &[SegmentOverride],
    ) -> Vec<SentenceSpan> {
        let chars: Vec<char> = text.chars().collect();
        let mut starts = self.sentence_starts(&chars);
        for o in overrides.iter().filter(|o| o.paper_id == paper_id) {
            match o.action {
                OverrideAction::Split => {
                    let mut p = o.position;
                    while p < chars.len() && chars[p].is_whitespace() {
                        p += 1;
                    }
                    if p < chars.len() {
                        starts.insert(p);
                    }
                }
                OverrideAction::Join => {
                    starts.remove(&o.position);
                }
            }
        }
        // A join may have removed the very first start.
        if let Some(first) = chars.iter().position(|c| !c.is_whitespace()) {
            starts.insert(first);
        }
        ranges_from_starts(&chars, &starts)
            .into_iter()
            .enumerate()
            .map(|(index, (s, e))| SentenceSpan {
                paper_id,
                index,
                text: chars[s..e].iter().collect(),
                char_range: (s, e),
            })
            .collect()
    }
}

fn next_word(chars: &[char], from: usize) -> String {
    chars[from.min(chars.len())..]
        .iter()
        .take_while(|c| c.is_alphanumeric())
        .flat_map(|c| c.to_lowercase())
        .collect()
}

fn ranges_from_starts(chars: &[char], starts: &BTreeSet<usize>) -> Vec<(usize, usize)> {
    let bounds: Vec<usize> = starts.iter().copied().collect();
    let mut out = Vec::with_capacity(bounds.len());
    for (i, &s) in bounds.iter().enumerate() {
        let mut e = bounds.get(i + 1).copied().unwrap_or(chars.len());
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if e > s {
            out.push((s, e));
        }
    }
    out
}

/// Convenience wrapper using the bundled abbreviation list.
pub fn segment(paper_id: CorpusId, text: &str) -> Vec<SentenceSpan> {
    Segmenter::default().segment(paper_id, text, &[])
}
