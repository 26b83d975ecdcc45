//! Corpus ingestion: topic filtering, offset-based section extraction and the
//! subset-internal citation graph.
//!
//! Input is JSON Lines, one paper per line (see `docs/corpus-format.md`).
//! Offsets are Unicode scalar (character) offsets into `text`, end-exclusive.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CorpusId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BibEntry {
    pub key: String,
    #[serde(default)]
    pub cited_corpusid: Option<CorpusId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotations {
    #[serde(default)]
    pub section_headers: Vec<Span>,
    #[serde(default)]
    pub paragraphs: Vec<Span>,
    #[serde(default)]
    pub bibentry: Vec<BibEntry>,
}

/// One corpus line as it appears on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub corpusid: CorpusId,
    pub title: String,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub annotations: Annotations,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venue: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub header: String,
    pub paragraphs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub corpus_id: CorpusId,
    pub title: String,
    pub sections: Vec<Section>,
    pub insight_text: String,
    /// Local bibliography key to cited corpus id, for resolvable entries.
    pub bib_links: BTreeMap<String, CorpusId>,
    /// Bibliography entries without a cited corpus id.
    pub unresolved_bib_count: usize,
    pub year: Option<i32>,
    pub venue: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub documents_read: usize,
    pub malformed_skipped: usize,
    pub duplicates_skipped: usize,
    pub annotations_skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicSubset {
    pub topic_keyword: String,
    /// Ordered by corpus id.
    pub papers: Vec<PaperRecord>,
    /// Retained source documents, parallel to `papers`.
    pub documents: Vec<RawDocument>,
    pub citation_edges: BTreeSet<(CorpusId, CorpusId)>,
    pub dropped_citation_count: usize,
    pub stats: IngestStats,
}

impl TopicSubset {
    pub fn paper(&self, id: CorpusId) -> Option<&PaperRecord> {
        self.papers
            .binary_search_by_key(&id, |p| p.corpus_id)
            .ok()
            .map(|i| &self.papers[i])
    }

    pub fn ids(&self) -> Vec<CorpusId> {
        self.papers.iter().map(|p| p.corpus_id).collect()
    }
}

/// Header stems that mark a section as insight content.
pub const INSIGHT_HEADER_STEMS: [&str; 3] = ["conclusion", "discuss", "limitation"];

pub fn is_insight_header(header: &str) -> bool {
    let lower = header.to_lowercase();
    INSIGHT_HEADER_STEMS.iter().any(|s| lower.contains(s))
}

/// Maps character offsets to byte offsets of a string.
struct CharOffsets<'a> {
    text: &'a str,
    bytes: Vec<usize>,
}

impl<'a> CharOffsets<'a> {
    fn new(text: &'a str) -> Self {
        let mut bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bytes.push(text.len());
        CharOffsets { text, bytes }
    }

    fn slice(&self, span: Span) -> Option<&'a str> {
        if span.start > span.end || span.end >= self.bytes.len() {
            return None;
        }
        Some(&self.text[self.bytes[span.start]..self.bytes[span.end]])
    }
}

/// Sections, insight text and the number of skipped (out-of-bounds) annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedSections {
    pub sections: Vec<Section>,
    pub insight_text: String,
    pub skipped_annotations: usize,
}

/// Groups paragraphs under the nearest preceding header and collects the
/// paragraphs of insight sections, in document order, joined by `\n`.
pub fn extract_insight_sections(doc: &RawDocument) -> Result<ExtractedSections> {
    let body = doc.text.as_deref().ok_or_else(|| Error::Input {
        index: 0,
        message: format!("document {} has no body text", doc.corpusid),
    })?;
    let offsets = CharOffsets::new(body);
    let mut skipped = 0;

    let mut headers: Vec<(usize, String)> = Vec::new();
    for span in &doc.annotations.section_headers {
        match offsets.slice(*span) {
            Some(s) => headers.push((span.start, s.trim().to_owned())),
            None => skipped += 1,
        }
    }
    headers.sort_by_key(|(start, _)| *start);

    let mut paragraphs: Vec<(usize, &str)> = Vec::new();
    for span in &doc.annotations.paragraphs {
        match offsets.slice(*span) {
            Some(s) => paragraphs.push((span.start, s)),
            None => skipped += 1,
        }
    }
    paragraphs.sort_by_key(|(start, _)| *start);

    // Paragraphs preceding every header land in an unnamed leading section.
    let mut sections: Vec<Section> = Vec::with_capacity(headers.len() + 1);
    let mut leading = Section {
        header: String::new(),
        paragraphs: Vec::new(),
    };
    let mut by_header: Vec<Section> = headers
        .iter()
        .map(|(_, h)| Section {
            header: h.clone(),
            paragraphs: Vec::new(),
        })
        .collect();
    for (start, text) in paragraphs {
        let owner = headers.partition_point(|(h, _)| *h <= start);
        if owner == 0 {
            leading.paragraphs.push(text.to_owned());
        } else {
            by_header[owner - 1].paragraphs.push(text.to_owned());
        }
    }
    if !leading.paragraphs.is_empty() {
        sections.push(leading);
    }
    sections.append(&mut by_header);

    let insight_text = sections
        .iter()
        .filter(|s| is_insight_header(&s.header))
        .flat_map(|s| s.paragraphs.iter().map(String::as_str))
        .collect::<Vec<_>>()
        .join("\n");

    Ok(ExtractedSections {
        sections,
        insight_text,
        skipped_annotations: skipped,
    })
}

fn matches_topic(doc: &RawDocument, needle_lower: &str) -> bool {
    doc.title.to_lowercase().contains(needle_lower)
        || doc
            .text
            .as_deref()
            .is_some_and(|t| t.to_lowercase().contains(needle_lower))
}

fn to_record(doc: &RawDocument, extracted: ExtractedSections) -> PaperRecord {
    let mut bib_links = BTreeMap::new();
    let mut unresolved = 0;
    for entry in &doc.annotations.bibentry {
        match entry.cited_corpusid {
            Some(id) => {
                bib_links.entry(entry.key.clone()).or_insert(id);
            }
            None => unresolved += 1,
        }
    }
    PaperRecord {
        corpus_id: doc.corpusid,
        title: doc.title.clone(),
        sections: extracted.sections,
        insight_text: extracted.insight_text,
        bib_links,
        unresolved_bib_count: unresolved,
        year: doc.year,
        venue: doc.venue.clone(),
    }
}

/// Streams a JSON Lines corpus and keeps the papers whose title or body
/// contains `keyword` (case-insensitive). Malformed lines are skipped and
/// counted; an I/O failure aborts with the failing line index.
pub fn filter_by_topic<R: BufRead>(corpus: R, keyword: &str) -> Result<TopicSubset> {
    let keyword = keyword.trim();
    if keyword.is_empty() {
        return Err(Error::invalid("topic keyword must be non-empty"));
    }
    let needle = keyword.to_lowercase();
    let mut stats = IngestStats::default();
    let mut kept: BTreeMap<CorpusId, (RawDocument, PaperRecord)> = BTreeMap::new();

    for (index, line) in corpus.lines().enumerate() {
        let line = line.map_err(|e| Error::Input {
            index,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        stats.documents_read += 1;
        let doc: RawDocument = match serde_json::from_str(&line) {
            Ok(d) => d,
            Err(e) => {
                log::warn!("skipping malformed document at line {index}: {e}");
                stats.malformed_skipped += 1;
                continue;
            }
        };
        if !matches_topic(&doc, &needle) {
            continue;
        }
        let extracted = match extract_insight_sections(&doc) {
            Ok(x) => x,
            Err(e) => {
                log::warn!("skipping document at line {index}: {e}");
                stats.malformed_skipped += 1;
                continue;
            }
        };
        if kept.contains_key(&doc.corpusid) {
            stats.duplicates_skipped += 1;
            continue;
        }
        stats.annotations_skipped += extracted.skipped_annotations;
        let record = to_record(&doc, extracted);
        kept.insert(doc.corpusid, (doc, record));
    }

    let (documents, papers): (Vec<_>, Vec<_>) = kept.into_values().unzip();
    let mut subset = TopicSubset {
        topic_keyword: keyword.to_owned(),
        papers,
        documents,
        citation_edges: BTreeSet::new(),
        dropped_citation_count: 0,
        stats,
    };
    let (edges, dropped) = build_citation_graph(&subset.papers);
    subset.citation_edges = edges;
    subset.dropped_citation_count = dropped;
    Ok(subset)
}

/// Citation edges (citing, cited) restricted to `papers`, and the number of
/// links that were dropped because they are unresolved or leave the subset.
/// Self-citations are removed without being counted as dropped.
pub fn build_citation_graph(papers: &[PaperRecord]) -> (BTreeSet<(CorpusId, CorpusId)>, usize) {
    let ids: BTreeSet<CorpusId> = papers.iter().map(|p| p.corpus_id).collect();
    let mut edges = BTreeSet::new();
    let mut dropped = 0;
    for paper in papers {
        dropped += paper.unresolved_bib_count;
        for &cited in paper.bib_links.values() {
            if cited == paper.corpus_id {
                continue;
            }
            if ids.contains(&cited) {
                edges.insert((paper.corpus_id, cited));
            } else {
                dropped += 1;
            }
        }
    }
    (edges, dropped)
}

/// In-citation counts inside the subset, for every paper (zero included).
pub fn in_citation_counts(
    ids: &[CorpusId],
    edges: &BTreeSet<(CorpusId, CorpusId)>,
) -> BTreeMap<CorpusId, usize> {
    let mut counts: BTreeMap<CorpusId, usize> = ids.iter().map(|&id| (id, 0)).collect();
    for (_, cited) in edges {
        if let Some(c) = counts.get_mut(cited) {
            *c += 1;
        }
    }
    counts
}

/// Writes the retained documents as JSON Lines in the input schema.
pub fn write_subset_jsonl<W: Write>(subset: &TopicSubset, mut out: W) -> Result<()> {
    for doc in &subset.documents {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes one `citing,cited` pair per line.
pub fn write_edges_csv<W: Write>(edges: &BTreeSet<(CorpusId, CorpusId)>, mut out: W) -> Result<()> {
    for (citing, cited) in edges {
        writeln!(out, "{citing},{cited}")?;
    }
    Ok(())
}

pub fn read_edges_csv<R: BufRead>(input: R) -> Result<BTreeSet<(CorpusId, CorpusId)>> {
    let mut edges = BTreeSet::new();
    for (index, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Input {
            index,
            message: format!("expected `citing,cited`, got {line:?}"),
        };
        let (a, b) = line.split_once(',').ok_or_else(bad)?;
        let a = a.trim().parse().map_err(|_| bad())?;
        let b = b.trim().parse().map_err(|_| bad())?;
        edges.insert((a, b));
    }
    Ok(edges)
}
