//! Corpus ingestion and the pipeline tokenizer.
//!
//! Documents arrive as JSONL (`{"id": str, "text": str, "source": str?}`, one
//! object per line). Ingestion validates each line, computes token counts, and
//! registers documents in file order then line order, so iteration is stable
//! across runs. After ingestion the store is immutable.
//!
//! One tokenizer serves every length budget and BM25 term extraction: maximal
//! runs of Unicode-alphanumeric characters, lowercased. Splitting happens on
//! the original text so byte spans stay valid for assembly-time slicing.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Score;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{file}:{line}: malformed JSON line: {source}")]
    MalformedLine {
        file: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("duplicate doc_id {doc_id:?}: first at {first_file}:{first_line}, again at {second_file}:{second_line}")]
    DuplicateDocId {
        doc_id: String,
        first_file: PathBuf,
        first_line: usize,
        second_file: PathBuf,
        second_line: usize,
    },
    #[error("unknown doc_id {0:?}")]
    UnknownDocId(String),
    #[error("failed to read {file}: {source}")]
    Io {
        file: PathBuf,
        source: std::io::Error,
    },
}

/// One corpus unit. `token_count` is always recomputed from `text` at
/// ingestion; it is never read from the input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub source: String,
    pub token_count: usize,
}

/// A line skipped during ingestion, with the file-relative position.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkipRecord {
    pub file: PathBuf,
    pub line: usize,
    pub reason: String,
}

/// Aggregate statistics over an ingested corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub total_tokens: usize,
    pub avg_doc_tokens: Score,
    pub source_breakdown: HashMap<String, usize>,
}

/// Immutable document store plus ingestion statistics and skip report.
#[derive(Debug)]
pub struct CorpusStore {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
    stats: CorpusStats,
    skips: Vec<SkipRecord>,
}

#[derive(Deserialize)]
struct RawLine {
    id: String,
    text: String,
    #[serde(default)]
    source: Option<String>,
}

/// Splits `text` into maximal runs of Unicode-alphanumeric characters and
/// lowercases each run. Deterministic; returns an empty vector when no
/// alphanumeric character exists.
pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text)
        .into_iter()
        .map(|(s, e)| text[s..e].to_lowercase())
        .collect()
}

/// Byte spans `(start, end)` of the tokens of `text`, in order. Slicing the
/// original text at a span yields the token before lowercasing, so assembly
/// can cut documents at token boundaries without re-synthesizing text.
pub fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if run_start.is_none() {
                run_start = Some(i);
            }
        } else if let Some(s) = run_start.take() {
            spans.push((s, i));
        }
    }
    if let Some(s) = run_start {
        spans.push((s, text.len()));
    }
    spans
}

/// Token count of `text` under the pipeline tokenizer.
pub fn count_tokens(text: &str) -> usize {
    token_spans(text).len()
}

struct ParsedFile {
    path: PathBuf,
    docs: Vec<(usize, Document)>, // (line number, doc)
    skips: Vec<SkipRecord>,
}

impl CorpusStore {
    /// Ingests JSONL corpus files. Files are parsed in parallel; registration
    /// runs serially in (file order, line order) so duplicate detection and
    /// document ordinals are deterministic.
    ///
    /// Empty-text lines are skipped and reported, not fatal. Malformed JSON
    /// and duplicate ids are errors naming the offending positions.
    pub fn ingest(paths: &[PathBuf]) -> Result<Self, CorpusError> {
        let parsed: Vec<ParsedFile> = paths
            .par_iter()
            .map(|p| parse_file(p))
            .collect::<Result<_, _>>()?;

        let mut docs = Vec::new();
        let mut by_id: HashMap<String, usize> = HashMap::new();
        let mut positions: HashMap<String, (PathBuf, usize)> = HashMap::new();
        let mut skips = Vec::new();
        for file in parsed {
            for (line, doc) in file.docs {
                if let Some((first_file, first_line)) = positions.get(&doc.doc_id) {
                    return Err(CorpusError::DuplicateDocId {
                        doc_id: doc.doc_id,
                        first_file: first_file.clone(),
                        first_line: *first_line,
                        second_file: file.path.clone(),
                        second_line: line,
                    });
                }
                positions.insert(doc.doc_id.clone(), (file.path.clone(), line));
                by_id.insert(doc.doc_id.clone(), docs.len());
                docs.push(doc);
            }
            skips.extend(file.skips);
        }

        let total_tokens: usize = docs.iter().map(|d| d.token_count).sum();
        let mut source_breakdown: HashMap<String, usize> = HashMap::new();
        for d in &docs {
            *source_breakdown.entry(d.source.clone()).or_insert(0) += 1;
        }
        let doc_count = docs.len();
        let stats = CorpusStats {
            doc_count,
            total_tokens,
            avg_doc_tokens: if doc_count == 0 {
                0.0
            } else {
                total_tokens as Score / doc_count as Score
            },
            source_breakdown,
        };
        Ok(Self {
            docs,
            by_id,
            stats,
            skips,
        })
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn skips(&self) -> &[SkipRecord] {
        &self.skips
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Documents in registration order; the position is the document ordinal
    /// used by the inverted index.
    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn get(&self, doc_id: &str) -> Result<&Document, CorpusError> {
        self.by_id
            .get(doc_id)
            .map(|&i| &self.docs[i])
            .ok_or_else(|| CorpusError::UnknownDocId(doc_id.to_string()))
    }

    pub fn ordinal(&self, doc_id: &str) -> Option<usize> {
        self.by_id.get(doc_id).copied()
    }

    pub fn by_ordinal(&self, ordinal: usize) -> &Document {
        &self.docs[ordinal]
    }

    /// Writes the skip report as JSONL (`{"file","line","reason"}`).
    pub fn write_skip_report(&self, path: &Path) -> std::io::Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(File::create(path)?);
        for s in &self.skips {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn parse_file(path: &Path) -> Result<ParsedFile, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        file: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut docs = Vec::new();
    let mut skips = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            file: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            skips.push(SkipRecord {
                file: path.to_path_buf(),
                line: line_no,
                reason: "blank line".to_string(),
            });
            continue;
        }
        let raw: RawLine =
            serde_json::from_str(&line).map_err(|source| CorpusError::MalformedLine {
                file: path.to_path_buf(),
                line: line_no,
                source,
            })?;
        if raw.text.trim().is_empty() {
            skips.push(SkipRecord {
                file: path.to_path_buf(),
                line: line_no,
                reason: "empty text".to_string(),
            });
            continue;
        }
        let token_count = count_tokens(&raw.text);
        docs.push((
            line_no,
            Document {
                doc_id: raw.id,
                token_count,
                source: raw.source.unwrap_or_else(|| "unknown".to_string()),
                text: raw.text,
            },
        ));
    }
    Ok(ParsedFile {
        path: path.to_path_buf(),
        docs,
        skips,
    })
}
