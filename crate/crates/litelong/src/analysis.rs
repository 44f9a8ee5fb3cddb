//! Post-hoc analytics: abstraction depth of topics against a hypernym graph,
//! and descriptive statistics over emitted samples.
//!
//! The hypernym graph arrives as a TSV edge list (`child<TAB>parent`), e.g.
//! exported from a lexical database. Depth of a term is its minimum edge
//! distance from any root (a term that never appears as a child). Topics with
//! a mean token depth below 3 count as highly abstract, above 9 as highly
//! specific.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{count_tokens, tokenize, CorpusStore};
use crate::debate::Topic;
use crate::num::Real;
use crate::Score;

pub const ABSTRACT_DEPTH_BELOW: Score = 3.0;
pub const SPECIFIC_DEPTH_ABOVE: Score = 9.0;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("hypernyms line {line}: expected child<TAB>parent, got {content:?}")]
    BadEdge { line: usize, content: String },
    #[error("hypernym graph has a cycle through {0:?}")]
    Cycle(String),
    #[error("samples line {line}: {detail}")]
    BadSampleLine { line: usize, detail: String },
}

/// How a term's depth is measured when it has several root paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthMode {
    /// Minimum edge distance to any root (default).
    #[default]
    MinDistance,
    /// Mean length over all distinct root paths.
    MeanOverPaths,
}

/// Directed acyclic hypernym graph; edges point child -> parent.
#[derive(Debug, Clone)]
pub struct HypernymGraph {
    parents: HashMap<String, Vec<String>>,
    depths: HashMap<String, usize>,
    mean_depths: HashMap<String, Score>,
    mode: DepthMode,
    roots: Vec<String>,
    max_depth: usize,
}

impl HypernymGraph {
    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        Self::load_with_mode(path, DepthMode::default())
    }

    pub fn load_with_mode(path: &Path, mode: DepthMode) -> Result<Self, AnalysisError> {
        let raw = std::fs::read_to_string(path).map_err(|source| AnalysisError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_tsv_with_mode(&raw, mode)
    }

    pub fn from_tsv_str(raw: &str) -> Result<Self, AnalysisError> {
        Self::from_tsv_with_mode(raw, DepthMode::default())
    }

    pub fn from_tsv_with_mode(raw: &str, mode: DepthMode) -> Result<Self, AnalysisError> {
        let mut parents: HashMap<String, Vec<String>> = HashMap::new();
        let mut children: HashMap<String, Vec<String>> = HashMap::new();
        let mut terms: BTreeMap<String, ()> = BTreeMap::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (child, parent) = match (fields.next(), fields.next()) {
                (Some(c), Some(p)) if !c.trim().is_empty() && !p.trim().is_empty() => {
                    (c.trim().to_lowercase(), p.trim().to_lowercase())
                }
                _ => {
                    return Err(AnalysisError::BadEdge {
                        line: i + 1,
                        content: line.to_string(),
                    })
                }
            };
            terms.insert(child.clone(), ());
            terms.insert(parent.clone(), ());
            children.entry(parent.clone()).or_default().push(child.clone());
            parents.entry(child).or_default().push(parent);
        }

        let roots: Vec<String> = terms
            .keys()
            .filter(|t| !parents.contains_key(*t))
            .cloned()
            .collect();
        if roots.is_empty() && !terms.is_empty() {
            let any = terms.keys().next().unwrap().clone();
            return Err(AnalysisError::Cycle(any));
        }

        // Multi-source BFS from the roots along child edges gives each term
        // its minimum distance to any root.
        let mut depths: HashMap<String, usize> = HashMap::new();
        let mut queue: VecDeque<(String, usize)> = roots.iter().map(|r| (r.clone(), 0)).collect();
        while let Some((term, depth)) = queue.pop_front() {
            if depths.contains_key(&term) {
                continue;
            }
            depths.insert(term.clone(), depth);
            if let Some(kids) = children.get(&term) {
                for kid in kids {
                    if !depths.contains_key(kid) {
                        queue.push_back((kid.clone(), depth + 1));
                    }
                }
            }
        }
        if let Some(unreached) = terms.keys().find(|t| !depths.contains_key(*t)) {
            // Only a cycle can keep a term unreachable from every root.
            return Err(AnalysisError::Cycle(unreached.clone()));
        }
        let max_depth = depths.values().copied().max().unwrap_or(0);

        // Path-counting DP for the mean-over-paths mode: count(t) is the
        // number of distinct root paths, total(t) their summed length.
        let mut mean_depths = HashMap::new();
        if mode == DepthMode::MeanOverPaths {
            let mut memo: HashMap<String, (f64, f64)> = HashMap::new();
            fn visit(
                term: &str,
                parents: &HashMap<String, Vec<String>>,
                memo: &mut HashMap<String, (f64, f64)>,
            ) -> (f64, f64) {
                if let Some(&cached) = memo.get(term) {
                    return cached;
                }
                let value = match parents.get(term) {
                    None => (1.0, 0.0),
                    Some(ps) => {
                        let mut count = 0.0;
                        let mut total = 0.0;
                        for p in ps {
                            let (pc, pt) = visit(p, parents, memo);
                            count += pc;
                            total += pt + pc;
                        }
                        (count, total)
                    }
                };
                memo.insert(term.to_string(), value);
                value
            }
            for term in terms.keys() {
                let (count, total) = visit(term, &parents, &mut memo);
                mean_depths.insert(term.clone(), total / count);
            }
        }

        Ok(Self {
            parents,
            depths,
            mean_depths,
            mode,
            roots,
            max_depth,
        })
    }

    pub fn roots(&self) -> &[String] {
        &self.roots
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn parents_of(&self, term: &str) -> Option<&[String]> {
        self.parents.get(term).map(Vec::as_slice)
    }

    /// Minimum edge distance from any root, or `None` for unknown terms
    /// (the caller counts those, it does not fail).
    pub fn term_depth(&self, term: &str) -> Option<usize> {
        self.depths.get(term).copied()
    }

    /// Depth under the configured [`DepthMode`].
    pub fn effective_depth(&self, term: &str) -> Option<Score> {
        match self.mode {
            DepthMode::MinDistance => self.term_depth(term).map(|d| d as Score),
            DepthMode::MeanOverPaths => self.mean_depths.get(term).copied(),
        }
    }
}

/// Abstraction profile of a topic set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbstractionReport {
    /// Mean depth over in-graph tokens, per topic. Topics with no in-graph
    /// tokens are excluded here and counted under `unknown_terms`.
    pub per_topic_depth: BTreeMap<String, Score>,
    pub share_abstract: Score,
    pub share_specific: Score,
    pub unknown_terms: usize,
}

/// Mean of the in-graph token depths of `text`, if any token resolves.
pub fn mean_depth<S: Real>(graph: &HypernymGraph, text: &str) -> Option<S> {
    let mut sum = S::zero();
    let mut found = 0usize;
    for token in tokenize(text) {
        if let Some(d) = graph.effective_depth(&token) {
            sum = sum + S::from_f64(d).expect("depth fits scalar");
            found += 1;
        }
    }
    if found == 0 {
        None
    } else {
        Some(sum / S::from_count(found))
    }
}

/// Classifies topics by mean hypernym depth. Shares are fractions of the
/// classified topics (unknown-only topics are excluded from both sides).
pub fn classify_topics(graph: &HypernymGraph, topics: &[Topic]) -> AbstractionReport {
    let mut per_topic_depth = BTreeMap::new();
    let mut unknown_terms = 0usize;
    for topic in topics {
        match mean_depth::<Score>(graph, &topic.text) {
            Some(depth) => {
                per_topic_depth.insert(topic.topic_id.clone(), depth);
            }
            None => unknown_terms += 1,
        }
    }
    let classified = per_topic_depth.len();
    let (mut abstract_count, mut specific_count) = (0usize, 0usize);
    for depth in per_topic_depth.values() {
        if *depth < ABSTRACT_DEPTH_BELOW {
            abstract_count += 1;
        }
        if *depth > SPECIFIC_DEPTH_ABOVE {
            specific_count += 1;
        }
    }
    let share = |count: usize| {
        if classified == 0 {
            0.0
        } else {
            count as Score / classified as Score
        }
    };
    AbstractionReport {
        per_topic_depth,
        share_abstract: share(abstract_count),
        share_specific: share(specific_count),
        unknown_terms,
    }
}

/// Descriptive statistics over a samples.jsonl file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SampleStats {
    pub samples: usize,
    pub total_tokens: usize,
    /// token_count -> sample count.
    pub token_count_histogram: BTreeMap<usize, usize>,
    /// distinct docs per sample -> sample count.
    pub docs_per_sample_histogram: BTreeMap<usize, usize>,
    /// role -> segment count.
    pub role_mix: BTreeMap<String, usize>,
    /// corpus source -> segment count (needs the corpus for the doc->source
    /// mapping; empty when unavailable).
    pub source_mix: BTreeMap<String, usize>,
}

pub fn sample_stats(path: &Path, corpus: Option<&CorpusStore>) -> Result<SampleStats, AnalysisError> {
    #[derive(Deserialize)]
    struct Line {
        token_count: usize,
        segments: Vec<crate::assembly::Segment>,
        text: String,
    }

    let raw = std::fs::read_to_string(path).map_err(|source| AnalysisError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut stats = SampleStats::default();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(line).map_err(|e| AnalysisError::BadSampleLine {
            line: i + 1,
            detail: e.to_string(),
        })?;
        if count_tokens(&parsed.text) != parsed.token_count {
            return Err(AnalysisError::BadSampleLine {
                line: i + 1,
                detail: "text token count disagrees with recorded token_count".to_string(),
            });
        }
        stats.samples += 1;
        stats.total_tokens += parsed.token_count;
        *stats
            .token_count_histogram
            .entry(parsed.token_count)
            .or_insert(0) += 1;
        let mut docs: Vec<&str> = parsed.segments.iter().map(|s| s.doc_id.as_str()).collect();
        docs.sort_unstable();
        docs.dedup();
        *stats
            .docs_per_sample_histogram
            .entry(docs.len())
            .or_insert(0) += 1;
        for segment in &parsed.segments {
            let role = match segment.role {
                crate::assembly::SegmentRole::Document => "document",
                crate::assembly::SegmentRole::MetaChunk => "meta_chunk",
                crate::assembly::SegmentRole::HardNegative => "hard_negative",
            };
            *stats.role_mix.entry(role.to_string()).or_insert(0) += 1;
            if let Some(corpus) = corpus {
                if let Ok(doc) = corpus.get(&segment.doc_id) {
                    *stats.source_mix.entry(doc.source.clone()).or_insert(0) += 1;
                }
            }
        }
    }
    Ok(stats)
}
