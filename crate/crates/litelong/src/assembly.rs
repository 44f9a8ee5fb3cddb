//! Packing retrieved documents into exact-target-length samples.
//!
//! Two strategies:
//!
//! - `shuffle_concat`: seeded Fisher-Yates over the hits in rank order, then
//!   greedy packing into consecutive samples. The document that overflows a
//!   sample is truncated head-first to land exactly on the target; its tail
//!   is discarded.
//! - `nextlong`: pick one source document (seeded-uniform), cut it into
//!   consecutive meta-chunks, and mine hard negatives per meta-chunk from
//!   the other retrieved documents' chunks by BM25 similarity against the
//!   meta-chunk's opening tokens. Negatives precede their meta-chunk; when
//!   material runs out before the target, extra negatives backfill the tail.
//!
//! Samples record provenance as token-offset segments into corpus documents;
//! [`write_samples`] materializes text by slicing original documents at token
//! boundaries, so the token count of the written text always equals the
//! recorded `token_count`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{token_spans, CorpusStore};
use crate::retrieval::{Bm25Params, InvertedIndex, RetrievalResult};
use crate::Score;

/// Tokens from the head of a meta-chunk used as the hard-negative query.
pub const NEGATIVE_QUERY_TOKENS: usize = 64;

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("doc {0:?} referenced by retrieval result is not in the corpus")]
    UnknownDoc(String),
    #[error("target_tokens must be >= 1")]
    BadTarget,
    #[error("meta_chunk_tokens must be >= 1")]
    BadChunkSize,
    #[error("writing samples: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentRole {
    Document,
    MetaChunk,
    HardNegative,
}

/// A token-offset slice of one corpus document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub doc_id: String,
    pub start_token: usize,
    pub end_token: usize,
    pub role: SegmentRole,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end_token - self.start_token
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssemblyStrategy {
    ShuffleConcat,
    Nextlong,
}

impl AssemblyStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            AssemblyStrategy::ShuffleConcat => "shuffle_concat",
            AssemblyStrategy::Nextlong => "nextlong",
        }
    }
}

/// An ordered, provenance-tracked pack of document segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongSample {
    pub sample_id: String,
    pub topic_id: String,
    pub segments: Vec<Segment>,
    pub token_count: usize,
    pub strategy: AssemblyStrategy,
    pub seed: u64,
}

/// Samples plus the bookkeeping the manifest reports.
#[derive(Debug, Clone, Default)]
pub struct AssemblyOutcome {
    pub samples: Vec<LongSample>,
    pub dropped_short: usize,
    pub warnings: Vec<String>,
}

fn doc_tokens(corpus: &CorpusStore, doc_id: &str) -> Result<Vec<String>, AssembleError> {
    let doc = corpus
        .get(doc_id)
        .map_err(|_| AssembleError::UnknownDoc(doc_id.to_string()))?;
    Ok(crate::corpus::tokenize(&doc.text))
}

/// Seeded shuffle + greedy exact packing. Complete samples hit
/// `target_tokens` exactly; a shorter trailing sample is emitted only when
/// `allow_short` is set, otherwise dropped and counted.
pub fn assemble_shuffle(
    result: &RetrievalResult,
    corpus: &CorpusStore,
    target_tokens: usize,
    seed: u64,
    allow_short: bool,
) -> Result<AssemblyOutcome, AssembleError> {
    if target_tokens == 0 {
        return Err(AssembleError::BadTarget);
    }
    let mut outcome = AssemblyOutcome::default();
    if result.hits.is_empty() {
        outcome
            .warnings
            .push(format!("topic {}: empty retrieval result", result.topic_id));
        return Ok(outcome);
    }

    // Hits in rank order, minus token-less documents (all punctuation).
    let mut docs: Vec<(String, usize)> = Vec::with_capacity(result.hits.len());
    for (doc_id, _) in &result.hits {
        let token_count = corpus
            .get(doc_id)
            .map_err(|_| AssembleError::UnknownDoc(doc_id.clone()))?
            .token_count;
        if token_count == 0 {
            outcome
                .warnings
                .push(format!("doc {doc_id} has zero tokens; skipped"));
            continue;
        }
        docs.push((doc_id.clone(), token_count));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..docs.len()).rev() {
        let j = rng.random_range(0..=i);
        docs.swap(i, j);
    }

    let mut segments: Vec<Segment> = Vec::new();
    let mut filled = 0usize;
    let emit = |segments: &mut Vec<Segment>, filled: &mut usize, outcome: &mut AssemblyOutcome| {
        let token_count = *filled;
        if token_count == 0 {
            return;
        }
        if token_count < target_tokens && !allow_short {
            outcome.dropped_short += 1;
        } else {
            let index = outcome.samples.len();
            outcome.samples.push(LongSample {
                sample_id: format!("{}#s{index}", result.topic_id),
                topic_id: result.topic_id.clone(),
                segments: std::mem::take(segments),
                token_count,
                strategy: AssemblyStrategy::ShuffleConcat,
                seed,
            });
        }
        segments.clear();
        *filled = 0;
    };


    for (doc_id, token_count) in docs {
        let remaining = target_tokens - filled;
        let take = token_count.min(remaining);
        segments.push(Segment {
            doc_id,
            start_token: 0,
            end_token: take,
            role: SegmentRole::Document,
        });
        filled += take;
        if filled == target_tokens {
            emit(&mut segments, &mut filled, &mut outcome);
        }
        // The overflowing document's tail is discarded, not carried over.
    }
    if filled > 0 {
        emit(&mut segments, &mut filled, &mut outcome);
    }
    Ok(outcome)
}

/// Options for [`assemble_nextlong`].
#[derive(Debug, Clone, Copy)]
pub struct NextlongOptions {
    pub target_tokens: usize,
    pub meta_chunk_tokens: usize,
    pub negatives_per_chunk: usize,
    pub allow_short: bool,
    pub params: Bm25Params<Score>,
}

#[derive(Debug, Clone)]
struct Chunk {
    doc_id: String,
    start_token: usize,
    end_token: usize,
}

fn chunk_ranges(token_count: usize, chunk_tokens: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < token_count {
        let end = (start + chunk_tokens).min(token_count);
        out.push((start, end));
        start = end;
    }
    out
}

/// Meta-chunk + hard-negative assembly. Emits at most one sample per topic.
pub fn assemble_nextlong(
    result: &RetrievalResult,
    corpus: &CorpusStore,
    opts: &NextlongOptions,
    seed: u64,
) -> Result<AssemblyOutcome, AssembleError> {
    if opts.target_tokens == 0 {
        return Err(AssembleError::BadTarget);
    }
    if opts.meta_chunk_tokens == 0 {
        return Err(AssembleError::BadChunkSize);
    }
    let mut outcome = AssemblyOutcome::default();
    let mut hits: Vec<String> = Vec::new();
    for (doc_id, _) in &result.hits {
        let doc = corpus
            .get(doc_id)
            .map_err(|_| AssembleError::UnknownDoc(doc_id.clone()))?;
        if doc.token_count == 0 {
            outcome
                .warnings
                .push(format!("doc {doc_id} has zero tokens; skipped"));
            continue;
        }
        hits.push(doc_id.clone());
    }
    if hits.is_empty() {
        outcome
            .warnings
            .push(format!("topic {}: empty retrieval result", result.topic_id));
        return Ok(outcome);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source_id = hits[rng.random_range(0..hits.len())].clone();
    let source_tokens = doc_tokens(corpus, &source_id)?;

    let mut segments: Vec<Segment> = Vec::new();
    let mut filled = 0usize;
    let push_segment = |segments: &mut Vec<Segment>,
                            filled: &mut usize,
                            doc_id: &str,
                            start: usize,
                            end: usize,
                            role: SegmentRole|
     -> bool {
        let remaining = opts.target_tokens - *filled;
        if remaining == 0 {
            return true;
        }
        let take = (end - start).min(remaining);
        segments.push(Segment {
            doc_id: doc_id.to_string(),
            start_token: start,
            end_token: start + take,
            role,
        });
        *filled += take;
        *filled == opts.target_tokens
    };

    let meta_ranges = chunk_ranges(source_tokens.len(), opts.meta_chunk_tokens);

    if source_tokens.len() >= opts.target_tokens {
        // Source alone covers the target: truncated chunked source, zero
        // negatives.
        outcome.warnings.push(format!(
            "topic {}: source {source_id} meets target alone; no negatives mined",
            result.topic_id
        ));
        for &(start, end) in &meta_ranges {
            if push_segment(&mut segments, &mut filled, &source_id, start, end, SegmentRole::MetaChunk) {
                break;
            }
        }
    } else {
        // Candidate negative chunks from every other retrieved doc.
        let mut candidates: BTreeMap<String, Chunk> = BTreeMap::new();
        let mut chunk_docs: Vec<(String, Vec<String>)> = Vec::new();
        for doc_id in hits.iter().filter(|id| **id != source_id) {
            let tokens = doc_tokens(corpus, doc_id)?;
            for (i, &(start, end)) in chunk_ranges(tokens.len(), opts.meta_chunk_tokens)
                .iter()
                .enumerate()
            {
                let chunk_id = format!("{doc_id}#{i:05}");
                candidates.insert(
                    chunk_id.clone(),
                    Chunk {
                        doc_id: doc_id.clone(),
                        start_token: start,
                        end_token: end,
                    },
                );
                chunk_docs.push((chunk_id, tokens[start..end].to_vec()));
            }
        }

        let chunk_index = if chunk_docs.is_empty() {
            outcome.warnings.push(format!(
                "topic {}: no eligible negatives; emitting plain chunked source",
                result.topic_id
            ));
            None
        } else {
            Some(
                InvertedIndex::from_token_docs(chunk_docs, opts.params)
                    .expect("non-empty chunk set"),
            )
        };

        // Ranked negatives per meta-chunk, queried with the chunk's first
        // NEGATIVE_QUERY_TOKENS tokens.
        let rankings: Vec<Vec<(String, Score)>> = meta_ranges
            .iter()
            .map(|&(start, end)| match &chunk_index {
                Some(index) => {
                    let query_end = (start + NEGATIVE_QUERY_TOKENS).min(end);
                    index.retrieve_terms(&source_tokens[start..query_end], index.n_docs())
                }
                None => Vec::new(),
            })
            .collect();

        let mut used: BTreeSet<String> = BTreeSet::new();
        let mut done = false;
        for (mc, &(start, end)) in meta_ranges.iter().enumerate() {
            let mut taken = 0;
            for (chunk_id, _) in &rankings[mc] {
                if taken == opts.negatives_per_chunk || done {
                    break;
                }
                if used.contains(chunk_id) {
                    continue;
                }
                used.insert(chunk_id.clone());
                let chunk = &candidates[chunk_id];
                done = push_segment(
                    &mut segments,
                    &mut filled,
                    &chunk.doc_id,
                    chunk.start_token,
                    chunk.end_token,
                    SegmentRole::HardNegative,
                );
                taken += 1;
            }
            if done {
                break;
            }
            done = push_segment(&mut segments, &mut filled, &source_id, start, end, SegmentRole::MetaChunk);
            if done {
                break;
            }
        }

        // Material ran out before the target: backfill with further
        // negatives, cycling the meta-chunk queries in order.
        while !done {
            let mut progressed = false;
            for ranking in &rankings {
                if done {
                    break;
                }
                if let Some((chunk_id, _)) = ranking.iter().find(|(id, _)| !used.contains(id)) {
                    used.insert(chunk_id.clone());
                    let chunk = &candidates[chunk_id];
                    done = push_segment(
                        &mut segments,
                        &mut filled,
                        &chunk.doc_id,
                        chunk.start_token,
                        chunk.end_token,
                        SegmentRole::HardNegative,
                    );
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        if !done {
            outcome.warnings.push(format!(
                "topic {}: material exhausted at {filled} of {} tokens",
                result.topic_id, opts.target_tokens
            ));
        }
    }

    if filled < opts.target_tokens && !opts.allow_short {
        outcome.dropped_short += 1;
        return Ok(outcome);
    }
    outcome.samples.push(LongSample {
        sample_id: format!("{}#n0", result.topic_id),
        topic_id: result.topic_id.clone(),
        segments,
        token_count: filled,
        strategy: AssemblyStrategy::Nextlong,
        seed,
    });
    Ok(outcome)
}

/// Slices the original document texts for each segment and joins them.
pub fn materialize_text(
    sample: &LongSample,
    corpus: &CorpusStore,
    joiner: &str,
) -> Result<String, AssembleError> {
    let mut parts = Vec::with_capacity(sample.segments.len());
    for segment in &sample.segments {
        let doc = corpus
            .get(&segment.doc_id)
            .map_err(|_| AssembleError::UnknownDoc(segment.doc_id.clone()))?;
        let spans = token_spans(&doc.text);
        if segment.end_token > spans.len() || segment.start_token >= segment.end_token {
            return Err(AssembleError::UnknownDoc(format!(
                "{} segment [{}, {}) out of range",
                segment.doc_id, segment.start_token, segment.end_token
            )));
        }
        let byte_start = spans[segment.start_token].0;
        let byte_end = spans[segment.end_token - 1].1;
        parts.push(doc.text[byte_start..byte_end].to_string());
    }
    Ok(parts.join(joiner))
}

/// Manifest metadata for one samples file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplesManifest {
    pub samples: usize,
    pub total_tokens: usize,
    pub target_tokens: usize,
    pub strategy: AssemblyStrategy,
    pub config_hash: String,
    pub dropped_short: usize,
    pub warnings: Vec<String>,
}

/// Run-level context recorded into the manifest next to the sample counts.
#[derive(Debug, Clone)]
pub struct WriteContext {
    pub joiner: String,
    pub target_tokens: usize,
    pub strategy: AssemblyStrategy,
    pub config_hash: String,
    pub dropped_short: usize,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct SampleLine<'a> {
    sample_id: &'a str,
    topic_id: &'a str,
    strategy: AssemblyStrategy,
    seed: u64,
    token_count: usize,
    segments: &'a [Segment],
    text: String,
}

/// Writes `samples.jsonl` with inline text materialized from segments, and
/// returns the manifest. The file appears atomically: content goes to a
/// sibling temp file first, renamed on success, removed on failure.
pub fn write_samples(
    samples: &[LongSample],
    corpus: &CorpusStore,
    path: &Path,
    ctx: WriteContext,
) -> Result<SamplesManifest, AssembleError> {
    let tmp = path.with_extension("jsonl.tmp");
    let result = (|| -> Result<usize, AssembleError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        let mut total_tokens = 0usize;
        for sample in samples {
            let text = materialize_text(sample, corpus, &ctx.joiner)?;
            total_tokens += sample.token_count;
            let line = SampleLine {
                sample_id: &sample.sample_id,
                topic_id: &sample.topic_id,
                strategy: sample.strategy,
                seed: sample.seed,
                token_count: sample.token_count,
                segments: &sample.segments,
                text,
            };
            serde_json::to_writer(&mut out, &line).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(total_tokens)
    })();
    match result {
        Ok(total_tokens) => {
            std::fs::rename(&tmp, path)?;
            Ok(SamplesManifest {
                samples: samples.len(),
                total_tokens,
                target_tokens: ctx.target_tokens,
                strategy: ctx.strategy,
                config_hash: ctx.config_hash,
                dropped_short: ctx.dropped_short,
                warnings: ctx.warnings,
            })
        }
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}
