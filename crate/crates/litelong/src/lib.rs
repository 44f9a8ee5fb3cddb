//! Batch pipeline that synthesizes long-context language-model training
//! samples in three stages:
//!
//! 1. **Topics**: a two-debater-plus-judge protocol proposes, critiques, and
//!    filters short query topics for every leaf of a hierarchical subject
//!    taxonomy ([`debate`], [`taxonomy`]).
//! 2. **Retrieval**: an in-process Okapi BM25 inverted index serves the top-k
//!    corpus documents per retained topic ([`retrieval`], [`corpus`]).
//! 3. **Assembly**: retrieved documents are packed into exact-target-length
//!    samples, either by seeded shuffle-concatenation or by meta-chunk /
//!    hard-negative interleaving ([`assembly`]).
//!
//! Post-hoc analytics ([`analysis`]) classify topic abstraction depth against
//! a hypernym graph and summarize emitted samples. Everything is driven by a
//! single JSON config through the `litelong` binary ([`config`], [`pipeline`]).
//!
//! Numeric kernels (BM25 scoring, shingle similarity, depth statistics) are
//! generic over the float type via [`num::Real`]; the pipeline itself runs on
//! the [`Score`] alias below.

pub mod analysis;
pub mod assembly;
pub mod config;
pub mod corpus;
pub mod debate;
pub mod fixtures;
pub mod mock;
pub mod num;
pub mod pipeline;
pub mod retrieval;
pub mod taxonomy;

/// Scalar used by the pipeline for scores, averages, and ratios.
pub type Score = f64;

pub use assembly::{LongSample, Segment};
pub use corpus::{CorpusStore, Document};
pub use debate::{Topic, TopicLedger};
pub use retrieval::{InvertedIndex, RetrievalResult};
