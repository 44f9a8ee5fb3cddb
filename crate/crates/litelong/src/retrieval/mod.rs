//! In-process BM25 inverted index and top-k retrieval.
//!
//! The index is built once over the full corpus (optionally in parallel with
//! a deterministic merge) and is immutable afterward, so retrieval may run
//! from any number of threads. An on-disk snapshot (`*.llidx`, see
//! [`snapshot`]) reproduces bit-identical retrieval results when reloaded.

pub mod score;
pub mod snapshot;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, CorpusStore};
use crate::debate::Topic;
use crate::Score;

pub use score::Bm25Params;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("invalid BM25 parameters: k1 must be > 0 and b in [0, 1], got k1={k1}, b={b}")]
    BadParams { k1: Score, b: Score },
    #[error("topic {topic_id:?} tokenizes to no terms")]
    EmptyQuery { topic_id: String },
    #[error("snapshot I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot corrupt: {0}")]
    Corrupt(String),
}

/// One posting: the document ordinal and how often the term occurs in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc_ordinal: u32,
    pub term_frequency: u32,
}

/// All postings for one term, sorted strictly ascending by ordinal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostingList {
    pub term: String,
    pub entries: Vec<Posting>,
}

/// Immutable BM25 index: sorted term dictionary, postings, document lengths,
/// and the scoring parameters it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    postings: Vec<PostingList>,
    term_lookup: HashMap<String, usize>,
    doc_lengths: Vec<u32>,
    doc_ids: Vec<String>,
    avgdl: Score,
    params: Bm25Params<Score>,
}

/// Ranked hits for one topic: `(doc_id, score)` with scores non-increasing,
/// ties broken by ascending `doc_id`, zero-score documents omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub topic_id: String,
    pub hits: Vec<(String, Score)>,
}

impl InvertedIndex {
    /// Builds the index over every document of `corpus`. Documents are
    /// partitioned across threads; partial postings merge in partition order
    /// so the result is independent of scheduling.
    pub fn build(corpus: &CorpusStore, params: Bm25Params<Score>) -> Result<Self, IndexError> {
        if corpus.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        let token_docs: Vec<(String, Vec<String>)> = corpus
            .docs()
            .par_iter()
            .map(|d| (d.doc_id.clone(), tokenize(&d.text)))
            .collect();
        Self::from_token_docs(token_docs, params)
    }

    /// Builds an index over already-tokenized pseudo-documents. Used both by
    /// [`Self::build`] and by chunk-level mining, which indexes document
    /// chunks instead of whole documents.
    pub fn from_token_docs(
        token_docs: Vec<(String, Vec<String>)>,
        params: Bm25Params<Score>,
    ) -> Result<Self, IndexError> {
        if token_docs.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        if !params.validate() {
            return Err(IndexError::BadParams {
                k1: params.k1,
                b: params.b,
            });
        }

        let doc_lengths: Vec<u32> = token_docs.iter().map(|(_, t)| t.len() as u32).collect();
        let doc_ids: Vec<String> = token_docs.iter().map(|(id, _)| id.clone()).collect();

        // Per-partition term maps, merged in partition order; ordinals are
        // global so entries in each merged list stay strictly ascending.
        let chunk_size = (token_docs.len() / rayon::current_num_threads().max(1)).max(1);
        let partials: Vec<HashMap<String, Vec<Posting>>> = token_docs
            .par_chunks(chunk_size)
            .enumerate()
            .map(|(chunk_idx, chunk)| {
                let base = chunk_idx * chunk_size;
                let mut map: HashMap<String, Vec<Posting>> = HashMap::new();
                for (offset, (_, tokens)) in chunk.iter().enumerate() {
                    let ordinal = (base + offset) as u32;
                    let mut tf: HashMap<&str, u32> = HashMap::new();
                    for t in tokens {
                        *tf.entry(t.as_str()).or_insert(0) += 1;
                    }
                    for (term, freq) in tf {
                        map.entry(term.to_string()).or_default().push(Posting {
                            doc_ordinal: ordinal,
                            term_frequency: freq,
                        });
                    }
                }
                for entries in map.values_mut() {
                    entries.sort_unstable_by_key(|p| p.doc_ordinal);
                }
                map
            })
            .collect();

        let mut merged: HashMap<String, Vec<Posting>> = HashMap::new();
        for partial in partials {
            for (term, mut entries) in partial {
                merged.entry(term).or_default().append(&mut entries);
            }
        }
        let mut postings: Vec<PostingList> = merged
            .into_iter()
            .map(|(term, entries)| PostingList { term, entries })
            .collect();
        postings.sort_unstable_by(|a, b| a.term.cmp(&b.term));
        let term_lookup = postings
            .iter()
            .enumerate()
            .map(|(i, p)| (p.term.clone(), i))
            .collect();

        let avgdl: Score = crate::num::mean_of_counts(doc_lengths.iter().map(|&l| l as usize));

        Ok(Self {
            postings,
            term_lookup,
            doc_lengths,
            doc_ids,
            avgdl,
            params,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avgdl(&self) -> Score {
        self.avgdl
    }

    pub fn params(&self) -> Bm25Params<Score> {
        self.params
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Sorted posting lists; the number of entries across all lists equals
    /// the number of (document, distinct term) pairs in the corpus.
    pub fn posting_lists(&self) -> &[PostingList] {
        &self.postings
    }

    pub fn postings_for(&self, term: &str) -> Option<&PostingList> {
        self.term_lookup.get(term).map(|&i| &self.postings[i])
    }

    /// BM25 score of one document for a query. Duplicate query terms
    /// contribute once; unknown terms contribute zero.
    pub fn score(&self, query_terms: &[String], doc_ordinal: u32) -> Score {
        let mut seen: Vec<&str> = Vec::with_capacity(query_terms.len());
        let mut total = 0.0;
        for term in query_terms {
            if seen.contains(&term.as_str()) {
                continue;
            }
            seen.push(term.as_str());
            let Some(list) = self.postings_for(term) else {
                continue;
            };
            let Ok(pos) = list.entries.binary_search_by_key(&doc_ordinal, |p| p.doc_ordinal) else {
                continue;
            };
            let tf = list.entries[pos].term_frequency as usize;
            let dl = self.doc_lengths[doc_ordinal as usize] as usize;
            total += score::term_score(
                self.n_docs(),
                list.entries.len(),
                tf,
                dl,
                self.avgdl,
                self.params,
            );
        }
        total
    }

    /// Top-k documents for a raw query string. Only documents containing at
    /// least one query term are scored, so zero-score documents never appear.
    pub fn retrieve_query(&self, query: &str, k: usize) -> Vec<(String, Score)> {
        let terms = tokenize(query);
        self.retrieve_terms(&terms, k)
    }

    pub fn retrieve_terms(&self, terms: &[String], k: usize) -> Vec<(String, Score)> {
        let mut seen: Vec<&str> = Vec::with_capacity(terms.len());
        let mut acc: HashMap<u32, Score> = HashMap::new();
        for term in terms {
            if seen.contains(&term.as_str()) {
                continue;
            }
            seen.push(term.as_str());
            let Some(list) = self.postings_for(term) else {
                continue;
            };
            let idf = score::idf::<Score>(self.n_docs(), list.entries.len());
            for p in &list.entries {
                let dl = self.doc_lengths[p.doc_ordinal as usize] as usize;
                let contrib = idf
                    * score::tf_component(
                        p.term_frequency as usize,
                        dl,
                        self.avgdl,
                        self.params,
                    );
                *acc.entry(p.doc_ordinal).or_insert(0.0) += contrib;
            }
        }
        let mut ranked: Vec<(u32, Score)> = acc.into_iter().collect();
        ranked.sort_unstable_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap()
                .then_with(|| self.doc_ids[a.0 as usize].cmp(&self.doc_ids[b.0 as usize]))
        });
        ranked.truncate(k);
        ranked
            .into_iter()
            .map(|(ord, s)| (self.doc_ids[ord as usize].clone(), s))
            .collect()
    }

    /// Top-k retrieval for a topic. A topic whose text tokenizes to nothing
    /// is unusable and reported as an error; the caller skips it.
    pub fn retrieve(&self, topic: &Topic, k: usize) -> Result<RetrievalResult, IndexError> {
        let terms = tokenize(&topic.text);
        if terms.is_empty() {
            return Err(IndexError::EmptyQuery {
                topic_id: topic.topic_id.clone(),
            });
        }
        Ok(RetrievalResult {
            topic_id: topic.topic_id.clone(),
            hits: self.retrieve_terms(&terms, k),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CorpusStore;
    use std::io::Write;
    use std::path::PathBuf;

    pub(crate) fn tiny_corpus(docs: &[(&str, &str)]) -> CorpusStore {
        let dir = tempfile::tempdir().unwrap();
        let path: PathBuf = dir.path().join("c.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        for (id, text) in docs {
            writeln!(
                f,
                "{}",
                serde_json::json!({"id": id, "text": text})
            )
            .unwrap();
        }
        drop(f);
        CorpusStore::ingest(&[path]).unwrap()
    }

    fn three_doc_index() -> InvertedIndex {
        let corpus = tiny_corpus(&[("D1", "cat hat"), ("D2", "cat cat dog"), ("D3", "dog")]);
        InvertedIndex::build(&corpus, Bm25Params::default()).unwrap()
    }

    #[test]
    fn single_doc_postings_and_avgdl() {
        let corpus = tiny_corpus(&[("only", "a b a")]);
        let idx = InvertedIndex::build(&corpus, Bm25Params::default()).unwrap();
        assert_eq!(idx.avgdl(), 3.0);
        let a = idx.postings_for("a").unwrap();
        assert_eq!(a.entries, vec![Posting { doc_ordinal: 0, term_frequency: 2 }]);
        let b = idx.postings_for("b").unwrap();
        assert_eq!(b.entries, vec![Posting { doc_ordinal: 0, term_frequency: 1 }]);
    }

    #[test]
    fn three_doc_fixture_statistics() {
        let idx = three_doc_index();
        assert_eq!(idx.n_docs(), 3);
        assert_eq!(idx.avgdl(), 2.0);
        let cat = idx.postings_for("cat").unwrap();
        assert_eq!(
            cat.entries,
            vec![
                Posting { doc_ordinal: 0, term_frequency: 1 },
                Posting { doc_ordinal: 1, term_frequency: 2 },
            ]
        );
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let corpus = tiny_corpus(&[]);
        assert!(matches!(
            InvertedIndex::build(&corpus, Bm25Params::default()),
            Err(IndexError::EmptyCorpus)
        ));
    }

    #[test]
    fn absent_term_scores_zero() {
        let idx = three_doc_index();
        assert_eq!(idx.score(&["zzz".to_string()], 0), 0.0);
        assert!(idx.retrieve_query("zzz", 10).is_empty());
    }

    #[test]
    fn worked_example_score_and_ranking() {
        let idx = three_doc_index();
        let q = vec!["cat".to_string()];
        let d2 = idx.score(&q, 1);
        let expect = (1.6f64).ln() * 4.4 / 3.65;
        assert!((d2 - expect).abs() < 1e-12, "got {d2}");
        // D1 has tf=1, |D|=2=avgdl, so the tf component is exactly 1.
        let d1 = idx.score(&q, 0);
        assert!((d1 - (1.6f64).ln()).abs() < 1e-12);

        let hits = idx.retrieve_query("cat", 2);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].0, "D2");
        assert_eq!(hits[1].0, "D1");
    }

    #[test]
    fn duplicate_query_terms_contribute_once() {
        let idx = three_doc_index();
        let once = idx.score(&["cat".to_string()], 1);
        let twice = idx.score(&["cat".to_string(), "cat".to_string()], 1);
        assert_eq!(once, twice);
    }

    #[test]
    fn identical_docs_tie_break_by_doc_id() {
        let corpus = tiny_corpus(&[("b-doc", "same words here"), ("a-doc", "same words here")]);
        let idx = InvertedIndex::build(&corpus, Bm25Params::default()).unwrap();
        let hits = idx.retrieve_query("same words", 10);
        assert_eq!(hits[0].0, "a-doc");
        assert_eq!(hits[1].0, "b-doc");
        assert_eq!(hits[0].1, hits[1].1);
    }

    #[test]
    fn retrieval_is_pure() {
        let idx = three_doc_index();
        let a = idx.retrieve_query("cat dog", 5);
        let b = idx.retrieve_query("cat dog", 5);
        assert_eq!(a, b);
    }

    #[test]
    fn posting_entry_count_matches_distinct_term_sum() {
        let corpus = tiny_corpus(&[
            ("x", "red green red blue"),
            ("y", "green green"),
            ("z", "blue sky"),
        ]);
        let idx = InvertedIndex::build(&corpus, Bm25Params::default()).unwrap();
        let entry_total: usize = idx.posting_lists().iter().map(|p| p.entries.len()).sum();
        // Independent count: per-doc distinct terms.
        let distinct_sum: usize = corpus
            .docs()
            .iter()
            .map(|d| {
                let mut t = tokenize(&d.text);
                t.sort();
                t.dedup();
                t.len()
            })
            .sum();
        assert_eq!(entry_total, distinct_sum);
    }

    #[test]
    fn bad_params_are_rejected() {
        let corpus = tiny_corpus(&[("a", "x")]);
        let params = Bm25Params { k1: 0.0, b: 0.5 };
        assert!(matches!(
            InvertedIndex::build(&corpus, params),
            Err(IndexError::BadParams { .. })
        ));
        let params = Bm25Params { k1: 1.2, b: 1.5 };
        assert!(matches!(
            InvertedIndex::build(&corpus, params),
            Err(IndexError::BadParams { .. })
        ));
    }

    #[test]
    fn parallel_build_matches_serial_build() {
        // Same corpus indexed through from_token_docs with one giant chunk
        // (serial path) must equal the parallel build.
        let docs: Vec<(String, String)> = (0..500)
            .map(|i| {
                (
                    format!("d{i:04}"),
                    format!("alpha beta w{} w{} gamma", i % 7, i % 13),
                )
            })
            .collect();
        let token_docs: Vec<(String, Vec<String>)> = docs
            .iter()
            .map(|(id, text)| (id.clone(), tokenize(text)))
            .collect();
        let parallel = InvertedIndex::from_token_docs(token_docs.clone(), Bm25Params::default())
            .unwrap();
        // Serial reference: build postings with a single-threaded fold.
        let mut serial: HashMap<String, Vec<Posting>> = HashMap::new();
        for (ord, (_, tokens)) in token_docs.iter().enumerate() {
            let mut tf: HashMap<&str, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t.as_str()).or_insert(0) += 1;
            }
            let mut terms: Vec<_> = tf.into_iter().collect();
            terms.sort();
            for (term, freq) in terms {
                serial.entry(term.to_string()).or_default().push(Posting {
                    doc_ordinal: ord as u32,
                    term_frequency: freq,
                });
            }
        }
        for list in parallel.posting_lists() {
            assert_eq!(serial[&list.term], list.entries, "term {}", list.term);
        }
        assert_eq!(parallel.posting_lists().len(), serial.len());
    }
}
