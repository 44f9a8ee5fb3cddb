//! Okapi BM25 scoring kernel, generic over the float type.
//!
//! Variant: +1-inside-log IDF, so scores are never negative:
//!
//! ```text
//! idf(q)       = ln((N - n_q + 0.5) / (n_q + 0.5) + 1)
//! score(q, D)  = idf(q) * f(q,D) * (k1 + 1) / (f(q,D) + k1 * (1 - b + b * |D| / avgdl))
//! ```
//!
//! Duplicate query terms contribute once (no query-side term weighting).

use serde::{Deserialize, Serialize};

use crate::num::Real;

/// BM25 free parameters. `k1 > 0` controls term-frequency saturation, `b` in
/// `[0, 1]` the strength of document-length normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params<S> {
    pub k1: S,
    pub b: S,
}

impl<S: Real> Default for Bm25Params<S> {
    fn default() -> Self {
        Self {
            k1: S::from_f64(1.2).unwrap(),
            b: S::from_f64(0.75).unwrap(),
        }
    }
}

impl<S: Real> Bm25Params<S> {
    pub fn validate(&self) -> bool {
        self.k1 > S::zero() && self.b >= S::zero() && self.b <= S::one()
    }
}

/// Inverse document frequency of a term occurring in `doc_freq` of `n_docs`
/// documents. Positive for every `0 <= doc_freq <= n_docs`.
pub fn idf<S: Real>(n_docs: usize, doc_freq: usize) -> S {
    let n = S::from_count(n_docs);
    let df = S::from_count(doc_freq);
    let half = S::from_f64(0.5).unwrap();
    ((n - df + half) / (df + half) + S::one()).ln()
}

/// Term-frequency component for one (term, document) pair.
pub fn tf_component<S: Real>(term_freq: usize, doc_len: usize, avgdl: S, params: Bm25Params<S>) -> S {
    if term_freq == 0 {
        return S::zero();
    }
    let tf = S::from_count(term_freq);
    let dl = S::from_count(doc_len);
    let norm = S::one() - params.b + params.b * dl / avgdl;
    tf * (params.k1 + S::one()) / (tf + params.k1 * norm)
}

/// Full per-term contribution: `idf * tf_component`.
pub fn term_score<S: Real>(
    n_docs: usize,
    doc_freq: usize,
    term_freq: usize,
    doc_len: usize,
    avgdl: S,
    params: Bm25Params<S>,
) -> S {
    if term_freq == 0 || doc_freq == 0 {
        return S::zero();
    }
    idf::<S>(n_docs, doc_freq) * tf_component(term_freq, doc_len, avgdl, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn idf_is_positive_even_for_ubiquitous_terms() {
        assert!(idf::<f64>(10, 10) > 0.0);
        assert!(idf::<f64>(1, 1) > 0.0);
    }

    #[test]
    fn worked_example_matches_formula() {
        // 3 docs, avgdl 2.0, query term in 2 of them; scored doc has len 3, tf 2.
        let params = Bm25Params::<f64>::default();
        let got = term_score(3, 2, 2, 3, 2.0, params);
        let expect = (1.6f64).ln() * 4.4 / 3.65;
        assert!((got - expect).abs() < 1e-12, "got {got}, expect {expect}");
        assert!((got - 0.56658).abs() < 1e-5);
    }

    #[test]
    fn f32_instantiation_tracks_f64() {
        let got32 = term_score::<f32>(3, 2, 2, 3, 2.0, Bm25Params::default());
        let got64 = term_score::<f64>(3, 2, 2, 3, 2.0, Bm25Params::default());
        assert!((f64::from(got32) - got64).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn score_monotone_in_term_frequency(
            tf in 1usize..1000,
            dl in 1usize..10_000,
            avgdl in 1.0f64..5_000.0,
        ) {
            let params = Bm25Params::<f64>::default();
            let lo = tf_component(tf, dl, avgdl, params);
            let hi = tf_component(tf * 2, dl, avgdl, params);
            prop_assert!(hi >= lo);
        }

        #[test]
        fn score_monotone_down_in_doc_length(
            tf in 1usize..1000,
            dl in 1usize..10_000,
            extra in 1usize..10_000,
            avgdl in 1.0f64..5_000.0,
        ) {
            let params = Bm25Params::<f64>::default();
            let short = tf_component(tf, dl, avgdl, params);
            let long = tf_component(tf, dl + extra, avgdl, params);
            prop_assert!(long <= short);
        }
    }
}
