//! Cross-subcategory near-duplicate removal.
//!
//! The judge already removes overlapping entries within a round; this pass
//! catches paraphrases across the whole ledger. Two topics are near
//! duplicates when the Jaccard similarity of their 3-gram token shingles
//! reaches the configured threshold (default 0.8). Within a duplicate
//! cluster the earliest topic in ledger order survives, so callers must pass
//! topics sorted by (subcategory_code, origin, generation index).

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::Topic;
use crate::corpus::tokenize;
use crate::num::Real;
use crate::Score;

pub const SHINGLE_SIZE: usize = 3;

/// One removal decision: `removed_id` lost to the earlier `kept_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupRemoval {
    pub removed_id: String,
    pub kept_id: String,
    pub similarity: Score,
}

/// Hashed token shingles of `text`. Texts shorter than the shingle size
/// contribute their full token sequence as a single shingle, so identical
/// short topics still collide at similarity 1.
pub fn shingle_set(text: &str) -> BTreeSet<u64> {
    let tokens = tokenize(text);
    let mut set = BTreeSet::new();
    if tokens.is_empty() {
        return set;
    }
    if tokens.len() < SHINGLE_SIZE {
        set.insert(hash_shingle(&tokens));
        return set;
    }
    for window in tokens.windows(SHINGLE_SIZE) {
        set.insert(hash_shingle(window));
    }
    set
}

// FNV-1a keeps shingle hashes stable across toolchain versions, so rebuilt
// binaries reproduce old ledgers bit for bit.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn hash_shingle(tokens: &[String]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for t in tokens {
        for &b in t.as_bytes() {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        hash ^= 0x1f;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Jaccard similarity of two shingle sets. Two empty sets count as identical.
pub fn jaccard<S: Real>(a: &BTreeSet<u64>, b: &BTreeSet<u64>) -> S {
    if a.is_empty() && b.is_empty() {
        return S::one();
    }
    let intersection = a.intersection(b).count();
    let union = a.len() + b.len() - intersection;
    S::from_count(intersection) / S::from_count(union)
}

/// Removes near-duplicates from `topics`, which must already be in ledger
/// order. Returns the survivors (original order) and the removal record.
pub fn dedup_topics(topics: &[Topic], threshold: Score) -> (Vec<Topic>, Vec<DedupRemoval>) {
    let shingles: Vec<BTreeSet<u64>> = topics.iter().map(|t| shingle_set(&t.text)).collect();

    // Candidate pairs share at least one shingle; a full pairwise scan is
    // only needed inside those buckets.
    let mut buckets: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, set) in shingles.iter().enumerate() {
        for &s in set {
            buckets.entry(s).or_default().push(i);
        }
    }
    let mut checked: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut parent: Vec<usize> = (0..topics.len()).collect();

    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }

    for indices in buckets.values() {
        for (a_pos, &i) in indices.iter().enumerate() {
            for &j in &indices[a_pos + 1..] {
                let pair = (i.min(j), i.max(j));
                if !checked.insert(pair) {
                    continue;
                }
                let sim: Score = jaccard(&shingles[pair.0], &shingles[pair.1]);
                if sim >= threshold {
                    let ri = find(&mut parent, pair.0);
                    let rj = find(&mut parent, pair.1);
                    if ri != rj {
                        // Union by ledger order: the smaller index wins.
                        let (keep, lose) = (ri.min(rj), ri.max(rj));
                        parent[lose] = keep;
                    }
                }
            }
        }
    }

    // Empty-shingle topics (no tokens at all) form their own degenerate
    // cluster: they never share a bucket, so compare them directly.
    let empties: Vec<usize> = shingles
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_empty())
        .map(|(i, _)| i)
        .collect();
    for (a_pos, &i) in empties.iter().enumerate() {
        for &j in &empties[a_pos + 1..] {
            let ri = find(&mut parent, i);
            let rj = find(&mut parent, j);
            if ri != rj {
                let (keep, lose) = (ri.min(rj), ri.max(rj));
                parent[lose] = keep;
            }
        }
    }

    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for i in 0..topics.len() {
        let root = find(&mut parent, i);
        if root == i {
            kept.push(topics[i].clone());
        } else {
            removed.push(DedupRemoval {
                removed_id: topics[i].topic_id.clone(),
                kept_id: topics[root].topic_id.clone(),
                similarity: jaccard(&shingles[i], &shingles[root]),
            });
        }
    }
    (kept, removed)
}
