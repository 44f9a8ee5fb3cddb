//! On-disk index snapshot (`*.llidx`).
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "LLIDX1"
//! n_docs: u64
//! avgdl: f64, k1: f64, b: f64
//! doc_lengths: n_docs x u32
//! term_count: u64
//! terms (sorted): u32 length + UTF-8 bytes, each
//! postings per term: varint entry count, then per entry
//!     varint ordinal delta (first entry: the ordinal itself), varint frequency
//! doc ids: u32 length + UTF-8 bytes, each
//! ```
//!
//! The trailing doc-id table lets a loaded snapshot reproduce doc_id
//! tie-breaking without the corpus at hand. Loading must reproduce
//! bit-identical retrieval results, which the round-trip tests assert.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Bm25Params, IndexError, InvertedIndex, Posting, PostingList};
use crate::Score;

const MAGIC: &[u8; 6] = b"LLIDX1";

pub fn write_varint<W: Write>(out: &mut W, mut v: u64) -> std::io::Result<()> {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.write_all(&[byte])?;
            return Ok(());
        }
        out.write_all(&[byte | 0x80])?;
    }
}

pub fn read_varint<R: Read>(input: &mut R) -> Result<u64, IndexError> {
    let mut v: u64 = 0;
    let mut shift = 0u32;
    loop {
        let mut byte = [0u8; 1];
        input.read_exact(&mut byte)?;
        if shift >= 64 {
            return Err(IndexError::Corrupt("varint overflow".into()));
        }
        v |= u64::from(byte[0] & 0x7f) << shift;
        if byte[0] & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
    }
}

fn write_str<W: Write>(out: &mut W, s: &str) -> std::io::Result<()> {
    out.write_all(&(s.len() as u32).to_le_bytes())?;
    out.write_all(s.as_bytes())
}

fn read_str<R: Read>(input: &mut R) -> Result<String, IndexError> {
    let mut len = [0u8; 4];
    input.read_exact(&mut len)?;
    let mut buf = vec![0u8; u32::from_le_bytes(len) as usize];
    input.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| IndexError::Corrupt("non-UTF-8 string".into()))
}

impl InvertedIndex {
    pub fn save_snapshot(&self, path: &Path) -> Result<(), IndexError> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&(self.n_docs() as u64).to_le_bytes())?;
        out.write_all(&self.avgdl().to_le_bytes())?;
        out.write_all(&self.params().k1.to_le_bytes())?;
        out.write_all(&self.params().b.to_le_bytes())?;
        for &len in self.doc_lengths() {
            out.write_all(&len.to_le_bytes())?;
        }
        out.write_all(&(self.posting_lists().len() as u64).to_le_bytes())?;
        for list in self.posting_lists() {
            write_str(&mut out, &list.term)?;
        }
        for list in self.posting_lists() {
            write_varint(&mut out, list.entries.len() as u64)?;
            let mut prev = 0u32;
            for (i, p) in list.entries.iter().enumerate() {
                let delta = if i == 0 { p.doc_ordinal } else { p.doc_ordinal - prev };
                prev = p.doc_ordinal;
                write_varint(&mut out, u64::from(delta))?;
                write_varint(&mut out, u64::from(p.term_frequency))?;
            }
        }
        for id in self.doc_ids() {
            write_str(&mut out, id)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load_snapshot(path: &Path) -> Result<Self, IndexError> {
        let mut input = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 6];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(IndexError::Corrupt(format!(
                "bad magic {:?}, expected {:?}",
                magic, MAGIC
            )));
        }
        let mut u64buf = [0u8; 8];
        input.read_exact(&mut u64buf)?;
        let n_docs = u64::from_le_bytes(u64buf) as usize;
        if n_docs == 0 {
            return Err(IndexError::Corrupt("snapshot holds zero documents".into()));
        }
        input.read_exact(&mut u64buf)?;
        let avgdl = Score::from_le_bytes(u64buf);
        input.read_exact(&mut u64buf)?;
        let k1 = Score::from_le_bytes(u64buf);
        input.read_exact(&mut u64buf)?;
        let b = Score::from_le_bytes(u64buf);

        let mut doc_lengths = Vec::with_capacity(n_docs);
        let mut u32buf = [0u8; 4];
        for _ in 0..n_docs {
            input.read_exact(&mut u32buf)?;
            doc_lengths.push(u32::from_le_bytes(u32buf));
        }

        input.read_exact(&mut u64buf)?;
        let term_count = u64::from_le_bytes(u64buf) as usize;
        let mut terms = Vec::with_capacity(term_count);
        for _ in 0..term_count {
            terms.push(read_str(&mut input)?);
        }

        let mut postings = Vec::with_capacity(term_count);
        for term in terms {
            let entry_count = read_varint(&mut input)? as usize;
            let mut entries = Vec::with_capacity(entry_count);
            let mut prev = 0u32;
            for i in 0..entry_count {
                let delta = read_varint(&mut input)? as u32;
                let ordinal = if i == 0 { delta } else { prev + delta };
                prev = ordinal;
                let tf = read_varint(&mut input)? as u32;
                if ordinal as usize >= n_docs || tf == 0 {
                    return Err(IndexError::Corrupt(format!(
                        "posting out of range for term {term:?}"
                    )));
                }
                entries.push(Posting {
                    doc_ordinal: ordinal,
                    term_frequency: tf,
                });
            }
            postings.push(PostingList { term, entries });
        }

        let mut doc_ids = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            doc_ids.push(read_str(&mut input)?);
        }

        let params = Bm25Params { k1, b };
        if !params.validate() {
            return Err(IndexError::BadParams { k1, b });
        }
        Self::from_parts(postings, doc_lengths, doc_ids, avgdl, params)
    }
}

impl InvertedIndex {
    pub(super) fn from_parts(
        postings: Vec<PostingList>,
        doc_lengths: Vec<u32>,
        doc_ids: Vec<String>,
        avgdl: Score,
        params: Bm25Params<Score>,
    ) -> Result<Self, IndexError> {
        if doc_ids.len() != doc_lengths.len() {
            return Err(IndexError::Corrupt("doc id / length count mismatch".into()));
        }
        let term_lookup = postings
            .iter()
            .enumerate()
            .map(|(i, p)| (p.term.clone(), i))
            .collect();
        Ok(Self {
            postings,
            term_lookup,
            doc_lengths,
            doc_ids,
            avgdl,
            params,
        })
    }
}
