//! Hierarchical subject taxonomy (BISAC-style) loaded from CSV.
//!
//! Input format: header `code,label,parent_code`, one node per row,
//! `parent_code` empty for roots. The debate stage iterates the leaf nodes;
//! interior nodes only contribute context strings ("Parent > Child") to
//! prompts. Licensed classification exports are supplied by the user; the
//! repo ships only a synthetic fixture generator (see [`crate::fixtures`]).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("row {row}: {source}")]
    Csv { row: usize, source: csv::Error },
    #[error("row {row}: duplicate code {code:?}")]
    DuplicateCode { row: usize, code: String },
    #[error("row {row}: parent_code {parent:?} of {code:?} names no existing node")]
    DanglingParent {
        row: usize,
        code: String,
        parent: String,
    },
    #[error("cycle in parent chain involving code {0:?}")]
    Cycle(String),
}

/// One taxonomy node. Depth 0 means root (no parent).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryNode {
    pub code: String,
    pub label: String,
    pub parent_code: Option<String>,
    pub depth: usize,
}

/// Validated taxonomy with the leaf list materialized in lexicographic code
/// order. Immutable after load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    nodes: BTreeMap<String, CategoryNode>,
    subcategories: Vec<String>,
}

impl Taxonomy {
    /// Loads and validates a taxonomy CSV. Errors name the offending row
    /// (1-based, excluding the header).
    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let raw = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_str(&raw)
    }

    pub fn from_csv_str(raw: &str) -> Result<Self, TaxonomyError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(raw.as_bytes());

        #[derive(Deserialize)]
        struct Row {
            code: String,
            label: String,
            parent_code: String,
        }

        let mut rows: Vec<(usize, Row)> = Vec::new();
        for (i, rec) in reader.deserialize::<Row>().enumerate() {
            let row_no = i + 1;
            let rec = rec.map_err(|source| TaxonomyError::Csv {
                row: row_no,
                source,
            })?;
            rows.push((row_no, rec));
        }

        let mut nodes: BTreeMap<String, CategoryNode> = BTreeMap::new();
        for (row_no, rec) in &rows {
            if nodes.contains_key(&rec.code) {
                return Err(TaxonomyError::DuplicateCode {
                    row: *row_no,
                    code: rec.code.clone(),
                });
            }
            let parent_code = if rec.parent_code.trim().is_empty() {
                None
            } else {
                Some(rec.parent_code.trim().to_string())
            };
            nodes.insert(
                rec.code.clone(),
                CategoryNode {
                    code: rec.code.clone(),
                    label: rec.label.clone(),
                    parent_code,
                    depth: 0,
                },
            );
        }

        // Parent existence.
        for (row_no, rec) in &rows {
            let node = &nodes[&rec.code];
            if let Some(parent) = &node.parent_code {
                if !nodes.contains_key(parent) {
                    return Err(TaxonomyError::DanglingParent {
                        row: *row_no,
                        code: rec.code.clone(),
                        parent: parent.clone(),
                    });
                }
            }
        }

        // Depths via parent-chain walk; a chain longer than the node count
        // means a cycle (self-parents included).
        let mut depths: HashMap<String, usize> = HashMap::new();
        let n = nodes.len();
        for code in nodes.keys() {
            let mut chain: Vec<&String> = Vec::new();
            let mut cur = code.clone();
            loop {
                if let Some(&d) = depths.get(&cur) {
                    for (i, c) in chain.iter().rev().enumerate() {
                        depths.insert((*c).clone(), d + i + 1);
                    }
                    break;
                }
                chain.push(&nodes[&cur].code);
                if chain.len() > n {
                    return Err(TaxonomyError::Cycle(cur));
                }
                match &nodes[&cur].parent_code {
                    None => {
                        let root = chain.pop().unwrap().clone();
                        depths.insert(root, 0);
                        for (i, c) in chain.iter().rev().enumerate() {
                            depths.insert((*c).clone(), i + 1);
                        }
                        break;
                    }
                    Some(p) => {
                        if chain.contains(&p) {
                            return Err(TaxonomyError::Cycle(p.clone()));
                        }
                        cur = p.clone();
                    }
                }
            }
        }
        for (code, node) in nodes.iter_mut() {
            node.depth = depths[code];
        }

        let mut has_children: HashMap<&str, bool> = HashMap::new();
        for node in nodes.values() {
            if let Some(p) = &node.parent_code {
                has_children.insert(p.as_str(), true);
            }
        }
        // BTreeMap iteration gives the lexicographic leaf order directly.
        let subcategories: Vec<String> = nodes
            .values()
            .filter(|n| !has_children.get(n.code.as_str()).copied().unwrap_or(false))
            .map(|n| n.code.clone())
            .collect();

        Ok(Self {
            nodes,
            subcategories,
        })
    }

    pub fn node(&self, code: &str) -> Option<&CategoryNode> {
        self.nodes.get(code)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf codes in lexicographic order; the debate unit.
    pub fn subcategories(&self) -> &[String] {
        &self.subcategories
    }

    pub fn subcategory_count(&self) -> usize {
        self.subcategories.len()
    }

    /// Root-to-node label path, joined with " > ", for prompt context.
    pub fn path_label(&self, code: &str) -> Option<String> {
        let mut labels = Vec::new();
        let mut cur = self.nodes.get(code)?;
        labels.push(cur.label.clone());
        while let Some(parent) = &cur.parent_code {
            cur = self.nodes.get(parent)?;
            labels.push(cur.label.clone());
        }
        labels.reverse();
        Some(labels.join(" > "))
    }
}
