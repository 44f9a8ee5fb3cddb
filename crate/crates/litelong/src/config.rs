//! Pipeline configuration: one JSON file, flag overrides applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::assembly::AssemblyStrategy;
use crate::debate::backend::{BackendConfig, BackendKind};
use crate::debate::RetentionStrategy;
use crate::Score;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathsConfig {
    /// Corpus JSONL files, ingested in this order.
    pub corpus: Vec<PathBuf>,
    pub taxonomy: PathBuf,
    #[serde(default)]
    pub hypernyms: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DebateConfig {
    pub debater_1: BackendConfig,
    pub debater_2: BackendConfig,
    pub judge: BackendConfig,
    #[serde(default = "default_candidates")]
    pub candidates_per_debater: usize,
    #[serde(default = "default_retention")]
    pub retention: RetentionStrategy,
    #[serde(default = "default_fixed_k")]
    pub fixed_k: usize,
    #[serde(default = "default_dedup_threshold")]
    pub dedup_threshold: Score,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub save_transcripts: bool,
}

fn default_candidates() -> usize {
    4
}
fn default_retention() -> RetentionStrategy {
    RetentionStrategy::FilterReject
}
fn default_fixed_k() -> usize {
    10
}
fn default_dedup_threshold() -> Score {
    0.8
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RetrievalConfig {
    #[serde(default = "default_k1")]
    pub k1: Score,
    #[serde(default = "default_b")]
    pub b: Score,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_k1() -> Score {
    1.2
}
fn default_b() -> Score {
    0.75
}
fn default_top_k() -> usize {
    256
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k1: default_k1(),
            b: default_b(),
            top_k: default_top_k(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssemblyConfig {
    #[serde(default = "default_strategy")]
    pub strategy: AssemblyStrategy,
    #[serde(default = "default_target_tokens")]
    pub target_tokens: usize,
    #[serde(default = "default_meta_chunk_tokens")]
    pub meta_chunk_tokens: usize,
    #[serde(default = "default_negatives_per_chunk")]
    pub negatives_per_chunk: usize,
    #[serde(default)]
    pub allow_short: bool,
    #[serde(default = "default_joiner")]
    pub joiner: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_strategy() -> AssemblyStrategy {
    AssemblyStrategy::ShuffleConcat
}
fn default_target_tokens() -> usize {
    128_000
}
fn default_meta_chunk_tokens() -> usize {
    2_048
}
fn default_negatives_per_chunk() -> usize {
    3
}
fn default_joiner() -> String {
    "\n".to_string()
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            strategy: default_strategy(),
            target_tokens: default_target_tokens(),
            meta_chunk_tokens: default_meta_chunk_tokens(),
            negatives_per_chunk: default_negatives_per_chunk(),
            allow_short: false,
            joiner: default_joiner(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub depth_mode: crate::analysis::DepthMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub debate: DebateConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub assembly: AssemblyConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default = "default_scale_factor")]
    pub scale_factor: Score,
}

fn default_scale_factor() -> Score {
    1.0
}

/// Flag-level overrides; flags win over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub allow_short: bool,
    pub save_transcripts: bool,
    pub backend: Option<BackendKind>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&raw)?)
    }

    pub fn apply_overrides(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.debate.seed = seed;
            self.assembly.seed = seed;
            self.debate.debater_1.seed = seed;
            self.debate.debater_2.seed = seed;
            self.debate.judge.seed = seed;
        }
        if overrides.allow_short {
            self.assembly.allow_short = true;
        }
        if overrides.save_transcripts {
            self.debate.save_transcripts = true;
        }
        if let Some(kind) = overrides.backend {
            self.debate.debater_1.kind = kind;
            self.debate.debater_2.kind = kind;
            self.debate.judge.kind = kind;
        }
    }

    /// Structural validation plus existence checks for every input path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        if self.paths.corpus.is_empty() {
            return invalid("paths.corpus must list at least one file".into());
        }
        for p in &self.paths.corpus {
            if !p.is_file() {
                return invalid(format!("corpus file {} does not exist", p.display()));
            }
        }
        if !self.paths.taxonomy.is_file() {
            return invalid(format!(
                "taxonomy file {} does not exist",
                self.paths.taxonomy.display()
            ));
        }
        if let Some(h) = &self.paths.hypernyms {
            if !h.is_file() {
                return invalid(format!("hypernyms file {} does not exist", h.display()));
            }
        }
        if self.scale_factor <= 0.0 || self.scale_factor > 4.0 {
            return invalid(format!(
                "scale_factor must be in (0, 4], got {}",
                self.scale_factor
            ));
        }
        if self.assembly.target_tokens < self.assembly.meta_chunk_tokens {
            return invalid(format!(
                "target_tokens ({}) must be >= meta_chunk_tokens ({})",
                self.assembly.target_tokens, self.assembly.meta_chunk_tokens
            ));
        }
        if self.assembly.target_tokens == 0 || self.assembly.meta_chunk_tokens == 0 {
            return invalid("target_tokens and meta_chunk_tokens must be >= 1".into());
        }
        if self.assembly.joiner.chars().any(char::is_alphanumeric) {
            return invalid(
                "joiner must not contain alphanumeric characters (it would change token counts)"
                    .into(),
            );
        }
        if self.retrieval.top_k == 0 {
            return invalid("retrieval.top_k must be >= 1".into());
        }
        let k1_ok = self.retrieval.k1.is_finite() && self.retrieval.k1 > 0.0;
        if !k1_ok || !(0.0..=1.0).contains(&self.retrieval.b) {
            return invalid(format!(
                "BM25 parameters out of range: k1={}, b={}",
                self.retrieval.k1, self.retrieval.b
            ));
        }
        if self.debate.candidates_per_debater == 0 {
            return invalid("candidates_per_debater must be >= 1".into());
        }
        if self.debate.retention == RetentionStrategy::KeepFixedK && self.debate.fixed_k == 0 {
            return invalid("fixed_k must be >= 1 under keep_fixed_k".into());
        }
        if !(self.debate.dedup_threshold > 0.0 && self.debate.dedup_threshold <= 1.0) {
            return invalid("dedup_threshold must be in (0, 1]".into());
        }
        for (name, backend) in [
            ("debater_1", &self.debate.debater_1),
            ("debater_2", &self.debate.debater_2),
            ("judge", &self.debate.judge),
        ] {
            backend
                .validate()
                .map_err(|e| ConfigError::Invalid(format!("{name}: {e}")))?;
            if let Some(profile) = &backend.mock {
                profile
                    .validate()
                    .map_err(|e| ConfigError::Invalid(format!("{name}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Hash over the full config; any field that affects output bytes is in
    /// here, so changing one invalidates downstream checkpoints.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex_digest(&canonical)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

pub fn file_digest(path: &Path) -> std::io::Result<String> {
    let mut hasher = Sha256::new();
    let mut file = std::fs::File::open(path)?;
    std::io::copy(&mut file, &mut hasher)?;
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    Ok(out)
}
