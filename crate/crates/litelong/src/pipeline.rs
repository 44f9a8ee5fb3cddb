//! Stage orchestration: topics -> index -> retrieve -> assemble -> analyze,
//! with stage-granularity checkpoints.
//!
//! Each stage writes its outputs plus a manifest under the output directory.
//! A checkpoint records a fingerprint over the stage's config slice and the
//! digests of its input files; re-invocation skips stages whose fingerprint
//! is unchanged and whose outputs still exist, so editing any field that
//! affects output bytes invalidates everything downstream of it.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{classify_topics, sample_stats, AnalysisError, HypernymGraph};
use crate::assembly::{
    assemble_nextlong, assemble_shuffle, write_samples, AssembleError, AssemblyStrategy,
    LongSample, NextlongOptions,
};
use crate::config::{file_digest, hex_digest, ConfigError, PipelineConfig};
use crate::corpus::{CorpusError, CorpusStore};
use crate::debate::backend::BackendError;
use crate::debate::dedup::fnv1a;
use crate::debate::{
    run_debate_pipeline, DebateBackends, DebateError, DebateSettings, Topic, TopicLedger,
};
use crate::retrieval::{Bm25Params, IndexError, InvertedIndex, RetrievalResult};
use crate::taxonomy::{Taxonomy, TaxonomyError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("taxonomy: {0}")]
    Taxonomy(#[from] TaxonomyError),
    #[error("debate: {0}")]
    Debate(#[from] DebateError),
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
    #[error("index: {0}")]
    Index(#[from] IndexError),
    #[error("assembly: {0}")]
    Assemble(#[from] AssembleError),
    #[error("analysis: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("stage {stage} needs {path}, which does not exist; run the earlier stages first")]
    MissingInput { stage: Stage, path: PathBuf },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Topics,
    Index,
    Retrieve,
    Assemble,
    Analyze,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Topics,
        Stage::Index,
        Stage::Retrieve,
        Stage::Assemble,
        Stage::Analyze,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Topics => "topics",
            Stage::Index => "index",
            Stage::Retrieve => "retrieve",
            Stage::Assemble => "assemble",
            Stage::Analyze => "analyze",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Well-known file locations under the output directory.
#[derive(Debug, Clone)]
pub struct OutputPaths {
    root: PathBuf,
}

impl OutputPaths {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
        }
    }

    pub fn topics_jsonl(&self) -> PathBuf {
        self.root.join("topics.jsonl")
    }
    pub fn transcripts_jsonl(&self) -> PathBuf {
        self.root.join("transcripts.jsonl")
    }
    pub fn skip_report(&self) -> PathBuf {
        self.root.join("skip_report.jsonl")
    }
    pub fn index_snapshot(&self) -> PathBuf {
        self.root.join("index.llidx")
    }
    pub fn retrievals_jsonl(&self) -> PathBuf {
        self.root.join("retrievals.jsonl")
    }
    pub fn samples_jsonl(&self) -> PathBuf {
        self.root.join("samples.jsonl")
    }
    pub fn samples_manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
    pub fn abstraction_report(&self) -> PathBuf {
        self.root.join("abstraction_report.json")
    }
    pub fn stats_report(&self) -> PathBuf {
        self.root.join("stats_report.json")
    }
    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints.json")
    }
    pub fn stage_manifest(&self, stage: Stage) -> PathBuf {
        self.root.join("manifests").join(format!("{stage}.json"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
struct Checkpoints {
    stages: BTreeMap<String, StageCheckpoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StageCheckpoint {
    fingerprint: String,
    outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub stage: Stage,
    pub skipped: bool,
    pub outputs: Vec<PathBuf>,
}

/// One line of topics.jsonl.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicLine {
    pub topic_id: String,
    pub subcategory_code: String,
    pub text: String,
    pub explanation: String,
    pub origin: crate::debate::DebaterRole,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

pub struct Runner {
    config: PipelineConfig,
    paths: OutputPaths,
    workers: usize,
}

impl Runner {
    /// Validates the config and prepares the output directory.
    pub fn new(config: PipelineConfig, workers: usize) -> Result<Self, PipelineError> {
        config.validate()?;
        let paths = OutputPaths::new(&config.paths.output_dir);
        std::fs::create_dir_all(config.paths.output_dir.join("manifests"))?;
        Ok(Self {
            config,
            paths,
            workers: workers.max(1),
        })
    }

    pub fn paths(&self) -> &OutputPaths {
        &self.paths
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Runs the requested stages in canonical order, honoring checkpoints.
    pub fn run(&self, stages: &[Stage]) -> Result<Vec<StageReport>, PipelineError> {
        let mut ordered = stages.to_vec();
        ordered.sort();
        ordered.dedup();
        let mut reports = Vec::new();
        for stage in ordered {
            reports.push(self.run_stage(stage)?);
        }
        Ok(reports)
    }

    pub fn run_stage(&self, stage: Stage) -> Result<StageReport, PipelineError> {
        let fingerprint = self.fingerprint(stage)?;
        let mut checkpoints = self.load_checkpoints();
        if let Some(existing) = checkpoints.stages.get(stage.as_str()) {
            if existing.fingerprint == fingerprint
                && existing.outputs.iter().all(|p| p.exists())
            {
                log::info!("stage {stage}: unchanged inputs, skipping");
                return Ok(StageReport {
                    stage,
                    skipped: true,
                    outputs: existing.outputs.clone(),
                });
            }
        }

        log::info!("stage {stage}: running");
        let (outputs, manifest_body) = match stage {
            Stage::Topics => self.run_topics()?,
            Stage::Index => self.run_index()?,
            Stage::Retrieve => self.run_retrieve()?,
            Stage::Assemble => self.run_assemble()?,
            Stage::Analyze => self.run_analyze()?,
        };

        let manifest_path = self.paths.stage_manifest(stage);
        let manifest = serde_json::json!({
            "stage": stage.as_str(),
            "fingerprint": fingerprint,
            "outputs": outputs,
            "details": manifest_body,
        });
        std::fs::write(&manifest_path, serde_json::to_vec_pretty(&manifest)?)?;

        let mut all_outputs = outputs;
        all_outputs.push(manifest_path);
        checkpoints.stages.insert(
            stage.as_str().to_string(),
            StageCheckpoint {
                fingerprint,
                outputs: all_outputs.clone(),
            },
        );
        std::fs::write(
            self.paths.checkpoints(),
            serde_json::to_vec_pretty(&checkpoints)?,
        )?;
        Ok(StageReport {
            stage,
            skipped: false,
            outputs: all_outputs,
        })
    }

    fn load_checkpoints(&self) -> Checkpoints {
        std::fs::read_to_string(self.paths.checkpoints())
            .ok()
            .and_then(|raw| serde_json::from_str(&raw).ok())
            .unwrap_or_default()
    }

    fn require_input(&self, stage: Stage, path: PathBuf) -> Result<PathBuf, PipelineError> {
        if path.exists() {
            Ok(path)
        } else {
            Err(PipelineError::MissingInput { stage, path })
        }
    }

    /// Fingerprint over the stage's config slice plus input-file digests.
    fn fingerprint(&self, stage: Stage) -> Result<String, PipelineError> {
        let mut inputs: BTreeMap<String, String> = BTreeMap::new();
        let config_slice = match stage {
            Stage::Topics => {
                inputs.insert(
                    "taxonomy".into(),
                    file_digest(&self.config.paths.taxonomy)?,
                );
                serde_json::json!({
                    "debate": self.config.debate,
                    "scale_factor": self.config.scale_factor,
                })
            }
            Stage::Index => {
                for p in &self.config.paths.corpus {
                    inputs.insert(p.display().to_string(), file_digest(p)?);
                }
                serde_json::json!({
                    "k1": self.config.retrieval.k1,
                    "b": self.config.retrieval.b,
                })
            }
            Stage::Retrieve => {
                for path in [self.paths.topics_jsonl(), self.paths.index_snapshot()] {
                    if path.exists() {
                        inputs.insert(path.display().to_string(), file_digest(&path)?);
                    }
                }
                serde_json::json!({ "top_k": self.config.retrieval.top_k })
            }
            Stage::Assemble => {
                let path = self.paths.retrievals_jsonl();
                if path.exists() {
                    inputs.insert(path.display().to_string(), file_digest(&path)?);
                }
                for p in &self.config.paths.corpus {
                    inputs.insert(p.display().to_string(), file_digest(p)?);
                }
                // k1/b feed the hard-negative miner, not just the index.
                serde_json::json!({
                    "assembly": self.config.assembly,
                    "k1": self.config.retrieval.k1,
                    "b": self.config.retrieval.b,
                })
            }
            Stage::Analyze => {
                for path in [self.paths.topics_jsonl(), self.paths.samples_jsonl()] {
                    if path.exists() {
                        inputs.insert(path.display().to_string(), file_digest(&path)?);
                    }
                }
                if let Some(h) = &self.config.paths.hypernyms {
                    if h.exists() {
                        inputs.insert(h.display().to_string(), file_digest(h)?);
                    }
                }
                serde_json::json!(self.config.analysis)
            }
        };
        let body = serde_json::json!({
            "stage": stage.as_str(),
            "config": config_slice,
            "inputs": inputs,
        });
        Ok(hex_digest(&serde_json::to_vec(&body)?))
    }

    fn build_backends(&self) -> Result<DebateBackends, PipelineError> {
        Ok(DebateBackends {
            debater_1: self.config.debate.debater_1.build()?,
            debater_2: self.config.debate.debater_2.build()?,
            judge: self.config.debate.judge.build()?,
        })
    }

    fn run_topics(&self) -> Result<(Vec<PathBuf>, serde_json::Value), PipelineError> {
        let taxonomy = Taxonomy::load(&self.config.paths.taxonomy)?;
        let backends = self.build_backends()?;
        let settings = DebateSettings {
            candidates_per_debater: self.config.debate.candidates_per_debater,
            retention: self.config.debate.retention,
            fixed_k: self.config.debate.fixed_k,
            dedup_threshold: self.config.debate.dedup_threshold,
            scale_factor: self.config.scale_factor,
            workers: self.workers,
            save_transcripts: self.config.debate.save_transcripts,
        };
        let ledger = run_debate_pipeline(&taxonomy, &settings, &backends)?;

        let topics_path = self.paths.topics_jsonl();
        write_topic_lines(&ledger, &topics_path)?;
        let mut outputs = vec![topics_path];

        if self.config.debate.save_transcripts {
            let path = self.paths.transcripts_jsonl();
            let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
            for round in ledger.per_subcategory.values() {
                for transcript in &round.transcripts {
                    let line = serde_json::json!({
                        "subcategory_code": round.subcategory_code,
                        "phase": transcript.phase,
                        "request": transcript.request,
                        "response": transcript.response,
                    });
                    serde_json::to_writer(&mut out, &line)?;
                    out.write_all(b"\n")?;
                }
            }
            out.flush()?;
            outputs.push(path);
        }

        let manifest = serde_json::json!({
            "subcategories": taxonomy.subcategory_count(),
            "t_total": ledger.t_total.len(),
            "t_reject": ledger.t_reject.len(),
            "dedup_removed": ledger.dedup_removed.len(),
            "t_final": ledger.t_final.len(),
            "failed_rounds": ledger.failures,
            "budget": ledger.budget,
        });
        Ok((outputs, manifest))
    }

    fn run_index(&self) -> Result<(Vec<PathBuf>, serde_json::Value), PipelineError> {
        let corpus = CorpusStore::ingest(&self.config.paths.corpus)?;
        let params = Bm25Params {
            k1: self.config.retrieval.k1,
            b: self.config.retrieval.b,
        };
        let index = InvertedIndex::build(&corpus, params)?;
        let snapshot = self.paths.index_snapshot();
        index.save_snapshot(&snapshot)?;
        let skip_report = self.paths.skip_report();
        corpus.write_skip_report(&skip_report)?;
        let manifest = serde_json::json!({
            "docs": corpus.stats().doc_count,
            "total_tokens": corpus.stats().total_tokens,
            "avg_doc_tokens": corpus.stats().avg_doc_tokens,
            "source_breakdown": corpus.stats().source_breakdown,
            "skipped_lines": corpus.skips().len(),
            "terms": index.posting_lists().len(),
        });
        Ok((vec![snapshot, skip_report], manifest))
    }

    fn run_retrieve(&self) -> Result<(Vec<PathBuf>, serde_json::Value), PipelineError> {
        let topics_path = self.require_input(Stage::Retrieve, self.paths.topics_jsonl())?;
        let snapshot = self.require_input(Stage::Retrieve, self.paths.index_snapshot())?;
        let index = InvertedIndex::load_snapshot(&snapshot)?;
        let topics = read_retained_topics(&topics_path)?;

        let top_k = self.config.retrieval.top_k;
        let results: Vec<Result<RetrievalResult, IndexError>> = topics
            .par_iter()
            .map(|t| index.retrieve(t, top_k))
            .collect();

        let out_path = self.paths.retrievals_jsonl();
        let mut out = std::io::BufWriter::new(std::fs::File::create(&out_path)?);
        let mut warnings = Vec::new();
        let mut written = 0usize;
        for result in results {
            match result {
                Ok(r) => {
                    serde_json::to_writer(&mut out, &r)?;
                    out.write_all(b"\n")?;
                    written += 1;
                }
                Err(e) => warnings.push(e.to_string()),
            }
        }
        out.flush()?;
        let manifest = serde_json::json!({
            "topics": topics.len(),
            "retrievals": written,
            "top_k": top_k,
            "warnings": warnings,
        });
        Ok((vec![out_path], manifest))
    }

    fn run_assemble(&self) -> Result<(Vec<PathBuf>, serde_json::Value), PipelineError> {
        let retrievals_path = self.require_input(Stage::Assemble, self.paths.retrievals_jsonl())?;
        let corpus = CorpusStore::ingest(&self.config.paths.corpus)?;
        let retrievals = read_retrievals(&retrievals_path)?;

        let assembly = &self.config.assembly;
        let outcomes: Vec<Result<crate::assembly::AssemblyOutcome, AssembleError>> = retrievals
            .par_iter()
            .map(|result| {
                let seed = assembly.seed ^ fnv1a(result.topic_id.as_bytes());
                match assembly.strategy {
                    AssemblyStrategy::ShuffleConcat => assemble_shuffle(
                        result,
                        &corpus,
                        assembly.target_tokens,
                        seed,
                        assembly.allow_short,
                    ),
                    AssemblyStrategy::Nextlong => assemble_nextlong(
                        result,
                        &corpus,
                        &NextlongOptions {
                            target_tokens: assembly.target_tokens,
                            meta_chunk_tokens: assembly.meta_chunk_tokens,
                            negatives_per_chunk: assembly.negatives_per_chunk,
                            allow_short: assembly.allow_short,
                            params: Bm25Params {
                                k1: self.config.retrieval.k1,
                                b: self.config.retrieval.b,
                            },
                        },
                        seed,
                    ),
                }
            })
            .collect();

        let mut samples: Vec<LongSample> = Vec::new();
        let mut dropped_short = 0usize;
        let mut warnings = Vec::new();
        for outcome in outcomes {
            let outcome = outcome?;
            samples.extend(outcome.samples);
            dropped_short += outcome.dropped_short;
            warnings.extend(outcome.warnings);
        }

        let samples_path = self.paths.samples_jsonl();
        let manifest = write_samples(
            &samples,
            &corpus,
            &samples_path,
            crate::assembly::WriteContext {
                joiner: assembly.joiner.clone(),
                target_tokens: assembly.target_tokens,
                strategy: assembly.strategy,
                config_hash: self.config.config_hash(),
                dropped_short,
                warnings,
            },
        )?;
        let manifest_path = self.paths.samples_manifest();
        std::fs::write(&manifest_path, serde_json::to_vec_pretty(&manifest)?)?;
        let body = serde_json::to_value(&manifest)?;
        Ok((vec![samples_path, manifest_path], body))
    }

    fn run_analyze(&self) -> Result<(Vec<PathBuf>, serde_json::Value), PipelineError> {
        let hypernyms = self
            .config
            .paths
            .hypernyms
            .clone()
            .ok_or_else(|| ConfigError::Invalid("analyze stage needs paths.hypernyms".into()))?;
        let topics_path = self.require_input(Stage::Analyze, self.paths.topics_jsonl())?;
        let samples_path = self.require_input(Stage::Analyze, self.paths.samples_jsonl())?;

        let graph = HypernymGraph::load_with_mode(&hypernyms, self.config.analysis.depth_mode)?;
        let topics = read_retained_topics(&topics_path)?;
        let abstraction = classify_topics(&graph, &topics);
        let abstraction_path = self.paths.abstraction_report();
        std::fs::write(&abstraction_path, serde_json::to_vec_pretty(&abstraction)?)?;

        let corpus = CorpusStore::ingest(&self.config.paths.corpus)?;
        let stats = sample_stats(&samples_path, Some(&corpus))?;
        let stats_path = self.paths.stats_report();
        std::fs::write(&stats_path, serde_json::to_vec_pretty(&stats)?)?;

        let manifest = serde_json::json!({
            "topics_classified": abstraction.per_topic_depth.len(),
            "unknown_topics": abstraction.unknown_terms,
            "share_abstract": abstraction.share_abstract,
            "share_specific": abstraction.share_specific,
            "samples": stats.samples,
        });
        Ok((vec![abstraction_path, stats_path], manifest))
    }
}

/// Writes topics.jsonl in ledger order with per-topic status.
fn write_topic_lines(ledger: &TopicLedger, path: &Path) -> Result<(), PipelineError> {
    let reject_reasons: BTreeMap<&str, &str> = ledger
        .per_subcategory
        .values()
        .flat_map(|r| r.verdicts.iter())
        .filter(|v| v.rejected)
        .map(|v| (v.topic_id.as_str(), v.reason.as_str()))
        .collect();
    let dedup_kept: BTreeMap<&str, &str> = ledger
        .dedup_removed
        .iter()
        .map(|r| (r.removed_id.as_str(), r.kept_id.as_str()))
        .collect();
    let final_ids = ledger.final_ids();

    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for topic in &ledger.t_total {
        let id = topic.topic_id.as_str();
        let (status, reason) = if let Some(reason) = reject_reasons.get(id) {
            ("rejected", Some((*reason).to_string()))
        } else if let Some(kept) = dedup_kept.get(id) {
            ("dedup_removed", Some(format!("near-duplicate of {kept}")))
        } else if final_ids.contains(id) {
            ("retained", None)
        } else {
            // Accepted but over the keep_fixed_k budget.
            ("rejected", Some("beyond fixed-k retention budget".to_string()))
        };
        let line = TopicLine {
            topic_id: topic.topic_id.clone(),
            subcategory_code: topic.subcategory_code.clone(),
            text: topic.text.clone(),
            explanation: topic.explanation.clone(),
            origin: topic.origin,
            status: status.to_string(),
            reason,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads back the retained topics from topics.jsonl, in file order.
pub fn read_retained_topics(path: &Path) -> Result<Vec<Topic>, PipelineError> {
    let raw = std::fs::read_to_string(path)?;
    let mut topics = Vec::new();
    for line in raw.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TopicLine = serde_json::from_str(line)?;
        if parsed.status == "retained" {
            topics.push(Topic {
                topic_id: parsed.topic_id,
                subcategory_code: parsed.subcategory_code,
                text: parsed.text,
                explanation: parsed.explanation,
                origin: parsed.origin,
            });
        }
    }
    Ok(topics)
}

pub fn read_retrievals(path: &Path) -> Result<Vec<RetrievalResult>, PipelineError> {
    let raw = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in raw.lines() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line)?);
    }
    Ok(out)
}
