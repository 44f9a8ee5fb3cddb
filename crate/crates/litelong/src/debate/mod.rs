//! Two-debater-plus-judge topic generation.
//!
//! Per taxonomy leaf, one round runs three strictly sequential phases:
//! both debaters generate candidate topics, each critiques the other's list
//! on four criteria, and a judge names the topics to reject. Rounds are
//! independent and run on a worker pool; results commit in subcategory code
//! order, so the ledger is deterministic regardless of scheduling.
//!
//! The ledger tracks the full candidate set, the judge's rejections, and the
//! final set after a retention strategy plus a cross-subcategory
//! near-duplicate pass ([`dedup`]).

pub mod backend;
pub mod dedup;
pub mod parse;
pub mod prompts;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::Taxonomy;
use crate::Score;
use backend::{Backend, BackendError, ChatRequest};
use dedup::{dedup_topics, DedupRemoval};
use prompts::{CritiqueBrief, Phase, RoundContext, TopicBrief, SYSTEM_PROMPT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DebaterRole {
    #[serde(rename = "debater_1")]
    Debater1,
    #[serde(rename = "debater_2")]
    Debater2,
}

impl DebaterRole {
    pub fn as_str(self) -> &'static str {
        match self {
            DebaterRole::Debater1 => "debater_1",
            DebaterRole::Debater2 => "debater_2",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            DebaterRole::Debater1 => "d1",
            DebaterRole::Debater2 => "d2",
        }
    }
}

/// A candidate topic: a short query string plus the debater's explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub subcategory_code: String,
    pub text: String,
    pub explanation: String,
    pub origin: DebaterRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    Support,
    Object,
}

impl Stance {
    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Support => "support",
            Stance::Object => "object",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Relevance,
    SemanticDiversity,
    Complementarity,
    Quality,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::Relevance,
        Criterion::SemanticDiversity,
        Criterion::Complementarity,
        Criterion::Quality,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Relevance => "relevance",
            Criterion::SemanticDiversity => "semantic_diversity",
            Criterion::Complementarity => "complementarity",
            Criterion::Quality => "quality",
        }
    }
}

/// One debater's assessment of one opposing topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Critique {
    pub critic: DebaterRole,
    pub target_topic_id: String,
    pub criteria_notes: BTreeMap<Criterion, String>,
    pub stance: Stance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub topic_id: String,
    pub rejected: bool,
    pub reason: String,
}

/// One recorded backend exchange, for replay fixtures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transcript {
    pub phase: String,
    pub request: ChatRequest,
    pub response: String,
}

/// Everything produced by one subcategory round, in generation order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    pub subcategory_code: String,
    pub topics: Vec<Topic>,
    pub critiques: Vec<Critique>,
    pub verdicts: Vec<JudgeVerdict>,
    pub reformat_retries: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transcripts: Vec<Transcript>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundFailure {
    pub subcategory_code: String,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicBudget {
    /// leaves x 2 debaters x configured candidates per debater.
    pub full: u64,
    /// `floor(full x scale_factor)`.
    pub configured: u64,
    /// Candidates per debater actually requested after scaling.
    pub effective_candidates_per_debater: usize,
}

/// Output of a full debate pipeline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicLedger {
    pub t_total: Vec<Topic>,
    /// Topic ids the judge rejected.
    pub t_reject: BTreeSet<String>,
    pub dedup_removed: Vec<DedupRemoval>,
    pub t_final: Vec<Topic>,
    pub per_subcategory: BTreeMap<String, RoundRecord>,
    pub failures: Vec<RoundFailure>,
    pub budget: TopicBudget,
}

impl TopicLedger {
    pub fn final_ids(&self) -> BTreeSet<&str> {
        self.t_final.iter().map(|t| t.topic_id.as_str()).collect()
    }

    /// Checks `t_final = (t_total \ t_reject) \ dedup_removed` as exact sets.
    /// Under the filter-reject strategy this must always hold; with no
    /// near-duplicates it degenerates to the plain set difference.
    pub fn set_identity_holds(&self) -> bool {
        let removed: BTreeSet<&str> = self
            .dedup_removed
            .iter()
            .map(|r| r.removed_id.as_str())
            .collect();
        let expected: BTreeSet<&str> = self
            .t_total
            .iter()
            .map(|t| t.topic_id.as_str())
            .filter(|id| !self.t_reject.contains(*id) && !removed.contains(id))
            .collect();
        self.final_ids() == expected
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetentionStrategy {
    /// Drop exactly the judge-rejected topics (default).
    FilterReject,
    /// Keep exactly the judge-accepted topics. Identical output by
    /// construction; kept as a distinct code path for the ablation where the
    /// judge is prompted for acceptances instead of rejections.
    KeepAccept,
    /// Keep the first `min(k, accepted)` accepted topics per subcategory, in
    /// generation order. Never pads or re-queries on under-supply.
    KeepFixedK,
}

#[derive(Debug, Error)]
pub enum RoundError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{phase}: {detail}")]
    Unparseable { phase: &'static str, detail: String },
    #[error("judge called with zero topics")]
    NoTopics,
}

#[derive(Debug, Error)]
pub enum DebateError {
    #[error("{failed} of {total} subcategory rounds failed (> 10%); first: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },
    #[error("no verdict recorded for topic {topic_id}")]
    MissingVerdict { topic_id: String },
    #[error("keep_fixed_k needs k >= 1")]
    BadFixedK,
}

/// Orchestration knobs for one pipeline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DebateSettings {
    pub candidates_per_debater: usize,
    pub retention: RetentionStrategy,
    pub fixed_k: usize,
    pub dedup_threshold: Score,
    pub scale_factor: Score,
    pub workers: usize,
    pub save_transcripts: bool,
}

impl Default for DebateSettings {
    fn default() -> Self {
        Self {
            candidates_per_debater: 4,
            retention: RetentionStrategy::FilterReject,
            fixed_k: 10,
            dedup_threshold: 0.8,
            scale_factor: 1.0,
            workers: std::thread::available_parallelism().map_or(4, |n| n.get()),
            save_transcripts: false,
        }
    }
}

pub struct DebateBackends {
    pub debater_1: Backend,
    pub debater_2: Backend,
    pub judge: Backend,
}

impl DebateBackends {
    pub fn total_calls(&self) -> u64 {
        self.debater_1.total_calls() + self.debater_2.total_calls() + self.judge.total_calls()
    }
}

/// Prompt-facing description of one subcategory.
#[derive(Debug, Clone)]
pub struct SubcategoryContext {
    pub code: String,
    pub label: String,
    pub path: String,
}

/// Raw topic capacity of a taxonomy under `n` candidates per debater.
pub fn full_topic_budget(leaf_count: usize, candidates_per_debater: usize) -> u64 {
    leaf_count as u64 * 2 * candidates_per_debater as u64
}

/// Budget after applying the scale factor (floor).
pub fn configured_topic_budget(full_budget: u64, scale_factor: Score) -> u64 {
    (full_budget as Score * scale_factor).floor() as u64
}

/// Scaling acts on the per-debater candidate count, preserving taxonomy
/// coverage: every leaf still runs a round, with fewer (or more) candidates.
pub fn effective_candidates(candidates_per_debater: usize, scale_factor: Score) -> usize {
    ((candidates_per_debater as Score * scale_factor).round() as usize).max(1)
}

#[derive(Debug)]
pub struct PhaseOutcome<T> {
    pub value: T,
    pub reformat_retries: u32,
    pub transcripts: Vec<Transcript>,
}

fn call_phase<T>(
    backend: &Backend,
    ctx: &RoundContext,
    user_prompt: String,
    schema: &str,
    phase: &'static str,
    record: bool,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<PhaseOutcome<T>, RoundError> {
    let mut transcripts = Vec::new();
    let request = backend.request(SYSTEM_PROMPT, &user_prompt);
    let raw = backend.execute(&request)?;
    if record {
        transcripts.push(Transcript {
            phase: phase.to_string(),
            request,
            response: raw.clone(),
        });
    }
    match parse(&raw) {
        Ok(value) => Ok(PhaseOutcome {
            value,
            reformat_retries: 0,
            transcripts,
        }),
        Err(_) => {
            // One reformat retry: show the model its reply and the schema.
            let retry_prompt = prompts::render_reformat(ctx, schema, &raw);
            let request = backend.request(SYSTEM_PROMPT, &retry_prompt);
            let raw2 = backend.execute(&request)?;
            if record {
                transcripts.push(Transcript {
                    phase: format!("{phase}:reformat"),
                    request,
                    response: raw2.clone(),
                });
            }
            match parse(&raw2) {
                Ok(value) => Ok(PhaseOutcome {
                    value,
                    reformat_retries: 1,
                    transcripts,
                }),
                Err(detail) => Err(RoundError::Unparseable { phase, detail }),
            }
        }
    }
}

fn base_context(sub: &SubcategoryContext, phase: Phase) -> RoundContext {
    RoundContext {
        phase,
        subcategory_code: sub.code.clone(),
        subcategory_label: sub.label.clone(),
        subcategory_path: sub.path.clone(),
        n: 0,
        own_role: None,
        topics: Vec::new(),
        critiques: Vec::new(),
    }
}

fn briefs(topics: &[Topic]) -> Vec<TopicBrief> {
    topics
        .iter()
        .map(|t| TopicBrief {
            topic_id: t.topic_id.clone(),
            text: t.text.clone(),
            origin: t.origin,
        })
        .collect()
}

/// Asks one debater for up to `n` candidate topics for a subcategory.
pub fn generate_candidates(
    sub: &SubcategoryContext,
    debater: DebaterRole,
    n: usize,
    backend: &Backend,
    record: bool,
) -> Result<PhaseOutcome<Vec<Topic>>, RoundError> {
    let mut ctx = base_context(sub, Phase::Generate);
    ctx.n = n;
    ctx.own_role = Some(debater);
    let prompt = prompts::render_generate(&ctx);
    call_phase(
        backend,
        &ctx,
        prompt,
        prompts::TOPICS_SCHEMA,
        "generate",
        record,
        |raw| parse::parse_topics(raw, &sub.code, debater, n),
    )
}

/// Mutual critique: debater 2 reviews `topics_1`, debater 1 reviews
/// `topics_2`. Every topic ends up with at least one critique whose critic
/// differs from its origin.
pub fn cross_critique(
    sub: &SubcategoryContext,
    topics_1: &[Topic],
    topics_2: &[Topic],
    backend_1: &Backend,
    backend_2: &Backend,
    record: bool,
) -> Result<PhaseOutcome<Vec<Critique>>, RoundError> {
    let run = |critic: DebaterRole,
                   peer: &[Topic],
                   backend: &Backend|
     -> Result<PhaseOutcome<Vec<Critique>>, RoundError> {
        let mut ctx = base_context(sub, Phase::Critique);
        ctx.own_role = Some(critic);
        ctx.topics = briefs(peer);
        let prompt = prompts::render_critique(&ctx, peer);
        let peer_ids: BTreeSet<String> = peer.iter().map(|t| t.topic_id.clone()).collect();
        call_phase(
            backend,
            &ctx,
            prompt,
            prompts::CRITIQUES_SCHEMA,
            "critique",
            record,
            |raw| parse::parse_critiques(raw, critic, &peer_ids),
        )
    };

    let on_1 = run(DebaterRole::Debater2, topics_1, backend_2)?;
    let on_2 = run(DebaterRole::Debater1, topics_2, backend_1)?;

    let mut critiques = on_1.value;
    critiques.extend(on_2.value);
    let mut transcripts = on_1.transcripts;
    transcripts.extend(on_2.transcripts);
    Ok(PhaseOutcome {
        value: critiques,
        reformat_retries: on_1.reformat_retries + on_2.reformat_retries,
        transcripts,
    })
}

/// Judge phase: one verdict per topic, rejections carrying a reason.
pub fn judge_round(
    sub: &SubcategoryContext,
    topics: &[Topic],
    critiques: &[Critique],
    backend: &Backend,
    record: bool,
) -> Result<PhaseOutcome<Vec<JudgeVerdict>>, RoundError> {
    if topics.is_empty() {
        return Err(RoundError::NoTopics);
    }
    let mut ctx = base_context(sub, Phase::Judge);
    ctx.topics = briefs(topics);
    ctx.critiques = critiques
        .iter()
        .map(|c| CritiqueBrief {
            critic: c.critic,
            target_topic_id: c.target_topic_id.clone(),
            stance: c.stance.as_str().to_string(),
        })
        .collect();
    let prompt = prompts::render_judge(&ctx, topics, critiques);
    let topic_ids: Vec<String> = topics.iter().map(|t| t.topic_id.clone()).collect();
    call_phase(
        backend,
        &ctx,
        prompt,
        prompts::JUDGE_SCHEMA,
        "judge",
        record,
        |raw| parse::parse_judge(raw, &topic_ids),
    )
}

fn run_round(
    sub: &SubcategoryContext,
    n: usize,
    backends: &DebateBackends,
    record: bool,
) -> Result<RoundRecord, RoundError> {
    let gen_1 = generate_candidates(sub, DebaterRole::Debater1, n, &backends.debater_1, record)?;
    let gen_2 = generate_candidates(sub, DebaterRole::Debater2, n, &backends.debater_2, record)?;
    let crit = cross_critique(
        sub,
        &gen_1.value,
        &gen_2.value,
        &backends.debater_1,
        &backends.debater_2,
        record,
    )?;
    let mut topics = gen_1.value;
    topics.extend(gen_2.value);
    let judged = judge_round(sub, &topics, &crit.value, &backends.judge, record)?;

    let mut transcripts = gen_1.transcripts;
    transcripts.extend(gen_2.transcripts);
    transcripts.extend(crit.transcripts);
    transcripts.extend(judged.transcripts);
    Ok(RoundRecord {
        subcategory_code: sub.code.clone(),
        topics,
        critiques: crit.value,
        verdicts: judged.value,
        reformat_retries: gen_1.reformat_retries
            + gen_2.reformat_retries
            + crit.reformat_retries
            + judged.reformat_retries,
        transcripts,
    })
}

/// Applies a retention strategy over completed rounds. Requires a verdict
/// for every topic; returns retained topics in ledger order.
pub fn apply_retention(
    strategy: RetentionStrategy,
    rounds: &BTreeMap<String, RoundRecord>,
    k: usize,
) -> Result<Vec<Topic>, DebateError> {
    if strategy == RetentionStrategy::KeepFixedK && k < 1 {
        return Err(DebateError::BadFixedK);
    }
    let mut retained = Vec::new();
    for round in rounds.values() {
        let verdicts: BTreeMap<&str, bool> = round
            .verdicts
            .iter()
            .map(|v| (v.topic_id.as_str(), v.rejected))
            .collect();
        let rejected_of = |topic: &Topic| -> Result<bool, DebateError> {
            verdicts
                .get(topic.topic_id.as_str())
                .copied()
                .ok_or_else(|| DebateError::MissingVerdict {
                    topic_id: topic.topic_id.clone(),
                })
        };
        match strategy {
            RetentionStrategy::FilterReject => {
                let mut reject_ids: BTreeSet<&str> = BTreeSet::new();
                for topic in &round.topics {
                    if rejected_of(topic)? {
                        reject_ids.insert(topic.topic_id.as_str());
                    }
                }
                retained.extend(
                    round
                        .topics
                        .iter()
                        .filter(|t| !reject_ids.contains(t.topic_id.as_str()))
                        .cloned(),
                );
            }
            RetentionStrategy::KeepAccept => {
                for topic in &round.topics {
                    if !rejected_of(topic)? {
                        retained.push(topic.clone());
                    }
                }
            }
            RetentionStrategy::KeepFixedK => {
                let mut taken = 0usize;
                for topic in &round.topics {
                    // Verdict completeness is checked for every topic, even
                    // past the k cutoff.
                    if !rejected_of(topic)? && taken < k {
                        retained.push(topic.clone());
                        taken += 1;
                    }
                }
            }
        }
    }
    Ok(retained)
}

/// Runs the full per-subcategory protocol over every taxonomy leaf and
/// assembles the ledger. Failed rounds are reported, not fatal, unless more
/// than 10% of rounds fail.
pub fn run_debate_pipeline(
    taxonomy: &Taxonomy,
    settings: &DebateSettings,
    backends: &DebateBackends,
) -> Result<TopicLedger, DebateError> {
    let leaves = taxonomy.subcategories();
    let contexts: Vec<SubcategoryContext> = leaves
        .iter()
        .map(|code| {
            let node = taxonomy.node(code).expect("leaf exists");
            SubcategoryContext {
                code: code.clone(),
                label: node.label.clone(),
                path: taxonomy.path_label(code).expect("leaf path exists"),
            }
        })
        .collect();

    let n = effective_candidates(settings.candidates_per_debater, settings.scale_factor);
    let workers = settings.workers.max(1).min(contexts.len().max(1));

    let slots: Vec<Mutex<Option<Result<RoundRecord, RoundFailure>>>> =
        (0..contexts.len()).map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                if i >= contexts.len() {
                    break;
                }
                let sub = &contexts[i];
                let outcome = run_round(sub, n, backends, settings.save_transcripts)
                    .map_err(|e| RoundFailure {
                        subcategory_code: sub.code.clone(),
                        error: e.to_string(),
                    });
                *slots[i].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut per_subcategory = BTreeMap::new();
    let mut failures = Vec::new();
    for slot in slots {
        match slot.into_inner().unwrap().expect("round slot filled") {
            Ok(record) => {
                per_subcategory.insert(record.subcategory_code.clone(), record);
            }
            Err(failure) => failures.push(failure),
        }
    }
    if failures.len() * 10 > contexts.len() {
        return Err(DebateError::TooManyFailures {
            failed: failures.len(),
            total: contexts.len(),
            first: failures[0].error.clone(),
        });
    }

    let mut t_total = Vec::new();
    let mut t_reject = BTreeSet::new();
    for round in per_subcategory.values() {
        t_total.extend(round.topics.iter().cloned());
        for verdict in &round.verdicts {
            if verdict.rejected {
                t_reject.insert(verdict.topic_id.clone());
            }
        }
    }

    let retained = apply_retention(settings.retention, &per_subcategory, settings.fixed_k)?;
    let (t_final, dedup_removed) = dedup_topics(&retained, settings.dedup_threshold);

    let full = full_topic_budget(leaves.len(), settings.candidates_per_debater);
    Ok(TopicLedger {
        t_total,
        t_reject,
        dedup_removed,
        t_final,
        per_subcategory,
        failures,
        budget: TopicBudget {
            full,
            configured: configured_topic_budget(full, settings.scale_factor),
            effective_candidates_per_debater: n,
        },
    })
}
