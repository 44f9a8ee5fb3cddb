//! Deterministic stand-in for the debate and judge models.
//!
//! The mock reads the structured round context embedded in every prompt and
//! answers with the same strict JSON a live model is asked for, so its output
//! flows through the production parsers with no test-only code path. A
//! missing context block is an error: it means a prompt template regressed.

use serde::{Deserialize, Serialize};

use crate::debate::backend::{BackendError, ChatBackend, ChatRequest};
use crate::debate::prompts::{extract_context, Phase, RoundContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockRole {
    Debater,
    Judge,
}

/// Behavior knobs for one mock model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockProfile {
    pub role: MockRole,
    /// Judge: reject every n-th topic, 1-indexed by arrival order; 0 never
    /// rejects.
    #[serde(default)]
    pub reject_every: usize,
    /// Debater: number of distinct facets it can produce per subcategory.
    #[serde(default = "default_facet_count")]
    pub facet_count: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_facet_count() -> usize {
    4
}

impl MockProfile {
    pub fn debater(facet_count: usize, seed: u64) -> Self {
        Self {
            role: MockRole::Debater,
            reject_every: 0,
            facet_count,
            seed,
        }
    }

    pub fn judge(reject_every: usize, seed: u64) -> Self {
        Self {
            role: MockRole::Judge,
            reject_every,
            facet_count: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.facet_count < 1 {
            return Err("facet_count must be >= 1".to_string());
        }
        Ok(())
    }
}

/// Pure function of (profile, prompt): the canned completion text.
pub fn mock_complete(profile: &MockProfile, prompt: &str) -> Result<String, String> {
    let ctx = extract_context(prompt)
        .ok_or_else(|| "prompt carries no round context block".to_string())?;
    match (profile.role, ctx.phase) {
        (MockRole::Debater, Phase::Generate) => Ok(render_topics(profile, &ctx)),
        (MockRole::Debater, Phase::Critique) => Ok(render_critiques(&ctx)),
        (MockRole::Judge, Phase::Judge) => Ok(render_verdicts(profile, &ctx)),
        (role, phase) => Err(format!(
            "mock role {role:?} cannot serve phase {phase:?}"
        )),
    }
}

fn render_topics(profile: &MockProfile, ctx: &RoundContext) -> String {
    let count = ctx.n.max(1).min(profile.facet_count);
    // The second debater numbers its facets after the first debater's range,
    // emulating two models that propose different topics.
    let offset = match ctx.own_role {
        Some(crate::debate::DebaterRole::Debater2) => profile.facet_count,
        _ => 0,
    };
    let topics: Vec<serde_json::Value> = (1..=count)
        .map(|i| {
            let facet = offset + i;
            serde_json::json!({
                "text": format!("{} — facet {facet}", ctx.subcategory_label),
                "explanation": format!(
                    "Deterministic facet {facet} of {} (seed {}).",
                    ctx.subcategory_label, profile.seed
                ),
            })
        })
        .collect();
    serde_json::json!({ "topics": topics }).to_string()
}

fn render_critiques(ctx: &RoundContext) -> String {
    let critiques: Vec<serde_json::Value> = ctx
        .topics
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let stance = if i % 2 == 0 { "support" } else { "object" };
            serde_json::json!({
                "target_topic_id": t.topic_id,
                "stance": stance,
                "criteria": {
                    "relevance": format!("{:?} maps onto {}", t.text, ctx.subcategory_label),
                    "semantic_diversity": format!("facet index {i} widens the round"),
                    "complementarity": "no overlap with own candidates",
                    "quality": "phrasing is concrete enough to query",
                },
            })
        })
        .collect();
    serde_json::json!({ "critiques": critiques }).to_string()
}

fn render_verdicts(profile: &MockProfile, ctx: &RoundContext) -> String {
    let mut rejections = Vec::new();
    if profile.reject_every > 0 {
        for (i, t) in ctx.topics.iter().enumerate() {
            if (i + 1) % profile.reject_every == 0 {
                rejections.push(serde_json::json!({
                    "topic_id": t.topic_id,
                    "reason": "mock-reject",
                }));
            }
        }
    }
    serde_json::json!({ "rejections": rejections }).to_string()
}

/// [`ChatBackend`] adapter over [`mock_complete`]. Stateless; safe for
/// unlimited concurrent calls.
pub struct MockBackend {
    profile: MockProfile,
}

impl MockBackend {
    pub fn new(profile: MockProfile) -> Self {
        Self { profile }
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let prompt = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or_default();
        mock_complete(&self.profile, prompt).map_err(BackendError::Mock)
    }
}
