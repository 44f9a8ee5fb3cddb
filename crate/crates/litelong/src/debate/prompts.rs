//! Versioned prompt templates and the machine-readable round context.
//!
//! Templates live under `assets/prompts/*.v1.txt` and are embedded at build
//! time. Every prompt carries a JSON round-context block between
//! [`CONTEXT_BEGIN`] and [`CONTEXT_END`]; the mock backend parses that block,
//! so mock output flows through exactly the same parsers as live output.

use serde::{Deserialize, Serialize};

use super::{Critique, DebaterRole, Topic};

pub const CONTEXT_BEGIN: &str = "<<<ROUND_CONTEXT";
pub const CONTEXT_END: &str = "ROUND_CONTEXT>>>";

pub const SYSTEM_PROMPT: &str =
    "You are a precise assistant inside a data synthesis pipeline. Always answer with strict JSON matching the requested schema.";

const GENERATE_TEMPLATE: &str = include_str!("../../assets/prompts/debater_generate.v1.txt");
const CRITIQUE_TEMPLATE: &str = include_str!("../../assets/prompts/debater_critique.v1.txt");
const JUDGE_TEMPLATE: &str = include_str!("../../assets/prompts/judge.v1.txt");
const REFORMAT_TEMPLATE: &str = include_str!("../../assets/prompts/reformat.v1.txt");

pub const TOPICS_SCHEMA: &str = r#"{"topics": [{"text": "...", "explanation": "..."}]}"#;
pub const CRITIQUES_SCHEMA: &str = r#"{"critiques": [{"target_topic_id": "...", "stance": "support"|"object", "criteria": {"relevance": "...", "semantic_diversity": "...", "complementarity": "...", "quality": "..."}}]}"#;
pub const JUDGE_SCHEMA: &str = r#"{"rejections": [{"topic_id": "...", "reason": "..."}]}"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Generate,
    Critique,
    Judge,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Generate => "generate",
            Phase::Critique => "critique",
            Phase::Judge => "judge",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicBrief {
    pub topic_id: String,
    pub text: String,
    pub origin: DebaterRole,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CritiqueBrief {
    pub critic: DebaterRole,
    pub target_topic_id: String,
    pub stance: String,
}

/// Structured context describing one debate phase call. Embedded verbatim in
/// the prompt; the single source the mock backend works from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundContext {
    pub phase: Phase,
    pub subcategory_code: String,
    pub subcategory_label: String,
    pub subcategory_path: String,
    /// Candidates requested per debater (generate phase).
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub own_role: Option<DebaterRole>,
    /// Critique phase: the peer topics to critique. Judge phase: all topics
    /// in arrival order.
    #[serde(default)]
    pub topics: Vec<TopicBrief>,
    #[serde(default)]
    pub critiques: Vec<CritiqueBrief>,
}

impl RoundContext {
    fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("round context serializes")
    }
}

/// Extracts the round-context block from a prompt. Returns `None` when the
/// markers are missing, which indicates a template regression.
pub fn extract_context(prompt: &str) -> Option<RoundContext> {
    let start = prompt.find(CONTEXT_BEGIN)? + CONTEXT_BEGIN.len();
    let end = prompt[start..].find(CONTEXT_END)? + start;
    serde_json::from_str(prompt[start..end].trim()).ok()
}

fn topic_line(t: &Topic) -> String {
    format!("- [{}] {} :: {}", t.topic_id, t.text, t.explanation)
}

pub fn render_generate(ctx: &RoundContext) -> String {
    GENERATE_TEMPLATE
        .replace("{{n}}", &ctx.n.to_string())
        .replace("{{subcategory_path}}", &ctx.subcategory_path)
        .replace("{{context_json}}", &ctx.json())
}

pub fn render_critique(ctx: &RoundContext, peer_topics: &[Topic]) -> String {
    let block = peer_topics
        .iter()
        .map(topic_line)
        .collect::<Vec<_>>()
        .join("\n");
    CRITIQUE_TEMPLATE
        .replace(
            "{{own_role}}",
            ctx.own_role.map(|r| r.as_str()).unwrap_or("unknown"),
        )
        .replace("{{subcategory_path}}", &ctx.subcategory_path)
        .replace("{{peer_topics_block}}", &block)
        .replace("{{context_json}}", &ctx.json())
}

pub fn render_judge(ctx: &RoundContext, topics: &[Topic], critiques: &[Critique]) -> String {
    let topics_block = topics.iter().map(topic_line).collect::<Vec<_>>().join("\n");
    let critiques_block = critiques
        .iter()
        .map(|c| {
            format!(
                "- {} on [{}]: {}",
                c.critic.as_str(),
                c.target_topic_id,
                c.stance.as_str()
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    JUDGE_TEMPLATE
        .replace("{{subcategory_path}}", &ctx.subcategory_path)
        .replace("{{topics_block}}", &topics_block)
        .replace("{{critiques_block}}", &critiques_block)
        .replace("{{context_json}}", &ctx.json())
}

pub fn render_reformat(ctx: &RoundContext, expected_schema: &str, previous_output: &str) -> String {
    REFORMAT_TEMPLATE
        .replace("{{expected_schema}}", expected_schema)
        .replace("{{previous_output}}", previous_output)
        .replace("{{context_json}}", &ctx.json())
}
