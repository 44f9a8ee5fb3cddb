//! Parsers for model output. Live and mock completions flow through the same
//! functions; structural failures surface as `Err(detail)` and trigger one
//! reformat retry upstream.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;

use super::{Criterion, Critique, DebaterRole, JudgeVerdict, Stance, Topic};

/// Longest topic text accepted, in characters after trimming.
pub const MAX_TOPIC_CHARS: usize = 256;

/// Drops a surrounding markdown code fence, if any. Models occasionally wrap
/// JSON despite instructions; the content inside is still strict JSON.
fn strip_fences(raw: &str) -> &str {
    let trimmed = raw.trim();
    if let Some(rest) = trimmed.strip_prefix("```") {
        if let Some(nl) = rest.find('\n') {
            let body = &rest[nl + 1..];
            if let Some(end) = body.rfind("```") {
                return body[..end].trim();
            }
        }
    }
    trimmed
}

#[derive(Deserialize)]
struct RawTopics {
    topics: Vec<RawTopic>,
}

#[derive(Deserialize)]
struct RawTopic {
    text: String,
    #[serde(default)]
    explanation: String,
}

/// Parses a debater generation reply into at most `n` topics. Individual
/// entries violating the topic invariants (empty or over-long text) are
/// dropped; zero surviving topics is a parse failure.
pub fn parse_topics(
    raw: &str,
    subcategory_code: &str,
    origin: DebaterRole,
    n: usize,
) -> Result<Vec<Topic>, String> {
    let parsed: RawTopics =
        serde_json::from_str(strip_fences(raw)).map_err(|e| format!("topics JSON: {e}"))?;
    let mut topics = Vec::new();
    for raw_topic in parsed.topics {
        let text = raw_topic.text.trim();
        if text.is_empty() || text.chars().count() > MAX_TOPIC_CHARS {
            continue;
        }
        let index = topics.len();
        topics.push(Topic {
            topic_id: format!("{subcategory_code}:{}:{index}", origin.short()),
            subcategory_code: subcategory_code.to_string(),
            text: text.to_string(),
            explanation: raw_topic.explanation.trim().to_string(),
            origin,
        });
        if topics.len() == n {
            break;
        }
    }
    if topics.is_empty() {
        return Err("no valid topics in reply".to_string());
    }
    Ok(topics)
}

#[derive(Deserialize)]
struct RawCritiques {
    critiques: Vec<RawCritique>,
}

#[derive(Deserialize)]
struct RawCritique {
    target_topic_id: String,
    stance: String,
    criteria: BTreeMap<String, String>,
}

/// Parses one critic's reply. Every peer topic must receive at least one
/// critique carrying all four criteria; targets outside the peer set are
/// dropped (they would break the critic != origin invariant).
pub fn parse_critiques(
    raw: &str,
    critic: DebaterRole,
    peer_topic_ids: &BTreeSet<String>,
) -> Result<Vec<Critique>, String> {
    let parsed: RawCritiques =
        serde_json::from_str(strip_fences(raw)).map_err(|e| format!("critiques JSON: {e}"))?;
    let mut critiques = Vec::new();
    for raw_critique in parsed.critiques {
        if !peer_topic_ids.contains(&raw_critique.target_topic_id) {
            continue;
        }
        let stance = match raw_critique.stance.as_str() {
            "support" => Stance::Support,
            "object" => Stance::Object,
            other => return Err(format!("unknown stance {other:?}")),
        };
        let mut criteria_notes = BTreeMap::new();
        for criterion in Criterion::ALL {
            match raw_critique.criteria.get(criterion.as_str()) {
                Some(note) => {
                    criteria_notes.insert(criterion, note.clone());
                }
                None => {
                    return Err(format!(
                        "critique of {} missing criterion {}",
                        raw_critique.target_topic_id,
                        criterion.as_str()
                    ))
                }
            }
        }
        critiques.push(Critique {
            critic,
            target_topic_id: raw_critique.target_topic_id,
            criteria_notes,
            stance,
        });
    }
    let covered: BTreeSet<&String> = critiques.iter().map(|c| &c.target_topic_id).collect();
    for id in peer_topic_ids {
        if !covered.contains(id) {
            return Err(format!("peer topic {id} received no critique"));
        }
    }
    Ok(critiques)
}

#[derive(Deserialize)]
struct RawJudge {
    rejections: Vec<RawRejection>,
}

#[derive(Deserialize)]
struct RawRejection {
    topic_id: String,
    #[serde(default)]
    reason: String,
}

/// Parses the judge's rejection list into one verdict per topic, in topic
/// arrival order. Rejections naming unknown topics are ignored.
pub fn parse_judge(raw: &str, topic_ids: &[String]) -> Result<Vec<JudgeVerdict>, String> {
    let parsed: RawJudge =
        serde_json::from_str(strip_fences(raw)).map_err(|e| format!("judge JSON: {e}"))?;
    let known: BTreeSet<&String> = topic_ids.iter().collect();
    let mut reasons: BTreeMap<String, String> = BTreeMap::new();
    for rejection in parsed.rejections {
        if !known.contains(&rejection.topic_id) {
            continue;
        }
        let reason = if rejection.reason.trim().is_empty() {
            "unspecified".to_string()
        } else {
            rejection.reason.trim().to_string()
        };
        reasons.insert(rejection.topic_id, reason);
    }
    Ok(topic_ids
        .iter()
        .map(|id| match reasons.get(id) {
            Some(reason) => JudgeVerdict {
                topic_id: id.clone(),
                rejected: true,
                reason: reason.clone(),
            },
            None => JudgeVerdict {
                topic_id: id.clone(),
                rejected: false,
                reason: String::new(),
            },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topics_parse_with_fences_and_cap() {
        let raw = "```json\n{\"topics\":[{\"text\":\"A\",\"explanation\":\"a\"},{\"text\":\"B\"},{\"text\":\"C\"}]}\n```";
        let topics = parse_topics(raw, "X", DebaterRole::Debater1, 2).unwrap();
        assert_eq!(topics.len(), 2);
        assert_eq!(topics[0].topic_id, "X:d1:0");
        assert_eq!(topics[1].text, "B");
    }

    #[test]
    fn invalid_topics_are_dropped_not_fatal() {
        let long = "x".repeat(300);
        let raw = format!(
            r#"{{"topics":[{{"text":"  "}},{{"text":"{long}"}},{{"text":"keep me"}}]}}"#
        );
        let topics = parse_topics(&raw, "X", DebaterRole::Debater2, 4).unwrap();
        assert_eq!(topics.len(), 1);
        assert_eq!(topics[0].text, "keep me");
        assert_eq!(topics[0].topic_id, "X:d2:0");
    }

    #[test]
    fn zero_valid_topics_is_an_error() {
        assert!(parse_topics("{\"topics\":[]}", "X", DebaterRole::Debater1, 4).is_err());
        assert!(parse_topics("not json", "X", DebaterRole::Debater1, 4).is_err());
    }

    #[test]
    fn critiques_require_full_criteria_and_coverage() {
        let peers: BTreeSet<String> = ["X:d1:0".to_string()].into_iter().collect();
        let ok = r#"{"critiques":[{"target_topic_id":"X:d1:0","stance":"support",
            "criteria":{"relevance":"r","semantic_diversity":"s","complementarity":"c","quality":"q"}}]}"#;
        let critiques = parse_critiques(ok, DebaterRole::Debater2, &peers).unwrap();
        assert_eq!(critiques.len(), 1);
        assert_eq!(critiques[0].critic, DebaterRole::Debater2);

        let missing_key = r#"{"critiques":[{"target_topic_id":"X:d1:0","stance":"support",
            "criteria":{"relevance":"r"}}]}"#;
        assert!(parse_critiques(missing_key, DebaterRole::Debater2, &peers).is_err());

        let no_coverage = r#"{"critiques":[]}"#;
        assert!(parse_critiques(no_coverage, DebaterRole::Debater2, &peers).is_err());
    }

    #[test]
    fn judge_produces_one_verdict_per_topic() {
        let ids = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let raw = r#"{"rejections":[{"topic_id":"b","reason":"overlaps a"},{"topic_id":"zz"}]}"#;
        let verdicts = parse_judge(raw, &ids).unwrap();
        assert_eq!(verdicts.len(), 3);
        assert!(!verdicts[0].rejected);
        assert!(verdicts[1].rejected);
        assert_eq!(verdicts[1].reason, "overlaps a");
        assert!(!verdicts[2].rejected);
    }

    #[test]
    fn judge_rejection_without_reason_gets_placeholder() {
        let ids = vec!["a".to_string()];
        let verdicts =
            parse_judge(r#"{"rejections":[{"topic_id":"a"}]}"#, &ids).unwrap();
        assert!(verdicts[0].rejected);
        assert_eq!(verdicts[0].reason, "unspecified");
    }
}
