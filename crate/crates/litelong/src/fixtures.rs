//! Deterministic synthetic inputs: taxonomy CSVs, corpora, and hypernym
//! graphs. Real classification exports and lexical databases are licensed
//! content the user supplies; everything here is shape-compatible stand-in
//! material for demos, tests, and benchmarks.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assembly::AssemblyStrategy;
use crate::config::{
    AnalysisConfig, AssemblyConfig, DebateConfig, PathsConfig, PipelineConfig, RetrievalConfig,
};
use crate::debate::backend::{BackendConfig, BackendKind};
use crate::debate::RetentionStrategy;
use crate::mock::MockProfile;

/// Words used to pad synthetic documents. Alphabetic only, disjoint from the
/// demo taxonomy labels so retrieval stays topic-focused.
const FILLER_WORDS: &[&str] = &[
    "the", "a", "of", "and", "to", "in", "is", "was", "for", "on", "with", "as", "by", "at",
    "from", "this", "that", "which", "into", "over", "under", "between", "study", "report",
    "method", "result", "survey", "field", "measure", "model", "sample", "region", "process",
    "effect", "change", "period", "record", "value", "level", "source", "factor", "pattern",
    "growth", "balance", "structure", "surface", "volume", "density", "account", "history",
    "note", "review", "context", "general", "common", "early", "recent", "local", "global",
    "major", "minor", "stable", "active", "observed", "known", "present", "former", "various",
    "typical", "annual", "seasonal", "natural", "formal", "basic", "broad", "narrow", "deep",
];

/// Synthetic taxonomy with the requested root and leaf counts, leaves spread
/// round-robin across roots. Codes sort lexicographically in emission order.
pub fn bisac_shaped_taxonomy_csv(roots: usize, leaves: usize) -> String {
    let mut out = String::from("code,label,parent_code\n");
    for r in 0..roots {
        out.push_str(&format!("R{r:03}000000,Root Subject {r:03},\n"));
    }
    for l in 0..leaves {
        let r = l % roots;
        out.push_str(&format!(
            "R{r:03}{:06},Root Subject {r:03} / Leaf Topic {l:04},R{r:03}000000\n",
            l + 1
        ));
    }
    out
}

/// Demo taxonomy: 4 roots, 12 leaves with distinct two-word labels.
pub fn demo_taxonomy_csv() -> String {
    let rows: &[(&str, &str, &str)] = &[
        ("NAT000000", "Nature", ""),
        ("NAT001000", "Desert Ecology", "NAT000000"),
        ("NAT002000", "Alpine Botany", "NAT000000"),
        ("NAT003000", "River Hydrology", "NAT000000"),
        ("SCI000000", "Science", ""),
        ("SCI001000", "Marine Biology", "SCI000000"),
        ("SCI002000", "Quantum Physics", "SCI000000"),
        ("SCI003000", "Organic Chemistry", "SCI000000"),
        ("SOC000000", "Society", ""),
        ("SOC001000", "Urban Planning", "SOC000000"),
        ("SOC002000", "Maritime Law", "SOC000000"),
        ("SOC003000", "Ancient Trade", "SOC000000"),
        ("TEC000000", "Technology", ""),
        ("TEC001000", "Distributed Systems", "TEC000000"),
        ("TEC002000", "Quantum Computing", "TEC000000"),
        ("TEC003000", "Renewable Energy", "TEC000000"),
    ];
    let mut out = String::from("code,label,parent_code\n");
    for (code, label, parent) in rows {
        out.push_str(&format!("{code},{label},{parent}\n"));
    }
    out
}

/// Leaf labels of [`demo_taxonomy_csv`], for corpus generation.
pub fn demo_leaf_labels() -> Vec<String> {
    [
        "Desert Ecology",
        "Alpine Botany",
        "River Hydrology",
        "Marine Biology",
        "Quantum Physics",
        "Organic Chemistry",
        "Urban Planning",
        "Maritime Law",
        "Ancient Trade",
        "Distributed Systems",
        "Quantum Computing",
        "Renewable Energy",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Synthetic JSONL corpus. Each document is assigned a label round-robin and
/// mentions that label's words in most sentences, so lexical retrieval maps
/// documents back to their label. Token lengths are seeded-uniform in
/// `[min_tokens, max_tokens]`. Sources alternate between two names to give
/// the source breakdown something to report.
pub fn synthetic_corpus_jsonl(
    n_docs: usize,
    seed: u64,
    labels: &[String],
    min_tokens: usize,
    max_tokens: usize,
) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for i in 0..n_docs {
        let label = &labels[i % labels.len()];
        let label_words: Vec<String> = label.split_whitespace().map(|w| w.to_lowercase()).collect();
        let target = rng.random_range(min_tokens..=max_tokens);
        let mut words: Vec<String> = Vec::with_capacity(target);
        words.push(format!("doc{i}marker"));
        while words.len() < target {
            // A "sentence": a couple of label words anchored in filler.
            let sentence_len = rng.random_range(8..=14).min(target - words.len());
            for w in 0..sentence_len {
                if w < label_words.len() && rng.random_range(0..10) < 7 {
                    words.push(label_words[w].clone());
                } else {
                    words.push(FILLER_WORDS[rng.random_range(0..FILLER_WORDS.len())].to_string());
                }
            }
        }
        let mut text = String::new();
        for (j, w) in words.iter().enumerate() {
            if j > 0 {
                if j % 12 == 0 {
                    text.push_str(". ");
                } else {
                    text.push(' ');
                }
            }
            text.push_str(w);
        }
        text.push('.');
        let source = if i % 2 == 0 { "fineweb-edu" } else { "cosmopedia-v2" };
        let line = serde_json::json!({"id": format!("doc-{i:06}"), "text": text, "source": source});
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// Demo hypernym graph as TSV (`child<TAB>parent`). Designed so the demo
/// topic vocabulary resolves at hand-checkable depths spanning the abstract
/// (<3) and specific (>9) bands.
pub fn demo_hypernyms_tsv() -> String {
    let edges: &[(&str, &str)] = &[
        // depth 1-2 band (abstract)
        ("abstraction", "entity"),
        ("physical", "entity"),
        ("object", "physical"),
        ("science", "abstraction"),
        ("technology", "abstraction"),
        ("society", "abstraction"),
        ("nature", "physical"),
        // mid-depth chains
        ("discipline", "science"),
        ("biology", "discipline"),
        ("physics", "discipline"),
        ("chemistry", "discipline"),
        ("ecology", "biology"),
        ("botany", "biology"),
        ("hydrology", "discipline"),
        ("computing", "technology"),
        ("systems", "technology"),
        ("energy", "physics"),
        ("law", "society"),
        ("planning", "society"),
        ("trade", "society"),
        // deep chains (specific, depth > 9)
        ("marine", "ecology"),
        ("aquatic", "marine"),
        ("benthic", "aquatic"),
        ("abyssal", "benthic"),
        ("hadal", "abyssal"),
        ("trench", "hadal"),
        ("vent", "trench"),
        ("chemosynth", "vent"),
        ("tubeworm", "chemosynth"),
        ("riftia", "tubeworm"),
    ];
    let mut out = String::new();
    for (child, parent) in edges {
        out.push_str(&format!("{child}\t{parent}\n"));
    }
    out
}

fn mock_backend_config(model_name: &str, profile: MockProfile, seed: u64) -> BackendConfig {
    BackendConfig {
        kind: BackendKind::Mock,
        endpoint_url: String::new(),
        model_name: model_name.to_string(),
        temperature: 0.7,
        seed,
        max_in_flight: 8,
        timeout_ms: 30_000,
        max_retries: 2,
        mock: Some(profile),
    }
}

/// Writes the demo inputs (corpus, taxonomy, hypernyms) into `dir` and
/// returns a mock-backend config wired to them. The judge profile rejects
/// every 4th topic, so retention has something to do.
pub fn demo_config(
    dir: &Path,
    n_docs: usize,
    candidates_per_debater: usize,
    strategy: AssemblyStrategy,
    target_tokens: usize,
    meta_chunk_tokens: usize,
) -> std::io::Result<PipelineConfig> {
    std::fs::create_dir_all(dir)?;
    let corpus_path = dir.join("corpus.jsonl");
    let taxonomy_path = dir.join("taxonomy.csv");
    let hypernyms_path = dir.join("hypernyms.tsv");
    std::fs::write(
        &corpus_path,
        synthetic_corpus_jsonl(n_docs, 11, &demo_leaf_labels(), 120, 360),
    )?;
    std::fs::write(&taxonomy_path, demo_taxonomy_csv())?;
    std::fs::write(&hypernyms_path, demo_hypernyms_tsv())?;

    Ok(PipelineConfig {
        paths: PathsConfig {
            corpus: vec![corpus_path],
            taxonomy: taxonomy_path,
            hypernyms: Some(hypernyms_path),
            output_dir: dir.join("out"),
        },
        debate: DebateConfig {
            debater_1: mock_backend_config(
                "demo-debater-one",
                MockProfile::debater(candidates_per_debater, 1),
                1,
            ),
            debater_2: mock_backend_config(
                "demo-debater-two",
                MockProfile::debater(candidates_per_debater, 2),
                2,
            ),
            judge: mock_backend_config("demo-judge", MockProfile::judge(4, 0), 0),
            candidates_per_debater,
            retention: RetentionStrategy::FilterReject,
            fixed_k: 10,
            dedup_threshold: 0.8,
            seed: 42,
            save_transcripts: false,
        },
        retrieval: RetrievalConfig::default(),
        assembly: AssemblyConfig {
            strategy,
            target_tokens,
            meta_chunk_tokens,
            negatives_per_chunk: 3,
            allow_short: false,
            joiner: "\n".to_string(),
            seed: 7,
        },
        analysis: AnalysisConfig::default(),
        scale_factor: 1.0,
    })
}

/// Materializes the full demo (1,000 document corpus, taxonomy, hypernyms,
/// config.json) under `dir`, for `litelong --init-demo`.
pub fn write_demo_inputs(dir: &Path) -> std::io::Result<std::path::PathBuf> {
    let config = demo_config(dir, 1_000, 4, AssemblyStrategy::ShuffleConcat, 4_096, 512)?;
    let config_path = dir.join("config.json");
    std::fs::write(
        &config_path,
        serde_json::to_vec_pretty(&config).expect("config serializes"),
    )?;
    Ok(config_path)
}
