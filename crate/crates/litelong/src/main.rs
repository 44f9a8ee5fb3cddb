//! `litelong`: config-driven pipeline runner.
//!
//! Validation failures and stage errors exit nonzero with a machine-readable
//! JSON object on stderr: `{"error": {"kind": ..., "message": ...}}`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use litelong::config::{Overrides, PipelineConfig};
use litelong::debate::backend::BackendKind;
use litelong::fixtures;
use litelong::pipeline::{PipelineError, Runner, Stage};

#[derive(Parser)]
#[command(
    name = "litelong",
    version,
    about = "Synthesize long-context LM training samples: debate topics, BM25 retrieval, exact-length packing"
)]
struct Cli {
    /// Pipeline config (JSON). Required unless --init-demo is given.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Stage to run; "all" runs every stage in order with checkpoints.
    #[arg(long, value_enum, default_value_t = StageArg::All)]
    stage: StageArg,

    /// Override every seed in the config (debate backends and assembly).
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads (default: machine parallelism).
    #[arg(long)]
    workers: Option<usize>,

    /// Emit trailing samples shorter than the target instead of dropping them.
    #[arg(long)]
    allow_short: bool,

    /// Record full request/response transcripts during the topics stage.
    #[arg(long)]
    save_transcripts: bool,

    /// Override the backend kind of all three model roles.
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,

    /// Write a runnable demo (corpus, taxonomy, hypernyms, config.json)
    /// into DIR and exit.
    #[arg(long, value_name = "DIR")]
    init_demo: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StageArg {
    Topics,
    Index,
    Retrieve,
    Assemble,
    Analyze,
    All,
}

impl StageArg {
    fn stages(self) -> Vec<Stage> {
        match self {
            StageArg::Topics => vec![Stage::Topics],
            StageArg::Index => vec![Stage::Index],
            StageArg::Retrieve => vec![Stage::Retrieve],
            StageArg::Assemble => vec![Stage::Assemble],
            StageArg::Analyze => vec![Stage::Analyze],
            StageArg::All => Stage::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum BackendArg {
    HttpChat,
    Mock,
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn error_kind(err: &PipelineError) -> &'static str {
    match err {
        PipelineError::Config(_) => "config",
        PipelineError::Corpus(_) => "corpus",
        PipelineError::Taxonomy(_) => "taxonomy",
        PipelineError::Debate(_) => "debate",
        PipelineError::Backend(_) => "backend",
        PipelineError::Index(_) => "index",
        PipelineError::Assemble(_) => "assembly",
        PipelineError::Analysis(_) => "analysis",
        PipelineError::MissingInput { .. } => "missing_input",
        PipelineError::Io(_) => "io",
        PipelineError::Json(_) => "json",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    if let Some(dir) = &cli.init_demo {
        return match fixtures::write_demo_inputs(dir) {
            Ok(config_path) => {
                println!("demo written; run: litelong --config {}", config_path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{}", error_json("io", &e.to_string()));
                ExitCode::FAILURE
            }
        };
    }

    let Some(config_path) = &cli.config else {
        eprintln!("{}", error_json("config", "--config PATH is required"));
        return ExitCode::FAILURE;
    };

    let mut config = match PipelineConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", error_json("config", &e.to_string()));
            return ExitCode::FAILURE;
        }
    };
    config.apply_overrides(&Overrides {
        seed: cli.seed,
        allow_short: cli.allow_short,
        save_transcripts: cli.save_transcripts,
        backend: cli.backend.map(|b| match b {
            BackendArg::HttpChat => BackendKind::HttpChat,
            BackendArg::Mock => BackendKind::Mock,
        }),
    });

    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(4, |n| n.get()));
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global();

    let runner = match Runner::new(config, workers) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}", error_json(error_kind(&e), &e.to_string()));
            return ExitCode::FAILURE;
        }
    };
    match runner.run(&cli.stage.stages()) {
        Ok(reports) => {
            for report in &reports {
                let status = if report.skipped { "skipped" } else { "completed" };
                println!(
                    "stage {}: {} ({} output file{})",
                    report.stage,
                    status,
                    report.outputs.len(),
                    if report.outputs.len() == 1 { "" } else { "s" },
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(error_kind(&e), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
