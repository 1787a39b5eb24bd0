use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use actsense::pipeline::{execute, Command, PipelineConfig, EXIT_CONFIG_ERROR};
use actsense::synthetic::{generate, SyntheticConfig};
use actsense::Result;

/// Activity recognition pipeline: context -> descriptions -> embeddings ->
/// classifier -> mAP.
///
/// Settings are layered: built-in defaults, then --config, then APP_*
/// environment variables (APP_TRAIN__EPOCHS sets train.epochs), then flags.
#[derive(Debug, Parser)]
#[command(name = "actsense", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Flat key = value config file, or a run manifest (.json) to replay.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long = "cache-dir", global = true, value_name = "PATH")]
    cache_dir: Option<PathBuf>,

    /// Output directory for artifacts and manifests.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// groundtruth | file | mock
    #[arg(long = "provider.context", global = true, value_name = "NAME")]
    provider_context: Option<String>,

    /// http | mock
    #[arg(long = "provider.generation", global = true, value_name = "NAME")]
    provider_generation: Option<String>,

    /// file | http | mock
    #[arg(long = "provider.embedding", global = true, value_name = "NAME")]
    provider_embedding: Option<String>,

    #[arg(long = "backend.generation.url", global = true, value_name = "URL")]
    generation_url: Option<String>,

    #[arg(long = "backend.embedding.url", global = true, value_name = "URL")]
    embedding_url: Option<String>,

    /// Any other config key, e.g. --set train.epochs=10. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Every stage: describe, embed, train, evaluate.
    Run,
    /// Context, current description and subsequent action for sampled frames.
    Describe,
    /// Embed described frames and train the classifier.
    Train,
    /// Evaluate a trained checkpoint on the test split.
    Eval,
    /// Retrain and evaluate once per fusion mask.
    Ablate,
    /// Retrain on nested fractions of the training videos.
    Fewshot,
    /// Write a synthetic dataset and a matching pipeline.config into --out.
    Synth {
        #[arg(long, default_value_t = 200)]
        videos: usize,
    },
}

fn build_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    cfg.apply_env(std::env::vars())?;
    let flags = [
        ("seed", cli.seed.map(|s| s.to_string())),
        ("cache_dir", cli.cache_dir.as_ref().map(|p| p.display().to_string())),
        ("out", cli.out.as_ref().map(|p| p.display().to_string())),
        ("provider.context", cli.provider_context.clone()),
        ("provider.generation", cli.provider_generation.clone()),
        ("provider.embedding", cli.provider_embedding.clone()),
        ("backend.generation.url", cli.generation_url.clone()),
        ("backend.embedding.url", cli.embedding_url.clone()),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    for kv in &cli.set {
        let (k, v) =
            kv.split_once('=').ok_or_else(|| actsense::Error::InvalidConfig(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = ["warn", "info", "debug"][usize::from(cli.verbose.min(2))];
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG_ERROR as u8);
        }
    };

    let command = match cli.command {
        Cmd::Run => Command::Run,
        Cmd::Describe => Command::Describe,
        Cmd::Train => Command::Train,
        Cmd::Eval => Command::Eval,
        Cmd::Ablate => Command::Ablate,
        Cmd::Fewshot => Command::Fewshot,
        Cmd::Synth { videos } => {
            let synth = SyntheticConfig { videos, seed: cfg.seed, ..SyntheticConfig::default() };
            return match generate(&synth).and_then(|d| d.write(&cfg.out)) {
                Ok(_) => {
                    println!("wrote synthetic dataset to {}", cfg.out.join("pipeline.config").display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            };
        }
    };

    let outcome = execute(command, &cfg);
    match &outcome.error {
        None => {
            let map = outcome.map.map(|m| format!(" mAP {m:.4}")).unwrap_or_default();
            println!("{}: ok{map} ({})", command.name(), cfg.out.display());
        }
        Some(e) => {
            let stage = outcome
                .manifest
                .as_ref()
                .and_then(|m| m.failed_stage.clone())
                .map(|s| format!(" in stage {s}"))
                .unwrap_or_default();
            eprintln!("error{stage}: {e}");
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}
