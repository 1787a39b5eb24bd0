//! Command orchestration: configuration, staged artifacts and run
//! manifests.

mod commands;
mod config;
mod manifest;

pub use commands::{
    execute, read_descriptions, Command, CommandOutcome, DescriptionRecord, ABLATION_FILE, CHECKPOINT_FILE, DESCRIPTIONS_FILE,
    EMBEDDINGS_FILE, EXIT_CONFIG_ERROR, EXIT_STAGE_ERROR, FEWSHOT_FILE, LOSS_FILE, REPORT_FILE,
};
pub use config::{ContextSource, EmbeddingSource, GenerationSource, PipelineConfig, ENV_PREFIX};
pub use manifest::{Counters, Manifest};
