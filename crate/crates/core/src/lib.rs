//! Activity recognition from frame context: verb/object/interaction
//! triples are turned into language-model prompts, the generated current
//! and subsequent-action descriptions are embedded alongside the frame
//! image, and a small multi-label head scores every activity class.

pub mod annotations;
pub mod classifier;
pub mod context;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod generation;
pub mod pipeline;
pub mod prompt;
pub mod synthetic;
pub mod util;
pub mod vocab;

pub use error::{Error, Result};
