#![allow(dead_code)]

use std::path::{Path, PathBuf};

use actsense::context::ContextTriple;
use actsense::pipeline::PipelineConfig;
use actsense::synthetic::{generate, SyntheticConfig};
use actsense::vocab::Vocabulary;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub verbs: Vec<String>,
    pub objects: Vec<String>,
    pub interactions: Vec<String>,
    pub description: String,
}

pub fn prompt_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/prompts")
}

pub fn load_fixtures() -> Vec<Fixture> {
    let text = std::fs::read_to_string(prompt_dir().join("fixtures.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn union<'a>(lists: impl Iterator<Item = &'a Vec<String>>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for name in lists.flatten() {
        if !out.contains(name) {
            out.push(name.clone());
        }
    }
    out
}

/// Vocabulary holding every label any fixture mentions.
pub fn fixture_vocab(fixtures: &[Fixture]) -> Vocabulary {
    Vocabulary::from_lists(
        union(fixtures.iter().map(|f| &f.verbs)),
        union(fixtures.iter().map(|f| &f.objects)),
        union(fixtures.iter().map(|f| &f.interactions)),
    )
    .unwrap()
}

pub fn triple(f: &Fixture, vocab: &Vocabulary) -> ContextTriple {
    let ids = |set: &actsense::vocab::LabelSet, names: &[String]| names.iter().map(|n| set.id(n).unwrap()).collect();
    ContextTriple {
        interactions: ids(&vocab.interactions, &f.interactions),
        objects: ids(&vocab.objects, &f.objects),
        verbs: ids(&vocab.activities, &f.verbs),
    }
}

pub fn golden(name: &str, kind: &str) -> String {
    std::fs::read_to_string(prompt_dir().join(format!("{name}.{kind}.txt"))).unwrap()
}

/// Writes the 200-video synthetic dataset under `dir/data` and returns its
/// mock-backed config with output and cache inside `dir`.
pub fn synthetic_setup(dir: &Path, videos: usize) -> PipelineConfig {
    let data = generate(&SyntheticConfig { videos, ..SyntheticConfig::default() }).unwrap();
    let mut cfg = data.write(&dir.join("data")).unwrap();
    cfg.out = dir.join("out");
    cfg.cache_dir = Some(dir.join("cache"));
    cfg
}
