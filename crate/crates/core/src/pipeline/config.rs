use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use crate::classifier::TrainConfig;
use crate::embedding::{FusionMask, DEFAULT_DIM};
use crate::error::{Error, Result};
use crate::evaluation::Aggregation;
use crate::util::HttpSettings;

/// Prefix of environment variables that override config keys. The rest of
/// the variable name is the key upper-cased with `.` written as `__`, e.g.
/// `APP_TRAIN__EPOCHS` for `train.epochs`.
pub const ENV_PREFIX: &str = "APP_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextSource {
    GroundTruth,
    File,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerationSource {
    Http,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingSource {
    File,
    Http,
    Mock,
}

macro_rules! named_enum {
    ($ty:ident { $($name:literal => $variant:ident),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($name => Ok(Self::$variant),)+
                    other => Err(Error::InvalidConfig(format!(
                        concat!("unknown ", stringify!($ty), " {:?}; expected one of: ", $($name, " "),+),
                        other
                    ))),
                }
            }
        }
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $(Self::$variant => $name,)+ }
            }
        }
    };
}

named_enum!(ContextSource { "groundtruth" => GroundTruth, "file" => File, "mock" => Mock });
named_enum!(GenerationSource { "http" => Http, "mock" => Mock });
named_enum!(EmbeddingSource { "file" => File, "http" => Http, "mock" => Mock });

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Annotation files: `.csv` is read as Charades-style CSV, anything else
    /// as normalized JSONL.
    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    /// Activity, object and interaction label files; the bundled canonical
    /// vocabulary is used when none is set.
    pub vocab: Option<[PathBuf; 3]>,
    pub context: ContextSource,
    pub context_file: Option<PathBuf>,
    pub generation: GenerationSource,
    pub generation_url: Option<String>,
    pub temperature: f64,
    pub embedding: EmbeddingSource,
    pub embedding_url: Option<String>,
    pub embedding_file: Option<PathBuf>,
    pub dim: usize,
    pub timeout: Duration,
    pub max_attempts: u32,
    pub concurrency: usize,
    pub cache_dir: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub stride: usize,
    pub k_verbs: usize,
    pub clip_len: usize,
    pub fps: f64,
    pub workers: usize,
    pub fusion: FusionMask,
    pub train: TrainConfig,
    pub aggregation: Aggregation,
    pub ablation_masks: Vec<FusionMask>,
    pub fewshot_fractions: Vec<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            train_data: None,
            test_data: None,
            vocab: None,
            context: ContextSource::GroundTruth,
            context_file: None,
            generation: GenerationSource::Mock,
            generation_url: None,
            temperature: 0.0,
            embedding: EmbeddingSource::Mock,
            embedding_url: None,
            embedding_file: None,
            dim: DEFAULT_DIM,
            timeout: Duration::from_secs(60),
            max_attempts: 3,
            concurrency: 4,
            cache_dir: None,
            out: PathBuf::from("runs/default"),
            seed: 0,
            stride: 4,
            k_verbs: 5,
            clip_len: 5,
            fps: 1.0,
            workers: 4,
            fusion: FusionMask::FULL,
            train: TrainConfig::default(),
            aggregation: Aggregation::Max,
            ablation_masks: FusionMask::ablation_rows(),
            fewshot_fractions: vec![0.1, 0.25, 0.5, 1.0],
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value:?}")))
}

fn opt_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn opt_string(value: &str) -> Option<String> {
    let v = value.trim();
    (!v.is_empty()).then(|| v.to_owned())
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s)).collect()
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn join<T: ToString>(items: &[T], sep: &str) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

impl PipelineConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        match key {
            "train_data" => self.train_data = opt_path(value),
            "test_data" => self.test_data = opt_path(value),
            "vocab.activities" | "vocab.objects" | "vocab.interactions" => {
                let slot = ["vocab.activities", "vocab.objects", "vocab.interactions"]
                    .iter()
                    .position(|k| *k == key)
                    .expect("matched above");
                let mut paths = self.vocab.clone().unwrap_or_default();
                paths[slot] = opt_path(value).unwrap_or_default();
                self.vocab = paths.iter().any(|p| !p.as_os_str().is_empty()).then_some(paths);
            }
            "provider.context" => self.context = value.parse()?,
            "provider.generation" => self.generation = value.parse()?,
            "provider.embedding" => self.embedding = value.parse()?,
            "context.file" => self.context_file = opt_path(value),
            "embedding.file" => self.embedding_file = opt_path(value),
            "backend.generation.url" => self.generation_url = opt_string(value),
            "backend.embedding.url" => self.embedding_url = opt_string(value),
            "backend.timeout_s" => self.timeout = Duration::from_secs_f64(num::<f64>(key, value)?.max(0.0)),
            "backend.max_attempts" => self.max_attempts = num(key, value)?,
            "backend.concurrency" => self.concurrency = num(key, value)?,
            "generation.temperature" => self.temperature = num(key, value)?,
            "embedding.dim" => self.dim = num(key, value)?,
            "cache_dir" => self.cache_dir = opt_path(value),
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = num(key, value)?,
            "stride" => self.stride = num(key, value)?,
            "k_verbs" => self.k_verbs = num(key, value)?,
            "clip_len" => self.clip_len = num(key, value)?,
            "fps" => self.fps = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            "fusion" => self.fusion = value.parse()?,
            "aggregation" => self.aggregation = value.parse()?,
            "train.learning_rate" => self.train.learning_rate = num(key, value)?,
            "train.epochs" => self.train.epochs = num(key, value)?,
            "train.batch_size" => self.train.batch_size = num(key, value)?,
            "train.weight_decay" => self.train.weight_decay = num(key, value)?,
            "train.hidden" => {
                let h: Vec<usize> = list(key, value)?;
                self.train.hidden = h.try_into().map_err(|_| Error::InvalidConfig("train.hidden needs two widths".into()))?;
            }
            "ablate.masks" => {
                self.ablation_masks =
                    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect::<Result<_>>()?
            }
            "fewshot.fractions" => self.fewshot_fractions = list(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parse `key = value` lines; `#` starts a comment line.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("config line {}: expected key = value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Reads a key=value file, or the `config` object of a run manifest
    /// when the path ends in `.json`. Relative paths inside a key=value
    /// file are kept as written.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value = serde_json::from_str(&text)?;
            let map = manifest
                .get("config")
                .and_then(|c| c.as_object())
                .ok_or_else(|| Error::InvalidConfig(format!("{}: no config object", path.display())))?;
            for (k, v) in map {
                self.set(k, v.as_str().unwrap_or_default())?;
            }
            return Ok(());
        }
        self.apply_text(&text)
    }

    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        let mut pairs: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|rest| (rest.to_lowercase().replace("__", "."), v)))
            .collect();
        pairs.sort();
        for (k, v) in pairs {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Every key in canonical order; feeding these back through
    /// [`PipelineConfig::set`] reproduces the config.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let vocab = self.vocab.clone().unwrap_or_default();
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_owned(), v);
        };
        put("train_data", show_path(&self.train_data));
        put("test_data", show_path(&self.test_data));
        put("vocab.activities", vocab[0].display().to_string());
        put("vocab.objects", vocab[1].display().to_string());
        put("vocab.interactions", vocab[2].display().to_string());
        put("provider.context", self.context.name().into());
        put("provider.generation", self.generation.name().into());
        put("provider.embedding", self.embedding.name().into());
        put("context.file", show_path(&self.context_file));
        put("embedding.file", show_path(&self.embedding_file));
        put("backend.generation.url", self.generation_url.clone().unwrap_or_default());
        put("backend.embedding.url", self.embedding_url.clone().unwrap_or_default());
        put("backend.timeout_s", self.timeout.as_secs_f64().to_string());
        put("backend.max_attempts", self.max_attempts.to_string());
        put("backend.concurrency", self.concurrency.to_string());
        put("generation.temperature", self.temperature.to_string());
        put("embedding.dim", self.dim.to_string());
        put("cache_dir", show_path(&self.cache_dir));
        put("out", self.out.display().to_string());
        put("seed", self.seed.to_string());
        put("stride", self.stride.to_string());
        put("k_verbs", self.k_verbs.to_string());
        put("clip_len", self.clip_len.to_string());
        put("fps", self.fps.to_string());
        put("workers", self.workers.to_string());
        put("fusion", self.fusion.to_string());
        put("aggregation", self.aggregation.to_string());
        put("train.learning_rate", self.train.learning_rate.to_string());
        put("train.epochs", self.train.epochs.to_string());
        put("train.batch_size", self.train.batch_size.to_string());
        put("train.weight_decay", self.train.weight_decay.to_string());
        put("train.hidden", join(&self.train.hidden, ","));
        put("ablate.masks", join(&self.ablation_masks, ","));
        put("fewshot.fractions", join(&self.fewshot_fractions, ","));
        m
    }

    pub fn to_text(&self) -> String {
        self.to_map().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Hash of the settings that influence artifact contents. Locations
    /// (`out`, `cache_dir`) and scheduling (`workers`) are left out so that
    /// relocated or re-parallelized runs hash alike.
    pub fn content_hash(&self) -> String {
        let mut m = self.to_map();
        for k in ["out", "cache_dir", "workers", "backend.concurrency"] {
            m.remove(k);
        }
        let text: String = m.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        crate::util::sha256_hex(text.as_bytes())
    }

    /// Checks that everything the selected providers need is configured.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if let Some(paths) = &self.vocab {
            if let Some(i) = paths.iter().position(|p| p.as_os_str().is_empty()) {
                let key = ["vocab.activities", "vocab.objects", "vocab.interactions"][i];
                return bad(format!("{key} must be set together with the other vocabulary files"));
            }
        }
        if self.context == ContextSource::File && self.context_file.is_none() {
            return bad("provider.context = file requires context.file".into());
        }
        if self.generation == GenerationSource::Http && self.generation_url.is_none() {
            return bad("provider.generation = http requires backend.generation.url".into());
        }
        if self.embedding == EmbeddingSource::Http && self.embedding_url.is_none() {
            return bad("provider.embedding = http requires backend.embedding.url".into());
        }
        if self.embedding == EmbeddingSource::File && self.embedding_file.is_none() {
            return bad("provider.embedding = file requires embedding.file".into());
        }
        if self.k_verbs == 0 || self.clip_len == 0 || self.stride == 0 || self.dim == 0 || self.workers == 0 {
            return bad("k_verbs, clip_len, stride, embedding.dim and workers must be positive".into());
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad("fps must be positive".into());
        }
        if self.ablation_masks.is_empty() {
            return bad("ablate.masks is empty".into());
        }
        self.train.validate()
    }

    pub fn http_settings(&self, url: &str) -> HttpSettings {
        HttpSettings {
            timeout: self.timeout,
            max_attempts: self.max_attempts,
            concurrency: self.concurrency.max(1),
            ..HttpSettings::new(url)
        }
    }
}
