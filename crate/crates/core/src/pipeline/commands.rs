use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ContextSource, EmbeddingSource, GenerationSource, PipelineConfig};
use super::manifest::Manifest;
use crate::annotations::{import_charades_csv, import_normalized_jsonl, sample_frames, CsvImportConfig, VideoRecord};
use crate::classifier::{load_checkpoint, save_checkpoint, write_loss_trace, MlpParams};
use crate::context::{ContextConfig, ContextProvider, FileProvider, GroundTruthProvider, MockProvider};
use crate::embedding::{
    embed_frame, read_records, write_records, EmbeddingBackend, EmbeddingTriple, FileStore, HttpEmbedder, MockEmbedder,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate, fewshot_sweep, fit, run_ablation, write_ablation_csv, write_fewshot_csv, EmbeddedDataset, ExperimentConfig,
    FrameSample, Split,
};
use crate::generation::{
    CountingBackend, GenerationBackend, GenerationCache, GenerationParams, HttpGenerator, MockGenerator, Reasoner,
};
use crate::vocab::{load_vocabulary, Vocabulary};

pub const DESCRIPTIONS_FILE: &str = "descriptions.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LOSS_FILE: &str = "loss.csv";
pub const REPORT_FILE: &str = "eval_report.txt";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const FEWSHOT_FILE: &str = "fewshot.csv";

/// Exit code for a failed stage.
pub const EXIT_STAGE_ERROR: i32 = 1;
/// Exit code for configuration problems detected before any stage runs.
pub const EXIT_CONFIG_ERROR: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Describe,
    Train,
    Eval,
    Ablate,
    Fewshot,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Run => "run",
            Self::Describe => "describe",
            Self::Train => "train",
            Self::Eval => "eval",
            Self::Ablate => "ablate",
            Self::Fewshot => "fewshot",
        }
    }

    fn needs_train(self) -> bool {
        !matches!(self, Self::Describe | Self::Eval)
    }

    fn needs_test(self) -> bool {
        !matches!(self, Self::Describe | Self::Train)
    }
}

/// One line of the descriptions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionRecord {
    pub video_id: String,
    pub frame_index: u32,
    pub s_d: String,
    pub s_c: String,
}

pub fn read_descriptions(path: &Path) -> Result<Vec<DescriptionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(i + 1, None, e.to_string())))
        .collect()
}

#[derive(Debug)]
pub struct CommandOutcome {
    pub command: Command,
    pub exit_code: i32,
    pub error: Option<Error>,
    /// Absent when the command failed before its output directory was set up.
    pub manifest: Option<Manifest>,
    /// Test mAP, when the command evaluated a classifier.
    pub map: Option<f64>,
}

impl CommandOutcome {
    pub fn success(&self) -> bool {
        self.exit_code == 0
    }
}

/// Run one command end to end, writing artifacts and a manifest into the
/// configured output directory.
pub fn execute(cmd: Command, cfg: &PipelineConfig) -> CommandOutcome {
    let mut session = match Session::open(cmd, cfg) {
        Ok(s) => s,
        Err(error) => {
            return CommandOutcome { command: cmd, exit_code: EXIT_CONFIG_ERROR, error: Some(error), manifest: None, map: None }
        }
    };
    let result = session.run();
    session.finish(result)
}

fn key(video_id: &str, frame_index: u32, part: char) -> String {
    format!("{video_id}#{frame_index}#{part}")
}

fn load_split(path: &Path, vocab: &Vocabulary, fps: f64) -> Result<Vec<VideoRecord>> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        import_charades_csv(path, vocab, CsvImportConfig { fps })
    } else {
        import_normalized_jsonl(path, vocab)
    }
}

struct Session {
    cmd: Command,
    cfg: PipelineConfig,
    vocab: Arc<Vocabulary>,
    context: Box<dyn ContextProvider>,
    generator: Arc<CountingBackend>,
    cache: Option<GenerationCache>,
    embedder: Box<dyn EmbeddingBackend>,
    pool: rayon::ThreadPool,
    out: PathBuf,
    manifest: Manifest,
    stage: &'static str,
    map: Option<f64>,
}

impl Session {
    /// Everything that can be checked without running a stage: config
    /// consistency, vocabulary, provider construction and the output
    /// directory.
    fn open(cmd: Command, cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        if cmd.needs_train() && cfg.train_data.is_none() {
            return Err(Error::InvalidConfig(format!("`{}` needs train_data", cmd.name())));
        }
        if cmd.needs_test() && cfg.test_data.is_none() {
            return Err(Error::InvalidConfig(format!("`{}` needs test_data", cmd.name())));
        }
        if cmd == Command::Describe && cfg.train_data.is_none() && cfg.test_data.is_none() {
            return Err(Error::InvalidConfig("`describe` needs train_data or test_data".into()));
        }
        let mut manifest = Manifest::new(cmd.name(), cfg);
        let vocab = match &cfg.vocab {
            Some([a, o, r]) => {
                let v = load_vocabulary(a, o, r)?;
                for p in [a, o, r] {
                    manifest.record_input(p)?;
                }
                v
            }
            None => Vocabulary::canonical(),
        };
        let context: Box<dyn ContextProvider> = match cfg.context {
            ContextSource::GroundTruth => Box::new(GroundTruthProvider),
            ContextSource::Mock => Box::new(MockProvider::new(&vocab, cfg.seed)),
            ContextSource::File => {
                let path = cfg.context_file.as_ref().expect("validated");
                manifest.record_input(path)?;
                Box::new(FileProvider::load(path, &vocab)?)
            }
        };
        let backend: Arc<dyn GenerationBackend> = match cfg.generation {
            GenerationSource::Mock => Arc::new(MockGenerator::new()),
            GenerationSource::Http => {
                Arc::new(HttpGenerator::new(cfg.http_settings(cfg.generation_url.as_deref().expect("validated")))?)
            }
        };
        let embedder: Box<dyn EmbeddingBackend> = match cfg.embedding {
            EmbeddingSource::Mock => Box::new(MockEmbedder::new(cfg.dim, cfg.seed)),
            EmbeddingSource::Http => {
                Box::new(HttpEmbedder::new(cfg.http_settings(cfg.embedding_url.as_deref().expect("validated")), cfg.dim)?)
            }
            EmbeddingSource::File => {
                let path = cfg.embedding_file.as_ref().expect("validated");
                manifest.record_input(path)?;
                Box::new(FileStore::load(path, cfg.dim)?)
            }
        };
        for p in [&cfg.train_data, &cfg.test_data].into_iter().flatten() {
            manifest.record_input(p)?;
        }
        let cache = cfg.cache_dir.as_ref().map(GenerationCache::new).transpose()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        let out = cfg.out.clone();
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        for name in [Manifest::file_name(cmd.name()), format!("{}.config", cmd.name())] {
            let p = out.join(name);
            if p.exists() {
                return Err(Error::ArtifactExists(p));
            }
        }
        let mut session = Self {
            cmd,
            cfg: cfg.clone(),
            vocab: Arc::new(vocab),
            context,
            generator: Arc::new(CountingBackend::new(backend)),
            cache,
            embedder,
            pool,
            out,
            manifest,
            stage: "startup",
            map: None,
        };
        session.write_artifact(&format!("{}.config", cmd.name()), session.cfg.to_text().as_bytes())?;
        Ok(session)
    }

    fn artifact_path(&self, name: &str) -> Result<PathBuf> {
        let p = self.out.join(name);
        if p.exists() {
            return Err(Error::ArtifactExists(p));
        }
        Ok(p)
    }

    fn write_artifact(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.artifact_path(name)?;
        let mut f = std::fs::OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.record_artifact(name, &path)
    }

    fn run(&mut self) -> Result<()> {
        if self.cmd == Command::Eval && !self.out.join(CHECKPOINT_FILE).exists() {
            self.stage = "eval";
            return Err(Error::PrerequisiteMissing("train"));
        }
        self.stage = "ingest";
        let train = self.cfg.train_data.clone().map(|p| load_split(&p, &self.vocab, self.cfg.fps)).transpose()?;
        let test = self.cfg.test_data.clone().map(|p| load_split(&p, &self.vocab, self.cfg.fps)).transpose()?;
        let mut seen = HashSet::new();
        for v in train.iter().chain(test.iter()).flatten() {
            if !seen.insert(v.video_id.as_str()) {
                return Err(Error::InvalidConfig(format!("video {} appears more than once", v.video_id)));
            }
        }
        let all: Vec<&VideoRecord> = train.iter().chain(test.iter()).flatten().collect();

        let descriptions = match self.cmd {
            Command::Run | Command::Describe => {
                self.stage = "describe";
                let d = self.describe(&all)?;
                let mut text = String::new();
                for r in &d {
                    text.push_str(&serde_json::to_string(r)?);
                    text.push('\n');
                }
                self.write_artifact(DESCRIPTIONS_FILE, text.as_bytes())?;
                Some(d)
            }
            _ => None,
        };
        if self.cmd == Command::Describe {
            return Ok(());
        }

        self.stage = "embed";
        let embeddings = self.embed(&all, descriptions)?;
        let names = self.vocab.activities.names().to_vec();
        let data = EmbeddedDataset {
            train: train.as_deref().map(|v| self.split(v, &embeddings)).transpose()?.unwrap_or_default(),
            test: test.as_deref().map(|v| self.split(v, &embeddings)).transpose()?.unwrap_or_default(),
            class_names: names,
        };
        let exp = ExperimentConfig { train: self.cfg.train.clone(), aggregation: self.cfg.aggregation };

        match self.cmd {
            Command::Run | Command::Train => {
                self.stage = "train";
                let outcome = fit(&data.train, self.cfg.fusion, data.num_classes(), &exp.train, None)?;
                let ckpt = self.artifact_path(CHECKPOINT_FILE)?;
                save_checkpoint(&outcome.params, &ckpt)?;
                self.manifest.record_artifact(CHECKPOINT_FILE, &ckpt)?;
                let loss = self.artifact_path(LOSS_FILE)?;
                write_loss_trace(&loss, &outcome.loss_trace)?;
                self.manifest.record_artifact(LOSS_FILE, &loss)?;
                if self.cmd == Command::Run {
                    self.stage = "eval";
                    self.evaluate(&outcome.params, &data)?;
                }
            }
            Command::Eval => {
                self.stage = "eval";
                let params = load_checkpoint(&self.out.join(CHECKPOINT_FILE))?;
                self.evaluate(&params, &data)?;
            }
            Command::Ablate => {
                self.stage = "ablate";
                let rows = run_ablation(&data, &self.cfg.ablation_masks, &exp);
                let path = self.artifact_path(ABLATION_FILE)?;
                write_ablation_csv(&path, &rows)?;
                self.manifest.record_artifact(ABLATION_FILE, &path)?;
                if rows.iter().all(|r| r.result.is_err()) {
                    let first = rows.into_iter().next().expect("masks validated non-empty");
                    return first.result.map(|_| ());
                }
            }
            Command::Fewshot => {
                self.stage = "fewshot";
                let rows = fewshot_sweep(&data, &self.cfg.fewshot_fractions, self.cfg.fusion, &exp)?;
                let path = self.artifact_path(FEWSHOT_FILE)?;
                write_fewshot_csv(&path, &rows)?;
                self.manifest.record_artifact(FEWSHOT_FILE, &path)?;
                self.map = rows.last().map(|r| r.map);
            }
            Command::Describe => unreachable!("returned above"),
        }
        Ok(())
    }

    fn describe(&mut self, videos: &[&VideoRecord]) -> Result<Vec<DescriptionRecord>> {
        let jobs: Vec<(&VideoRecord, u32)> =
            videos.iter().flat_map(|v| sample_frames(v, self.cfg.stride).into_iter().map(move |f| (*v, f.frame_index))).collect();
        let reasoner = Reasoner::new(
            self.generator.clone(),
            self.cache.clone(),
            self.vocab.clone(),
            GenerationParams { temperature: self.cfg.temperature, seed: Some(self.cfg.seed) },
        );
        let ccfg = ContextConfig { k_verbs: self.cfg.k_verbs, clip_len: self.cfg.clip_len };
        let context = self.context.as_ref();
        let mut records = self.pool.install(|| {
            jobs.par_iter()
                .map(|&(video, frame_index)| {
                    let triple = context.context_for_frame(video, frame_index, &ccfg)?;
                    let pair = reasoner.describe_and_reason(&triple)?;
                    Ok(DescriptionRecord {
                        video_id: video.video_id.clone(),
                        frame_index,
                        s_d: pair.current,
                        s_c: pair.subsequent,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        records.sort_by(|a, b| (&a.video_id, a.frame_index).cmp(&(&b.video_id, b.frame_index)));
        let c = &mut self.manifest.counters;
        c.frames_described = records.len();
        c.generation_requests = 2 * records.len();
        c.generation_backend_calls = self.generator.calls();
        if self.cache.is_some() {
            c.generation_cache_hits = c.generation_requests.saturating_sub(c.generation_backend_calls);
        }
        Ok(records)
    }

    /// Embeddings for every sampled frame, keyed `{video}#{frame}#{u|e|q}`.
    /// An existing embeddings file is reused; frames it lacks are embedded
    /// from the descriptions file.
    fn embed(
        &mut self,
        videos: &[&VideoRecord],
        descriptions: Option<Vec<DescriptionRecord>>,
    ) -> Result<HashMap<String, Vec<f32>>> {
        let emb_path = self.out.join(EMBEDDINGS_FILE);
        let existing = emb_path.exists();
        let mut store: HashMap<String, Vec<f32>> = if existing {
            let bytes = std::fs::read(&emb_path).map_err(|e| Error::io(&emb_path, e))?;
            read_records(&bytes)?.into_iter().collect()
        } else {
            HashMap::new()
        };
        let todo: Vec<(&VideoRecord, crate::annotations::FrameRecord)> = videos
            .iter()
            .flat_map(|v| sample_frames(v, self.cfg.stride).into_iter().map(move |f| (*v, f)))
            .filter(|(v, f)| !store.contains_key(&key(&v.video_id, f.frame_index, 'q')))
            .collect();
        if todo.is_empty() {
            return Ok(store);
        }
        let descriptions = match descriptions {
            Some(d) => d,
            None => {
                let p = self.out.join(DESCRIPTIONS_FILE);
                if !p.exists() {
                    return Err(Error::PrerequisiteMissing("describe"));
                }
                read_descriptions(&p)?
            }
        };
        let by_frame: HashMap<(&str, u32), &DescriptionRecord> =
            descriptions.iter().map(|r| ((r.video_id.as_str(), r.frame_index), r)).collect();
        let embedder = self.embedder.as_ref();
        let computed = self.pool.install(|| {
            todo.par_iter()
                .map(|(v, f)| {
                    let d = by_frame
                        .get(&(v.video_id.as_str(), f.frame_index))
                        .ok_or_else(|| Error::MissingPrediction { video_id: v.video_id.clone(), frame_index: f.frame_index })?;
                    let t = embed_frame(embedder, &f.image_ref, &d.s_d, &d.s_c)?;
                    Ok((v.video_id.clone(), f.frame_index, t))
                })
                .collect::<Result<Vec<(String, u32, EmbeddingTriple)>>>()
        })?;
        self.manifest.counters.frames_embedded = computed.len();
        for (vid, fi, t) in computed {
            store.insert(key(&vid, fi, 'u'), t.u);
            store.insert(key(&vid, fi, 'e'), t.e);
            store.insert(key(&vid, fi, 'q'), t.q);
        }
        if !existing {
            let sorted: BTreeMap<&String, &Vec<f32>> = store.iter().collect();
            let mut bytes = Vec::new();
            write_records(&mut bytes, sorted.into_iter().map(|(k, v)| (k.as_str(), v.as_slice())))
                .map_err(|e| Error::io(&emb_path, e))?;
            self.write_artifact(EMBEDDINGS_FILE, &bytes)?;
        } else {
            log::info!("{} frames embedded in memory; {} left unchanged", todo.len(), emb_path.display());
        }
        Ok(store)
    }

    fn split(&self, videos: &[VideoRecord], store: &HashMap<String, Vec<f32>>) -> Result<Split> {
        let mut split = Split::default();
        for v in videos {
            for f in sample_frames(v, self.cfg.stride) {
                let get = |part| {
                    let k = key(&v.video_id, f.frame_index, part);
                    store.get(&k).cloned().ok_or(Error::MissingEmbedding(k))
                };
                split.frames.push(FrameSample {
                    video_id: v.video_id.clone(),
                    frame_index: f.frame_index,
                    embeddings: EmbeddingTriple::new(get('u')?, get('e')?, get('q')?)?,
                    labels: f.gt_activities.clone(),
                });
            }
            split.videos.push((v.video_id.clone(), v.gt_video_activities.clone()));
        }
        Ok(split)
    }

    fn evaluate(&mut self, params: &MlpParams, data: &EmbeddedDataset) -> Result<()> {
        let (report, _) = evaluate(params, &data.test, self.cfg.fusion, self.cfg.aggregation, &data.class_names)?;
        self.write_artifact(REPORT_FILE, report.to_text().as_bytes())?;
        self.map = Some(report.map);
        Ok(())
    }

    fn finish(mut self, result: Result<()>) -> CommandOutcome {
        let error = result.err();
        match &error {
            None => self.manifest.status = "ok".into(),
            Some(e) => {
                log::error!("stage {} failed: {e}", self.stage);
                self.manifest.status = "failed".into();
                self.manifest.failed_stage = Some(self.stage.to_owned());
                self.manifest.error = Some(e.to_string());
            }
        }
        let mut exit_code = if error.is_some() { EXIT_STAGE_ERROR } else { 0 };
        let mut error = error;
        let path = self.out.join(Manifest::file_name(self.cmd.name()));
        if let Err(e) = std::fs::write(&path, self.manifest.to_json()) {
            exit_code = EXIT_STAGE_ERROR;
            error.get_or_insert(Error::io(&path, e));
        }
        CommandOutcome { command: self.cmd, exit_code, error, manifest: Some(self.manifest), map: self.map }
    }
}
