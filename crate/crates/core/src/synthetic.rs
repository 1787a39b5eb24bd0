//! Small generated datasets for smoke runs and acceptance checks. Every
//! activity comes with a characteristic object and interaction, so the
//! context of a frame carries its labels.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::annotations::{FrameRecord, NormalizedRecord, VideoRecord};
use crate::error::{Error, Result};
use crate::pipeline::{ContextSource, PipelineConfig};
use crate::util::seeded_rng;
use crate::vocab::Vocabulary;

/// (activity, object, interaction) triples.
const SCENES: [(&str, &str, &str); 12] = [
    ("Opening a door", "door", "touching"),
    ("Sitting at a table", "table", "in front of"),
    ("Holding a phone/camera", "phone/camera", "holding"),
    ("Watching/Reading/Looking at a book", "book", "looking at"),
    ("Holding a towel/s", "towel", "holding"),
    ("Closing a box", "box", "touching"),
    ("Working/Playing on a laptop", "laptop", "looking at"),
    ("Eating a sandwich", "sandwich", "eating"),
    ("Opening a window", "window", "touching"),
    ("Drinking from a cup/glass/bottle", "cup/glass/bottle", "drinking from"),
    ("Sitting on sofa/couch", "sofa/couch", "sitting on"),
    ("Lying on a bed", "bed", "lying on"),
];

pub fn synthetic_vocabulary() -> Vocabulary {
    let mut objects: Vec<&str> = Vec::new();
    let mut interactions: Vec<&str> = Vec::new();
    for (_, o, r) in SCENES {
        if !objects.contains(&o) {
            objects.push(o);
        }
        if !interactions.contains(&r) {
            interactions.push(r);
        }
    }
    Vocabulary::from_lists(SCENES.iter().map(|s| s.0), objects, interactions).expect("distinct labels")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub videos: usize,
    pub test_fraction: f64,
    pub min_frames: u32,
    pub max_frames: u32,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { videos: 200, test_fraction: 0.3, min_frames: 16, max_frames: 32, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub vocab: Vocabulary,
    pub train: Vec<VideoRecord>,
    pub test: Vec<VideoRecord>,
}

/// Videos at 1 fps with one to three activities, each spanning at least
/// six consecutive frames.
pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    if cfg.videos < 2 || cfg.min_frames < 6 || cfg.max_frames < cfg.min_frames || !(0.0..1.0).contains(&cfg.test_fraction) {
        return Err(Error::InvalidConfig("synthetic dataset settings out of range".into()));
    }
    let vocab = synthetic_vocabulary();
    let mut rng = seeded_rng([b"synthetic".as_slice(), &cfg.seed.to_le_bytes()]);
    let ids: Vec<usize> = (0..SCENES.len()).collect();
    let mut videos = Vec::with_capacity(cfg.videos);
    for v in 0..cfg.videos {
        let video_id = format!("SYN{v:04}");
        let n = rng.random_range(cfg.min_frames..=cfg.max_frames);
        let count = rng.random_range(1..=3);
        let acts: Vec<usize> = ids.choose_multiple(&mut rng, count).copied().collect();
        let spans: Vec<(usize, u32, u32)> = acts
            .iter()
            .map(|&a| {
                let len = rng.random_range(6..=n);
                let start = rng.random_range(0..=n - len);
                (a, start, start + len - 1)
            })
            .collect();
        let frames = (0..n)
            .map(|i| {
                let active: BTreeSet<usize> = spans.iter().filter(|(_, s, e)| (*s..=*e).contains(&i)).map(|s| s.0).collect();
                FrameRecord {
                    video_id: video_id.clone(),
                    frame_index: i,
                    timestamp_s: f64::from(i),
                    gt_objects: active.iter().map(|&a| vocab.objects.id(SCENES[a].1).expect("listed")).collect(),
                    gt_interactions: active.iter().map(|&a| vocab.interactions.id(SCENES[a].2).expect("listed")).collect(),
                    gt_activities: active,
                    image_ref: format!("{video_id}/{i:06}"),
                }
            })
            .collect();
        videos.push(VideoRecord::new(video_id, 1.0, frames)?);
    }
    let n_test = ((cfg.videos as f64) * cfg.test_fraction).round().max(1.0) as usize;
    let test = videos.split_off(cfg.videos - n_test);
    Ok(SyntheticDataset { vocab, train: videos, test })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn jsonl(videos: &[VideoRecord], vocab: &Vocabulary) -> Result<String> {
    let mut out = String::new();
    for f in videos.iter().flat_map(|v| &v.frames) {
        out.push_str(&serde_json::to_string(&NormalizedRecord::from_frame(f, vocab))?);
        out.push('\n');
    }
    Ok(out)
}

impl SyntheticDataset {
    /// Writes the vocabulary, both splits and a `pipeline.config` using
    /// mock context, generation and embedding. Returns that config.
    pub fn write(&self, dir: &Path) -> Result<PipelineConfig> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = |name: &str| -> PathBuf { dir.join(name) };
        let lines = |names: &[String]| names.iter().map(|n| format!("{n}\n")).collect::<String>();
        write_file(&path("activities.txt"), &lines(self.vocab.activities.names()))?;
        write_file(&path("objects.txt"), &lines(self.vocab.objects.names()))?;
        write_file(&path("interactions.txt"), &lines(self.vocab.interactions.names()))?;
        write_file(&path("train.jsonl"), &jsonl(&self.train, &self.vocab)?)?;
        write_file(&path("test.jsonl"), &jsonl(&self.test, &self.vocab)?)?;
        let cfg = PipelineConfig {
            train_data: Some(path("train.jsonl")),
            test_data: Some(path("test.jsonl")),
            vocab: Some([path("activities.txt"), path("objects.txt"), path("interactions.txt")]),
            context: ContextSource::Mock,
            ..PipelineConfig::default()
        };
        let mut text = String::from("# synthetic dataset with mock backends\n");
        for key in [
            "train_data",
            "test_data",
            "vocab.activities",
            "vocab.objects",
            "vocab.interactions",
            "provider.context",
            "provider.generation",
            "provider.embedding",
        ] {
            text.push_str(&format!("{key} = {}\n", cfg.to_map()[key]));
        }
        write_file(&path("pipeline.config"), &text)?;
        Ok(cfg)
    }
}
