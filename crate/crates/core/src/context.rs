//! Per-frame context triples (interactions, objects, activity verbs) and the
//! providers that produce them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::annotations::VideoRecord;
use crate::error::{Error, Result};
use crate::util::seeded_rng;
use crate::vocab::{LabelSet, Vocabulary};

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ContextTriple {
    pub interactions: Vec<usize>,
    pub objects: Vec<usize>,
    pub verbs: Vec<usize>,
}

impl ContextTriple {
    /// Checks duplicate-freedom, vocabulary membership and the verb cap.
    pub fn validate(&self, vocab: &Vocabulary, k_verbs: usize) -> Result<()> {
        check_list("interaction", &self.interactions, &vocab.interactions)?;
        check_list("object", &self.objects, &vocab.objects)?;
        check_list("activity", &self.verbs, &vocab.activities)?;
        if self.verbs.len() > k_verbs {
            return Err(Error::InvalidConfig(format!("{} verbs exceed K = {k_verbs}", self.verbs.len())));
        }
        Ok(())
    }
}

fn check_list(kind: &str, ids: &[usize], set: &LabelSet) -> Result<()> {
    let mut seen = HashSet::new();
    for &id in ids {
        if !set.contains_id(id) {
            return Err(Error::UnknownLabel(format!("{kind} id {id}")));
        }
        if !seen.insert(id) {
            return Err(Error::InvalidConfig(format!("duplicate {kind} id {id} in context triple")));
        }
    }
    Ok(())
}

/// Activity recognizer output over the whole vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct VerbScores(pub Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextConfig {
    /// Number of candidate activity verbs (K).
    pub k_verbs: usize,
    /// Clip segment length in frames (l).
    pub clip_len: usize,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self { k_verbs: 5, clip_len: 5 }
    }
}

/// The `k` highest-scoring ids, descending; ties go to the lower id.
pub fn top_k_verbs(scores: &VerbScores, k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if let Some(i) = scores.0.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidScore(i));
    }
    let mut ids: Vec<usize> = (0..scores.0.len()).collect();
    ids.sort_by(|&a, &b| scores.0[b].total_cmp(&scores.0[a]).then(a.cmp(&b)));
    ids.truncate(k);
    Ok(ids)
}

/// Consecutive non-overlapping windows; the final window may be shorter.
pub fn segment_clips<T>(frames: &[T], clip_len: usize) -> Vec<&[T]> {
    frames.chunks(clip_len.max(1)).collect()
}

pub trait ContextProvider: Send + Sync {
    fn name(&self) -> &'static str;

    fn context_for_frame(&self, video: &VideoRecord, frame_index: u32, cfg: &ContextConfig) -> Result<ContextTriple>;
}

/// Video verbs ranked by how many frames carry them, ties by ascending id.
fn ranked_video_verbs(video: &VideoRecord, k: usize) -> Vec<usize> {
    let mut counts: BTreeMap<usize, usize> = video.gt_video_activities.iter().map(|&a| (a, 0)).collect();
    for f in &video.frames {
        for a in &f.gt_activities {
            *counts.entry(*a).or_default() += 1;
        }
    }
    let mut ranked: Vec<(usize, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(k).map(|(id, _)| id).collect()
}

fn missing(video: &VideoRecord, frame_index: u32) -> Error {
    Error::MissingPrediction { video_id: video.video_id.clone(), frame_index }
}

/// Context straight from the annotations.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthProvider;

impl ContextProvider for GroundTruthProvider {
    fn name(&self) -> &'static str {
        "groundtruth"
    }

    fn context_for_frame(&self, video: &VideoRecord, frame_index: u32, cfg: &ContextConfig) -> Result<ContextTriple> {
        let frame = video.frame(frame_index).ok_or_else(|| missing(video, frame_index))?;
        Ok(ContextTriple {
            interactions: frame.gt_interactions.iter().copied().collect(),
            objects: frame.gt_objects.iter().copied().collect(),
            verbs: ranked_video_verbs(video, cfg.k_verbs),
        })
    }
}

/// One line of a precomputed-context file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub video_id: String,
    pub frame_index: u32,
    pub verbs: Vec<String>,
    pub objects: Vec<String>,
    pub interactions: Vec<String>,
}

/// Precomputed triples keyed by `(video_id, frame_index)`, e.g. exported from
/// a full-scale recognition backbone.
#[derive(Debug, Clone, Default)]
pub struct FileProvider {
    index: HashMap<(String, u32), ContextTriple>,
}

impl FileProvider {
    pub fn load(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, vocab)
    }

    pub fn parse(text: &str, vocab: &Vocabulary) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let rec: ContextRecord = serde_json::from_str(raw).map_err(|e| Error::parse(line, None, e.to_string()))?;
            let resolve = |set: &LabelSet, names: &[String], column: &str| -> Result<Vec<usize>> {
                let ids = names.iter().map(|n| set.resolve(n)).collect::<Result<Vec<_>>>()?;
                let unique: HashSet<_> = ids.iter().collect();
                if unique.len() != ids.len() {
                    return Err(Error::parse(line, Some(column), "duplicate label"));
                }
                Ok(ids)
            };
            let triple = ContextTriple {
                interactions: resolve(&vocab.interactions, &rec.interactions, "interactions")?,
                objects: resolve(&vocab.objects, &rec.objects, "objects")?,
                verbs: resolve(&vocab.activities, &rec.verbs, "verbs")?,
            };
            let key = (rec.video_id, rec.frame_index);
            if index.contains_key(&key) {
                return Err(Error::parse(line, None, format!("duplicate entry for {key:?}")));
            }
            index.insert(key, triple);
        }
        Ok(Self { index })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

impl ContextProvider for FileProvider {
    fn name(&self) -> &'static str {
        "file"
    }

    fn context_for_frame(&self, video: &VideoRecord, frame_index: u32, cfg: &ContextConfig) -> Result<ContextTriple> {
        let mut triple =
            self.index.get(&(video.video_id.clone(), frame_index)).cloned().ok_or_else(|| missing(video, frame_index))?;
        triple.verbs.truncate(cfg.k_verbs);
        Ok(triple)
    }
}

/// A stand-in for a trained recognition backbone. Verbs are the video's
/// ranked annotated activities (or seeded random verbs for an unlabeled
/// video); objects and interactions are the frame's annotations plus
/// seeded spurious detections. Output depends only on
/// `(seed, video_id, frame_index)` and the annotations.
#[derive(Debug, Clone)]
pub struct MockProvider {
    seed: u64,
    num_activities: usize,
    num_objects: usize,
    num_interactions: usize,
}

impl MockProvider {
    pub fn new(vocab: &Vocabulary, seed: u64) -> Self {
        Self {
            seed,
            num_activities: vocab.activities.len(),
            num_objects: vocab.objects.len(),
            num_interactions: vocab.interactions.len(),
        }
    }
}

fn add_spurious(rng: &mut impl Rng, mut ids: Vec<usize>, universe: usize) -> Vec<usize> {
    let want_extra = ids.is_empty() || rng.random_bool(0.3);
    if want_extra {
        let pool: Vec<usize> = (0..universe).filter(|i| !ids.contains(i)).collect();
        if let Some(&extra) = pool.choose(rng) {
            ids.push(extra);
        }
    }
    ids
}

impl ContextProvider for MockProvider {
    fn name(&self) -> &'static str {
        "mock"
    }

    fn context_for_frame(&self, video: &VideoRecord, frame_index: u32, cfg: &ContextConfig) -> Result<ContextTriple> {
        let frame = video.frame(frame_index).ok_or_else(|| missing(video, frame_index))?;
        let mut rng = seeded_rng([
            b"mock-context".as_slice(),
            &self.seed.to_le_bytes(),
            video.video_id.as_bytes(),
            &frame_index.to_le_bytes(),
        ]);
        let mut verbs = ranked_video_verbs(video, cfg.k_verbs);
        if verbs.is_empty() {
            let mut video_rng = seeded_rng([b"mock-verbs".as_slice(), &self.seed.to_le_bytes(), video.video_id.as_bytes()]);
            let mut all: Vec<usize> = (0..self.num_activities).collect();
            all.shuffle(&mut video_rng);
            all.truncate(cfg.k_verbs);
            verbs = all;
        }
        let objects = add_spurious(&mut rng, frame.gt_objects.iter().copied().collect(), self.num_objects);
        let interactions = add_spurious(&mut rng, frame.gt_interactions.iter().copied().collect(), self.num_interactions);
        Ok(ContextTriple { interactions, objects, verbs })
    }
}
