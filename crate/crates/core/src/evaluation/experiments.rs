use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;

use super::{aggregate_with, Aggregation, EvalReport, VideoScores};
use crate::classifier::{predict_rows, train, MlpParams, ScoreVector, TrainConfig, TrainOutcome, TrainingSet};
use crate::embedding::{fuse, EmbeddingTriple, FusionMask};
use crate::error::{Error, Result};
use crate::util::seeded_rng;

/// One sampled frame with its embeddings and frame-level activity labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub video_id: String,
    pub frame_index: u32,
    pub embeddings: EmbeddingTriple,
    pub labels: BTreeSet<usize>,
}

/// Frames grouped by video, in a fixed canonical order, together with the
/// video-level ground truth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub frames: Vec<FrameSample>,
    pub videos: Vec<(String, BTreeSet<usize>)>,
}

impl Split {
    pub fn video_ids(&self) -> Vec<&str> {
        self.videos.iter().map(|(v, _)| v.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedDataset {
    pub class_names: Vec<String>,
    pub train: Split,
    pub test: Split,
}

impl EmbeddedDataset {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub aggregation: Aggregation,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { train: TrainConfig::default(), aggregation: Aggregation::Max }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedEvaluation {
    pub outcome: TrainOutcome,
    pub report: EvalReport,
    pub video_scores: Vec<VideoScores>,
}

fn training_set(frames: &[&FrameSample], mask: FusionMask, n: usize) -> Result<TrainingSet> {
    let first = frames.first().ok_or_else(|| Error::InvalidConfig("no training frames".into()))?;
    let din = mask.fused_width(first.embeddings.dim());
    let mut x = Array2::zeros((frames.len(), din));
    let mut y = Array2::zeros((frames.len(), n));
    for (i, f) in frames.iter().enumerate() {
        let fused = fuse(&f.embeddings, mask);
        if fused.len() != din {
            return Err(Error::Dimension { expected: din, actual: fused.len() });
        }
        x.row_mut(i).assign(&ndarray::ArrayView1::from(fused.as_slice()));
        for &c in &f.labels {
            if c >= n {
                return Err(Error::UnknownLabel(c.to_string()));
            }
            y[[i, c]] = 1.0;
        }
    }
    TrainingSet::new(x, y)
}

/// Train a fresh classifier on the split's frames, restricted to `videos`
/// when given. Frames keep the split's order.
pub fn fit(
    split: &Split,
    mask: FusionMask,
    num_classes: usize,
    cfg: &TrainConfig,
    videos: Option<&HashSet<&str>>,
) -> Result<TrainOutcome> {
    let frames: Vec<&FrameSample> =
        split.frames.iter().filter(|f| videos.is_none_or(|s| s.contains(f.video_id.as_str()))).collect();
    train(&training_set(&frames, mask, num_classes)?, cfg)
}

/// Video-level scores and report for every video of the split.
pub fn evaluate(
    params: &MlpParams,
    split: &Split,
    mask: FusionMask,
    aggregation: Aggregation,
    class_names: &[String],
) -> Result<(EvalReport, Vec<VideoScores>)> {
    let frames: Vec<&FrameSample> = split.frames.iter().collect();
    let inputs = training_set(&frames, mask, class_names.len())?.inputs;
    if inputs.ncols() != params.din() {
        return Err(Error::Dimension { expected: params.din(), actual: inputs.ncols() });
    }
    let scores = predict_rows(params, &inputs)?;
    let mut by_video: HashMap<&str, Vec<ScoreVector>> = HashMap::new();
    for (i, f) in frames.iter().enumerate() {
        by_video.entry(f.video_id.as_str()).or_default().push(ScoreVector(scores.row(i).to_vec()));
    }
    let video_scores = split
        .videos
        .iter()
        .map(|(vid, _)| {
            let per_frame = by_video.get(vid.as_str()).map(Vec::as_slice).unwrap_or_default();
            Ok(VideoScores { video_id: vid.clone(), scores: aggregate_with(per_frame, aggregation)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<Vec<usize>> = split.videos.iter().map(|(_, l)| l.iter().copied().collect()).collect();
    let report = EvalReport::compute(&video_scores, &truth, class_names)?;
    Ok((report, video_scores))
}

fn run_once(
    data: &EmbeddedDataset,
    mask: FusionMask,
    cfg: &ExperimentConfig,
    train_videos: Option<&HashSet<&str>>,
) -> Result<TrainedEvaluation> {
    let outcome = fit(&data.train, mask, data.num_classes(), &cfg.train, train_videos)?;
    let (report, video_scores) = evaluate(&outcome.params, &data.test, mask, cfg.aggregation, &data.class_names)?;
    Ok(TrainedEvaluation { outcome, report, video_scores })
}

pub fn train_and_evaluate(data: &EmbeddedDataset, mask: FusionMask, cfg: &ExperimentConfig) -> Result<TrainedEvaluation> {
    run_once(data, mask, cfg, None)
}

#[derive(Debug)]
pub struct AblationRow {
    pub mask: FusionMask,
    pub result: Result<f64>,
}

/// A fresh classifier per mask, all with the same seed. A failing row keeps
/// its error and the remaining rows still run.
pub fn run_ablation(data: &EmbeddedDataset, masks: &[FusionMask], cfg: &ExperimentConfig) -> Vec<AblationRow> {
    masks
        .iter()
        .map(|&mask| {
            let result = train_and_evaluate(data, mask, cfg).map(|r| r.report.map);
            if let Err(e) = &result {
                log::warn!("ablation row {mask} failed: {e}");
            }
            AblationRow { mask, result }
        })
        .collect()
}

/// Nested training subsets: one seeded permutation of `video_ids`, and
/// fraction `f` takes its first `ceil(f * n)` entries.
pub fn fewshot_subsets(video_ids: &[&str], fractions: &[f64], seed: u64) -> Result<Vec<Vec<String>>> {
    let mut perm: Vec<&str> = video_ids.to_vec();
    perm.shuffle(&mut seeded_rng([b"fewshot".as_slice(), &seed.to_le_bytes()]));
    fractions
        .iter()
        .map(|&f| {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidFraction(f));
            }
            let k = ((f * perm.len() as f64) - 1e-9).ceil().max(0.0) as usize;
            if k == 0 {
                return Err(Error::InvalidFraction(f));
            }
            Ok(perm[..k.min(perm.len())].iter().map(|s| s.to_string()).collect())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FewshotRow {
    pub fraction: f64,
    pub n_videos: usize,
    pub map: f64,
}

/// Frames of the selected videos are used in the split's canonical order,
/// so fraction 1.0 reproduces [`train_and_evaluate`] exactly.
pub fn fewshot_sweep(
    data: &EmbeddedDataset,
    fractions: &[f64],
    mask: FusionMask,
    cfg: &ExperimentConfig,
) -> Result<Vec<FewshotRow>> {
    let ids = data.train.video_ids();
    let subsets = fewshot_subsets(&ids, fractions, cfg.train.seed)?;
    fractions
        .iter()
        .zip(&subsets)
        .map(|(&fraction, subset)| {
            let keep: HashSet<&str> = subset.iter().map(String::as_str).collect();
            let r = run_once(data, mask, cfg, Some(&keep))?;
            Ok(FewshotRow { fraction, n_videos: subset.len(), map: r.report.map })
        })
        .collect()
}

pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["mask", "map", "error"]).map_err(|e| csv_error(path, e))?;
    for r in rows {
        let (map, err) = match &r.result {
            Ok(m) => (m.to_string(), String::new()),
            Err(e) => (String::new(), e.to_string()),
        };
        w.write_record([r.mask.to_string(), map, err]).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_fewshot_csv(path: &Path, rows: &[FewshotRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["fraction", "n_videos", "map"]).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([r.fraction.to_string(), r.n_videos.to_string(), r.map.to_string()]).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}
