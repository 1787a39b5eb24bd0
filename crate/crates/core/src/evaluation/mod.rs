//! Video-level aggregation, per-class average precision and mAP, plus the
//! ablation and few-shot experiment drivers.

mod experiments;

use std::fmt::Write as _;
use std::str::FromStr;

pub use experiments::{
    evaluate, fewshot_subsets, fewshot_sweep, fit, run_ablation, train_and_evaluate, write_ablation_csv, write_fewshot_csv,
    AblationRow, EmbeddedDataset, ExperimentConfig, FewshotRow, FrameSample, Split, TrainedEvaluation,
};

use crate::classifier::ScoreVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "max" => Ok(Self::Max),
            "mean" => Ok(Self::Mean),
            other => Err(Error::InvalidConfig(format!("unknown aggregation {other:?}"))),
        }
    }
}

impl std::fmt::Display for Aggregation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Max => "max",
            Self::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoScores {
    pub video_id: String,
    pub scores: ScoreVector,
}

/// Elementwise maximum over frames.
pub fn aggregate_video(frames: &[ScoreVector]) -> Result<ScoreVector> {
    aggregate_with(frames, Aggregation::Max)
}

pub fn aggregate_with(frames: &[ScoreVector], how: Aggregation) -> Result<ScoreVector> {
    let first = frames.first().ok_or(Error::EmptyVideo)?;
    let n = first.len();
    let mut acc = first.0.clone();
    for f in &frames[1..] {
        if f.len() != n {
            return Err(Error::Dimension { expected: n, actual: f.len() });
        }
        for (a, &s) in acc.iter_mut().zip(&f.0) {
            match how {
                Aggregation::Max => *a = a.max(s),
                Aggregation::Mean => *a += s,
            }
        }
    }
    if how == Aggregation::Mean {
        acc.iter_mut().for_each(|a| *a /= frames.len() as f64);
    }
    Ok(ScoreVector(acc))
}

/// Non-interpolated AP: mean precision at the rank of each positive after
/// sorting by score descending, ties broken by ascending index. `None`
/// when there are no positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension { expected: scores.len(), actual: labels.len() });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidScore(i));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(Some(sum / positives as f64))
}

/// Mean over the defined entries.
pub fn mean_ap(per_class_ap: &[Option<f64>]) -> Result<f64> {
    let defined: Vec<f64> = per_class_ap.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::NoPositiveClass);
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    /// `None` for classes without test positives; these are left out of `map`.
    pub per_class_ap: Vec<Option<f64>>,
    pub map: f64,
    pub n_videos: usize,
}

impl EvalReport {
    /// `truth[v]` holds the class ids present in video `v`.
    pub fn compute(scores: &[VideoScores], truth: &[Vec<usize>], class_names: &[String]) -> Result<Self> {
        if scores.len() != truth.len() {
            return Err(Error::Dimension { expected: scores.len(), actual: truth.len() });
        }
        let n = class_names.len();
        if let Some(bad) = scores.iter().find(|v| v.scores.len() != n) {
            return Err(Error::Dimension { expected: n, actual: bad.scores.len() });
        }
        let per_class_ap = (0..n)
            .map(|c| {
                let s: Vec<f64> = scores.iter().map(|v| v.scores.0[c]).collect();
                let l: Vec<bool> = truth.iter().map(|t| t.contains(&c)).collect();
                average_precision(&s, &l)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { class_names: class_names.to_vec(), map: mean_ap(&per_class_ap)?, per_class_ap, n_videos: scores.len() })
    }

    pub fn defined_classes(&self) -> usize {
        self.per_class_ap.iter().flatten().count()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "videos: {}", self.n_videos);
        let _ = writeln!(
            out,
            "classes with test positives: {} of {} (others excluded from mAP)",
            self.defined_classes(),
            self.per_class_ap.len()
        );
        let _ = writeln!(out, "class_id,class_name,ap");
        for (i, (name, ap)) in self.class_names.iter().zip(&self.per_class_ap).enumerate() {
            if let Some(ap) = ap {
                let _ = writeln!(out, "{i},{},{ap:.6}", csv_field(name));
            }
        }
        let _ = writeln!(out, "mAP,{:.6}", self.map);
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
