//! Video annotation ingestion into a normalized per-frame representation.
//!
//! Two on-disk formats are understood: a Charades-style CSV (one row per
//! video, activity intervals in an `actions` column) and the normalized
//! JSONL record format (one frame per line).

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{LabelSet, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub video_id: String,
    pub frame_index: u32,
    pub timestamp_s: f64,
    pub gt_activities: BTreeSet<usize>,
    pub gt_objects: BTreeSet<usize>,
    pub gt_interactions: BTreeSet<usize>,
    /// Locator for the frame's pixels or precomputed image embedding.
    pub image_ref: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    pub fps: f64,
    pub frames: Vec<FrameRecord>,
    pub gt_video_activities: BTreeSet<usize>,
}

impl VideoRecord {
    /// Builds a record, deriving the video-level labels as the union of the
    /// per-frame activity labels.
    pub fn new(video_id: impl Into<String>, fps: f64, frames: Vec<FrameRecord>) -> Result<Self> {
        let video_id = video_id.into();
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidConfig(format!("video {video_id}: fps must be > 0, got {fps}")));
        }
        if frames.is_empty() {
            return Err(Error::EmptyVideo);
        }
        if frames.windows(2).any(|w| w[0].frame_index >= w[1].frame_index) {
            return Err(Error::InvalidConfig(format!("video {video_id}: frames must be strictly sorted by frame_index")));
        }
        let gt_video_activities = frames.iter().flat_map(|f| f.gt_activities.iter().copied()).collect();
        Ok(Self { video_id, fps, frames, gt_video_activities })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, frame_index: u32) -> Option<&FrameRecord> {
        self.frames.binary_search_by_key(&frame_index, |f| f.frame_index).ok().map(|i| &self.frames[i])
    }
}

/// Options for the CSV importer.
#[derive(Debug, Clone, Copy)]
pub struct CsvImportConfig {
    /// Rate at which frames are synthesized from the annotated intervals.
    pub fps: f64,
}

impl Default for CsvImportConfig {
    fn default() -> Self {
        Self { fps: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ActionInterval {
    class: usize,
    start_s: f64,
    end_s: f64,
}

/// Import a Charades-style CSV with columns `id` and `actions` (and an
/// optional `length` in seconds).
pub fn import_charades_csv(path: impl AsRef<Path>, vocab: &Vocabulary, cfg: CsvImportConfig) -> Result<Vec<VideoRecord>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_charades_csv(&bytes, vocab, cfg)
}

pub fn parse_charades_csv(bytes: &[u8], vocab: &Vocabulary, cfg: CsvImportConfig) -> Result<Vec<VideoRecord>> {
    if !(cfg.fps.is_finite() && cfg.fps > 0.0) {
        return Err(Error::InvalidConfig(format!("fps must be > 0, got {}", cfg.fps)));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(bytes);
    let headers = reader.headers().map_err(|e| Error::parse(1, None, e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = column("id").ok_or_else(|| Error::parse(1, Some("id"), "missing header column"))?;
    let actions_col = column("actions").ok_or_else(|| Error::parse(1, Some("actions"), "missing header column"))?;
    let length_col = column("length");

    let mut videos = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, None, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let video_id = record
            .get(id_col)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::parse(line, Some("id"), "missing video id"))?
            .to_owned();
        let intervals = parse_actions(record.get(actions_col).unwrap_or(""), &vocab.activities, line)?;
        let length_s = match length_col.and_then(|c| record.get(c)).map(str::trim) {
            Some(s) if !s.is_empty() => {
                let v: f64 = s.parse().map_err(|_| Error::parse(line, Some("length"), format!("invalid length {s:?}")))?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::parse(line, Some("length"), format!("invalid length {s:?}")));
                }
                Some(v)
            }
            _ => None,
        };
        videos.push(synthesize_video(video_id, intervals, length_s, cfg.fps)?);
    }
    Ok(videos)
}

fn parse_actions(field: &str, activities: &LabelSet, line: usize) -> Result<Vec<ActionInterval>> {
    let mut out = Vec::new();
    for triple in field.split(';').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = triple.split_whitespace().collect();
        let [code, start, end] = parts[..] else {
            return Err(Error::parse(line, Some("actions"), format!("malformed action {triple:?}")));
        };
        let class = code
            .strip_prefix('c')
            .filter(|digits| !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|digits| digits.parse::<usize>().ok())
            .filter(|&id| activities.contains_id(id))
            .ok_or_else(|| Error::UnknownLabel(code.to_owned()))?;
        let parse_time = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| Error::parse(line, Some("actions"), format!("malformed action {triple:?}")))
        };
        let (start_s, end_s) = (parse_time(start)?, parse_time(end)?);
        if start_s > end_s {
            return Err(Error::parse(line, Some("actions"), format!("interval ends before it starts: {triple:?}")));
        }
        out.push(ActionInterval { class, start_s, end_s });
    }
    Ok(out)
}

fn synthesize_video(video_id: String, intervals: Vec<ActionInterval>, length_s: Option<f64>, fps: f64) -> Result<VideoRecord> {
    // With a known length the frames cover [0, length); otherwise they run up
    // to and including the last annotated instant.
    let n_frames = match length_s {
        Some(len) => ((len * fps - 1e-9).ceil() as usize).max(1),
        None => {
            let last = intervals.iter().map(|i| i.end_s).fold(0.0_f64, f64::max);
            (last * fps + 1e-9).floor() as usize + 1
        }
    };
    let frames = (0..n_frames)
        .map(|i| {
            let timestamp_s = i as f64 / fps;
            FrameRecord {
                video_id: video_id.clone(),
                frame_index: i as u32,
                timestamp_s,
                gt_activities: intervals
                    .iter()
                    .filter(|iv| iv.start_s <= timestamp_s && timestamp_s <= iv.end_s)
                    .map(|iv| iv.class)
                    .collect(),
                gt_objects: BTreeSet::new(),
                gt_interactions: BTreeSet::new(),
                image_ref: format!("{video_id}/{i:06}"),
            }
        })
        .collect();
    VideoRecord::new(video_id, fps, frames)
}

/// One line of the normalized per-frame interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRecord {
    pub video_id: String,
    pub frame_index: u32,
    pub timestamp_s: f64,
    pub activities: Vec<String>,
    pub objects: Vec<String>,
    pub interactions: Vec<String>,
    pub image_ref: String,
}

impl NormalizedRecord {
    pub fn from_frame(frame: &FrameRecord, vocab: &Vocabulary) -> Self {
        let names =
            |set: &LabelSet, ids: &BTreeSet<usize>| ids.iter().map(|&id| set.name(id).expect("valid id").to_owned()).collect();
        Self {
            video_id: frame.video_id.clone(),
            frame_index: frame.frame_index,
            timestamp_s: frame.timestamp_s,
            activities: names(&vocab.activities, &frame.gt_activities),
            objects: names(&vocab.objects, &frame.gt_objects),
            interactions: names(&vocab.interactions, &frame.gt_interactions),
            image_ref: frame.image_ref.clone(),
        }
    }
}

pub fn import_normalized_jsonl(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Vec<VideoRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_normalized_jsonl(&text, vocab)
}

/// Parse normalized records. Videos keep the order of their first line;
/// frames are sorted by index. The sampling rate is estimated from the
/// first and last timestamps, falling back to 1 fps.
pub fn parse_normalized_jsonl(text: &str, vocab: &Vocabulary) -> Result<Vec<VideoRecord>> {
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<FrameRecord>> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: NormalizedRecord = serde_json::from_str(raw).map_err(|e| Error::parse(line, None, e.to_string()))?;
        if !(rec.timestamp_s.is_finite() && rec.timestamp_s >= 0.0) {
            return Err(Error::parse(line, Some("timestamp_s"), "timestamp must be finite and >= 0"));
        }
        let resolve =
            |set: &LabelSet, names: &[String]| -> Result<BTreeSet<usize>> { names.iter().map(|n| set.resolve(n)).collect() };
        let frame = FrameRecord {
            gt_activities: resolve(&vocab.activities, &rec.activities)?,
            gt_objects: resolve(&vocab.objects, &rec.objects)?,
            gt_interactions: resolve(&vocab.interactions, &rec.interactions)?,
            video_id: rec.video_id,
            frame_index: rec.frame_index,
            timestamp_s: rec.timestamp_s,
            image_ref: rec.image_ref,
        };
        let frames = grouped.entry(frame.video_id.clone()).or_insert_with(|| {
            order.push(frame.video_id.clone());
            Vec::new()
        });
        if frames.iter().any(|f| f.frame_index == frame.frame_index) {
            return Err(Error::parse(
                line,
                Some("frame_index"),
                format!("duplicate frame {} for video {}", frame.frame_index, frame.video_id),
            ));
        }
        frames.push(frame);
    }

    order
        .into_iter()
        .map(|video_id| {
            let mut frames = grouped.remove(&video_id).expect("grouped");
            frames.sort_by_key(|f| f.frame_index);
            let fps = estimate_fps(&frames).unwrap_or(1.0);
            VideoRecord::new(video_id, fps, frames)
        })
        .collect()
}

fn estimate_fps(frames: &[FrameRecord]) -> Option<f64> {
    let (first, last) = (frames.first()?, frames.last()?);
    let dt = last.timestamp_s - first.timestamp_s;
    let dn = f64::from(last.frame_index - first.frame_index);
    (dt > 0.0 && dn > 0.0).then(|| dn / dt)
}

/// Every `stride`-th frame by position, starting with the first. A stride of
/// zero is treated as one.
pub fn sample_frames(video: &VideoRecord, stride: usize) -> Vec<FrameRecord> {
    video.frames.iter().step_by(stride.max(1)).cloned().collect()
}
