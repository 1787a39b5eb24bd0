//! Frame and text embeddings `(u, e, q)` and their concatenation fusion.

mod filestore;
mod http;
mod mock;

use std::fmt;
use std::str::FromStr;

pub use filestore::{read_records, write_records, FileStore};
pub use http::HttpEmbedder;
pub use mock::MockEmbedder;

use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 512;

/// Image embedding `u`, current-description embedding `e` and
/// subsequent-action embedding `q`, all of width D.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTriple {
    pub u: Vec<f32>,
    pub e: Vec<f32>,
    pub q: Vec<f32>,
}

impl EmbeddingTriple {
    pub fn new(u: Vec<f32>, e: Vec<f32>, q: Vec<f32>) -> Result<Self> {
        let dim = u.len();
        for v in [&e, &q] {
            if v.len() != dim {
                return Err(Error::Dimension { expected: dim, actual: v.len() });
            }
        }
        if u.iter().chain(&e).chain(&q).any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("embedding contains non-finite values".into()));
        }
        Ok(Self { u, e, q })
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }
}

/// Which modalities feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FusionMask {
    use_image: bool,
    use_current: bool,
    use_subsequent: bool,
}

impl FusionMask {
    pub const IMAGE: Self = Self::from_flags(true, false, false);
    pub const SUBSEQUENT: Self = Self::from_flags(false, false, true);
    pub const CURRENT: Self = Self::from_flags(false, true, false);
    pub const IMAGE_CURRENT: Self = Self::from_flags(true, true, false);
    pub const FULL: Self = Self::from_flags(true, true, true);

    const fn from_flags(use_image: bool, use_current: bool, use_subsequent: bool) -> Self {
        Self { use_image, use_current, use_subsequent }
    }

    pub fn new(use_image: bool, use_current: bool, use_subsequent: bool) -> Result<Self> {
        if !(use_image || use_current || use_subsequent) {
            return Err(Error::InvalidConfig("fusion mask must enable at least one modality".into()));
        }
        Ok(Self::from_flags(use_image, use_current, use_subsequent))
    }

    /// The five ablation rows: image only, subsequent only, current only,
    /// image + current, and all three.
    pub fn ablation_rows() -> Vec<Self> {
        vec![Self::IMAGE, Self::SUBSEQUENT, Self::CURRENT, Self::IMAGE_CURRENT, Self::FULL]
    }

    /// All seven non-empty masks.
    pub fn all() -> Vec<Self> {
        (1u8..8).map(|b| Self::from_flags(b & 1 != 0, b & 2 != 0, b & 4 != 0)).collect()
    }

    pub fn use_image(&self) -> bool {
        self.use_image
    }

    pub fn use_current(&self) -> bool {
        self.use_current
    }

    pub fn use_subsequent(&self) -> bool {
        self.use_subsequent
    }

    pub fn count(&self) -> usize {
        [self.use_image, self.use_current, self.use_subsequent].iter().filter(|&&b| b).count()
    }

    pub fn fused_width(&self, dim: usize) -> usize {
        dim * self.count()
    }
}

impl Default for FusionMask {
    fn default() -> Self {
        Self::FULL
    }
}

impl fmt::Display for FusionMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = [(self.use_image, "image"), (self.use_current, "current"), (self.use_subsequent, "subsequent")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for FusionMask {
    type Err = Error;

    /// Parses `image+current` style names; `full` enables everything.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "full" {
            return Ok(Self::FULL);
        }
        let (mut i, mut c, mut q) = (false, false, false);
        for part in s.split('+').map(str::trim) {
            match part {
                "image" => i = true,
                "current" => c = true,
                "subsequent" => q = true,
                other => return Err(Error::InvalidConfig(format!("unknown modality {other:?}"))),
            }
        }
        Self::new(i, c, q)
    }
}

/// Concatenate the enabled blocks in the fixed order u, e, q.
pub fn fuse(triple: &EmbeddingTriple, mask: FusionMask) -> Vec<f32> {
    let mut out = Vec::with_capacity(mask.fused_width(triple.dim()));
    if mask.use_image {
        out.extend_from_slice(&triple.u);
    }
    if mask.use_current {
        out.extend_from_slice(&triple.e);
    }
    if mask.use_subsequent {
        out.extend_from_slice(&triple.q);
    }
    out
}

pub trait EmbeddingBackend: Send + Sync {
    fn id(&self) -> &str;

    fn dim(&self) -> usize;

    fn embed_image_raw(&self, image_ref: &str) -> Result<Vec<f32>>;

    fn embed_text_raw(&self, text: &str) -> Result<Vec<f32>>;
}

fn check_width(backend: &dyn EmbeddingBackend, v: Vec<f32>) -> Result<Vec<f32>> {
    if v.len() != backend.dim() {
        return Err(Error::Dimension { expected: backend.dim(), actual: v.len() });
    }
    Ok(v)
}

pub fn embed_image(backend: &dyn EmbeddingBackend, image_ref: &str) -> Result<Vec<f32>> {
    check_width(backend, backend.embed_image_raw(image_ref)?)
}

/// Over-long texts are truncated by the backend's own encoder limit.
pub fn embed_text(backend: &dyn EmbeddingBackend, text: &str) -> Result<Vec<f32>> {
    if text.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    check_width(backend, backend.embed_text_raw(text)?)
}

pub fn embed_frame(backend: &dyn EmbeddingBackend, image_ref: &str, current: &str, subsequent: &str) -> Result<EmbeddingTriple> {
    EmbeddingTriple::new(embed_image(backend, image_ref)?, embed_text(backend, current)?, embed_text(backend, subsequent)?)
}
