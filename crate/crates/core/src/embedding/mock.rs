use rand::Rng;

use super::EmbeddingBackend;
use crate::error::Result;
use crate::util::seeded_rng;

/// Weight of the whole-text component relative to the token components.
const WHOLE_TEXT_WEIGHT: f32 = 0.1;

/// Hash-seeded pseudorandom embeddings with unit L2 norm.
///
/// Images map to an independent random direction per `image_ref`. Texts are
/// the normalized sum of per-token and per-bigram random directions plus a
/// small whole-text term, so sentences sharing words share geometry while
/// distinct texts stay distinct.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    dim: usize,
    seed: u64,
}

impl MockEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }

    fn direction(&self, domain: &[u8], content: &[u8]) -> Vec<f32> {
        let mut rng = seeded_rng([b"mock-embedding".as_slice(), domain, &self.seed.to_le_bytes(), content]);
        (0..self.dim).map(|_| rng.random_range(-1.0f32..1.0)).collect()
    }
}

fn normalize(mut v: Vec<f32>) -> Vec<f32> {
    let norm = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x = (f64::from(*x) / norm) as f32);
    }
    v
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

impl EmbeddingBackend for MockEmbedder {
    fn id(&self) -> &str {
        "mock"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image_raw(&self, image_ref: &str) -> Result<Vec<f32>> {
        Ok(normalize(self.direction(b"image", image_ref.as_bytes())))
    }

    fn embed_text_raw(&self, text: &str) -> Result<Vec<f32>> {
        let toks = tokens(text);
        let mut acc: Vec<f32> = self.direction(b"text", text.as_bytes()).into_iter().map(|x| x * WHOLE_TEXT_WEIGHT).collect();
        let mut add = |v: Vec<f32>| acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        for t in &toks {
            add(self.direction(b"token", t.as_bytes()));
        }
        for pair in toks.windows(2) {
            add(self.direction(b"bigram", format!("{} {}", pair[0], pair[1]).as_bytes()));
        }
        Ok(normalize(acc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{embed_image, embed_text};
    use crate::error::Error;

    fn cosine(a: &[f32], b: &[f32]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
        let n = |v: &[f32]| v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
        dot / (n(a) * n(b))
    }

    #[test]
    fn image_is_deterministic_unit_vector() {
        let m = MockEmbedder::new(512, 1);
        let a = embed_image(&m, "V/000001").unwrap();
        assert_eq!(a, embed_image(&m, "V/000001").unwrap());
        let norm: f64 = a.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-5);
        assert_ne!(a, embed_image(&m, "V/000002").unwrap());
    }

    #[test]
    fn distinct_texts_are_not_parallel() {
        let m = MockEmbedder::new(64, 3);
        let mut rng = seeded_rng([b"pairs".as_slice()]);
        let words = ["person", "holding", "bread", "plate", "door", "opens", "a", "the", "table", "sits"];
        let mut checked = 0;
        while checked < 100 {
            let mut sentence = || {
                let n = rng.random_range(1..8);
                (0..n).map(|_| words[rng.random_range(0..words.len())]).collect::<Vec<_>>().join(" ")
            };
            let (a, b) = (sentence(), sentence());
            if a == b {
                continue;
            }
            let c = cosine(&embed_text(&m, &a).unwrap(), &embed_text(&m, &b).unwrap());
            assert!(c < 1.0 - 1e-6, "{a:?} vs {b:?}: {c}");
            checked += 1;
        }
    }

    #[test]
    fn shared_words_share_geometry() {
        let m = MockEmbedder::new(512, 3);
        let a = embed_text(&m, "A person is holding some bread.").unwrap();
        let b = embed_text(&m, "Someone is holding some bread near a plate.").unwrap();
        let c = embed_text(&m, "The door opens slowly.").unwrap();
        assert!(cosine(&a, &b) > cosine(&a, &c) + 0.2);
    }

    #[test]
    fn text_rules() {
        let m = MockEmbedder::new(32, 0);
        assert_eq!(embed_text(&m, "same").unwrap(), embed_text(&m, "same").unwrap());
        assert!(matches!(embed_text(&m, ""), Err(Error::EmptyText)));
        assert_eq!(embed_text(&m, "!!").unwrap().len(), 32);
    }
}
