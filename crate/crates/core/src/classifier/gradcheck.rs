//! Central finite-difference check of the analytic backward pass.

use ndarray::ArrayView2;
use rand::Rng;

use super::{backward, Mlp};
use crate::util::seeded_rng;

/// Denominator floor for the relative error of near-zero gradient entries.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// Pre-activations closer than this to zero are rejected so that a
/// finite-difference step cannot cross a ReLU kink.
pub const KINK_MARGIN: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct GradInstance {
    pub params: Mlp<f64>,
    pub x: Vec<f64>,
    pub labels: Vec<f64>,
}

impl GradInstance {
    /// Seeded random instance; draws until no hidden pre-activation lies
    /// within [`KINK_MARGIN`] of zero and no output saturates the clamp.
    pub fn random(seed: u64, din: usize, hidden: [usize; 2], n: usize) -> Self {
        let mut rng = seeded_rng([b"gradcheck".as_slice(), &seed.to_le_bytes()]);
        loop {
            let mut params = Mlp::<f64>::init_with_hidden(din, hidden, n, rng.random());
            for b in params.b1.iter_mut().chain(params.b2.iter_mut()).chain(params.b3.iter_mut()) {
                *b = rng.random_range(-0.5..0.5);
            }
            let x: Vec<f64> = (0..din).map(|_| rng.random_range(-1.0..1.0)).collect();
            let labels: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
            let inst = Self { params, x, labels };
            if inst.away_from_kinks() {
                return inst;
            }
        }
    }

    fn away_from_kinks(&self) -> bool {
        let xv = ArrayView2::from_shape((1, self.x.len()), self.x.as_slice()).expect("row view");
        let acts = self.params.activations(xv);
        let lim = super::PROB_CLAMP * 10.0;
        acts.z1.iter().chain(acts.z2.iter()).all(|z| z.abs() >= KINK_MARGIN) && acts.p.iter().all(|p| *p > lim && *p < 1.0 - lim)
    }

    fn loss(&self, params: &Mlp<f64>) -> f64 {
        let xv = ArrayView2::from_shape((1, self.x.len()), self.x.as_slice()).expect("row view");
        let yv = ArrayView2::from_shape((1, self.labels.len()), self.labels.as_slice()).expect("row view");
        params.loss_and_gradients(xv, yv).expect("shapes match").0
    }

    /// Largest relative error `|a - n| / max(|a|, |n|, floor)` over every
    /// parameter, comparing analytic `a` and central-difference `n`.
    pub fn max_relative_error(&self, step: f64) -> f64 {
        let analytic = backward(&self.params, &self.x, &self.labels).expect("shapes match");
        let mut probe = self.params.clone();
        let mut worst = 0.0f64;
        for (t, grads) in analytic.tensors().iter().enumerate() {
            for (i, &a) in grads.iter().enumerate() {
                let orig = probe.tensors()[t][i];
                probe.tensors_mut()[t][i] = orig + step;
                let up = self.loss(&probe);
                probe.tensors_mut()[t][i] = orig - step;
                let down = self.loss(&probe);
                probe.tensors_mut()[t][i] = orig;
                let numeric = (up - down) / (2.0 * step);
                let denom = a.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
                worst = worst.max((a - numeric).abs() / denom);
            }
        }
        worst
    }
}
