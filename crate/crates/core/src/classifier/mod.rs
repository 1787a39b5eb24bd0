//! Multi-label activity classifier: a 3-layer perceptron (hidden widths
//! 512-512, N outputs) over fused embeddings, with sigmoid outputs and
//! per-class binary cross-entropy.

mod checkpoint;
mod gradcheck;
mod train;

use std::fmt::Debug;

use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2, Axis, LinalgScalar, ScalarOperand, Zip};
use num_traits::{Float, FromPrimitive};
use rand::Rng;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{GradInstance, KINK_MARGIN, RELATIVE_ERROR_FLOOR};
pub use train::{predict_rows, train, write_loss_trace, TrainConfig, TrainOutcome, TrainingSet};

use crate::error::{Error, Result};
use crate::util::seeded_rng;

pub const HIDDEN_WIDTH: usize = 512;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the loss.
pub const PROB_CLAMP: f64 = 1e-7;

pub trait Scalar: LinalgScalar + Float + FromPrimitive + ScalarOperand + Debug + Send + Sync + 'static {}

impl<T> Scalar for T where T: LinalgScalar + Float + FromPrimitive + ScalarOperand + Debug + Send + Sync + 'static {}

fn cst<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("representable constant")
}

/// Weights are stored `(out, in)`; layer k computes `W_k a + b_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F = f32> {
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
    pub w3: Array2<F>,
    pub b3: Array1<F>,
}

/// Trained classifier parameters.
pub type MlpParams = Mlp<f32>;

/// Gradients share the parameter layout.
pub type Gradients<F> = Mlp<F>;

/// Per-class scores in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

struct Activations<F> {
    z1: Array2<F>,
    a1: Array2<F>,
    z2: Array2<F>,
    a2: Array2<F>,
    p: Array2<F>,
}

fn affine<F: Scalar>(input: ArrayView2<F>, w: &Array2<F>, b: &Array1<F>) -> Array2<F> {
    input.dot(&w.t()) + b
}

fn relu<F: Scalar>(z: &Array2<F>) -> Array2<F> {
    z.mapv(|v| if v > F::zero() { v } else { F::zero() })
}

fn sigmoid<F: Scalar>(z: F) -> F {
    // split on sign to avoid overflow in exp
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

impl<F: Scalar> Mlp<F> {
    pub fn zeros(din: usize, hidden: [usize; 2], n: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden[0], din)),
            b1: Array1::zeros(hidden[0]),
            w2: Array2::zeros((hidden[1], hidden[0])),
            b2: Array1::zeros(hidden[1]),
            w3: Array2::zeros((n, hidden[1])),
            b3: Array1::zeros(n),
        }
    }

    /// The standard 512-512-N head.
    pub fn init(din: usize, n: usize, seed: u64) -> Self {
        Self::init_with_hidden(din, [HIDDEN_WIDTH, HIDDEN_WIDTH], n, seed)
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init_with_hidden(din: usize, hidden: [usize; 2], n: usize, seed: u64) -> Self {
        let mut rng = seeded_rng([b"mlp-init".as_slice(), &seed.to_le_bytes()]);
        let mut p = Self::zeros(din, hidden, n);
        for w in [&mut p.w1, &mut p.w2, &mut p.w3] {
            let bound = 1.0 / (w.ncols() as f64).sqrt();
            w.iter_mut().for_each(|x| *x = cst(rng.random_range(-bound..bound)));
        }
        p
    }

    pub fn din(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> [usize; 2] {
        [self.w1.nrows(), self.w2.nrows()]
    }

    pub fn num_classes(&self) -> usize {
        self.w3.nrows()
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Row-major views of all six tensors in the order w1, b1, w2, b2, w3, b3.
    pub fn tensors(&self) -> [&[F]; 6] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
            self.w3.as_slice().expect("standard layout"),
            self.b3.as_slice().expect("standard layout"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [F]; 6] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
            self.w3.as_slice_mut().expect("standard layout"),
            self.b3.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    fn check_input_width(&self, width: usize) -> Result<()> {
        if width != self.din() {
            return Err(Error::Dimension { expected: self.din(), actual: width });
        }
        Ok(())
    }

    fn activations(&self, x: ArrayView2<F>) -> Activations<F> {
        let z1 = affine(x, &self.w1, &self.b1);
        let a1 = relu(&z1);
        let z2 = affine(a1.view(), &self.w2, &self.b2);
        let a2 = relu(&z2);
        let p = affine(a2.view(), &self.w3, &self.b3).mapv(sigmoid);
        Activations { z1, a1, z2, a2, p }
    }

    /// Class probabilities for each row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<F>) -> Result<Array2<F>> {
        self.check_input_width(x.ncols())?;
        Ok(self.activations(x).p)
    }

    pub fn forward_one(&self, x: &[F]) -> Result<Vec<F>> {
        self.check_input_width(x.len())?;
        let row = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.activations(row).p.into_raw_vec_and_offset().0)
    }

    /// Mean per-sample loss and gradients for a batch. Targets are in [0, 1].
    pub fn loss_and_gradients(&self, x: ArrayView2<F>, y: ArrayView2<F>) -> Result<(F, Gradients<F>)> {
        self.check_input_width(x.ncols())?;
        if y.dim() != (x.nrows(), self.num_classes()) {
            return Err(Error::Dimension { expected: self.num_classes(), actual: y.ncols() });
        }
        let acts = self.activations(x);
        let batch = x.nrows();
        let scale = F::one() / cst::<F>((batch * self.num_classes()) as f64);
        let (lo, hi) = (cst::<F>(PROB_CLAMP), F::one() - cst::<F>(PROB_CLAMP));

        let mut total = F::zero();
        let mut dz3 = Array2::<F>::zeros(acts.p.raw_dim());
        Zip::from(&mut dz3).and(&acts.p).and(&y).for_each(|d, &p, &t| {
            let pc = p.max(lo).min(hi);
            total = total - (t * pc.ln() + (F::one() - t) * (F::one() - pc).ln());
            // the clamp is flat outside [lo, hi]
            *d = if p > lo && p < hi { (p - t) * scale } else { F::zero() };
        });
        let loss = total * scale;

        let mut g = Self::zeros(self.din(), self.hidden(), self.num_classes());
        g.w3.assign(&dz3.t().dot(&acts.a2));
        g.b3.assign(&dz3.sum_axis(Axis(0)));
        let mut dz2 = dz3.dot(&self.w3);
        relu_mask(dz2.view_mut(), &acts.z2);
        g.w2.assign(&dz2.t().dot(&acts.a1));
        g.b2.assign(&dz2.sum_axis(Axis(0)));
        let mut dz1 = dz2.dot(&self.w2);
        relu_mask(dz1.view_mut(), &acts.z1);
        g.w1.assign(&dz1.t().dot(&x));
        g.b1.assign(&dz1.sum_axis(Axis(0)));
        Ok((loss, g))
    }

    pub fn cast<G: Scalar>(&self) -> Mlp<G> {
        let c = |v: &F| G::from(*v).expect("castable");
        Mlp {
            w1: self.w1.map(c),
            b1: self.b1.map(c),
            w2: self.w2.map(c),
            b2: self.b2.map(c),
            w3: self.w3.map(c),
            b3: self.b3.map(c),
        }
    }
}

fn relu_mask<F: Scalar>(mut d: ArrayViewMut2<F>, z: &Array2<F>) {
    Zip::from(&mut d).and(z).for_each(|d, &z| {
        if z <= F::zero() {
            *d = F::zero();
        }
    });
}

/// Scores for one fused input vector.
pub fn forward(params: &MlpParams, x: &[f32]) -> Result<ScoreVector> {
    Ok(ScoreVector(params.forward_one(x)?.into_iter().map(f64::from).collect()))
}

/// Mean binary cross-entropy over classes with clamped probabilities.
pub fn loss(scores: &ScoreVector, labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension { expected: scores.len(), actual: labels.len() });
    }
    let total: f64 = scores
        .0
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / labels.len() as f64)
}

/// Analytic gradients of [`loss`] for one sample.
pub fn backward<F: Scalar>(params: &Mlp<F>, x: &[F], labels: &[F]) -> Result<Gradients<F>> {
    params.check_input_width(x.len())?;
    let xv = ArrayView2::from_shape((1, x.len()), x).expect("row view");
    let yv = ArrayView2::from_shape((1, labels.len()), labels)
        .map_err(|_| Error::Dimension { expected: params.num_classes(), actual: labels.len() })?;
    Ok(params.loss_and_gradients(xv, yv)?.1)
}

pub fn multi_hot(ids: impl IntoIterator<Item = usize>, n: usize) -> Vec<f32> {
    let mut v = vec![0.0; n];
    for id in ids {
        v[id] = 1.0;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn init_shapes_and_determinism() {
        let p = MlpParams::init(1536, 157, 4);
        assert_eq!(p.w1.dim(), (512, 1536));
        assert_eq!(p.w2.dim(), (512, 512));
        assert_eq!(p.w3.dim(), (157, 512));
        assert_eq!(p, MlpParams::init(1536, 157, 4));
        assert_ne!(p, MlpParams::init(1536, 157, 5));
        assert!(p.b1.iter().chain(&p.b2).chain(&p.b3).all(|b| *b == 0.0));
        let bound = 1.0 / (1536f32).sqrt();
        assert!(p.w1.iter().all(|w| w.abs() <= bound));
        let mean = p.w1.mean().unwrap();
        assert!(mean.abs() < 1e-3);
    }

    #[test]
    fn zero_params_score_one_half() {
        let p = MlpParams::zeros(6, [4, 4], 3);
        let s = forward(&p, &[1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap();
        assert_eq!(s.0, vec![0.5; 3]);
    }

    #[test]
    fn hand_evaluated_toy_network() {
        // Din=1, hidden 1-1, N=1
        let mut p = Mlp::<f64>::zeros(1, [1, 1], 1);
        p.w1[[0, 0]] = 2.0;
        p.b1[0] = -0.5;
        p.w2[[0, 0]] = -1.5;
        p.b2[0] = 3.0;
        p.w3[[0, 0]] = 0.75;
        p.b3[0] = -0.25;
        let x = 0.8;
        // z1 = 1.1, a1 = 1.1; z2 = -1.65 + 3 = 1.35; z3 = 1.0125 - 0.25 = 0.7625
        let expected = 1.0 / (1.0 + (-0.7625f64).exp());
        let got = p.forward_one(&[x]).unwrap()[0];
        assert!((got - expected).abs() < 1e-12);
        // negative pre-activation on the first layer kills the path
        let got = p.forward_one(&[-1.0]).unwrap()[0];
        let expected = 1.0 / (1.0 + (-(0.75 * 3.0 - 0.25f64)).exp());
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_first_layer_ignores_input() {
        let mut p = MlpParams::init(8, 3, 1);
        p.w1.fill(0.0);
        let a = forward(&p, &[1.0; 8]).unwrap();
        let b = forward(&p, &[-40.0; 8]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = MlpParams::init(8, 3, 1);
        assert!(matches!(forward(&p, &[0.0; 7]), Err(Error::Dimension { expected: 8, actual: 7 })));
    }

    #[test]
    fn loss_examples() {
        let half = ScoreVector(vec![0.5; 4]);
        assert!((loss(&half, &[1.0, 0.0, 1.0, 0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let exact = ScoreVector(vec![1.0, 0.0, 1.0]);
        assert!(loss(&exact, &[1.0, 0.0, 1.0]).unwrap() <= 1e-6);
        let s = ScoreVector(vec![0.9, 0.2]);
        let expected = (-(0.9f64.ln()) - 0.8f64.ln()) / 2.0;
        assert!((loss(&s, &[1.0, 0.0]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn stationary_point_has_zero_gradient() {
        let p = Mlp::<f64>::init_with_hidden(5, [7, 6], 3, 11);
        let x = [0.3, -0.2, 0.9, 0.1, -0.7];
        let labels = p.forward_one(&x).unwrap();
        let g = backward(&p, &x, &labels).unwrap();
        assert!(g.tensors().iter().all(|t| t.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn dead_relu_paths_have_zero_gradient() {
        let mut p = Mlp::<f64>::init_with_hidden(4, [5, 5], 2, 2);
        p.b1.fill(-100.0);
        let g = backward(&p, &[0.1, 0.2, 0.3, 0.4], &[1.0, 0.0]).unwrap();
        assert!(g.w1.iter().chain(&g.b1).chain(&g.w2).all(|v| *v == 0.0));
        assert!(g.w3.iter().all(|v| *v == 0.0));
        assert!(g.b3.iter().any(|v| *v != 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn outputs_strictly_inside_unit_interval(seed in any::<u64>(), scale in 0.01f64..4.0) {
            let p = Mlp::<f64>::init_with_hidden(6, [8, 8], 4, seed);
            let mut rng = seeded_rng([b"x".as_slice(), &seed.to_le_bytes()]);
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-scale..scale)).collect();
            for v in p.forward_one(&x).unwrap() {
                prop_assert!(v > 0.0 && v < 1.0);
            }
        }
    }
}
