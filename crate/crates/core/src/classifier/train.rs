use std::io::Write;
use std::path::Path;

use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;

use super::{Mlp, MlpParams, HIDDEN_WIDTH};
use crate::error::{Error, Result};
use crate::util::seeded_rng;

/// RMSprop smoothing constant and denominator guard.
const RMS_DECAY: f32 = 0.9;
const RMS_EPS: f32 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weight_decay: f64,
    pub hidden: [usize; 2],
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, epochs: 30, batch_size: 64, seed: 0, weight_decay: 0.0, hidden: [HIDDEN_WIDTH, HIDDEN_WIDTH] }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.epochs == 0 {
            return bad("train.epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("train.batch_size must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("train.learning_rate must be positive");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("train.weight_decay must be non-negative");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }
}

/// Rows of `inputs` are fused embeddings; rows of `targets` are label
/// vectors in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: Array2<f32>,
    pub targets: Array2<f32>,
}

impl TrainingSet {
    pub fn new(inputs: Array2<f32>, targets: Array2<f32>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::Dimension { expected: inputs.nrows(), actual: targets.nrows() });
        }
        if inputs.nrows() == 0 {
            return Err(Error::InvalidConfig("training set is empty".into()));
        }
        if targets.iter().any(|y| !(0.0..=1.0).contains(y)) {
            return Err(Error::InvalidConfig("labels must lie in [0, 1]".into()));
        }
        Ok(Self { inputs, targets })
    }

    pub fn from_rows(rows: &[(Vec<f32>, Vec<f32>)]) -> Result<Self> {
        let (din, n) =
            rows.first().map(|(x, y)| (x.len(), y.len())).ok_or_else(|| Error::InvalidConfig("training set is empty".into()))?;
        let mut inputs = Array2::zeros((rows.len(), din));
        let mut targets = Array2::zeros((rows.len(), n));
        for (i, (x, y)) in rows.iter().enumerate() {
            if x.len() != din {
                return Err(Error::Dimension { expected: din, actual: x.len() });
            }
            if y.len() != n {
                return Err(Error::Dimension { expected: n, actual: y.len() });
            }
            inputs.row_mut(i).assign(&ndarray::ArrayView1::from(x.as_slice()));
            targets.row_mut(i).assign(&ndarray::ArrayView1::from(y.as_slice()));
        }
        Self::new(inputs, targets)
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn din(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.targets.ncols()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: MlpParams,
    /// Mean minibatch loss of each epoch.
    pub loss_trace: Vec<f64>,
}

/// Minibatch RMSprop on the mean binary cross-entropy. The sample order
/// of each epoch is a seeded shuffle, so the outcome is a function of
/// `(data, cfg)`.
pub fn train(data: &TrainingSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut params = Mlp::<f32>::init_with_hidden(data.din(), cfg.hidden, data.num_classes(), cfg.seed);
    let mut sq = Mlp::<f32>::zeros(data.din(), cfg.hidden, data.num_classes());
    let mut rng = seeded_rng([b"train-shuffle".as_slice(), &cfg.seed.to_le_bytes()]);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let lr = cfg.learning_rate as f32;
    let wd = cfg.weight_decay as f32;
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0f64;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let x = data.inputs.select(Axis(0), chunk);
            let y = data.targets.select(Axis(0), chunk);
            let (loss, grads) = params.loss_and_gradients(x.view(), y.view())?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            sum += f64::from(loss);
            batches += 1;
            for ((p, g), s) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(sq.tensors_mut()) {
                for ((p, &g), s) in p.iter_mut().zip(g).zip(s.iter_mut()) {
                    let g = g + wd * *p;
                    *s = RMS_DECAY * *s + (1.0 - RMS_DECAY) * g * g;
                    *p -= lr * g / (s.sqrt() + RMS_EPS);
                }
            }
        }
        let mean = sum / batches as f64;
        if !mean.is_finite() || !params.all_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        log::debug!("epoch {epoch}: loss {mean:.6}");
        trace.push(mean);
    }
    Ok(TrainOutcome { params, loss_trace: trace })
}

/// `epoch,loss` CSV.
pub fn write_loss_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Scores for every row, as f64.
pub fn predict_rows(params: &MlpParams, inputs: &Array2<f32>) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((inputs.nrows(), params.num_classes()));
    let step = 1024;
    for start in (0..inputs.nrows()).step_by(step) {
        let end = (start + step).min(inputs.nrows());
        let p = params.forward_batch(inputs.slice(s![start..end, ..]))?;
        out.slice_mut(s![start..end, ..]).assign(&p.mapv(f64::from));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::multi_hot;
    use rand::Rng;

    fn separable(n: usize, seed: u64) -> TrainingSet {
        let mut rng = seeded_rng([b"sep".as_slice(), &seed.to_le_bytes()]);
        let rows: Vec<(Vec<f32>, Vec<f32>)> = (0..n)
            .map(|_| {
                let x: Vec<f32> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mut labels = Vec::new();
                if x[0] + 0.5 * x[1] > 0.0 {
                    labels.push(0);
                }
                if x[2] - x[3] > 0.0 {
                    labels.push(1);
                }
                (x, multi_hot(labels, 2))
            })
            .collect();
        TrainingSet::from_rows(&rows).unwrap()
    }

    fn small_cfg(epochs: usize) -> TrainConfig {
        TrainConfig { epochs, batch_size: 32, learning_rate: 1e-3, hidden: [32, 32], ..TrainConfig::default() }
    }

    #[test]
    fn separable_problem_is_learned() {
        let data = separable(200, 1);
        let out = train(&data, &TrainConfig { epochs: 60, ..TrainConfig::default() }).unwrap();
        let scores = predict_rows(&out.params, &data.inputs).unwrap();
        for c in 0..2 {
            let labels: Vec<bool> = data.targets.column(c).iter().map(|y| *y > 0.5).collect();
            let s: Vec<f64> = scores.column(c).to_vec();
            let ap = crate::evaluation::average_precision(&s, &labels).unwrap().unwrap();
            assert!(ap >= 0.99, "class {c}: AP {ap}");
        }
        assert!(out.loss_trace.last().unwrap() < &out.loss_trace[0]);
    }

    #[test]
    fn identical_runs_identical_params() {
        let data = separable(100, 2);
        let a = train(&data, &small_cfg(5)).unwrap();
        let b = train(&data, &small_cfg(5)).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.loss_trace, b.loss_trace);
        let c = train(&data, &TrainConfig { seed: 9, ..small_cfg(5) }).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn full_batch_loss_does_not_increase_on_identity_data() {
        let rows: Vec<(Vec<f32>, Vec<f32>)> = (0..4).map(|i| (multi_hot([i], 4), multi_hot([i], 4))).collect();
        let data = TrainingSet::from_rows(&rows).unwrap();
        let cfg = TrainConfig { batch_size: 4, learning_rate: 1e-3, epochs: 200, ..small_cfg(200) };
        let out = train(&data, &cfg).unwrap();
        let t = &out.loss_trace;
        assert!(t.last().unwrap() < &t[0]);
        let rises = t.windows(2).filter(|w| w[1] > w[0] + 1e-6).count();
        assert!(rises < t.len() / 10, "{rises} rises");
    }

    #[test]
    fn config_errors() {
        let data = separable(10, 3);
        assert!(matches!(train(&data, &small_cfg(0)), Err(Error::InvalidConfig(_))));
        let cfg = TrainConfig { batch_size: 0, ..small_cfg(1) };
        assert!(matches!(train(&data, &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn non_finite_loss_reports_divergence() {
        let mut data = separable(50, 4);
        data.inputs.row_mut(7).fill(f32::INFINITY);
        let cfg = small_cfg(3);
        assert!(matches!(train(&data, &cfg), Err(Error::TrainingDiverged { .. })));
    }

    #[test]
    fn loss_trace_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        write_loss_trace(&path, &[0.5, 0.25]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "epoch,loss\n0,0.5\n1,0.25\n");
    }
}
