use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{AdamConfig, AdamState, DenseMatrix, Real};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Weight each class by `n / (2 n_class)` in the cross-entropy.
    pub balance_classes: bool,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            hidden: 64,
            epochs: 200,
            batch_size: 32,
            lr: 0.01,
            balance_classes: true,
            seed: 0,
        }
    }
}

/// `concat(|a - b|, a ⊙ b)`.
pub fn pair_features<T: Real>(a: &[T], b: &[T]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "pair features: length mismatch");
    let mut f: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| (x.to_f64() - y.to_f64()).abs()).collect();
    f.extend(a.iter().zip(b).map(|(&x, &y)| x.to_f64() * y.to_f64()));
    f
}

/// One hidden relu layer and a sigmoid output.
#[derive(Debug, Clone, PartialEq)]
pub struct PairClassifier {
    w1: DenseMatrix<f64>,
    b1: DenseMatrix<f64>,
    w2: DenseMatrix<f64>,
    b2: DenseMatrix<f64>,
}

const LAYERS: usize = 4;

impl PairClassifier {
    fn init(inputs: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = stream(seed, Purpose::Classifier, 0);
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
        };
        PairClassifier {
            w1: uniform(hidden, inputs, inputs),
            b1: DenseMatrix::zeros(hidden, 1),
            w2: uniform(1, hidden, hidden),
            b2: DenseMatrix::zeros(1, 1),
        }
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        (0..self.w1.rows())
            .map(|i| {
                let a: f64 = self.w1.row(i).iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[(i, 0)];
                a.max(0.0)
            })
            .collect()
    }

    fn logit(&self, h: &[f64]) -> f64 {
        self.w2.row(0).iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.b2[(0, 0)]
    }

    /// Probability that the pair denotes the same entity.
    pub fn predict(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.w1.cols(), "classifier input length mismatch");
        let l = self.logit(&self.hidden(x));
        1.0 / (1.0 + (-l).exp())
    }

    pub fn train(features: &[Vec<f64>], labels: &[bool], cfg: &ClassifierConfig) -> Result<Self> {
        assert_eq!(features.len(), labels.len());
        let n_pos = labels.iter().filter(|&&l| l).count();
        if n_pos == 0 || n_pos == labels.len() {
            return Err(Error::Validation(
                "classifier training data must contain both classes".into(),
            ));
        }
        let dim = features[0].len();
        if features.iter().any(|f| f.len() != dim) {
            return Err(Error::Validation("classifier features differ in length".into()));
        }
        let n = labels.len() as f64;
        let (w_pos, w_neg) = if cfg.balance_classes {
            (n / (2.0 * n_pos as f64), n / (2.0 * (labels.len() - n_pos) as f64))
        } else {
            (1.0, 1.0)
        };
        let mut model = Self::init(dim, cfg.hidden, cfg.seed);
        let mut adam: Vec<AdamState<f64>> = model.layers().iter().map(|m| AdamState::for_param(m)).collect();
        let adam_cfg = AdamConfig {
            lr: cfg.lr,
            ..Default::default()
        };
        let mut order: Vec<usize> = (0..labels.len()).collect();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut stream(cfg.seed, Purpose::Classifier, 1 + epoch as u64));
            for chunk in order.chunks(cfg.batch_size.max(1)) {
                let mut grads: Vec<DenseMatrix<f64>> = model
                    .layers()
                    .iter()
                    .map(|m| DenseMatrix::zeros(m.rows(), m.cols()))
                    .collect();
                for &i in chunk {
                    let x = &features[i];
                    let h = model.hidden(x);
                    let p = 1.0 / (1.0 + (-model.logit(&h)).exp());
                    let (y, w) = if labels[i] { (1.0, w_pos) } else { (0.0, w_neg) };
                    let dl = w * (p - y) / chunk.len() as f64;
                    grads[3][(0, 0)] += dl;
                    for j in 0..h.len() {
                        grads[2][(0, j)] += dl * h[j];
                        if h[j] > 0.0 {
                            let dh = dl * model.w2[(0, j)];
                            grads[1][(j, 0)] += dh;
                            for (g, &v) in grads[0].row_mut(j).iter_mut().zip(x) {
                                *g += dh * v;
                            }
                        }
                    }
                }
                for (k, layer) in model.layers_mut().into_iter().enumerate() {
                    let g = &grads[k];
                    adam[k].step(layer, (0..g.rows()).map(|r| (r, g.row(r))), &adam_cfg);
                }
            }
        }
        Ok(model)
    }

    fn layers(&self) -> [&DenseMatrix<f64>; LAYERS] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn layers_mut(&mut self) -> [&mut DenseMatrix<f64>; LAYERS] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}
