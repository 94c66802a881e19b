use super::sampling::{sample_labels, NegativeSampler};
use super::TrainConfig;
use crate::model::{Encoder, ParamId, ParamSet, SparseGrads};
use crate::numerics::Real;
use crate::rng::{stream2, Purpose};
use crate::store::{LinkageLabelSet, Triple};

/// `Σ_c max(0, γ - pos + neg_c)`.
pub fn relational_loss(pos: f64, negs: &[f64], margin: f64) -> f64 {
    negs.iter().map(|&n| (margin - pos + n).max(0.0)).sum()
}

/// Same hinge, used for the linkage term with positive-label substitution.
pub fn linkage_hinge(pos: f64, negs: &[f64], margin: f64) -> f64 {
    relational_loss(pos, negs, margin)
}

/// Data and regularization parts of a batch objective.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BatchLoss {
    pub data: f64,
    pub regularization: f64,
    /// Corruptions abandoned after exhausting the retry budget.
    pub shortfall: usize,
}

impl BatchLoss {
    pub fn total(&self) -> f64 {
        self.data + self.regularization
    }
}

/// Everything the per-triple objective reads besides parameters.
pub struct LossContext<'a> {
    pub sampler: &'a NegativeSampler<'a>,
    /// Not consulted when the task weight is 1.
    pub labels: &'a LinkageLabelSet,
    pub cfg: &'a TrainConfig,
    pub epoch: usize,
}

/// One training item: a triple plus its stable index in the training list,
/// which keys its random streams.
pub type BatchItem = (usize, Triple);

/// Weighted hinge terms of one triple. Gradients of the data loss are
/// accumulated into `grads`; returns `(loss, shortfall)`.
pub fn item_loss<T: Real>(enc: &Encoder<'_, T>, ctx: &LossContext<'_>, item: &BatchItem, grads: &mut SparseGrads<T>) -> (f64, usize) {
    let cfg = ctx.cfg;
    let (idx, t) = (item.0 as u64, item.1);
    let b = cfg.task_weight;
    let gamma = cfg.margin;
    let mut loss = 0.0;
    let mut shortfall = 0;
    let mut pos_tape = None;

    if b > 0.0 {
        let pos = enc.forward(t.subject, t.relation, t.object);
        let mut rng = stream2(cfg.seed, Purpose::Corruption, ctx.epoch as u64, idx);
        let (negs, short) = ctx.sampler.corrupt(&t, cfg.negatives, cfg.corrupt_mode, &mut rng);
        shortfall += short;
        let mut pos_up = 0.0;
        for n in negs {
            let tape = enc.forward(n.subject, n.relation, n.object);
            let h = gamma - pos.score + tape.score;
            if h > 0.0 {
                loss += b * h;
                pos_up -= b;
                enc.backward(&tape, b, grads);
            }
        }
        enc.backward(&pos, pos_up, grads);
        pos_tape = Some(pos);
    }

    if b < 1.0 {
        let w = 1.0 - b;
        let sides = if t.subject == t.object { 1 } else { 2 };
        for (side, e) in [t.subject, t.object].into_iter().take(sides).enumerate() {
            let pool = ctx.labels.negatives(e);
            if pool.is_empty() {
                continue;
            }
            let pos_t = match ctx.labels.positive(e) {
                Some(p) => t.substitute(e, p),
                None => t,
            };
            let pos = match &pos_tape {
                Some(tape) if pos_t == t => tape.clone(),
                _ => enc.forward(pos_t.subject, pos_t.relation, pos_t.object),
            };
            let key = ((ctx.epoch as u64) << 1) | side as u64;
            let mut rng = stream2(cfg.seed, Purpose::LabelSample, key, idx);
            let mut pos_up = 0.0;
            for n in sample_labels(pool, cfg.label_negatives, &mut rng) {
                let nt = t.substitute(e, n);
                let tape = enc.forward(nt.subject, nt.relation, nt.object);
                let h = gamma - pos.score + tape.score;
                if h > 0.0 {
                    loss += w * h;
                    pos_up -= w;
                    enc.backward(&tape, w, grads);
                }
            }
            enc.backward(&pos, pos_up, grads);
        }
    }
    (loss, shortfall)
}

/// Data loss of a list of items, gradients accumulated into `grads`.
pub fn data_loss<T: Real>(enc: &Encoder<'_, T>, ctx: &LossContext<'_>, items: &[BatchItem], grads: &mut SparseGrads<T>) -> (f64, usize) {
    let mut loss = 0.0;
    let mut shortfall = 0;
    for item in items {
        let (l, s) = item_loss(enc, ctx, item, grads);
        loss += l;
        shortfall += s;
    }
    (loss, shortfall)
}

const DENSE: [ParamId; 5] = [ParamId::W1, ParamId::W2, ParamId::W3, ParamId::W4, ParamId::W5];

/// `λ·(Σ‖W_i‖² + Σ‖touched table rows‖²)`: the dense weights always count,
/// table rows only when the batch touched them.
pub fn regularization<T: Real>(params: &ParamSet<T>, grads: &SparseGrads<T>, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for id in ParamId::ALL {
        if DENSE.contains(&id) {
            sum += params.get(id).squared_norm();
        } else {
            for (r, _) in grads.rows(id).iter() {
                sum += params.get(id).row(r).iter().map(|v| v.to_f64().powi(2)).sum::<f64>();
            }
        }
    }
    lambda * sum
}

/// Full objective of a batch: data loss plus regularization, with data-loss
/// gradients left in `grads`.
pub fn batch_loss<T: Real>(enc: &Encoder<'_, T>, ctx: &LossContext<'_>, items: &[BatchItem], grads: &mut SparseGrads<T>) -> BatchLoss {
    let (data, shortfall) = data_loss(enc, ctx, items, grads);
    BatchLoss {
        data,
        regularization: regularization(enc.params, grads, ctx.cfg.regularization),
        shortfall,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hinge_examples() {
        assert!((relational_loss(0.9, &[0.2, 0.95], 1.0) - 1.35).abs() < 1e-12);
        assert_eq!(relational_loss(0.9, &[], 1.0), 0.0);
        assert_eq!(relational_loss(2.5, &[0.5, 1.0], 1.0), 0.0);
        assert!((linkage_hinge(0.8, &[0.1, 0.9], 1.0) - 1.4).abs() < 1e-12);
    }
}
