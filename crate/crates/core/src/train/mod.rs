//! Negative sampling, the relational and linkage hinge losses, the weighted
//! batch objective and the mini-batch Adam loop.

mod check;
mod loss;
mod sampling;

pub use check::{check_batch_gradients, touched_coordinates};
pub use loss::{batch_loss, data_loss, item_loss, linkage_hinge, regularization, relational_loss, BatchItem, BatchLoss, LossContext};
pub use sampling::{sample_labels, CorruptMode, NegativeSampler};

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::context::ContextCache;
use crate::error::{Error, Result};
use crate::model::{Encoder, ModelConfig, ParamId, ParamSet, SparseGrads};
use crate::numerics::{AdamConfig, AdamState};
use crate::rng::{stream, Purpose};
use crate::store::{LinkageLabelSet, MultiGraphStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Corruptions per triple (C).
    pub negatives: usize,
    /// Negative labels per labeled endpoint (Z).
    pub label_negatives: usize,
    pub margin: f64,
    /// Weight b of the relational loss; the linkage loss gets `1 - b`.
    pub task_weight: f64,
    pub regularization: f64,
    pub lr: f64,
    /// Learning rate multiplier applied once per epoch.
    pub lr_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub corrupt_mode: CorruptMode,
    pub retry_budget: usize,
    pub threads: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            negatives: 50,
            label_negatives: 20,
            margin: 1.0,
            task_weight: 0.6,
            regularization: 1e-5,
            lr: 0.01,
            lr_decay: 0.95,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 2000,
            epochs: 5,
            corrupt_mode: CorruptMode::Both,
            retry_budget: 100,
            threads: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if !(0.0..=1.0).contains(&self.task_weight) {
            return bad("task_weight must lie in [0, 1]");
        }
        if !(self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if !(self.lr >= 0.0) || !(self.regularization >= 0.0) || !(self.lr_decay > 0.0) {
            return bad("lr and regularization must be non-negative and lr_decay positive");
        }
        if self.batch_size == 0 || self.threads == 0 || self.retry_budget == 0 {
            return bad("batch_size, threads and retry_budget must be at least 1");
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.powi(epoch as i32)
    }
}

/// Parameters plus optimizer state; `epochs_done` epochs have completed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ParamSet<f32>,
    pub adam: Vec<AdamState<f32>>,
    pub epochs_done: usize,
}

impl TrainState {
    pub fn new(params: ParamSet<f32>) -> Self {
        let adam = params.mats().iter().map(AdamState::for_param).collect();
        TrainState {
            params,
            adam,
            epochs_done: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub batch: usize,
    /// Batch objective divided by the batch size.
    pub loss: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_ms: f64,
    pub shortfall: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub batches: Vec<LossRecord>,
    pub epochs: Vec<EpochSummary>,
}

impl TrainReport {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("epoch,batch,loss,wall_ms\n");
        for r in &self.batches {
            let _ = writeln!(s, "{},{},{},{:.3}", r.epoch, r.batch, r.loss, r.wall_ms);
        }
        s
    }

    pub fn write_trace(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.trace_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Read-only inputs of a training run.
pub struct TrainInputs<'a> {
    /// Training triples; corruptions are filtered against this set.
    pub store: &'a MultiGraphStore,
    pub labels: &'a LinkageLabelSet,
    pub cache: &'a ContextCache,
    pub model: &'a ModelConfig,
    pub train: &'a TrainConfig,
}

fn numerical_failure(epoch: usize, batch: usize, what: &str, params: &ParamSet<f32>) -> Error {
    let norms: Vec<String> = params.norms().iter().map(|(n, v)| format!("{n}={:.3e}", v.sqrt())).collect();
    Error::Numerical(format!("{what} in epoch {epoch}, batch {batch}; parameter norms: {}", norms.join(" ")))
}

/// One batch: loss and merged gradients. With several threads the batch is
/// cut into contiguous chunks whose gradients are merged in chunk order.
fn compute_batch(
    enc: &Encoder<'_, f32>,
    ctx: &LossContext<'_>,
    items: &[BatchItem],
    threads: usize,
    pool: Option<&rayon::ThreadPool>,
) -> (BatchLoss, SparseGrads<f32>) {
    let mut grads = SparseGrads::for_params(enc.params);
    let (data, shortfall) = match pool {
        Some(pool) if threads > 1 && items.len() > 1 => {
            let chunk = items.len().div_ceil(threads);
            let parts: Vec<(f64, usize, SparseGrads<f32>)> = pool.install(|| {
                items
                    .par_chunks(chunk)
                    .map(|c| {
                        let mut g = SparseGrads::for_params(enc.params);
                        let (l, s) = data_loss(enc, ctx, c, &mut g);
                        (l, s, g)
                    })
                    .collect()
            });
            let mut data = 0.0;
            let mut short = 0;
            for (l, s, g) in parts {
                data += l;
                short += s;
                grads.merge(&g);
            }
            (data, short)
        }
        _ => data_loss(enc, ctx, items, &mut grads),
    };
    let loss = BatchLoss {
        data,
        regularization: regularization(enc.params, &grads, ctx.cfg.regularization),
        shortfall,
    };
    (loss, grads)
}

/// Runs epochs `state.epochs_done .. cfg.epochs`. `on_epoch` runs after every
/// completed epoch (checkpointing lives there).
pub fn train(
    inputs: &TrainInputs<'_>,
    state: &mut TrainState,
    mut on_epoch: impl FnMut(&TrainState, &EpochSummary) -> Result<()>,
) -> Result<TrainReport> {
    let cfg = inputs.train;
    cfg.validate()?;
    let sampler = NegativeSampler::new(inputs.store, cfg.retry_budget);
    let items: Vec<BatchItem> = inputs.store.triples().iter().copied().enumerate().collect();
    let pool = if cfg.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let mut report = TrainReport::default();
    for epoch in state.epochs_done..cfg.epochs {
        let started = Instant::now();
        let mut order = items.clone();
        order.shuffle(&mut stream(cfg.seed, Purpose::Shuffle, epoch as u64));
        let adam_cfg = AdamConfig {
            lr: cfg.lr_at(epoch),
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            weight_decay: 2.0 * cfg.regularization,
        };
        let ctx = LossContext {
            sampler: &sampler,
            labels: inputs.labels,
            cfg,
            epoch,
        };
        let mut losses = Vec::new();
        let mut shortfall = 0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let t0 = Instant::now();
            let (loss, grads) = {
                let enc = Encoder::new(&state.params, inputs.cache, inputs.model);
                compute_batch(&enc, &ctx, chunk, cfg.threads, pool.as_ref())
            };
            if !loss.total().is_finite() {
                return Err(numerical_failure(epoch, batch, "non-finite loss", &state.params));
            }
            if !grads.all_finite() {
                return Err(numerical_failure(epoch, batch, "non-finite gradient", &state.params));
            }
            for id in ParamId::ALL {
                let i = id.index();
                state.adam[i].step(state.params.get_mut(id), grads.rows(id).iter(), &adam_cfg);
            }
            if !state.params.all_finite() {
                return Err(numerical_failure(epoch, batch, "non-finite parameters after update", &state.params));
            }
            shortfall += loss.shortfall;
            let per_item = loss.total() / chunk.len() as f64;
            losses.push(per_item);
            report.batches.push(LossRecord {
                epoch,
                batch,
                loss: per_item,
                wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            });
        }
        if shortfall > 0 {
            log::warn!("epoch {epoch}: {shortfall} corruptions abandoned after the retry budget");
        }
        state.epochs_done = epoch + 1;
        let summary = EpochSummary {
            epoch,
            mean_loss: if losses.is_empty() {
                0.0
            } else {
                losses.iter().sum::<f64>() / losses.len() as f64
            },
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            shortfall,
        };
        log::info!("epoch {epoch}: mean batch loss {:.6} ({:.0} ms)", summary.mean_loss, summary.wall_ms);
        report.epochs.push(summary);
        on_epoch(state, &summary)?;
    }
    Ok(report)
}
