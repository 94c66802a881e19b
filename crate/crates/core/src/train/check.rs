use std::collections::HashMap;

use super::loss::{data_loss, BatchItem, LossContext};
use crate::context::ContextCache;
use crate::model::{Encoder, ModelConfig, ParamId, ParamSet, SparseGrads};
use crate::numerics::{finite_diff_check, GradCheckConfig, GradCheckReport};

/// Flat indices and values of every coordinate in a touched gradient row.
pub fn touched_coordinates(params: &ParamSet<f64>, grads: &SparseGrads<f64>) -> HashMap<usize, f64> {
    let mut out = HashMap::new();
    for id in ParamId::ALL {
        for (r, row) in grads.rows(id).iter() {
            for (c, &v) in row.iter().enumerate() {
                out.insert(params.flat_index(id, r, c), v);
            }
        }
    }
    out
}

/// Compares the analytic gradient of the batch data loss with central
/// differences. Probes are drawn from touched coordinates, where the
/// gradient is generally nonzero.
pub fn check_batch_gradients(
    params: &ParamSet<f64>,
    cache: &ContextCache,
    model: &ModelConfig,
    ctx: &LossContext<'_>,
    batch: &[BatchItem],
    gc: &GradCheckConfig,
) -> GradCheckReport {
    let mut grads = SparseGrads::for_params(params);
    {
        let enc = Encoder::new(params, cache, model);
        data_loss(&enc, ctx, batch, &mut grads);
    }
    let analytic = touched_coordinates(params, &grads);
    let mut coords: Vec<usize> = analytic.keys().copied().collect();
    coords.sort_unstable();
    let loss = |p: &ParamSet<f64>| {
        let enc = Encoder::new(p, cache, model);
        let mut scratch = SparseGrads::for_params(p);
        data_loss(&enc, ctx, batch, &mut scratch).0
    };
    let mut probe = params.clone();
    finite_diff_check(
        &mut probe,
        |i| analytic.get(&i).copied().unwrap_or(0.0),
        loss,
        Some(&coords),
        gc,
    )
}
