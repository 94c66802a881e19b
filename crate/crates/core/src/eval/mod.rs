//! Filtered link prediction, substitution-based linkage scores, AUPRC and the
//! second-stage pair classifier.

mod classifier;
mod linkage;
mod rank;

pub use classifier::{pair_features, ClassifierConfig, PairClassifier};
pub use linkage::{auprc, auprc_from_q, linkage_score, mean_abs_diff, verdicts_csv, LinkageVerdict, VerdictRow, VERDICT_HEADER};
pub use rank::{filtered_rank, link_prediction_metrics, LinkMetrics, RankResult, Side};

use rayon::prelude::*;

use crate::error::Result;
use crate::model::Encoder;
use crate::numerics::Real;
use crate::store::{LabeledPair, MultiGraphStore};

/// Labeled pairs scored by substitution, with their AUPRC.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedLinkage {
    pub auprc: f64,
    /// Pairs that received a q-score.
    pub n_pairs: usize,
    /// `None` where neither entity occurs in a triple.
    pub verdicts: Vec<(LabeledPair, Option<LinkageVerdict>)>,
}

pub fn supervised_linkage<T: Real>(enc: &Encoder<'_, T>, store: &MultiGraphStore, pairs: &[LabeledPair]) -> Result<SupervisedLinkage> {
    let results: Vec<Result<Option<LinkageVerdict>>> = pairs
        .par_iter()
        .map(|p| match linkage_score(enc, store, p.a, p.b) {
            Ok(v) => Ok(Some(v)),
            Err(crate::Error::Undefined(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut verdicts = Vec::with_capacity(pairs.len());
    for (p, r) in pairs.iter().zip(results) {
        verdicts.push((*p, r?));
    }
    let scored: Vec<(f64, bool)> = verdicts
        .iter()
        .filter_map(|(p, v)| v.map(|v| (v.q, p.positive)))
        .collect();
    Ok(SupervisedLinkage {
        auprc: auprc_from_q(&scored)?,
        n_pairs: scored.len(),
        verdicts,
    })
}

/// Final entity representations of both endpoints, as classifier features.
pub fn pair_feature_rows<T: Real>(enc: &Encoder<'_, T>, pairs: &[LabeledPair]) -> Vec<Vec<f64>> {
    pairs
        .par_iter()
        .map(|p| pair_features(&enc.entity_repr(p.a, None).z, &enc.entity_repr(p.b, None).z))
        .collect()
}

/// Trains the pair classifier on `train` and returns the AUPRC of its
/// probabilities on `test`.
pub fn unsupervised_linkage<T: Real>(
    enc: &Encoder<'_, T>,
    train: &[LabeledPair],
    test: &[LabeledPair],
    cfg: &ClassifierConfig,
) -> Result<f64> {
    let xs = pair_feature_rows(enc, train);
    let ys: Vec<bool> = train.iter().map(|p| p.positive).collect();
    let model = PairClassifier::train(&xs, &ys, cfg)?;
    let scored: Vec<(f64, bool)> = pair_feature_rows(enc, test)
        .iter()
        .zip(test)
        .map(|(x, p)| (model.predict(x), p.positive))
        .collect();
    auprc(&scored)
}
