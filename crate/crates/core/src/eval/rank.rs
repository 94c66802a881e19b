use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{score_from_z, Encoder};
use crate::numerics::Real;
use crate::store::{EntityId, GraphId, MultiGraphStore, Triple};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankResult {
    pub triple: Triple,
    pub rank: usize,
    pub reciprocal_rank: f64,
}

/// Which endpoint is replaced when ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Object,
    Subject,
}

/// Filtered rank of `t` against every same-graph replacement of one endpoint.
/// Candidates forming a triple of `full` (other than `t`) are dropped and the
/// ground truth takes the worst position in its tie group.
pub fn filtered_rank<T: Real>(enc: &Encoder<'_, T>, full: &MultiGraphStore, t: &Triple, side: Side) -> RankResult {
    let (fixed, truth) = match side {
        Side::Object => (t.subject, t.object),
        Side::Subject => (t.object, t.subject),
    };
    let rel = enc.relation_repr(t.relation);
    let fixed_base = enc.entity_repr(fixed, None);
    let fixed_nbrs = enc.cache.neighbors(fixed);
    let score = |cand: EntityId| -> f64 {
        let other = enc.entity_repr(cand, Some(fixed));
        // the fixed endpoint's neighborhood only changes if it contains the candidate
        let fixed_z = if fixed_nbrs.binary_search(&cand).is_ok() {
            enc.entity_repr(fixed, Some(cand)).z
        } else {
            fixed_base.z.clone()
        };
        match side {
            Side::Object => score_from_z(&fixed_z, &rel.z, &other.z).1,
            Side::Subject => score_from_z(&other.z, &rel.z, &fixed_z).1,
        }
    };
    let truth_score = score(truth);
    let mut better = 0;
    for cand in full.entities_in(t.graph) {
        if cand == truth || cand == fixed {
            continue;
        }
        let known = match side {
            Side::Object => full.contains(fixed, t.relation, cand),
            Side::Subject => full.contains(cand, t.relation, fixed),
        };
        if known {
            continue;
        }
        if score(cand) >= truth_score {
            better += 1;
        }
    }
    let rank = better + 1;
    RankResult {
        triple: *t,
        rank,
        reciprocal_rank: 1.0 / rank as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkMetrics {
    pub hits10: f64,
    pub mrr: f64,
    pub n: usize,
}

impl LinkMetrics {
    pub fn from_ranks(ranks: &[usize]) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::Undefined("link prediction metrics over an empty test set".into()));
        }
        let n = ranks.len();
        let hits = ranks.iter().filter(|&&r| r <= 10).count();
        let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n as f64;
        Ok(LinkMetrics {
            hits10: hits as f64 / n as f64,
            mrr,
            n,
        })
    }
}

/// HITS@10 and MRR per graph (keyed by graph name). Object-side ranking
/// only unless `both_sides`, in which case each triple contributes two ranks.
pub fn link_prediction_metrics<T: Real>(
    enc: &Encoder<'_, T>,
    full: &MultiGraphStore,
    test: &[Triple],
    both_sides: bool,
) -> Result<BTreeMap<String, LinkMetrics>> {
    if test.is_empty() {
        return Err(Error::Undefined("link prediction metrics over an empty test set".into()));
    }
    let ranks: Vec<(GraphId, usize)> = test
        .par_iter()
        .flat_map_iter(|t| {
            let sides: &[Side] = if both_sides { &[Side::Object, Side::Subject] } else { &[Side::Object] };
            sides
                .iter()
                .map(|&s| (t.graph, filtered_rank(enc, full, t, s).rank))
                .collect::<Vec<_>>()
        })
        .collect();
    let mut out = BTreeMap::new();
    for g in full.graphs() {
        let rs: Vec<usize> = ranks.iter().filter(|(rg, _)| *rg == g).map(|&(_, r)| r).collect();
        if !rs.is_empty() {
            out.insert(full.vocab().graphs.name(g.0).to_owned(), LinkMetrics::from_ranks(&rs)?);
        }
    }
    Ok(out)
}
