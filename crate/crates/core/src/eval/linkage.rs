use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::Encoder;
use crate::numerics::Real;
use crate::store::{EntityId, MultiGraphStore, Triple};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkageVerdict {
    pub x: EntityId,
    pub y: EntityId,
    /// Mean absolute score change under the swap; lower means more alike.
    pub q: f64,
    /// Number of triples compared.
    pub k: usize,
}

fn swap(t: &Triple, x: EntityId, y: EntityId) -> Triple {
    let s = |e: EntityId| {
        if e == x {
            y
        } else if e == y {
            x
        } else {
            e
        }
    };
    Triple {
        subject: s(t.subject),
        object: s(t.object),
        ..*t
    }
}

/// Substitution score: every triple of `store` mentioning `x` or `y` is
/// scored as is and with `x` and `y` exchanged; `q` is the mean absolute
/// difference.
pub fn linkage_score<T: Real>(enc: &Encoder<'_, T>, store: &MultiGraphStore, x: EntityId, y: EntityId) -> Result<LinkageVerdict> {
    if store.graph_of(x) == store.graph_of(y) {
        return Err(Error::Validation(format!(
            "linkage pair ({}, {}) lies within one graph",
            store.vocab().entity_name(x),
            store.vocab().entity_name(y)
        )));
    }
    let mut idx: Vec<u32> = store.incident(x).iter().chain(store.incident(y)).copied().collect();
    idx.sort_unstable();
    idx.dedup();
    if idx.is_empty() {
        return Err(Error::Undefined(format!(
            "neither {} nor {} occurs in any triple",
            store.vocab().entity_name(x),
            store.vocab().entity_name(y)
        )));
    }
    let mut orig = Vec::with_capacity(idx.len());
    let mut repl = Vec::with_capacity(idx.len());
    for &i in &idx {
        let t = store.triples()[i as usize];
        let u = swap(&t, x, y);
        orig.push(enc.score(t.subject, t.relation, t.object));
        repl.push(enc.score(u.subject, u.relation, u.object));
    }
    Ok(LinkageVerdict {
        x,
        y,
        q: mean_abs_diff(&orig, &repl),
        k: idx.len(),
    })
}

/// `(1/k) Σ |orig_i - repl_i|`.
pub fn mean_abs_diff(orig: &[f64], repl: &[f64]) -> f64 {
    assert_eq!(orig.len(), repl.len(), "score lists differ in length");
    assert!(!orig.is_empty(), "mean of an empty score list");
    orig.iter().zip(repl).map(|(a, b)| (a - b).abs()).sum::<f64>() / orig.len() as f64
}

/// Average precision: pairs sorted by similarity (descending), ties grouped,
/// precision integrated over recall steps.
pub fn auprc(scored: &[(f64, bool)]) -> Result<f64> {
    if scored.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::Validation("non-finite similarity in AUPRC input".into()));
    }
    let positives = scored.iter().filter(|p| p.1).count();
    if positives == 0 || positives == scored.len() {
        return Err(Error::Undefined(
            "AUPRC needs at least one positive and one negative pair".into(),
        ));
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut area = 0.0;
    let (mut tp, mut seen, mut recall_prev) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            tp += sorted[j].1 as usize;
            seen += 1;
            j += 1;
        }
        let recall = tp as f64 / positives as f64;
        area += (recall - recall_prev) * (tp as f64 / seen as f64);
        recall_prev = recall;
        i = j;
    }
    Ok(area)
}

/// AUPRC over q-scores, using `-q` as the similarity.
pub fn auprc_from_q(verdicts: &[(f64, bool)]) -> Result<f64> {
    let sims: Vec<(f64, bool)> = verdicts.iter().map(|&(q, l)| (-q, l)).collect();
    auprc(&sims)
}

/// One row of the verdict CSV. `q` is absent when the pair could not be scored.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictRow {
    pub x: String,
    pub y: String,
    pub q: Option<f64>,
    pub label: Option<bool>,
}

pub const VERDICT_HEADER: &str = "e_x,e_y,q,label";

/// `e_x,e_y,q,label`; unscored pairs leave `q` empty, unlabeled pairs `label`.
pub fn verdicts_csv(rows: &[VerdictRow]) -> String {
    let mut s = String::from(VERDICT_HEADER);
    s.push('\n');
    for r in rows {
        let q = r.q.map(|q| format!("{q:.17e}")).unwrap_or_default();
        let l = r.label.map(|l| if l { "1" } else { "0" }).unwrap_or("");
        let _ = writeln!(s, "{},{},{},{}", r.x, r.y, q, l);
    }
    s
}
