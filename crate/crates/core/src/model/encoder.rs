use super::{Aggregator, ModelConfig, ParamId, ParamSet, SparseGrads};
use crate::context::ContextCache;
use crate::numerics::{affine_into, softmax, Activation, DenseMatrix, Real};
use crate::store::{AttributeRecord, EntityId, RelationId};

/// Record of one context aggregation. `members` are entity ids (neighbors),
/// positions in the entity's attribute list (attributes) or type ids.
#[derive(Debug, Clone, PartialEq)]
pub struct AggTape<T> {
    pub members: Vec<u32>,
    /// Softmax weights, present under attention.
    pub weights: Option<Vec<T>>,
    /// Winning member position per coordinate, present under max aggregation.
    pub argmax: Option<Vec<u32>>,
    pub value: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityTape<T> {
    pub entity: EntityId,
    /// The other endpoint, removed from the neighborhood.
    pub exclude: Option<EntityId>,
    pub atomic: Option<Vec<T>>,
    pub neighbors: Option<AggTape<T>>,
    pub attributes: Option<AggTape<T>>,
    pub pre: Vec<T>,
    pub z: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationTape<T> {
    pub relation: RelationId,
    pub atomic: Vec<T>,
    pub types: Option<AggTape<T>>,
    pub pre: Vec<T>,
    pub z: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTape<T> {
    pub subject: EntityTape<T>,
    pub relation: RelationTape<T>,
    pub object: EntityTape<T>,
    pub logit: f64,
    pub score: f64,
}

fn sigmoid(x: f64) -> f64 {
    Activation::Sigmoid.apply(x)
}

/// `(logit, σ(logit))` with `logit = Σ z^r_i z^s_i z^o_i`.
pub fn score_from_z<T: Real>(zs: &[T], zr: &[T], zo: &[T]) -> (f64, f64) {
    assert!(zs.len() == zr.len() && zr.len() == zo.len(), "score: length mismatch");
    let logit: f64 = zs
        .iter()
        .zip(zr)
        .zip(zo)
        .map(|((&s, &r), &o)| s.to_f64() * r.to_f64() * o.to_f64())
        .sum();
    (logit, sigmoid(logit))
}

enum AggMode<'a> {
    Mean,
    Max,
    Attention(&'a [f64]),
}

/// Streams `n` member vectors through `fill` and aggregates them.
fn aggregate_stream<T: Real>(
    n: usize,
    dim: usize,
    mode: AggMode<'_>,
    mut fill: impl FnMut(usize, &mut [T]),
) -> (Vec<T>, Option<Vec<T>>, Option<Vec<u32>>) {
    if n == 0 {
        return (vec![T::ZERO; dim], None, None);
    }
    let mut buf = vec![T::ZERO; dim];
    match mode {
        AggMode::Mean => {
            let mut acc = vec![0.0f64; dim];
            for p in 0..n {
                fill(p, &mut buf);
                for (a, &b) in acc.iter_mut().zip(&buf) {
                    *a += b.to_f64();
                }
            }
            let inv = n as f64;
            (acc.into_iter().map(|a| T::from_f64(a / inv)).collect(), None, None)
        }
        AggMode::Attention(logits) => {
            let w = softmax(logits);
            let mut acc = vec![0.0f64; dim];
            for (p, &wp) in w.iter().enumerate() {
                fill(p, &mut buf);
                for (a, &b) in acc.iter_mut().zip(&buf) {
                    *a += wp * b.to_f64();
                }
            }
            let weights = w.into_iter().map(T::from_f64).collect();
            (acc.into_iter().map(T::from_f64).collect(), Some(weights), None)
        }
        AggMode::Max => {
            let mut value = vec![T::ZERO; dim];
            let mut argmax = vec![0u32; dim];
            fill(0, &mut value);
            for p in 1..n {
                fill(p, &mut buf);
                for j in 0..dim {
                    // strict comparison keeps the lowest index on ties
                    if buf[j] > value[j] {
                        value[j] = buf[j];
                        argmax[j] = p as u32;
                    }
                }
            }
            (value, None, Some(argmax))
        }
    }
}

/// Aggregates explicit member vectors: softmax-weighted sum when
/// `attention_logits` is given, otherwise mean or elementwise max. An empty
/// member list yields the zero vector of length `dim`.
pub fn aggregate_context<T: Real>(
    members: &[Vec<T>],
    attention_logits: Option<&[T]>,
    aggregator: Aggregator,
    dim: usize,
) -> Vec<T> {
    for m in members {
        assert_eq!(m.len(), dim, "aggregate: member length mismatch");
    }
    let logits: Option<Vec<f64>> = attention_logits.map(|l| l.iter().map(|v| v.to_f64()).collect());
    let mode = match (&logits, aggregator) {
        (Some(l), _) => AggMode::Attention(l),
        (None, Aggregator::Mean) => AggMode::Mean,
        (None, Aggregator::Max) => AggMode::Max,
    };
    aggregate_stream(members.len(), dim, mode, |p, buf| buf.copy_from_slice(&members[p])).0
}

/// Read-only view of parameters, contexts and configuration that scores
/// triples and backpropagates through them.
#[derive(Clone, Copy)]
pub struct Encoder<'a, T> {
    pub params: &'a ParamSet<T>,
    pub cache: &'a ContextCache,
    pub cfg: &'a ModelConfig,
}

impl<'a, T: Real> Encoder<'a, T> {
    pub fn new(params: &'a ParamSet<T>, cache: &'a ContextCache, cfg: &'a ModelConfig) -> Self {
        Encoder { params, cache, cfg }
    }

    fn f(&self) -> Activation {
        self.cfg.atomic_activation
    }

    fn attention(&self) -> bool {
        self.cfg.flags().use_attention
    }

    fn atomic_into(&self, id: ParamId, row: usize, out: &mut [T]) {
        let f = self.f();
        for (o, &x) in out.iter_mut().zip(self.params.get(id).row(row)) {
            *o = f.apply(x);
        }
    }

    /// `f` applied to one embedding row.
    pub fn atomic(&self, id: ParamId, row: usize) -> Vec<T> {
        let mut out = vec![T::ZERO; self.params.get(id).cols()];
        self.atomic_into(id, row, &mut out);
        out
    }

    fn attribute_pre_into(&self, rec: &AttributeRecord, out: &mut [T]) {
        let key = self.params.get(ParamId::AttrKey).row(rec.key.index());
        let val = self.params.get(ParamId::AttrVal);
        let mut acc: Vec<f64> = vec![0.0; key.len()];
        for tok in &rec.value_tokens {
            for (a, &v) in acc.iter_mut().zip(val.row(tok.index())) {
                *a += v.to_f64();
            }
        }
        let inv = rec.value_tokens.len().max(1) as f64;
        for ((o, a), &k) in out.iter_mut().zip(acc).zip(key) {
            *o = T::from_f64(k.to_f64() + a / inv);
        }
    }

    /// `f(key row + mean of the value tokens' rows)`.
    pub fn attribute_embed(&self, rec: &AttributeRecord) -> Vec<T> {
        let mut out = vec![T::ZERO; self.cfg.attr_dim];
        self.attribute_pre_into(rec, &mut out);
        let f = self.f();
        out.iter_mut().for_each(|x| *x = f.apply(*x));
        out
    }

    fn theta_logits(&self, id: ParamId, members: impl Iterator<Item = usize>) -> Vec<f64> {
        let theta = self.params.get(id);
        members.map(|m| theta[(m, 0)].to_f64()).collect()
    }

    /// Aggregate of the atomic embeddings of `N(e) \ {exclude}`.
    pub fn neighborhood_context(&self, e: EntityId, exclude: Option<EntityId>) -> AggTape<T> {
        let members: Vec<u32> = self
            .cache
            .neighbors(e)
            .iter()
            .filter(|&&m| Some(m) != exclude)
            .map(|m| m.0)
            .collect();
        let logits;
        let mode = if self.attention() && !members.is_empty() {
            logits = self.theta_logits(ParamId::ThetaNeighbor, members.iter().map(|&m| m as usize));
            AggMode::Attention(&logits)
        } else {
            AggMode::Mean
        };
        let (value, weights, argmax) = aggregate_stream(members.len(), self.cfg.entity_dim, mode, |p, buf| {
            self.atomic_into(ParamId::Entity, members[p] as usize, buf)
        });
        AggTape {
            members,
            weights,
            argmax,
            value,
        }
    }

    /// Aggregate of the entity's attribute embeddings.
    pub fn attribute_context(&self, e: EntityId) -> AggTape<T> {
        let records = self.cache.attributes(e);
        let logits;
        let mode = if self.attention() && !records.is_empty() {
            logits = self.theta_logits(ParamId::ThetaAttrKey, records.iter().map(|r| r.key.index()));
            AggMode::Attention(&logits)
        } else {
            match self.cfg.attr_aggregator {
                Aggregator::Max => AggMode::Max,
                Aggregator::Mean => AggMode::Mean,
            }
        };
        let f = self.f();
        let (value, weights, argmax) = aggregate_stream(records.len(), self.cfg.attr_dim, mode, |p, buf| {
            self.attribute_pre_into(&records[p], buf);
            buf.iter_mut().for_each(|x| *x = f.apply(*x));
        });
        AggTape {
            members: (0..records.len() as u32).collect(),
            weights,
            argmax,
            value,
        }
    }

    /// Aggregate of the atomic embeddings of the types seen with `r`.
    pub fn type_context(&self, r: RelationId) -> AggTape<T> {
        let members: Vec<u32> = self.cache.relation_types(r).iter().map(|t| t.0).collect();
        let logits;
        let mode = if self.attention() && !members.is_empty() {
            logits = self.theta_logits(ParamId::ThetaType, members.iter().map(|&m| m as usize));
            AggMode::Attention(&logits)
        } else {
            AggMode::Mean
        };
        let (value, weights, argmax) = aggregate_stream(members.len(), self.cfg.type_dim, mode, |p, buf| {
            self.atomic_into(ParamId::Type, members[p] as usize, buf)
        });
        AggTape {
            members,
            weights,
            argmax,
            value,
        }
    }

    /// `σ(W1 v + W2 N + W3 A)` over the terms that are present.
    pub(crate) fn combine_entity(&self, atomic: Option<&[T]>, nbr: Option<&[T]>, attr: Option<&[T]>) -> (Vec<T>, Vec<T>) {
        let p = self.params;
        let mut blocks: Vec<(&DenseMatrix<T>, &[T])> = Vec::with_capacity(3);
        if let Some(v) = atomic {
            blocks.push((p.get(ParamId::W1), v));
        }
        if let Some(n) = nbr {
            blocks.push((p.get(ParamId::W2), n));
        }
        if let Some(a) = attr {
            blocks.push((p.get(ParamId::W3), a));
        }
        let mut pre = vec![T::ZERO; self.cfg.entity_dim];
        affine_into(&blocks, None, &mut pre);
        let z = self.cfg.repr_activation.apply_slice(&pre);
        (pre, z)
    }

    pub fn entity_repr(&self, e: EntityId, exclude: Option<EntityId>) -> EntityTape<T> {
        let flags = self.cfg.flags();
        let atomic = flags.use_entity_embed.then(|| self.atomic(ParamId::Entity, e.index()));
        let neighbors = flags.use_nhbrs.then(|| self.neighborhood_context(e, exclude));
        let attributes = flags.use_attrs.then(|| self.attribute_context(e));
        let (pre, z) = self.combine_entity(
            atomic.as_deref(),
            neighbors.as_ref().map(|t| t.value.as_slice()),
            attributes.as_ref().map(|t| t.value.as_slice()),
        );
        EntityTape {
            entity: e,
            exclude,
            atomic,
            neighbors,
            attributes,
            pre,
            z,
        }
    }

    pub fn relation_repr(&self, r: RelationId) -> RelationTape<T> {
        let p = self.params;
        let atomic = self.atomic(ParamId::Relation, r.index());
        let types = self.cfg.flags().use_types.then(|| self.type_context(r));
        let mut blocks: Vec<(&DenseMatrix<T>, &[T])> = vec![(p.get(ParamId::W4), &atomic)];
        if let Some(t) = &types {
            blocks.push((p.get(ParamId::W5), &t.value));
        }
        let mut pre = vec![T::ZERO; self.cfg.entity_dim];
        affine_into(&blocks, None, &mut pre);
        let z = self.cfg.repr_activation.apply_slice(&pre);
        RelationTape {
            relation: r,
            atomic,
            types,
            pre,
            z,
        }
    }

    /// Full forward pass. Each endpoint's neighborhood excludes the other.
    pub fn forward(&self, s: EntityId, r: RelationId, o: EntityId) -> ScoreTape<T> {
        let subject = self.entity_repr(s, Some(o));
        let object = self.entity_repr(o, Some(s));
        let relation = self.relation_repr(r);
        let (logit, score) = score_from_z(&subject.z, &relation.z, &object.z);
        ScoreTape {
            subject,
            relation,
            object,
            logit,
            score,
        }
    }

    pub fn score(&self, s: EntityId, r: RelationId, o: EntityId) -> f64 {
        self.forward(s, r, o).score
    }

    /// Accumulates `upstream · ∂score/∂Ω` into `grads`.
    pub fn backward(&self, tape: &ScoreTape<T>, upstream: f64, grads: &mut SparseGrads<T>) {
        if upstream == 0.0 {
            return;
        }
        let delta = upstream * tape.score * (1.0 - tape.score);
        let (zs, zr, zo) = (&tape.subject.z, &tape.relation.z, &tape.object.z);
        let d = zs.len();
        let mut dzs = vec![T::ZERO; d];
        let mut dzr = vec![T::ZERO; d];
        let mut dzo = vec![T::ZERO; d];
        for i in 0..d {
            let (s, r, o) = (zs[i].to_f64(), zr[i].to_f64(), zo[i].to_f64());
            dzs[i] = T::from_f64(delta * r * o);
            dzr[i] = T::from_f64(delta * s * o);
            dzo[i] = T::from_f64(delta * s * r);
        }
        self.backward_entity(&tape.subject, &dzs, grads);
        self.backward_entity(&tape.object, &dzo, grads);
        self.backward_relation(&tape.relation, &dzr, grads);
    }

    fn repr_grad(&self, pre: &[T], z: &[T], dz: &[T]) -> Vec<T> {
        let act = self.cfg.repr_activation;
        pre.iter()
            .zip(z)
            .zip(dz)
            .map(|((&x, &y), &g)| g * act.derivative(x, y))
            .collect()
    }

    /// `dW += dpre xᵀ` and returns `Wᵀ dpre`.
    fn linear_backward(&self, w: ParamId, dpre: &[T], x: &[T], grads: &mut SparseGrads<T>) -> Vec<T> {
        for (i, &g) in dpre.iter().enumerate() {
            if g == T::ZERO {
                continue;
            }
            for (a, &xj) in grads.row_mut(w, i).iter_mut().zip(x) {
                *a += g * xj;
            }
        }
        let mut dx = vec![T::ZERO; x.len()];
        self.params.get(w).transpose_mul_add(dpre, &mut dx);
        dx
    }

    fn atomic_backward(&self, id: ParamId, row: usize, dv: &[T], grads: &mut SparseGrads<T>) {
        let f = self.f();
        let x = self.params.get(id).row(row);
        let g = grads.row_mut(id, row);
        for ((a, &xi), &d) in g.iter_mut().zip(x).zip(dv) {
            *a += d * f.derivative(xi, f.apply(xi));
        }
    }

    fn attribute_backward(&self, rec: &AttributeRecord, da: &[T], grads: &mut SparseGrads<T>) {
        let f = self.f();
        let mut pre = vec![T::ZERO; da.len()];
        self.attribute_pre_into(rec, &mut pre);
        let dpre: Vec<T> = pre.iter().zip(da).map(|(&x, &g)| g * f.derivative(x, f.apply(x))).collect();
        for (a, &g) in grads.row_mut(ParamId::AttrKey, rec.key.index()).iter_mut().zip(&dpre) {
            *a += g;
        }
        let inv = T::from_f64(1.0 / rec.value_tokens.len().max(1) as f64);
        for tok in &rec.value_tokens {
            for (a, &g) in grads.row_mut(ParamId::AttrVal, tok.index()).iter_mut().zip(&dpre) {
                *a += g * inv;
            }
        }
    }

    /// Splits the gradient of an aggregate over its members. `member` writes a
    /// member's vector into the buffer (needed for attention only); `sink`
    /// receives each member's gradient; attention scalars are updated here.
    fn aggregate_backward(
        &self,
        tape: &AggTape<T>,
        dval: &[T],
        theta: ParamId,
        theta_row: impl Fn(usize) -> usize,
        mut member: impl FnMut(usize, &mut [T]),
        mut sink: impl FnMut(usize, &[T], &mut SparseGrads<T>),
        grads: &mut SparseGrads<T>,
    ) {
        let n = tape.members.len();
        if n == 0 {
            return;
        }
        let dim = dval.len();
        let mut g = vec![T::ZERO; dim];
        if let Some(w) = &tape.weights {
            let mut buf = vec![T::ZERO; dim];
            let mut dw = Vec::with_capacity(n);
            for p in 0..n {
                member(p, &mut buf);
                dw.push(buf.iter().zip(dval).map(|(&m, &d)| m.to_f64() * d.to_f64()).sum::<f64>());
            }
            let avg: f64 = w.iter().zip(&dw).map(|(&wp, &d)| wp.to_f64() * d).sum();
            for p in 0..n {
                let wp = w[p];
                for (gj, &dj) in g.iter_mut().zip(dval) {
                    *gj = wp * dj;
                }
                sink(p, &g, grads);
                let dtheta = wp.to_f64() * (dw[p] - avg);
                grads.row_mut(theta, theta_row(p))[0] += T::from_f64(dtheta);
            }
        } else if let Some(argmax) = &tape.argmax {
            for p in 0..n {
                let mut any = false;
                for j in 0..dim {
                    g[j] = if argmax[j] as usize == p {
                        any = true;
                        dval[j]
                    } else {
                        T::ZERO
                    };
                }
                if any {
                    sink(p, &g, grads);
                }
            }
        } else {
            let inv = T::from_f64(1.0 / n as f64);
            for (gj, &dj) in g.iter_mut().zip(dval) {
                *gj = dj * inv;
            }
            for p in 0..n {
                sink(p, &g, grads);
            }
        }
    }

    fn backward_entity(&self, t: &EntityTape<T>, dz: &[T], grads: &mut SparseGrads<T>) {
        let dpre = self.repr_grad(&t.pre, &t.z, dz);
        if let Some(v) = &t.atomic {
            let dv = self.linear_backward(ParamId::W1, &dpre, v, grads);
            self.atomic_backward(ParamId::Entity, t.entity.index(), &dv, grads);
        }
        if let Some(nt) = &t.neighbors {
            let dn = self.linear_backward(ParamId::W2, &dpre, &nt.value, grads);
            self.aggregate_backward(
                nt,
                &dn,
                ParamId::ThetaNeighbor,
                |p| nt.members[p] as usize,
                |p, buf| self.atomic_into(ParamId::Entity, nt.members[p] as usize, buf),
                |p, g, grads| self.atomic_backward(ParamId::Entity, nt.members[p] as usize, g, grads),
                grads,
            );
        }
        if let Some(at) = &t.attributes {
            let da = self.linear_backward(ParamId::W3, &dpre, &at.value, grads);
            let records = self.cache.attributes(t.entity);
            let f = self.f();
            self.aggregate_backward(
                at,
                &da,
                ParamId::ThetaAttrKey,
                |p| records[p].key.index(),
                |p, buf| {
                    self.attribute_pre_into(&records[p], buf);
                    buf.iter_mut().for_each(|x| *x = f.apply(*x));
                },
                |p, g, grads| self.attribute_backward(&records[p], g, grads),
                grads,
            );
        }
    }

    fn backward_relation(&self, t: &RelationTape<T>, dz: &[T], grads: &mut SparseGrads<T>) {
        let dpre = self.repr_grad(&t.pre, &t.z, dz);
        let dv = self.linear_backward(ParamId::W4, &dpre, &t.atomic, grads);
        self.atomic_backward(ParamId::Relation, t.relation.index(), &dv, grads);
        if let Some(tt) = &t.types {
            let dt = self.linear_backward(ParamId::W5, &dpre, &tt.value, grads);
            self.aggregate_backward(
                tt,
                &dt,
                ParamId::ThetaType,
                |p| tt.members[p] as usize,
                |p, buf| self.atomic_into(ParamId::Type, tt.members[p] as usize, buf),
                |p, g, grads| self.atomic_backward(ParamId::Type, tt.members[p] as usize, g, grads),
                grads,
            );
        }
    }
}
