use proptest::prelude::*;

use super::*;
use crate::context::ContextCache;
use crate::numerics::{finite_diff_check, DenseMatrix, GradCheckConfig};
use crate::store::{AttrKeyId, AttributeRecord, EntityId, LoadOptions, MultiGraphStore, RelationId, StoreBuilder, TokenId, TypeId};
use crate::testkit::RandomInstance;

/// X: a-b, a-c, b-c (relation r0), c-d (r1); all four in graph X.
fn tiny_store() -> MultiGraphStore {
    let mut b = StoreBuilder::new(LoadOptions::default());
    b.add_triple("X", "a", "r0", "b").unwrap();
    b.add_triple("X", "a", "r0", "c").unwrap();
    b.add_triple("X", "b", "r0", "c").unwrap();
    b.add_triple("X", "c", "r1", "d").unwrap();
    b.build().unwrap().0
}

fn cfg(d: usize, variant: Variant) -> ModelConfig {
    ModelConfig {
        entity_dim: d,
        relation_dim: d,
        type_dim: d,
        attr_dim: d,
        variant,
        atomic_activation: Activation::Identity,
        repr_activation: Activation::Identity,
        attr_aggregator: Aggregator::Max,
    }
}

fn sizes(entities: usize, relations: usize, types: usize, keys: usize, tokens: usize) -> VocabSizes {
    VocabSizes {
        entities,
        relations,
        types,
        attr_keys: keys,
        tokens,
    }
}

fn set_row(p: &mut ParamSet<f64>, id: ParamId, row: usize, vals: &[f64]) {
    p.get_mut(id).row_mut(row).copy_from_slice(vals);
}

fn record(e: u32, key: u32, tokens: &[u32]) -> AttributeRecord {
    AttributeRecord {
        entity: EntityId(e),
        key: AttrKeyId(key),
        value_tokens: tokens.iter().map(|&t| TokenId(t)).collect(),
        value: String::new(),
    }
}

#[test]
fn atomic_embedding_examples() {
    let mut c = cfg(2, Variant::EmbedOnly);
    let mut p = ParamSet::<f64>::zeros(&c, &sizes(2, 1, 1, 1, 1));
    set_row(&mut p, ParamId::Entity, 0, &[-1.0, 2.0]);
    set_row(&mut p, ParamId::Entity, 1, &[0.5, -0.3]);
    let cache = ContextCache::empty(2, 1);
    assert_eq!(Encoder::new(&p, &cache, &c).atomic(ParamId::Entity, 0), vec![-1.0, 2.0]);
    c.atomic_activation = Activation::Relu;
    let enc = Encoder::new(&p, &cache, &c);
    assert_eq!(enc.atomic(ParamId::Entity, 0), vec![0.0, 2.0]);
    assert_eq!(enc.atomic(ParamId::Entity, 1), vec![0.5, 0.0]);
}

#[test]
fn attribute_embedding_examples() {
    let mut c = cfg(2, Variant::EmbedAttr);
    c.atomic_activation = Activation::Relu;
    let mut p = ParamSet::<f64>::zeros(&c, &sizes(1, 1, 1, 2, 3));
    let cache = ContextCache::empty(1, 1);
    assert_eq!(Encoder::new(&p, &cache, &c).attribute_embed(&record(0, 0, &[1, 2])), vec![0.0, 0.0]);

    set_row(&mut p, ParamId::AttrKey, 1, &[0.25, -1.0]);
    set_row(&mut p, ParamId::AttrVal, 1, &[1.0, 0.5]);
    assert_eq!(Encoder::new(&p, &cache, &c).attribute_embed(&record(0, 1, &[1])), vec![1.25, 0.0]);

    c.atomic_activation = Activation::Identity;
    set_row(&mut p, ParamId::AttrVal, 1, &[1.0, 0.0]);
    set_row(&mut p, ParamId::AttrVal, 2, &[0.0, 1.0]);
    assert_eq!(Encoder::new(&p, &cache, &c).attribute_embed(&record(0, 0, &[1, 2])), vec![0.5, 0.5]);
}

#[test]
fn aggregator_examples() {
    let m = vec![vec![2.0f64, 0.0], vec![0.0, 2.0]];
    assert_eq!(aggregate_context(&m, None, Aggregator::Mean, 2), vec![1.0, 1.0]);
    assert_eq!(aggregate_context(&m, None, Aggregator::Max, 2), vec![2.0, 2.0]);
    let m3 = vec![vec![3.0f64, 0.0], vec![0.0, 3.0]];
    let v = aggregate_context(&m3, Some(&[2f64.ln(), 0.0]), Aggregator::Mean, 2);
    assert!((v[0] - 2.0).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
    assert_eq!(aggregate_context::<f64>(&[], None, Aggregator::Max, 3), vec![0.0; 3]);
}

#[test]
fn neighborhood_context_examples() {
    let store = tiny_store();
    let c = cfg(2, Variant::EmbedNhbr);
    let mut p = ParamSet::<f64>::zeros(&c, &VocabSizes::of(store.vocab()));
    let (a, b, cc, d) = (EntityId(0), EntityId(1), EntityId(2), EntityId(3));
    set_row(&mut p, ParamId::Entity, 1, &[1.0, 1.0]);
    set_row(&mut p, ParamId::Entity, 2, &[3.0, -1.0]);
    set_row(&mut p, ParamId::Entity, 3, &[9.0, 9.0]);
    let mut cache = ContextCache::empty(4, 2);
    cache.set_neighbors(a, vec![b, cc, d]);
    cache.set_neighbors(d, vec![cc]);
    let enc = Encoder::new(&p, &cache, &c);
    assert_eq!(enc.neighborhood_context(a, Some(d)).value, vec![2.0, 0.0]);
    assert_eq!(enc.neighborhood_context(d, Some(cc)).value, vec![0.0, 0.0]);
    assert_eq!(enc.neighborhood_context(b, None).value, vec![0.0, 0.0]);
}

#[test]
fn attribute_context_examples() {
    let mut c = cfg(2, Variant::EmbedAttr);
    let mut p = ParamSet::<f64>::zeros(&c, &sizes(2, 1, 1, 2, 1));
    set_row(&mut p, ParamId::AttrKey, 0, &[1.0, 4.0]);
    set_row(&mut p, ParamId::AttrKey, 1, &[3.0, 2.0]);
    let mut cache = ContextCache::empty(2, 1);
    cache.set_attributes(EntityId(0), vec![record(0, 0, &[0]), record(0, 1, &[0])]);
    assert_eq!(Encoder::new(&p, &cache, &c).attribute_context(EntityId(0)).value, vec![3.0, 4.0]);
    assert_eq!(Encoder::new(&p, &cache, &c).attribute_context(EntityId(1)).value, vec![0.0, 0.0]);
    c.attr_aggregator = Aggregator::Mean;
    assert_eq!(Encoder::new(&p, &cache, &c).attribute_context(EntityId(0)).value, vec![2.0, 3.0]);
}

#[test]
fn type_context_examples() {
    let c = cfg(2, Variant::EmbedAll);
    let mut p = ParamSet::<f64>::zeros(&c, &sizes(2, 3, 2, 1, 1));
    set_row(&mut p, ParamId::Type, 0, &[2.0, 0.0]);
    set_row(&mut p, ParamId::Type, 1, &[0.0, 4.0]);
    let cache = ContextCache::from_parts(
        vec![Vec::new(); 2],
        vec![Vec::new(); 2],
        vec![vec![TypeId(1)], vec![TypeId(0), TypeId(1)], Vec::new()],
    );
    let enc = Encoder::new(&p, &cache, &c);
    assert_eq!(enc.type_context(RelationId(0)).value, vec![0.0, 4.0]);
    assert_eq!(enc.type_context(RelationId(1)).value, vec![1.0, 2.0]);
    assert_eq!(enc.type_context(RelationId(2)).value, vec![0.0, 0.0]);
}

#[test]
fn representation_examples() {
    let mut c = cfg(2, Variant::EmbedOnly);
    c.repr_activation = Activation::Tanh;
    let mut p = ParamSet::<f64>::zeros(&c, &sizes(2, 1, 1, 1, 1));
    let cache = ContextCache::empty(2, 1);
    let z = Encoder::new(&p, &cache, &c).entity_repr(EntityId(0), None).z;
    assert_eq!(z, vec![0.0, 0.0]);

    *p.get_mut(ParamId::W1) = DenseMatrix::identity(2);
    set_row(&mut p, ParamId::Entity, 0, &[0.0, 1.0]);
    let z = Encoder::new(&p, &cache, &c).entity_repr(EntityId(0), None).z;
    assert_eq!(z[0], 0.0);
    assert!((z[1] - 0.7616).abs() < 1e-4);

    // embed-only: exactly σ(W1 v) even when contexts exist
    let mut full = ContextCache::empty(2, 1);
    full.set_neighbors(EntityId(0), vec![EntityId(1)]);
    full.set_attributes(EntityId(0), vec![record(0, 0, &[0])]);
    set_row(&mut p, ParamId::Entity, 1, &[5.0, 5.0]);
    let z2 = Encoder::new(&p, &full, &c).entity_repr(EntityId(0), None).z;
    assert_eq!(z2, z);
}

#[test]
fn score_examples() {
    let (l, s) = crate::model::score_from_z(&[1.0f64, 1.0], &[0.0, 0.0], &[2.0, 3.0]);
    assert_eq!((l, s), (0.0, 0.5));
    let (_, s) = crate::model::score_from_z(&[1.0f64, 1.0], &[1.0, 0.0], &[2.0, 3.0]);
    assert!((s - 0.8808).abs() < 1e-4);
    let (_, s2) = crate::model::score_from_z(&[2.0f64, 3.0], &[1.0, 0.0], &[1.0, 1.0]);
    assert_eq!(s, s2);
}

#[test]
fn zero_upstream_gives_no_gradient() {
    let inst = RandomInstance::default().build();
    let c = cfg(4, Variant::EmbedAllAttention);
    let p = ParamSet::<f64>::init(&c, &VocabSizes::of(inst.store.vocab()), 1);
    let enc = Encoder::new(&p, &inst.cache, &c);
    let t = inst.store.triples()[0];
    let tape = enc.forward(t.subject, t.relation, t.object);
    let mut g = SparseGrads::for_params(&p);
    enc.backward(&tape, 0.0, &mut g);
    assert!(g.is_empty());
}

#[test]
fn scalar_chain_rule_matches_hand_derivation() {
    let store = tiny_store();
    let mut c = cfg(1, Variant::EmbedOnly);
    c.atomic_activation = Activation::Relu;
    c.repr_activation = Activation::Tanh;
    let mut p = ParamSet::<f64>::zeros(&c, &VocabSizes::of(store.vocab()));
    let (es, eo, er, w1, w4) = (0.7, 0.4, 0.9, 1.3, -0.8);
    set_row(&mut p, ParamId::Entity, 0, &[es]);
    set_row(&mut p, ParamId::Entity, 1, &[eo]);
    set_row(&mut p, ParamId::Relation, 0, &[er]);
    p.get_mut(ParamId::W1)[(0, 0)] = w1;
    p.get_mut(ParamId::W4)[(0, 0)] = w4;
    let cache = ContextCache::empty(4, 2);
    let enc = Encoder::new(&p, &cache, &c);
    let tape = enc.forward(EntityId(0), RelationId(0), EntityId(1));
    let mut g = SparseGrads::for_params(&p);
    enc.backward(&tape, 1.0, &mut g);

    let (zs, zo, zr) = ((w1 * es).tanh(), (w1 * eo).tanh(), (w4 * er).tanh());
    let gs = 1.0 / (1.0 + (-(zs * zr * zo)).exp());
    let k = gs * (1.0 - gs);
    assert!((tape.score - gs).abs() < 1e-15);
    let d_es = k * zr * zo * (1.0 - zs * zs) * w1;
    let d_eo = k * zr * zs * (1.0 - zo * zo) * w1;
    let d_er = k * zs * zo * (1.0 - zr * zr) * w4;
    let d_w1 = k * zr * (zo * (1.0 - zs * zs) * es + zs * (1.0 - zo * zo) * eo);
    let d_w4 = k * zs * zo * (1.0 - zr * zr) * er;
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12 * b.abs().max(1.0);
    assert!(close(g.get(ParamId::Entity, 0, 0), d_es));
    assert!(close(g.get(ParamId::Entity, 1, 0), d_eo));
    assert!(close(g.get(ParamId::Relation, 0, 0), d_er));
    assert!(close(g.get(ParamId::W1, 0, 0), d_w1));
    assert!(close(g.get(ParamId::W4, 0, 0), d_w4));
    assert!(g.rows(ParamId::W2).n_rows() == 0 && g.rows(ParamId::AttrKey).n_rows() == 0);
}

/// Flat indices of every coordinate in a touched row.
fn touched_coords(p: &ParamSet<f64>, g: &SparseGrads<f64>) -> Vec<usize> {
    let mut out = Vec::new();
    for id in ParamId::ALL {
        for (r, row) in g.rows(id).iter() {
            for c in 0..row.len() {
                out.push(p.flat_index(id, r, c));
            }
        }
    }
    out
}

fn check_variant(variant: Variant, aggregator: Aggregator, seed: u64) {
    let inst = RandomInstance {
        seed,
        ..Default::default()
    };
    let inst = inst.build();
    let c = ModelConfig {
        entity_dim: 6,
        relation_dim: 5,
        type_dim: 4,
        attr_dim: 3,
        variant,
        attr_aggregator: aggregator,
        ..Default::default()
    };
    let mut p = ParamSet::<f64>::init(&c, &VocabSizes::of(inst.store.vocab()), seed);
    // non-trivial attention logits and larger weights to avoid saturation-free trivia
    for id in [ParamId::ThetaNeighbor, ParamId::ThetaAttrKey, ParamId::ThetaType] {
        for (i, v) in p.get_mut(id).as_mut_slice().iter_mut().enumerate() {
            *v = ((i * 7 + 3) % 11) as f64 / 5.0 - 1.0;
        }
    }
    let triples: Vec<_> = inst.store.triples()[..6].to_vec();
    let weights = [1.0, -0.5, 2.0, 0.7, -1.3, 0.4];
    let loss = |p: &ParamSet<f64>| -> f64 {
        let enc = Encoder::new(p, &inst.cache, &c);
        triples
            .iter()
            .zip(weights)
            .map(|(t, w)| w * enc.score(t.subject, t.relation, t.object))
            .sum()
    };
    let mut g = SparseGrads::for_params(&p);
    {
        let enc = Encoder::new(&p, &inst.cache, &c);
        for (t, w) in triples.iter().zip(weights) {
            let tape = enc.forward(t.subject, t.relation, t.object);
            enc.backward(&tape, w, &mut g);
        }
    }
    let coords = touched_coords(&p, &g);
    let analytic = |i: usize| {
        let mut acc = 0.0;
        for id in ParamId::ALL {
            for (r, row) in g.rows(id).iter() {
                for (col, &v) in row.iter().enumerate() {
                    if p.flat_index(id, r, col) == i {
                        acc = v;
                    }
                }
            }
        }
        acc
    };
    let cfg = GradCheckConfig {
        probe_count: 60,
        seed,
        ..Default::default()
    };
    let report = finite_diff_check(&mut p.clone(), analytic, loss, Some(&coords), &cfg);
    assert!(
        report.passed(),
        "{variant:?}: {:?}",
        report.failures().collect::<Vec<_>>()
    );
    // coordinates never touched must have zero numerical gradient
    let untouched: Vec<usize> = (0..p.allocated_scalars()).filter(|i| !coords.contains(i)).collect();
    let report = finite_diff_check(&mut p.clone(), |_| 0.0, loss, Some(&untouched), &cfg);
    assert!(report.passed(), "{variant:?} untouched: {:?}", report.failures().collect::<Vec<_>>());
}

#[test]
fn backward_matches_finite_differences_for_every_variant() {
    for (i, v) in Variant::ALL.into_iter().enumerate() {
        check_variant(v, Aggregator::Max, i as u64);
        check_variant(v, Aggregator::Mean, 100 + i as u64);
    }
}

#[test]
fn clone_entity_gives_identical_scores() {
    let inst = RandomInstance::default().build();
    let c = ModelConfig {
        entity_dim: 8,
        relation_dim: 8,
        type_dim: 4,
        attr_dim: 4,
        variant: Variant::EmbedAllAttention,
        ..Default::default()
    };
    let mut p = ParamSet::<f32>::init(&c, &VocabSizes::of(inst.store.vocab()), 5);
    for (i, v) in p.get_mut(ParamId::ThetaNeighbor).as_mut_slice().iter_mut().enumerate() {
        *v = (i % 5) as f32 * 0.3;
    }
    let (x, y) = (EntityId(2), EntityId(20));
    let mut cache = inst.cache.clone();
    cache.clone_entity_context(x, y);
    p.clone_entity(x, y);
    let enc = Encoder::new(&p, &cache, &c);
    for &ti in inst.store.incident(x) {
        let t = inst.store.triples()[ti as usize];
        let u = t.substitute(x, y);
        let (a, b) = (enc.score(t.subject, t.relation, t.object), enc.score(u.subject, u.relation, u.object));
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

fn small_cfg(variant: Variant) -> ModelConfig {
    ModelConfig {
        entity_dim: 5,
        relation_dim: 3,
        type_dim: 2,
        attr_dim: 3,
        variant,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_are_bounded_and_symmetric(seed in 0u64..10_000, v in 0usize..7, scale in 0.1f32..20.0) {
        let inst = RandomInstance { seed, ..Default::default() }.build();
        let c = small_cfg(Variant::ALL[v]);
        let mut p = ParamSet::<f32>::init(&c, &VocabSizes::of(inst.store.vocab()), seed);
        for id in ParamId::ALL {
            p.get_mut(id).as_mut_slice().iter_mut().for_each(|x| *x *= scale);
        }
        let enc = Encoder::new(&p, &inst.cache, &c);
        for t in inst.store.triples().iter().take(10) {
            let fwd = enc.forward(t.subject, t.relation, t.object);
            prop_assert!(fwd.score > 0.0 && fwd.score < 1.0);
            let (l1, _) = crate::model::score_from_z(&fwd.subject.z, &fwd.relation.z, &fwd.object.z);
            let (l2, _) = crate::model::score_from_z(&fwd.object.z, &fwd.relation.z, &fwd.subject.z);
            prop_assert_eq!(l1, l2);
        }
    }

    #[test]
    fn disabled_context_equals_zero_context(seed in 0u64..10_000) {
        let inst = RandomInstance { seed, ..Default::default() }.build();
        let c = small_cfg(Variant::EmbedAll);
        let p = ParamSet::<f32>::init(&c, &VocabSizes::of(inst.store.vocab()), seed);
        let enc = Encoder::new(&p, &inst.cache, &c);
        let e = EntityId((seed % 30) as u32);
        let v = enc.atomic(ParamId::Entity, e.index());
        let zd = vec![0.0f32; c.entity_dim];
        let zy = vec![0.0f32; c.attr_dim];
        let off = enc.combine_entity(Some(&v), None, None);
        let zeroed = enc.combine_entity(Some(&v), Some(&zd), Some(&zy));
        prop_assert_eq!(off.0.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), zeroed.0.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(off.1.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), zeroed.1.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn equal_attention_logits_reduce_to_mean(
        members in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..12),
        c in -30.0f64..30.0,
    ) {
        let logits = vec![c; members.len()];
        let att = aggregate_context(&members, Some(&logits), Aggregator::Max, 4);
        let mean = aggregate_context(&members, None, Aggregator::Mean, 4);
        for (a, m) in att.iter().zip(&mean) {
            prop_assert!((a - m).abs() < 1e-6);
        }
    }

    #[test]
    fn copied_embedding_row_gives_identical_score(seed in 0u64..10_000, a in 0u32..15, b in 0u32..15) {
        prop_assume!(a != b);
        let inst = RandomInstance { seed, ..Default::default() }.build();
        let c = small_cfg(Variant::EmbedOnly);
        let mut p = ParamSet::<f32>::init(&c, &VocabSizes::of(inst.store.vocab()), seed);
        let (ea, eb) = (EntityId(a), EntityId(b));
        p.clone_entity(ea, eb);
        let enc = Encoder::new(&p, &inst.cache, &c);
        for &ti in inst.store.incident(ea) {
            let t = inst.store.triples()[ti as usize];
            let u = t.substitute(ea, eb);
            if u.subject == u.object { continue; }
            prop_assert_eq!(enc.score(t.subject, t.relation, t.object), enc.score(u.subject, u.relation, u.object));
        }
    }
}
