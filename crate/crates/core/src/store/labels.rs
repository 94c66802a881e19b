use std::collections::{HashMap, HashSet};

use rand::seq::index::sample;
use rand::Rng;

use super::{EntityId, MultiGraphStore, TypeId};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// One cross-graph linkage label. `a` lives in the graph with the smaller id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledPair {
    pub a: EntityId,
    pub b: EntityId,
    pub positive: bool,
}

/// Positive and negative cross-graph entity pairs.
///
/// Positives are one-to-one and symmetric. Negatives are indexed from both
/// endpoints, in the order the pairs were supplied.
#[derive(Debug, Clone, Default)]
pub struct LinkageLabelSet {
    pairs: Vec<LabeledPair>,
    positives: HashMap<EntityId, EntityId>,
    negatives: HashMap<EntityId, Vec<EntityId>>,
}

impl LinkageLabelSet {
    /// Validates and indexes `pairs`. Exact duplicates are merged.
    pub fn from_pairs(store: &MultiGraphStore, pairs: impl IntoIterator<Item = LabeledPair>) -> Result<Self> {
        let mut set = LinkageLabelSet::default();
        let mut seen: HashMap<(EntityId, EntityId), bool> = HashMap::new();
        let n = store.n_entities();
        for p in pairs {
            if p.a.index() >= n || p.b.index() >= n {
                return Err(Error::Validation(format!("label references unknown entity id in {p:?}")));
            }
            let (ga, gb) = (store.graph_of(p.a), store.graph_of(p.b));
            if ga == gb {
                return Err(Error::Validation(format!(
                    "label pair ({}, {}) lies within one graph",
                    store.vocab().entity_name(p.a),
                    store.vocab().entity_name(p.b)
                )));
            }
            let (a, b) = if ga < gb { (p.a, p.b) } else { (p.b, p.a) };
            match seen.get(&(a, b)) {
                Some(&prev) if prev == p.positive => continue,
                Some(_) => {
                    return Err(Error::Validation(format!(
                        "pair ({}, {}) labeled both positive and negative",
                        store.vocab().entity_name(a),
                        store.vocab().entity_name(b)
                    )))
                }
                None => {}
            }
            if p.positive {
                for (x, y) in [(a, b), (b, a)] {
                    if let Some(&other) = set.positives.get(&x) {
                        if other != y {
                            return Err(Error::Validation(format!(
                                "entity {} has more than one positive label",
                                store.vocab().entity_name(x)
                            )));
                        }
                    }
                }
                set.positives.insert(a, b);
                set.positives.insert(b, a);
            } else {
                set.negatives.entry(a).or_default().push(b);
                set.negatives.entry(b).or_default().push(a);
            }
            seen.insert((a, b), p.positive);
            set.pairs.push(LabeledPair { a, b, positive: p.positive });
        }
        Ok(set)
    }

    pub fn pairs(&self) -> &[LabeledPair] {
        &self.pairs
    }

    pub fn positive(&self, e: EntityId) -> Option<EntityId> {
        self.positives.get(&e).copied()
    }

    pub fn negatives(&self, e: EntityId) -> &[EntityId] {
        self.negatives.get(&e).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Whether `e` appears in any label.
    pub fn is_labeled(&self, e: EntityId) -> bool {
        self.positives.contains_key(&e) || self.negatives.contains_key(&e)
    }

    pub fn n_positive(&self) -> usize {
        self.pairs.iter().filter(|p| p.positive).count()
    }

    pub fn n_negative(&self) -> usize {
        self.pairs.len() - self.n_positive()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegativeLabelConfig {
    /// Negatives of the same primary type, drawn per entity.
    pub per_type: usize,
    /// Negatives of a different primary type, drawn per entity.
    pub cross_type: usize,
    pub seed: u64,
}

impl Default for NegativeLabelConfig {
    fn default() -> Self {
        NegativeLabelConfig {
            per_type: 10,
            cross_type: 10,
            seed: 0,
        }
    }
}

struct CandidatePools {
    /// Entities of each graph grouped by primary type (`None` = untyped).
    by_graph_type: Vec<HashMap<Option<TypeId>, Vec<EntityId>>>,
    by_graph: Vec<Vec<EntityId>>,
}

impl CandidatePools {
    fn new(store: &MultiGraphStore) -> Self {
        let n_graphs = store.vocab().graphs.len();
        let mut by_graph_type = vec![HashMap::new(); n_graphs];
        let mut by_graph = vec![Vec::new(); n_graphs];
        for e in store.entities() {
            let g = store.graph_of(e).index();
            by_graph_type[g].entry(store.primary_type(e)).or_insert_with(Vec::new).push(e);
            by_graph[g].push(e);
        }
        CandidatePools { by_graph_type, by_graph }
    }
}

fn draw_without_replacement<R: Rng>(rng: &mut R, pool: &[EntityId], k: usize) -> Vec<EntityId> {
    let k = k.min(pool.len());
    sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
}

fn sample_with_pools<R: Rng>(
    store: &MultiGraphStore,
    pools: &CandidatePools,
    e: EntityId,
    partner: Option<EntityId>,
    cfg: &NegativeLabelConfig,
    rng: &mut R,
) -> Vec<EntityId> {
    let own_graph = store.graph_of(e).index();
    let ty = store.primary_type(e);
    let not_partner = |c: &&EntityId| Some(**c) != partner;

    let mut same: Vec<EntityId> = Vec::new();
    let mut cross: Vec<EntityId> = Vec::new();
    for (g, groups) in pools.by_graph_type.iter().enumerate() {
        if g == own_graph {
            continue;
        }
        if ty.is_some() {
            if let Some(list) = groups.get(&ty) {
                same.extend(list.iter().filter(not_partner));
            }
        }
        // sorted by entity id for a stable pool order
        cross.extend(
            pools.by_graph[g]
                .iter()
                .filter(not_partner)
                .filter(|c| ty.is_none() || store.primary_type(**c) != ty),
        );
    }
    let mut out = draw_without_replacement(rng, &same, cfg.per_type);
    out.extend(draw_without_replacement(rng, &cross, cfg.cross_type));
    out
}

/// The negatives drawn for a single entity: up to `per_type` same-type and up
/// to `cross_type` different-type entities from other graphs, never `partner`.
pub fn sample_negatives_for(
    store: &MultiGraphStore,
    e: EntityId,
    partner: Option<EntityId>,
    cfg: &NegativeLabelConfig,
) -> Vec<EntityId> {
    let pools = CandidatePools::new(store);
    let mut rng = stream(cfg.seed, Purpose::NegativeLabels, e.0 as u64);
    sample_with_pools(store, &pools, e, partner, cfg, &mut rng)
}

/// Draws negatives for every entity and merges them with `positives`.
///
/// When a candidate pool is smaller than requested, every candidate is used.
/// A pair drawn from both of its endpoints is stored once.
pub fn generate_negative_labels(
    store: &MultiGraphStore,
    positives: &LinkageLabelSet,
    cfg: &NegativeLabelConfig,
) -> LinkageLabelSet {
    let pools = CandidatePools::new(store);
    let mut pairs: Vec<LabeledPair> = positives.pairs().iter().filter(|p| p.positive).copied().collect();
    let mut seen: HashSet<(EntityId, EntityId)> = pairs.iter().map(|p| (p.a, p.b)).collect();
    for e in store.entities() {
        let mut rng = stream(cfg.seed, Purpose::NegativeLabels, e.0 as u64);
        let partner = positives.positive(e);
        for c in sample_with_pools(store, &pools, e, partner, cfg, &mut rng) {
            let (a, b) = if store.graph_of(e) < store.graph_of(c) { (e, c) } else { (c, e) };
            if seen.insert((a, b)) {
                pairs.push(LabeledPair { a, b, positive: false });
            }
        }
    }
    LinkageLabelSet::from_pairs(store, pairs).expect("generated labels are cross-graph and consistent")
}
