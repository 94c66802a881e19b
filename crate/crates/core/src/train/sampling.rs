use rand::seq::index::sample;
use rand::Rng;

use crate::store::{EntityId, MultiGraphStore, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorruptMode {
    Head,
    Tail,
    /// Fair coin per sample.
    Both,
}

impl CorruptMode {
    pub fn name(self) -> &'static str {
        match self {
            CorruptMode::Head => "head",
            CorruptMode::Tail => "tail",
            CorruptMode::Both => "both",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "head" => Some(CorruptMode::Head),
            "tail" => Some(CorruptMode::Tail),
            "both" => Some(CorruptMode::Both),
            _ => None,
        }
    }
}

/// Draws corrupted triples against a fixed triple set. Replacement entities
/// come from the corrupted triple's own graph.
#[derive(Debug, Clone)]
pub struct NegativeSampler<'a> {
    store: &'a MultiGraphStore,
    by_graph: Vec<Vec<EntityId>>,
    retry_budget: usize,
}

impl<'a> NegativeSampler<'a> {
    pub fn new(store: &'a MultiGraphStore, retry_budget: usize) -> Self {
        let mut by_graph = vec![Vec::new(); store.vocab().graphs.len()];
        for e in store.entities() {
            by_graph[store.graph_of(e).index()].push(e);
        }
        NegativeSampler {
            store,
            by_graph,
            retry_budget,
        }
    }

    /// Up to `count` corruptions of `t`; the second value counts samples
    /// abandoned after the retry budget ran out.
    pub fn corrupt<R: Rng>(&self, t: &Triple, count: usize, mode: CorruptMode, rng: &mut R) -> (Vec<Triple>, usize) {
        let pool = &self.by_graph[t.graph.index()];
        let mut out = Vec::with_capacity(count);
        let mut shortfall = 0;
        if pool.is_empty() {
            return (out, count);
        }
        for _ in 0..count {
            let mut found = None;
            for _ in 0..self.retry_budget {
                let head = match mode {
                    CorruptMode::Head => true,
                    CorruptMode::Tail => false,
                    CorruptMode::Both => rng.random_bool(0.5),
                };
                let c = pool[rng.random_range(0..pool.len())];
                if c == t.subject || c == t.object {
                    continue;
                }
                let cand = if head {
                    Triple { subject: c, ..*t }
                } else {
                    Triple { object: c, ..*t }
                };
                if !self.store.contains(cand.subject, cand.relation, cand.object) {
                    found = Some(cand);
                    break;
                }
            }
            match found {
                Some(c) => out.push(c),
                None => shortfall += 1,
            }
        }
        (out, shortfall)
    }
}

/// Up to `k` entries of `pool`, uniformly without replacement.
pub fn sample_labels<R: Rng>(pool: &[EntityId], k: usize, rng: &mut R) -> Vec<EntityId> {
    let k = k.min(pool.len());
    sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::store::{LoadOptions, StoreBuilder};

    #[test]
    fn complete_graph_yields_no_corruptions() {
        let mut b = StoreBuilder::new(LoadOptions::default());
        for s in ["a", "b", "c"] {
            for o in ["a", "b", "c"] {
                if s != o {
                    b.add_triple("X", s, "r", o).unwrap();
                }
            }
        }
        let (store, _) = b.build().unwrap();
        let sampler = NegativeSampler::new(&store, 100);
        let t = store.triples()[0];
        let (negs, short) = sampler.corrupt(&t, 5, CorruptMode::Both, &mut stream(1, Purpose::Corruption, 0));
        assert!(negs.is_empty());
        assert_eq!(short, 5);
        let (negs, short) = sampler.corrupt(&t, 0, CorruptMode::Both, &mut stream(1, Purpose::Corruption, 0));
        assert!(negs.is_empty() && short == 0);
    }

    #[test]
    fn head_and_tail_modes_replace_one_side() {
        let mut b = StoreBuilder::new(LoadOptions::default());
        for i in 0..10 {
            b.add_triple("X", &format!("e{i}"), "r", &format!("e{}", (i + 1) % 10)).unwrap();
        }
        let (store, _) = b.build().unwrap();
        let sampler = NegativeSampler::new(&store, 100);
        let t = store.triples()[0];
        let mut rng = stream(2, Purpose::Corruption, 0);
        let (heads, _) = sampler.corrupt(&t, 50, CorruptMode::Head, &mut rng);
        assert_eq!(heads.len(), 50);
        assert!(heads.iter().all(|c| c.object == t.object && c.subject != t.subject));
        let (tails, _) = sampler.corrupt(&t, 50, CorruptMode::Tail, &mut rng);
        assert!(tails.iter().all(|c| c.subject == t.subject && c.object != t.object));
    }
}
