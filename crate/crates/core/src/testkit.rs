//! Random small instances for tests, property suites and benchmarks.

use rand::Rng;

use crate::context::{ContextCache, WalkConfig};
use crate::rng::{stream, Purpose};
use crate::store::{
    generate_negative_labels, LabeledPair, LinkageLabelSet, LoadOptions, MultiGraphStore, NegativeLabelConfig,
    StoreBuilder,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomInstance {
    /// Split evenly between graphs `X` and `Y`.
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
    pub types: usize,
    pub attr_keys: usize,
    pub tokens: usize,
    /// Fraction of `X` entities given a positive partner in `Y`.
    pub positive_fraction: f64,
    pub seed: u64,
}

impl Default for RandomInstance {
    fn default() -> Self {
        RandomInstance {
            entities: 30,
            relations: 4,
            triples: 90,
            types: 3,
            attr_keys: 4,
            tokens: 12,
            positive_fraction: 0.5,
            seed: 0,
        }
    }
}

/// A store, its labels and a context cache built from all triples.
pub struct Instance {
    pub store: MultiGraphStore,
    pub labels: LinkageLabelSet,
    pub cache: ContextCache,
}

impl RandomInstance {
    pub fn build(&self) -> Instance {
        assert!(self.entities >= 4 && self.relations >= 1, "instance too small");
        let mut rng = stream(self.seed, Purpose::Synthetic, 0);
        let half = self.entities / 2;
        let name = |i: usize| if i < half { format!("x{i}") } else { format!("y{i}") };
        let graph = |i: usize| if i < half { "X" } else { "Y" };
        let mut b = StoreBuilder::new(LoadOptions {
            strict: false,
            max_value_tokens: usize::MAX,
        });
        // a ring per graph so every entity appears in at least one triple
        for (lo, hi) in [(0, half), (half, self.entities)] {
            for i in lo..hi {
                let j = if i + 1 == hi { lo } else { i + 1 };
                b.add_triple(graph(i), &name(i), &format!("r{}", i % self.relations), &name(j))
                    .expect("ring triple");
            }
        }
        let extra = self.triples.saturating_sub(self.entities);
        for _ in 0..extra {
            let s = rng.random_range(0..self.entities);
            let (lo, hi) = if s < half { (0, half) } else { (half, self.entities) };
            let o = rng.random_range(lo..hi);
            let r = rng.random_range(0..self.relations);
            b.add_triple(graph(s), &name(s), &format!("r{r}"), &name(o)).expect("same-graph triple");
        }
        for i in 0..self.entities {
            if self.types > 0 {
                b.add_type(&name(i), &format!("t{}", rng.random_range(0..self.types)));
                if rng.random_bool(0.3) {
                    b.add_type(&name(i), &format!("t{}", rng.random_range(0..self.types)));
                }
            }
            if self.attr_keys > 0 && self.tokens > 0 {
                for _ in 0..rng.random_range(0..=3) {
                    let k = rng.random_range(0..self.attr_keys);
                    let words: Vec<String> = (0..rng.random_range(1..=3))
                        .map(|_| format!("w{}", rng.random_range(0..self.tokens)))
                        .collect();
                    b.add_attribute(&name(i), &format!("k{k}"), &words.join(" "));
                }
            }
        }
        let (store, _) = b.build().expect("random instance is valid");
        let mut pairs = Vec::new();
        let y_count = self.entities - half;
        let mut partners: Vec<usize> = (0..y_count).collect();
        for i in (1..partners.len()).rev() {
            partners.swap(i, rng.random_range(0..=i));
        }
        for x in 0..half.min(y_count) {
            if rng.random_bool(self.positive_fraction) {
                let a = store.vocab().entity(&name(x)).expect("x entity");
                let b = store.vocab().entity(&name(half + partners[x])).expect("y entity");
                pairs.push(LabeledPair { a, b, positive: true });
            }
        }
        let positives = LinkageLabelSet::from_pairs(&store, pairs).expect("valid positives");
        let labels = generate_negative_labels(
            &store,
            &positives,
            &NegativeLabelConfig {
                per_type: 3,
                cross_type: 3,
                seed: self.seed,
            },
        );
        let cache = ContextCache::build(
            &store,
            &WalkConfig {
                walks_per_node: 5,
                walk_length: 2,
                max_neighbors: 16,
                seed: self.seed,
            },
        );
        Instance { store, labels, cache }
    }
}
