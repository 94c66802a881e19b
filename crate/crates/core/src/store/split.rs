use rand::seq::SliceRandom;

use super::{LinkageLabelSet, MultiGraphStore, Triple};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train_triples: Vec<Triple>,
    pub test_triples: Vec<Triple>,
    pub train_labels: LinkageLabelSet,
    pub test_labels: LinkageLabelSet,
}

fn train_count(n: usize, fraction: f64) -> usize {
    // round half up, so a single item lands in train
    ((n as f64 * fraction + 0.5).floor() as usize).min(n)
}

/// Uniformly random, seeded partition of the triples and of the label pairs.
pub fn split_dataset(
    store: &MultiGraphStore,
    labels: &LinkageLabelSet,
    train_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let mut triples = store.triples().to_vec();
    triples.shuffle(&mut stream(seed, Purpose::SplitTriples, 0));
    let test_triples = triples.split_off(train_count(triples.len(), train_fraction));

    let mut pairs = labels.pairs().to_vec();
    pairs.shuffle(&mut stream(seed, Purpose::SplitLabels, 0));
    let test_pairs = pairs.split_off(train_count(pairs.len(), train_fraction));

    Ok(DatasetSplit {
        train_triples: triples,
        test_triples,
        train_labels: LinkageLabelSet::from_pairs(store, pairs)?,
        test_labels: LinkageLabelSet::from_pairs(store, test_pairs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{LoadOptions, StoreBuilder};
    use std::collections::HashSet;

    fn chain(n: usize) -> MultiGraphStore {
        let mut b = StoreBuilder::new(LoadOptions::default());
        for i in 0..n {
            b.add_triple("X", &format!("e{i}"), "r", &format!("e{}", i + 1)).unwrap();
        }
        b.build().unwrap().0
    }

    #[test]
    fn sixty_forty_on_thousand() {
        let store = chain(1000);
        let s = split_dataset(&store, &LinkageLabelSet::default(), 0.6, 1).unwrap();
        assert_eq!(s.train_triples.len(), 600);
        assert_eq!(s.test_triples.len(), 400);
        let a: HashSet<_> = s.train_triples.iter().collect();
        assert!(s.test_triples.iter().all(|t| !a.contains(t)));
    }

    #[test]
    fn single_triple_goes_to_train() {
        let store = chain(1);
        let s = split_dataset(&store, &LinkageLabelSet::default(), 0.6, 1).unwrap();
        assert_eq!((s.train_triples.len(), s.test_triples.len()), (1, 0));
    }

    #[test]
    fn deterministic_and_validated() {
        let store = chain(50);
        let a = split_dataset(&store, &LinkageLabelSet::default(), 0.6, 9).unwrap();
        let b = split_dataset(&store, &LinkageLabelSet::default(), 0.6, 9).unwrap();
        assert_eq!(a.train_triples, b.train_triples);
        assert!(split_dataset(&store, &LinkageLabelSet::default(), 1.0, 9).is_err());
        assert!(split_dataset(&store, &LinkageLabelSet::default(), 0.0, 9).is_err());
    }
}
