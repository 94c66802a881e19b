//! Precomputed context consumed by the encoder: random-walk neighborhoods,
//! per-entity attribute lists and per-relation participating types.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::rng::{stream2, Purpose};
use crate::store::{AttributeRecord, EntityId, MultiGraphStore, RelationId, TypeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    /// Keep at most this many nodes per neighborhood, most visited first.
    pub max_neighbors: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 50,
            walk_length: 3,
            max_neighbors: 512,
            seed: 0,
        }
    }
}

/// Undirected, unlabeled adjacency with sorted, deduplicated neighbor lists.
fn adjacency(store: &MultiGraphStore) -> Vec<Vec<u32>> {
    let mut adj = vec![Vec::new(); store.n_entities()];
    for t in store.triples() {
        adj[t.subject.index()].push(t.object.0);
        adj[t.object.index()].push(t.subject.0);
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

fn walk_neighborhood(adj: &[Vec<u32>], start: u32, cfg: &WalkConfig) -> Vec<EntityId> {
    let mut visits: HashMap<u32, u32> = HashMap::new();
    for w in 0..cfg.walks_per_node {
        let mut rng = stream2(cfg.seed, Purpose::Walk, start as u64, w as u64);
        let mut cur = start;
        for _ in 0..cfg.walk_length {
            let next = &adj[cur as usize];
            if next.is_empty() {
                break;
            }
            cur = next[rng.random_range(0..next.len())];
            if cur != start {
                *visits.entry(cur).or_default() += 1;
            }
        }
    }
    let mut nodes: Vec<(u32, u32)> = visits.into_iter().collect();
    if nodes.len() > cfg.max_neighbors {
        nodes.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        nodes.truncate(cfg.max_neighbors);
    }
    let mut ids: Vec<EntityId> = nodes.into_iter().map(|(id, _)| EntityId(id)).collect();
    ids.sort_unstable();
    ids
}

/// `N(e)` for every entity: unique nodes visited by `walks_per_node` walks of
/// `walk_length` steps from `e`, excluding `e`. Sorted by id.
pub fn build_neighborhoods(store: &MultiGraphStore, cfg: &WalkConfig) -> Vec<Vec<EntityId>> {
    assert!(cfg.walks_per_node >= 1 && cfg.walk_length >= 1, "walk count and length must be >= 1");
    let adj = adjacency(store);
    (0..store.n_entities() as u32)
        .into_par_iter()
        .map(|e| walk_neighborhood(&adj, e, cfg))
        .collect()
}

/// Distinct types (all listed types) of every entity occurring in a triple of
/// each relation, sorted.
pub fn build_relation_type_context(store: &MultiGraphStore) -> Vec<Vec<TypeId>> {
    let mut out = vec![Vec::new(); store.vocab().n_relations()];
    for t in store.triples() {
        let set = &mut out[t.relation.index()];
        for e in [t.subject, t.object] {
            set.extend_from_slice(store.types_of(e));
        }
    }
    for set in &mut out {
        set.sort_unstable();
        set.dedup();
    }
    out
}

/// Attribute records of every entity in file order.
pub fn build_attribute_lists(store: &MultiGraphStore) -> Vec<Vec<AttributeRecord>> {
    let mut out = vec![Vec::new(); store.n_entities()];
    for rec in store.attributes() {
        out[rec.entity.index()].push(rec.clone());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextCache {
    neighborhoods: Vec<Vec<EntityId>>,
    entity_attrs: Vec<Vec<AttributeRecord>>,
    relation_types: Vec<Vec<TypeId>>,
}

const MAGIC: &[u8; 8] = b"LNBDCTX\0";
const VERSION: u32 = 1;

impl ContextCache {
    pub fn build(store: &MultiGraphStore, walks: &WalkConfig) -> Self {
        ContextCache {
            neighborhoods: build_neighborhoods(store, walks),
            entity_attrs: build_attribute_lists(store),
            relation_types: build_relation_type_context(store),
        }
    }

    /// Cache with no neighbors, attributes or relation types.
    pub fn empty(n_entities: usize, n_relations: usize) -> Self {
        ContextCache {
            neighborhoods: vec![Vec::new(); n_entities],
            entity_attrs: vec![Vec::new(); n_entities],
            relation_types: vec![Vec::new(); n_relations],
        }
    }

    pub fn from_parts(
        neighborhoods: Vec<Vec<EntityId>>,
        entity_attrs: Vec<Vec<AttributeRecord>>,
        relation_types: Vec<Vec<TypeId>>,
    ) -> Self {
        assert_eq!(neighborhoods.len(), entity_attrs.len());
        ContextCache {
            neighborhoods,
            entity_attrs,
            relation_types,
        }
    }

    pub fn neighbors(&self, e: EntityId) -> &[EntityId] {
        &self.neighborhoods[e.index()]
    }

    pub fn attributes(&self, e: EntityId) -> &[AttributeRecord] {
        &self.entity_attrs[e.index()]
    }

    pub fn relation_types(&self, r: RelationId) -> &[TypeId] {
        &self.relation_types[r.index()]
    }

    pub fn n_entities(&self) -> usize {
        self.neighborhoods.len()
    }

    pub fn set_neighbors(&mut self, e: EntityId, mut nodes: Vec<EntityId>) {
        nodes.retain(|&n| n != e);
        nodes.sort_unstable();
        nodes.dedup();
        self.neighborhoods[e.index()] = nodes;
    }

    pub fn set_attributes(&mut self, e: EntityId, records: Vec<AttributeRecord>) {
        self.entity_attrs[e.index()] = records
            .into_iter()
            .map(|r| AttributeRecord { entity: e, ..r })
            .collect();
    }

    /// Makes `to` contextually indistinguishable from `from`: `to` receives
    /// `from`'s attributes and (mirrored) neighborhood, and every other
    /// neighborhood containing one of the two gains the other.
    pub fn clone_entity_context(&mut self, from: EntityId, to: EntityId) {
        let swap = |x: EntityId| {
            if x == from {
                to
            } else if x == to {
                from
            } else {
                x
            }
        };
        let mirrored: Vec<EntityId> = self.neighborhoods[from.index()].iter().map(|&x| swap(x)).collect();
        self.set_neighbors(to, mirrored);
        self.set_attributes(to, self.entity_attrs[from.index()].clone());
        for i in 0..self.neighborhoods.len() {
            if i == from.index() || i == to.index() {
                continue;
            }
            let list = &mut self.neighborhoods[i];
            let has_from = list.binary_search(&from).is_ok();
            let has_to = list.binary_search(&to).is_ok();
            if has_from != has_to {
                let missing = if has_from { to } else { from };
                let pos = list.binary_search(&missing).unwrap_err();
                list.insert(pos, missing);
            }
        }
    }

    /// Versioned binary sidecar: header (magic, version, digest, walk
    /// settings, counts) followed by length-prefixed id lists.
    pub fn to_bytes(&self, store: &MultiGraphStore, walks: &WalkConfig) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.bytes(&store.vocab().digest());
        w.u64(walks.walks_per_node as u64);
        w.u64(walks.walk_length as u64);
        w.u64(walks.max_neighbors as u64);
        w.u64(walks.seed);
        w.u64(self.neighborhoods.len() as u64);
        w.u64(self.relation_types.len() as u64);
        w.u64(store.attributes().len() as u64);
        for n in &self.neighborhoods {
            w.ids(n.iter().map(|e| e.0));
        }
        // attribute lists as indices into the store's record list
        let mut index: HashMap<(u32, usize), u32> = HashMap::new();
        let mut per_entity_seen: HashMap<u32, usize> = HashMap::new();
        for (i, rec) in store.attributes().iter().enumerate() {
            let k = per_entity_seen.entry(rec.entity.0).or_default();
            index.insert((rec.entity.0, *k), i as u32);
            *k += 1;
        }
        for (e, recs) in self.entity_attrs.iter().enumerate() {
            w.ids((0..recs.len()).map(|k| index[&(e as u32, k)]));
        }
        for t in &self.relation_types {
            w.ids(t.iter().map(|t| t.0));
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8], store: &MultiGraphStore, walks: &WalkConfig) -> Result<Self> {
        let err = |m: String| Error::Cache(m);
        let mut r = ByteReader::new(bytes);
        if r.take(8).map_err(err)? != MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let version = r.u32().map_err(err)?;
        if version != VERSION {
            return Err(Error::Cache(format!("unsupported version {version}")));
        }
        if r.take(32).map_err(err)? != store.vocab().digest() {
            return Err(Error::Cache("vocabulary digest mismatch".into()));
        }
        let header = [
            r.u64().map_err(err)?,
            r.u64().map_err(err)?,
            r.u64().map_err(err)?,
            r.u64().map_err(err)?,
        ];
        let expected = [
            walks.walks_per_node as u64,
            walks.walk_length as u64,
            walks.max_neighbors as u64,
            walks.seed,
        ];
        if header != expected {
            return Err(Error::Cache("walk settings differ from the cached ones".into()));
        }
        let n = r.u64().map_err(err)? as usize;
        let m = r.u64().map_err(err)? as usize;
        let n_attrs = r.u64().map_err(err)? as usize;
        if n != store.n_entities() || m != store.vocab().n_relations() || n_attrs != store.attributes().len() {
            return Err(Error::Cache("entity, relation or attribute counts differ".into()));
        }
        let check = |ids: Vec<u32>, bound: usize| -> Result<Vec<u32>> {
            if ids.iter().any(|&i| i as usize >= bound) {
                Err(Error::Cache("id out of range".into()))
            } else {
                Ok(ids)
            }
        };
        let mut neighborhoods = Vec::with_capacity(n);
        for _ in 0..n {
            neighborhoods.push(check(r.ids().map_err(err)?, n)?.into_iter().map(EntityId).collect());
        }
        let mut entity_attrs = Vec::with_capacity(n);
        for _ in 0..n {
            let idx = check(r.ids().map_err(err)?, n_attrs)?;
            entity_attrs.push(idx.into_iter().map(|i| store.attributes()[i as usize].clone()).collect());
        }
        let n_types = store.vocab().n_types();
        let mut relation_types = Vec::with_capacity(m);
        for _ in 0..m {
            relation_types.push(check(r.ids().map_err(err)?, n_types)?.into_iter().map(TypeId).collect());
        }
        if !r.finished() {
            return Err(Error::Cache("trailing bytes".into()));
        }
        Ok(ContextCache {
            neighborhoods,
            entity_attrs,
            relation_types,
        })
    }

    pub fn save(&self, path: &Path, store: &MultiGraphStore, walks: &WalkConfig) -> Result<()> {
        fs::write(path, self.to_bytes(store, walks)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, store: &MultiGraphStore, walks: &WalkConfig) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, store, walks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{LoadOptions, StoreBuilder};

    fn build(triples: &[(&str, &str, &str)], types: &[(&str, &str)]) -> MultiGraphStore {
        let mut b = StoreBuilder::new(LoadOptions::default());
        for (s, r, o) in triples {
            b.add_triple("X", s, r, o).unwrap();
        }
        for (e, t) in types {
            b.add_type(e, t);
        }
        b.build().unwrap().0
    }

    fn cfg(k: usize, l: usize) -> WalkConfig {
        WalkConfig {
            walks_per_node: k,
            walk_length: l,
            max_neighbors: 512,
            seed: 11,
        }
    }

    #[test]
    fn path_graph_neighborhood() {
        // a - b - c: two-step walks from a visit b then a or c
        let store = build(&[("a", "r", "b"), ("b", "r", "c")], &[]);
        let a = store.vocab().entity("a").unwrap();
        let b = store.vocab().entity("b").unwrap();
        let c = store.vocab().entity("c").unwrap();
        for k in [1, 2, 5] {
            let n = build_neighborhoods(&store, &cfg(k, 2));
            assert!(n[a.index()].contains(&b));
            assert!(n[a.index()].iter().all(|&x| x == b || x == c));
        }
        let n = build_neighborhoods(&store, &cfg(200, 2));
        assert_eq!(n[a.index()], vec![b, c]);
    }

    #[test]
    fn isolated_entity_has_empty_neighborhood() {
        let mut b = StoreBuilder::new(LoadOptions::default());
        b.add_triple("X", "a", "r", "b").unwrap();
        let store = b.build().unwrap().0;
        let store = store.with_triples(Vec::new());
        let n = build_neighborhoods(&store, &cfg(5, 3));
        assert!(n.iter().all(Vec::is_empty));
    }

    #[test]
    fn cap_keeps_most_visited() {
        // star: hub h with leaves; walks of length 1 from h spread evenly
        let triples: Vec<(String, String, String)> =
            (0..20).map(|i| ("h".to_string(), "r".to_string(), format!("l{i}"))).collect();
        let refs: Vec<(&str, &str, &str)> = triples.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str())).collect();
        let store = build(&refs, &[]);
        let mut c = cfg(100, 1);
        c.max_neighbors = 5;
        let n = build_neighborhoods(&store, &c);
        let h = store.vocab().entity("h").unwrap();
        assert_eq!(n[h.index()].len(), 5);
    }

    #[test]
    fn relation_types_from_fixture() {
        let store = build(
            &[("p1", "acted", "f1"), ("p1", "acted", "p2"), ("p2", "knows", "p3")],
            &[("p1", "person"), ("p2", "person"), ("p3", "person"), ("f1", "film")],
        );
        let rt = build_relation_type_context(&store);
        let name = |t: &TypeId| store.vocab().types.name(t.0).to_string();
        let acted: Vec<String> = rt[store.vocab().relations.get("acted").unwrap() as usize].iter().map(name).collect();
        assert_eq!(acted.len(), 2);
        assert!(acted.contains(&"person".to_string()) && acted.contains(&"film".to_string()));
        let knows = &rt[store.vocab().relations.get("knows").unwrap() as usize];
        assert_eq!(knows.len(), 1);
    }

    #[test]
    fn attribute_lists_keep_file_order() {
        let mut b = StoreBuilder::new(LoadOptions::default());
        b.add_triple("X", "a", "r", "b").unwrap();
        b.add_attribute("a", "k1", "one");
        b.add_attribute("a", "k2", "two");
        b.add_attribute("a", "k1", "three");
        let store = b.build().unwrap().0;
        let lists = build_attribute_lists(&store);
        let a = store.vocab().entity("a").unwrap();
        let vals: Vec<&str> = lists[a.index()].iter().map(|r| r.value.as_str()).collect();
        assert_eq!(vals, ["one", "two", "three"]);
        assert!(lists[store.vocab().entity("b").unwrap().index()].is_empty());
    }

    #[test]
    fn sidecar_round_trip_and_rejection() {
        let mut b = StoreBuilder::new(LoadOptions::default());
        for (s, o) in [("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")] {
            b.add_triple("X", s, "r", o).unwrap();
        }
        b.add_attribute("c", "k", "v w");
        b.add_attribute("a", "k", "x");
        b.add_type("a", "t");
        let store = b.build().unwrap().0;
        let walks = cfg(10, 3);
        let cache = ContextCache::build(&store, &walks);
        let bytes = cache.to_bytes(&store, &walks);
        assert_eq!(ContextCache::from_bytes(&bytes, &store, &walks).unwrap(), cache);
        let other = WalkConfig { seed: 12, ..walks };
        assert!(ContextCache::from_bytes(&bytes, &store, &other).is_err());
        assert!(ContextCache::from_bytes(&bytes[..bytes.len() - 1], &store, &walks).is_err());
    }
}
