//! In-memory multi-graph triple store.
//!
//! All graphs share one vocabulary. Each entity carries the tag of the graph
//! it came from, and the combined triple set is the primitive the rest of the
//! crate works on.

mod builder;
mod io;
mod labels;
mod split;
mod synth;

use std::collections::{HashMap, HashSet};

pub use builder::{LoadOptions, LoadReport, StoreBuilder};
pub use io::{load_graphs, write_attributes, write_labels, write_triples, write_types, DataPaths};
pub use labels::{generate_negative_labels, sample_negatives_for, LabeledPair, LinkageLabelSet, NegativeLabelConfig};
pub use split::{split_dataset, DatasetSplit};
pub use synth::{generate_synthetic_pair, SyntheticConfig, SyntheticSummary};

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(EntityId);
id_type!(RelationId);
id_type!(TypeId);
id_type!(AttrKeyId);
id_type!(
    /// Attribute value token. Id 0 is the out-of-vocabulary token.
    TokenId
);
id_type!(GraphId);

pub const OOV_TOKEN: &str = "<oov>";

/// Dense, 0-based string interner.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    pub graphs: Interner,
    pub entities: Interner,
    pub relations: Interner,
    pub types: Interner,
    pub attr_keys: Interner,
    /// Attribute value tokens; id 0 is always [`OOV_TOKEN`].
    pub tokens: Interner,
}

impl Vocab {
    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }
    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }
    pub fn n_types(&self) -> usize {
        self.types.len()
    }
    pub fn n_attr_keys(&self) -> usize {
        self.attr_keys.len()
    }
    pub fn n_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn entity(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn entity_name(&self, e: EntityId) -> &str {
        self.entities.name(e.0)
    }

    /// SHA-256 over every category's names in id order.
    pub fn digest(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (tag, interner) in [
            ("graphs", &self.graphs),
            ("entities", &self.entities),
            ("relations", &self.relations),
            ("types", &self.types),
            ("attr_keys", &self.attr_keys),
            ("tokens", &self.tokens),
        ] {
            h.update(tag.as_bytes());
            h.update((interner.len() as u64).to_le_bytes());
            for name in interner.names() {
                h.update((name.len() as u64).to_le_bytes());
                h.update(name.as_bytes());
            }
        }
        let out = h.finalize();
        let mut digest = [0u8; 32];
        digest.copy_from_slice(out.as_slice());
        digest
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
    pub graph: GraphId,
}

impl Triple {
    pub fn new(subject: EntityId, relation: RelationId, object: EntityId, graph: GraphId) -> Self {
        Triple {
            subject,
            relation,
            object,
            graph,
        }
    }

    pub fn key(&self) -> (u32, u32, u32) {
        (self.subject.0, self.relation.0, self.object.0)
    }

    pub fn mentions(&self, e: EntityId) -> bool {
        self.subject == e || self.object == e
    }

    /// Copy with every occurrence of `from` replaced by `to`.
    pub fn substitute(&self, from: EntityId, to: EntityId) -> Triple {
        let swap = |x: EntityId| if x == from { to } else { x };
        Triple {
            subject: swap(self.subject),
            object: swap(self.object),
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeRecord {
    pub entity: EntityId,
    pub key: AttrKeyId,
    pub value_tokens: Vec<TokenId>,
    /// Normalized (lowercased, single-spaced) value text.
    pub value: String,
}

/// Combined triple set of all graphs plus entity attributes and types.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct MultiGraphStore {
    vocab: Vocab,
    entity_graph: Vec<GraphId>,
    entity_types: Vec<Vec<TypeId>>,
    attributes: Vec<AttributeRecord>,
    triples: Vec<Triple>,
    index: HashSet<(u32, u32, u32)>,
    incident: Vec<Vec<u32>>,
}

impl MultiGraphStore {
    pub(crate) fn from_parts(
        vocab: Vocab,
        entity_graph: Vec<GraphId>,
        entity_types: Vec<Vec<TypeId>>,
        attributes: Vec<AttributeRecord>,
        triples: Vec<Triple>,
    ) -> Self {
        let mut store = MultiGraphStore {
            vocab,
            entity_graph,
            entity_types,
            attributes,
            triples: Vec::new(),
            index: HashSet::new(),
            incident: Vec::new(),
        };
        store.set_triples(triples);
        store
    }

    fn set_triples(&mut self, triples: Vec<Triple>) {
        let n = self.vocab.n_entities();
        let mut incident = vec![Vec::new(); n];
        let mut index = HashSet::with_capacity(triples.len());
        for (i, t) in triples.iter().enumerate() {
            index.insert(t.key());
            incident[t.subject.index()].push(i as u32);
            incident[t.object.index()].push(i as u32);
        }
        self.triples = triples;
        self.index = index;
        self.incident = incident;
    }

    /// Same vocabulary, attributes and types with a different triple set
    /// (used for train/test views).
    pub fn with_triples(&self, triples: Vec<Triple>) -> MultiGraphStore {
        let mut store = MultiGraphStore {
            vocab: self.vocab.clone(),
            entity_graph: self.entity_graph.clone(),
            entity_types: self.entity_types.clone(),
            attributes: self.attributes.clone(),
            triples: Vec::new(),
            index: HashSet::new(),
            incident: Vec::new(),
        };
        store.set_triples(triples);
        store
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn n_entities(&self) -> usize {
        self.vocab.n_entities()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn attributes(&self) -> &[AttributeRecord] {
        &self.attributes
    }

    pub fn contains(&self, s: EntityId, r: RelationId, o: EntityId) -> bool {
        self.index.contains(&(s.0, r.0, o.0))
    }

    pub fn graph_of(&self, e: EntityId) -> GraphId {
        self.entity_graph[e.index()]
    }

    pub fn types_of(&self, e: EntityId) -> &[TypeId] {
        &self.entity_types[e.index()]
    }

    /// First-listed type.
    pub fn primary_type(&self, e: EntityId) -> Option<TypeId> {
        self.entity_types[e.index()].first().copied()
    }

    /// Indices (into [`triples`](Self::triples)) of triples mentioning `e`, ascending.
    pub fn incident(&self, e: EntityId) -> &[u32] {
        &self.incident[e.index()]
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> {
        (0..self.n_entities() as u32).map(EntityId)
    }

    pub fn entities_in(&self, g: GraphId) -> impl Iterator<Item = EntityId> + '_ {
        self.entities().filter(move |&e| self.graph_of(e) == g)
    }

    pub fn graphs(&self) -> impl Iterator<Item = GraphId> {
        (0..self.vocab.graphs.len() as u32).map(GraphId)
    }
}
