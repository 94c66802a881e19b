use std::collections::{HashMap, HashSet};

use super::{
    AttrKeyId, AttributeRecord, EntityId, GraphId, Interner, MultiGraphStore, RelationId, TokenId, Triple, TypeId,
    Vocab, OOV_TOKEN,
};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    /// Reject self-loops and duplicate triples instead of dropping them.
    pub strict: bool,
    /// Cap on distinct attribute value tokens; rarer tokens map to `<oov>`.
    pub max_value_tokens: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            strict: false,
            max_value_tokens: 512,
        }
    }
}

/// Records dropped while building a store.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
    pub attributes_dropped: usize,
    pub types_dropped: usize,
}

impl LoadReport {
    pub fn warnings(&self) -> usize {
        self.self_loops_dropped + self.duplicates_dropped + self.attributes_dropped + self.types_dropped
    }
}

/// Incremental construction of a [`MultiGraphStore`] from named records.
///
/// Entities are registered by the triples that mention them; attribute and
/// type records for entities that never occur in a triple are dropped.
#[derive(Debug)]
pub struct StoreBuilder {
    opts: LoadOptions,
    graphs: Interner,
    entities: Interner,
    relations: Interner,
    entity_graph: Vec<GraphId>,
    triples: Vec<Triple>,
    seen: HashSet<(u32, u32, u32)>,
    attributes: Vec<(String, String, String)>,
    types: Vec<(String, String)>,
    report: LoadReport,
}

pub(crate) fn normalize_value(raw: &str) -> String {
    raw.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

impl StoreBuilder {
    pub fn new(opts: LoadOptions) -> Self {
        StoreBuilder {
            opts,
            graphs: Interner::default(),
            entities: Interner::default(),
            relations: Interner::default(),
            entity_graph: Vec::new(),
            triples: Vec::new(),
            seen: HashSet::new(),
            attributes: Vec::new(),
            types: Vec::new(),
            report: LoadReport::default(),
        }
    }

    fn entity(&mut self, name: &str, graph: GraphId) -> std::result::Result<EntityId, String> {
        if let Some(id) = self.entities.get(name) {
            let owner = self.entity_graph[id as usize];
            if owner != graph {
                return Err(format!(
                    "entity {name:?} belongs to graph {:?} but appears in graph {:?}",
                    self.graphs.name(owner.0),
                    self.graphs.name(graph.0)
                ));
            }
            return Ok(EntityId(id));
        }
        let id = self.entities.intern(name);
        self.entity_graph.push(graph);
        Ok(EntityId(id))
    }

    /// Adds one triple. Errors describe the rejected record without location.
    pub fn add_triple(&mut self, graph: &str, subject: &str, relation: &str, object: &str) -> std::result::Result<(), String> {
        if subject == object {
            if self.opts.strict {
                return Err(format!("self-loop on {subject:?}"));
            }
            self.report.self_loops_dropped += 1;
            return Ok(());
        }
        let g = GraphId(self.graphs.intern(graph));
        for name in [subject, object] {
            if let Some(id) = self.entities.get(name) {
                let owner = self.entity_graph[id as usize];
                if owner != g {
                    return Err(format!(
                        "entity {name:?} belongs to graph {:?} but appears in graph {graph:?}",
                        self.graphs.name(owner.0)
                    ));
                }
            }
        }
        let s = self.entity(subject, g)?;
        let o = self.entity(object, g)?;
        let r = RelationId(self.relations.intern(relation));
        let t = Triple::new(s, r, o, g);
        if !self.seen.insert(t.key()) {
            if self.opts.strict {
                return Err(format!("duplicate triple ({subject}, {relation}, {object})"));
            }
            self.report.duplicates_dropped += 1;
            return Ok(());
        }
        self.triples.push(t);
        Ok(())
    }

    pub fn add_attribute(&mut self, entity: &str, key: &str, value: &str) {
        self.attributes.push((entity.to_owned(), key.to_owned(), normalize_value(value)));
    }

    pub fn add_type(&mut self, entity: &str, ty: &str) {
        self.types.push((entity.to_owned(), ty.to_owned()));
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn build(self) -> Result<(MultiGraphStore, LoadReport)> {
        let StoreBuilder {
            opts,
            graphs,
            entities,
            relations,
            entity_graph,
            triples,
            attributes,
            types,
            mut report,
            ..
        } = self;

        let kept_attrs: Vec<(EntityId, String, String)> = attributes
            .into_iter()
            .filter_map(|(e, k, v)| match entities.get(&e) {
                Some(id) if !v.is_empty() => Some((EntityId(id), k, v)),
                _ => {
                    report.attributes_dropped += 1;
                    None
                }
            })
            .collect();

        let mut counts: HashMap<&str, usize> = HashMap::new();
        for (_, _, v) in &kept_attrs {
            for tok in v.split(' ') {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|(t, _)| *t != OOV_TOKEN).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(opts.max_value_tokens);
        let mut tokens = Interner::default();
        tokens.intern(OOV_TOKEN);
        for (tok, _) in &ranked {
            tokens.intern(tok);
        }

        let mut attr_keys = Interner::default();
        let records: Vec<AttributeRecord> = kept_attrs
            .iter()
            .map(|(e, k, v)| AttributeRecord {
                entity: *e,
                key: AttrKeyId(attr_keys.intern(k)),
                value_tokens: v.split(' ').map(|t| TokenId(tokens.get(t).unwrap_or(0))).collect(),
                value: v.clone(),
            })
            .collect();

        let mut type_names = Interner::default();
        let mut entity_types: Vec<Vec<TypeId>> = vec![Vec::new(); entities.len()];
        for (e, ty) in &types {
            let Some(id) = entities.get(e) else {
                report.types_dropped += 1;
                continue;
            };
            let t = TypeId(type_names.intern(ty));
            let list = &mut entity_types[id as usize];
            if !list.contains(&t) {
                list.push(t);
            }
        }

        let vocab = Vocab {
            graphs,
            entities,
            relations,
            types: type_names,
            attr_keys,
            tokens,
        };
        if report.warnings() > 0 {
            log::warn!(
                "dropped {} self-loops, {} duplicate triples, {} attribute records, {} type records",
                report.self_loops_dropped,
                report.duplicates_dropped,
                report.attributes_dropped,
                report.types_dropped
            );
        }
        Ok((MultiGraphStore::from_parts(vocab, entity_graph, entity_types, records, triples), report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_loop_dropped_by_default() {
        let mut b = StoreBuilder::new(LoadOptions::default());
        b.add_triple("X", "e1", "r1", "e2").unwrap();
        b.add_triple("X", "e1", "r1", "e1").unwrap();
        b.add_triple("X", "e2", "r1", "e3").unwrap();
        let (store, report) = b.build().unwrap();
        assert_eq!(store.triples().len(), 2);
        assert_eq!(report.self_loops_dropped, 1);
        assert_eq!(report.warnings(), 1);
    }

    #[test]
    fn strict_mode_rejects_duplicates() {
        let mut b = StoreBuilder::new(LoadOptions {
            strict: true,
            ..Default::default()
        });
        b.add_triple("X", "a", "r", "b").unwrap();
        assert!(b.add_triple("X", "a", "r", "b").is_err());
        assert!(b.add_triple("X", "a", "r", "a").is_err());
    }

    #[test]
    fn entity_cannot_change_graph() {
        let mut b = StoreBuilder::new(LoadOptions::default());
        b.add_triple("X", "a", "r", "b").unwrap();
        let err = b.add_triple("Y", "c", "r", "a").unwrap_err();
        assert!(err.contains("belongs to graph"));
    }

    #[test]
    fn tokens_capped_by_frequency() {
        let mut b = StoreBuilder::new(LoadOptions {
            strict: false,
            max_value_tokens: 2,
        });
        b.add_triple("X", "a", "r", "b").unwrap();
        b.add_attribute("a", "name", "Foo Bar");
        b.add_attribute("b", "name", "foo baz  BAR");
        b.add_attribute("b", "nick", "qux");
        b.add_attribute("zzz", "name", "unknown entity");
        b.add_attribute("a", "blank", "   ");
        let (store, report) = b.build().unwrap();
        let v = store.vocab();
        assert_eq!(v.tokens.names(), &["<oov>", "bar", "foo"]);
        assert_eq!(report.attributes_dropped, 2);
        let recs = store.attributes();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[1].value, "foo baz bar");
        assert_eq!(recs[1].value_tokens, vec![TokenId(2), TokenId(0), TokenId(1)]);
    }

    #[test]
    fn primary_type_is_first_listed() {
        let mut b = StoreBuilder::new(LoadOptions::default());
        b.add_triple("X", "a", "r", "b").unwrap();
        b.add_type("a", "film");
        b.add_type("a", "thing");
        b.add_type("a", "film");
        let (store, _) = b.build().unwrap();
        let a = store.vocab().entity("a").unwrap();
        assert_eq!(store.types_of(a).len(), 2);
        assert_eq!(store.vocab().types.name(store.primary_type(a).unwrap().0), "film");
        assert_eq!(store.primary_type(store.vocab().entity("b").unwrap()), None);
    }
}
