//! Desk-scale synthetic dual-graph generator.
//!
//! Graph X is a clustered random multi-relational graph whose relations have
//! preferred subject/object types. Graph Y holds renamed copies of a subset of
//! X's entities (edges and attributes independently dropped) plus fresh
//! entities with their own edges. The renamed pairs are the positive labels.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::{index::sample, SliceRandom};
use rand::Rng;

use super::{
    generate_negative_labels, write_attributes, write_labels, write_triples, write_types, LabeledPair,
    LinkageLabelSet, LoadOptions, NegativeLabelConfig, StoreBuilder,
};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_entities: usize,
    pub n_relations: usize,
    pub n_types: usize,
    pub n_attr_keys: usize,
    /// Target triples per entity in X.
    pub density: f64,
    pub duplicate_fraction: f64,
    pub edge_drop: f64,
    pub attr_drop: f64,
    /// Number of distinct attribute value tokens to draw from.
    pub token_pool: usize,
    pub negatives: NegativeLabelConfig,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_entities: 200,
            n_relations: 8,
            n_types: 5,
            n_attr_keys: 6,
            density: 6.0,
            duplicate_fraction: 0.2,
            edge_drop: 0.2,
            attr_drop: 0.2,
            token_pool: 300,
            negatives: NegativeLabelConfig::default(),
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let rate = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        rate("duplicate_fraction", self.duplicate_fraction)?;
        rate("edge_drop", self.edge_drop)?;
        rate("attr_drop", self.attr_drop)?;
        if self.n_entities < 2 || self.n_relations == 0 || self.n_types == 0 {
            return Err(Error::Config("need at least 2 entities, 1 relation and 1 type".into()));
        }
        if self.density < 1.0 {
            return Err(Error::Config(format!("density must be >= 1 triple per entity, got {}", self.density)));
        }
        if self.n_attr_keys > 0 && self.token_pool == 0 {
            return Err(Error::Config("token_pool must be positive when attributes are generated".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSummary {
    pub x_entities: usize,
    pub y_entities: usize,
    pub x_triples: usize,
    pub y_triples: usize,
    pub positives: usize,
    pub negatives: usize,
}

struct Profile {
    cluster: usize,
    types: Vec<usize>,
    attrs: Vec<(usize, String)>,
}

fn random_profile(cfg: &SyntheticConfig, n_clusters: usize, rng: &mut StreamRng) -> Profile {
    let primary = rng.random_range(0..cfg.n_types);
    let mut types = vec![primary];
    if cfg.n_types > 1 && rng.random_bool(0.2) {
        let mut second = rng.random_range(0..cfg.n_types - 1);
        if second >= primary {
            second += 1;
        }
        types.push(second);
    }
    let mut attrs = Vec::new();
    if cfg.n_attr_keys > 0 {
        for k in 0..cfg.n_attr_keys {
            if rng.random_bool(0.5) {
                attrs.push(k);
            }
        }
        if attrs.is_empty() {
            attrs.push(rng.random_range(0..cfg.n_attr_keys));
        }
    }
    let attrs = attrs
        .into_iter()
        .map(|k| {
            let len = rng.random_range(1..=3);
            let value: Vec<String> = (0..len).map(|_| format!("w{}", rng.random_range(0..cfg.token_pool))).collect();
            (k, value.join(" "))
        })
        .collect();
    Profile {
        cluster: rng.random_range(0..n_clusters),
        types,
        attrs,
    }
}

struct EdgeSet {
    edges: Vec<(usize, usize, usize)>,
    seen: HashSet<(usize, usize, usize)>,
    degree: Vec<usize>,
}

impl EdgeSet {
    fn new(n: usize) -> Self {
        EdgeSet {
            edges: Vec::new(),
            seen: HashSet::new(),
            degree: vec![0; n],
        }
    }

    fn add(&mut self, s: usize, r: usize, o: usize) -> bool {
        if s == o || !self.seen.insert((s, r, o)) {
            return false;
        }
        self.edges.push((s, r, o));
        self.degree[s] += 1;
        self.degree[o] += 1;
        true
    }
}

/// Typed, clustered edges among `profiles`, attaching every node at least once.
fn random_edges(
    cfg: &SyntheticConfig,
    profiles: &[Profile],
    signatures: &[(usize, usize)],
    target: usize,
    rng: &mut StreamRng,
) -> EdgeSet {
    let n = profiles.len();
    let mut set = EdgeSet::new(n);
    if n < 2 {
        return set;
    }
    let by_type: Vec<Vec<usize>> = (0..cfg.n_types)
        .map(|t| (0..n).filter(|&i| profiles[i].types[0] == t).collect())
        .collect();
    let pick_object = |rng: &mut StreamRng, s: usize, r: usize| -> usize {
        let range = &by_type[signatures[r].1];
        let pool: Vec<usize> = if rng.random_bool(0.6) {
            range.iter().copied().filter(|&o| profiles[o].cluster == profiles[s].cluster).collect()
        } else {
            range.clone()
        };
        if pool.is_empty() {
            rng.random_range(0..n)
        } else {
            pool[rng.random_range(0..pool.len())]
        }
    };

    let mut attempts = 0;
    while set.edges.len() < target && attempts < 50 * target.max(1) {
        attempts += 1;
        let r = rng.random_range(0..cfg.n_relations);
        let domain = &by_type[signatures[r].0];
        let s = if domain.is_empty() {
            rng.random_range(0..n)
        } else {
            domain[rng.random_range(0..domain.len())]
        };
        let o = pick_object(rng, s, r);
        set.add(s, r, o);
    }
    for i in 0..n {
        let mut tries = 0;
        while set.degree[i] == 0 && tries < 100 {
            tries += 1;
            let r = rng.random_range(0..cfg.n_relations);
            let o = pick_object(rng, i, r);
            if rng.random_bool(0.5) {
                set.add(i, r, o);
            } else {
                set.add(o, r, i);
            }
        }
        if set.degree[i] == 0 {
            set.add(i, 0, (i + 1) % n);
        }
    }
    set
}

/// Writes `triples.tsv`, `attributes.tsv`, `types.tsv`, `labels.tsv` and
/// `rename_map.tsv` into `out_dir`.
pub fn generate_synthetic_pair(cfg: &SyntheticConfig, out_dir: &Path) -> Result<SyntheticSummary> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, Purpose::Synthetic, 0);
    let n = cfg.n_entities;
    let n_clusters = (n / 20).max(1);
    let signatures: Vec<(usize, usize)> = (0..cfg.n_relations)
        .map(|_| (rng.random_range(0..cfg.n_types), rng.random_range(0..cfg.n_types)))
        .collect();

    let x_profiles: Vec<Profile> = (0..n).map(|_| random_profile(cfg, n_clusters, &mut rng)).collect();
    let target = (cfg.density * n as f64).round() as usize;
    let x_edges = random_edges(cfg, &x_profiles, &signatures, target, &mut rng);

    // Y = copies of the duplicated subset followed by fresh entities
    let n_dup = (cfg.duplicate_fraction * n as f64).round() as usize;
    let mut dup: Vec<usize> = sample(&mut rng, n, n_dup).into_vec();
    dup.sort_unstable();
    let mut y_of_x = vec![None; n];
    for (k, &i) in dup.iter().enumerate() {
        y_of_x[i] = Some(k);
    }
    let n_fresh = n - n_dup;
    let n_y = n_dup + n_fresh;
    let mut y_names: Vec<usize> = (0..n_y).collect();
    y_names.shuffle(&mut rng);

    let mut y_profiles: Vec<Profile> = dup
        .iter()
        .map(|&i| {
            let src = &x_profiles[i];
            Profile {
                cluster: src.cluster,
                types: src.types.clone(),
                attrs: src.attrs.iter().filter(|_| !rng.random_bool(cfg.attr_drop)).cloned().collect(),
            }
        })
        .collect();
    y_profiles.extend((0..n_fresh).map(|_| random_profile(cfg, n_clusters, &mut rng)));

    let mut y_edges = EdgeSet::new(n_y);
    let mut dropped: Vec<(usize, usize, usize)> = Vec::new();
    for &(s, r, o) in &x_edges.edges {
        if let (Some(ys), Some(yo)) = (y_of_x[s], y_of_x[o]) {
            if rng.random_bool(cfg.edge_drop) {
                dropped.push((ys, r, yo));
            } else {
                y_edges.add(ys, r, yo);
            }
        }
    }
    if n_fresh > 0 {
        let fresh_target = (cfg.density * n_fresh as f64).round() as usize;
        let mut attempts = 0;
        let start = y_edges.edges.len();
        while y_edges.edges.len() - start < fresh_target && attempts < 50 * fresh_target {
            attempts += 1;
            let f = n_dup + rng.random_range(0..n_fresh);
            let other = rng.random_range(0..n_y);
            let r = rng.random_range(0..cfg.n_relations);
            if rng.random_bool(0.5) {
                y_edges.add(f, r, other);
            } else {
                y_edges.add(other, r, f);
            }
        }
    }
    for k in 0..n_y {
        if y_edges.degree[k] > 0 {
            continue;
        }
        if let Some(&(s, r, o)) = dropped.iter().find(|&&(s, _, o)| s == k || o == k) {
            y_edges.add(s, r, o);
            continue;
        }
        while y_edges.degree[k] == 0 && n_y > 1 {
            let other = rng.random_range(0..n_y);
            y_edges.add(k, rng.random_range(0..cfg.n_relations), other);
        }
    }

    let x_name = |i: usize| format!("x{i}");
    let y_name = |k: usize| format!("y{}", y_names[k]);
    let mut builder = StoreBuilder::new(LoadOptions {
        strict: true,
        max_value_tokens: usize::MAX,
    });
    for &(s, r, o) in &x_edges.edges {
        builder
            .add_triple("X", &x_name(s), &format!("rel{r}"), &x_name(o))
            .map_err(Error::Validation)?;
    }
    for &(s, r, o) in &y_edges.edges {
        builder
            .add_triple("Y", &y_name(s), &format!("rel{r}"), &y_name(o))
            .map_err(Error::Validation)?;
    }
    let profiles = x_profiles
        .iter()
        .enumerate()
        .map(|(i, p)| (x_name(i), p))
        .chain(y_profiles.iter().enumerate().map(|(k, p)| (y_name(k), p)));
    for (name, p) in profiles {
        for t in &p.types {
            builder.add_type(&name, &format!("type{t}"));
        }
        for (k, v) in &p.attrs {
            builder.add_attribute(&name, &format!("key{k}"), v);
        }
    }
    let (store, _) = builder.build()?;

    let entity = |name: String| store.vocab().entity(&name).expect("every generated entity has a triple");
    let positives = dup.iter().enumerate().map(|(k, &i)| LabeledPair {
        a: entity(x_name(i)),
        b: entity(y_name(k)),
        positive: true,
    });
    let positives = LinkageLabelSet::from_pairs(&store, positives)?;
    let labels = generate_negative_labels(&store, &positives, &cfg.negatives);

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_triples(&store, &out_dir.join("triples.tsv"))?;
    write_attributes(&store, &out_dir.join("attributes.tsv"))?;
    write_types(&store, &out_dir.join("types.tsv"))?;
    write_labels(&store, &labels, &out_dir.join("labels.tsv"))?;

    let rename_path = out_dir.join("rename_map.tsv");
    let mut rename: Vec<String> = dup.iter().enumerate().map(|(k, &i)| format!("{}\t{}", x_name(i), y_name(k))).collect();
    rename.sort();
    let mut f = fs::File::create(&rename_path).map_err(|e| Error::io(&rename_path, e))?;
    for line in rename {
        writeln!(f, "{line}").map_err(|e| Error::io(&rename_path, e))?;
    }

    Ok(SyntheticSummary {
        x_entities: n,
        y_entities: n_y,
        x_triples: x_edges.edges.len(),
        y_triples: y_edges.edges.len(),
        positives: labels.n_positive(),
        negatives: labels.n_negative(),
    })
}
