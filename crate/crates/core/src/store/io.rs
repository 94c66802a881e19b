//! TSV ingestion and canonical serialization.
//!
//! Formats (UTF-8, tab separated, one record per line; blank lines and lines
//! starting with `#` are ignored):
//!
//! * triples: `graph  subject  relation  object`
//! * attributes: `entity  key  value`
//! * types: `entity  type` (repeatable, first listed is primary)
//! * labels: `entity_x  entity_y  {0|1}`

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{LabeledPair, LinkageLabelSet, LoadOptions, LoadReport, MultiGraphStore, StoreBuilder};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPaths {
    pub triples: PathBuf,
    pub attributes: PathBuf,
    pub types: PathBuf,
    pub labels: PathBuf,
}

impl DataPaths {
    /// Standard file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        DataPaths {
            triples: dir.join("triples.tsv"),
            attributes: dir.join("attributes.tsv"),
            types: dir.join("types.tsv"),
            labels: dir.join("labels.tsv"),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// `(line number, fields)` for every non-blank, non-comment line.
fn records<'a>(text: &'a str) -> impl Iterator<Item = (usize, Vec<&'a str>)> + 'a {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').collect()))
        }
    })
}

fn expect_fields<'a>(file: &Path, line: usize, fields: &[&'a str], n: usize) -> Result<()> {
    if fields.len() != n || fields.iter().any(|f| f.trim().is_empty()) {
        return Err(Error::Parse {
            file: file.display().to_string(),
            line,
            message: format!("expected {n} non-empty tab-separated fields, found {}", fields.len()),
        });
    }
    Ok(())
}

/// Loads all four files into a store and a validated label set.
pub fn load_graphs(paths: &DataPaths, opts: LoadOptions) -> Result<(MultiGraphStore, LinkageLabelSet, LoadReport)> {
    let mut builder = StoreBuilder::new(opts);

    let text = read(&paths.triples)?;
    for (line, f) in records(&text) {
        expect_fields(&paths.triples, line, &f, 4)?;
        builder
            .add_triple(f[0].trim(), f[1].trim(), f[2].trim(), f[3].trim())
            .map_err(|m| Error::Validation(format!("{}:{line}: {m}", paths.triples.display())))?;
    }

    let text = read(&paths.attributes)?;
    for (line, f) in records(&text) {
        expect_fields(&paths.attributes, line, &f, 3)?;
        builder.add_attribute(f[0].trim(), f[1].trim(), f[2]);
    }

    let text = read(&paths.types)?;
    for (line, f) in records(&text) {
        expect_fields(&paths.types, line, &f, 2)?;
        builder.add_type(f[0].trim(), f[1].trim());
    }

    let (store, report) = builder.build()?;

    let text = read(&paths.labels)?;
    let mut pairs = Vec::new();
    for (line, f) in records(&text) {
        expect_fields(&paths.labels, line, &f, 3)?;
        let positive = match f[2].trim() {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::Parse {
                    file: paths.labels.display().to_string(),
                    line,
                    message: format!("label must be 0 or 1, found {other:?}"),
                })
            }
        };
        let lookup = |name: &str| {
            store.vocab().entity(name.trim()).ok_or_else(|| {
                Error::Validation(format!("{}:{line}: unknown entity {name:?}", paths.labels.display()))
            })
        };
        let (a, b) = (lookup(f[0])?, lookup(f[1])?);
        if store.graph_of(a) == store.graph_of(b) {
            return Err(Error::Validation(format!(
                "{}:{line}: label pair ({}, {}) lies within one graph",
                paths.labels.display(),
                f[0].trim(),
                f[1].trim()
            )));
        }
        pairs.push(LabeledPair { a, b, positive });
    }
    let labels = LinkageLabelSet::from_pairs(&store, pairs)?;
    Ok((store, labels, report))
}

fn write_lines(path: &Path, mut lines: Vec<String>, sort: bool) -> Result<()> {
    if sort {
        lines.sort();
        lines.dedup();
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for l in &lines {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Sorted, deduplicated triples.
pub fn write_triples(store: &MultiGraphStore, path: &Path) -> Result<()> {
    let v = store.vocab();
    let lines = store
        .triples()
        .iter()
        .map(|t| {
            format!(
                "{}\t{}\t{}\t{}",
                v.graphs.name(t.graph.0),
                v.entities.name(t.subject.0),
                v.relations.name(t.relation.0),
                v.entities.name(t.object.0)
            )
        })
        .collect();
    write_lines(path, lines, true)
}

pub fn write_attributes(store: &MultiGraphStore, path: &Path) -> Result<()> {
    let v = store.vocab();
    let lines = store
        .attributes()
        .iter()
        .map(|a| format!("{}\t{}\t{}", v.entities.name(a.entity.0), v.attr_keys.name(a.key.0), a.value))
        .collect();
    write_lines(path, lines, true)
}

/// Entities sorted by name; each entity's types keep their listed order.
pub fn write_types(store: &MultiGraphStore, path: &Path) -> Result<()> {
    let v = store.vocab();
    let mut entities: Vec<_> = store.entities().filter(|&e| !store.types_of(e).is_empty()).collect();
    entities.sort_by_key(|&e| v.entity_name(e));
    let lines = entities
        .into_iter()
        .flat_map(|e| {
            store
                .types_of(e)
                .iter()
                .map(move |t| format!("{}\t{}", v.entity_name(e), v.types.name(t.0)))
        })
        .collect();
    write_lines(path, lines, false)
}

pub fn write_labels(store: &MultiGraphStore, labels: &LinkageLabelSet, path: &Path) -> Result<()> {
    let v = store.vocab();
    let lines = labels
        .pairs()
        .iter()
        .map(|p| format!("{}\t{}\t{}", v.entity_name(p.a), v.entity_name(p.b), u8::from(p.positive)))
        .collect();
    write_lines(path, lines, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn dataset(dir: &Path, triples: &str, labels: &str) -> DataPaths {
        write(dir, "triples.tsv", triples);
        write(dir, "attributes.tsv", "");
        write(dir, "types.tsv", "");
        write(dir, "labels.tsv", labels);
        DataPaths::in_dir(dir)
    }

    #[test]
    fn empty_files_give_empty_store() {
        let dir = tempfile::tempdir().unwrap();
        let paths = dataset(dir.path(), "", "");
        let (store, labels, report) = load_graphs(&paths, LoadOptions::default()).unwrap();
        assert_eq!(store.n_entities(), 0);
        assert!(store.triples().is_empty());
        assert!(labels.is_empty());
        assert_eq!(report.warnings(), 0);
    }

    #[test]
    fn self_loop_line_dropped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let paths = dataset(dir.path(), "X\te1\tr1\te2\nX\te1\tr1\te1\nX\te2\tr2\te3\n", "");
        let (store, _, report) = load_graphs(&paths, LoadOptions::default()).unwrap();
        assert_eq!(store.triples().len(), 2);
        assert_eq!(report.self_loops_dropped, 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let paths = dataset(dir.path(), "X\ta\tr\tb\nX\ta\tr\n", "");
        match load_graphs(&paths, LoadOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn label_validation() {
        let dir = tempfile::tempdir().unwrap();
        let triples = "X\ta\tr\tb\nY\tc\tr\td\n";
        let paths = dataset(dir.path(), triples, "a\tzz\t1\n");
        assert!(matches!(load_graphs(&paths, LoadOptions::default()), Err(Error::Validation(_))));
        let paths = dataset(dir.path(), triples, "a\tb\t0\n");
        assert!(matches!(load_graphs(&paths, LoadOptions::default()), Err(Error::Validation(_))));
        let paths = dataset(dir.path(), triples, "a\tc\t2\n");
        assert!(matches!(load_graphs(&paths, LoadOptions::default()), Err(Error::Parse { line: 1, .. })));
        let paths = dataset(dir.path(), triples, "a\tc\t1\nd\tb\t0\n");
        let (_, labels, _) = load_graphs(&paths, LoadOptions::default()).unwrap();
        assert_eq!(labels.n_positive(), 1);
        assert_eq!(labels.n_negative(), 1);
    }
}
