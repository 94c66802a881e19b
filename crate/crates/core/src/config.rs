//! Run configuration: one flat `key = value` namespace covering the model,
//! training, evaluation and file locations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::context::WalkConfig;
use crate::error::{Error, Result};
use crate::eval::ClassifierConfig;
use crate::model::{Aggregator, ModelConfig, Variant};
use crate::numerics::Activation;
use crate::store::{DataPaths, LoadOptions, NegativeLabelConfig};
use crate::train::{CorruptMode, TrainConfig};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "LINKNBED_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub walks: WalkConfig,
    pub load: LoadOptions,
    pub negative_labels: NegativeLabelConfig,
    pub train_fraction: f64,
    pub unsupervised: bool,
    pub both_sides: bool,
    pub classifier: ClassifierConfig,
    pub gradcheck_probes: usize,
    pub gradcheck_h: f64,
    pub gradcheck_tolerance: f64,
    pub gradcheck_batch: usize,
    /// Corruptions and label negatives per triple in the checked batch; small
    /// so that the summed loss leaves room for f64 central differences.
    pub gradcheck_negatives: usize,
    pub gradcheck_label_negatives: usize,
    pub gradcheck_entities: usize,
    /// Width of every embedding on the random gradient-check instance.
    pub gradcheck_dim: usize,
    /// Directory holding `triples.tsv`, `attributes.tsv`, `types.tsv`, `labels.tsv`.
    pub data_dir: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub checkpoint_dir: PathBuf,
    /// Save a checkpoint every this many epochs (0: only the final one).
    pub checkpoint_every: usize,
    pub metrics_out: Option<PathBuf>,
    pub trace_out: Option<PathBuf>,
    pub verdicts_out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            walks: WalkConfig::default(),
            load: LoadOptions::default(),
            negative_labels: NegativeLabelConfig::default(),
            train_fraction: 0.6,
            unsupervised: false,
            both_sides: false,
            classifier: ClassifierConfig::default(),
            gradcheck_probes: 20,
            gradcheck_h: 1e-4,
            gradcheck_tolerance: 1e-4,
            gradcheck_batch: 8,
            gradcheck_negatives: 5,
            gradcheck_label_negatives: 3,
            gradcheck_entities: 30,
            gradcheck_dim: 8,
            data_dir: None,
            cache: None,
            checkpoint_dir: PathBuf::from("checkpoints"),
            checkpoint_every: 0,
            metrics_out: None,
            trace_out: None,
            verdicts_out: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean {value:?} for `{key}`"))),
    }
}

fn activation(key: &str, value: &str) -> Result<Activation> {
    Activation::from_name(value).ok_or_else(|| Error::Config(format!("unknown activation {value:?} for `{key}`")))
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn path_value(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    /// Sets one key. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "variant" => self.model.variant = Variant::from_name(v)?,
            "entity_dim" => self.model.entity_dim = parse(key, v)?,
            "relation_dim" => self.model.relation_dim = parse(key, v)?,
            "type_dim" => self.model.type_dim = parse(key, v)?,
            "attr_dim" => self.model.attr_dim = parse(key, v)?,
            "atomic_activation" => self.model.atomic_activation = activation(key, v)?,
            "repr_activation" => self.model.repr_activation = activation(key, v)?,
            "attr_aggregator" => self.model.attr_aggregator = Aggregator::from_name(v)?,
            "max_value_tokens" => self.load.max_value_tokens = parse(key, v)?,
            "strict" => self.load.strict = parse_bool(key, v)?,
            "walks_per_node" => self.walks.walks_per_node = parse(key, v)?,
            "walk_length" => self.walks.walk_length = parse(key, v)?,
            "max_neighbors" => self.walks.max_neighbors = parse(key, v)?,
            "train_fraction" => self.train_fraction = parse(key, v)?,
            "neg_labels_same_type" => self.negative_labels.per_type = parse(key, v)?,
            "neg_labels_cross_type" => self.negative_labels.cross_type = parse(key, v)?,
            "negatives_per_triple" => self.train.negatives = parse(key, v)?,
            "negative_labels_per_triple" => self.train.label_negatives = parse(key, v)?,
            "margin" => self.train.margin = parse(key, v)?,
            "task_weight" => self.train.task_weight = parse(key, v)?,
            "regularization" => self.train.regularization = parse(key, v)?,
            "lr" => self.train.lr = parse(key, v)?,
            "lr_decay" => self.train.lr_decay = parse(key, v)?,
            "beta1" => self.train.beta1 = parse(key, v)?,
            "beta2" => self.train.beta2 = parse(key, v)?,
            "epsilon" => self.train.epsilon = parse(key, v)?,
            "batch_size" => self.train.batch_size = parse(key, v)?,
            "epochs" => self.train.epochs = parse(key, v)?,
            "corrupt_mode" => {
                self.train.corrupt_mode =
                    CorruptMode::from_name(v).ok_or_else(|| Error::Config(format!("unknown corrupt_mode {v:?}")))?
            }
            "retry_budget" => self.train.retry_budget = parse(key, v)?,
            "threads" => self.train.threads = parse(key, v)?,
            "unsupervised" => self.unsupervised = parse_bool(key, v)?,
            "both_sides" => self.both_sides = parse_bool(key, v)?,
            "classifier_hidden" => self.classifier.hidden = parse(key, v)?,
            "classifier_epochs" => self.classifier.epochs = parse(key, v)?,
            "classifier_lr" => self.classifier.lr = parse(key, v)?,
            "classifier_batch_size" => self.classifier.batch_size = parse(key, v)?,
            "gradcheck_probes" => self.gradcheck_probes = parse(key, v)?,
            "gradcheck_h" => self.gradcheck_h = parse(key, v)?,
            "gradcheck_tolerance" => self.gradcheck_tolerance = parse(key, v)?,
            "gradcheck_batch" => self.gradcheck_batch = parse(key, v)?,
            "gradcheck_negatives" => self.gradcheck_negatives = parse(key, v)?,
            "gradcheck_label_negatives" => self.gradcheck_label_negatives = parse(key, v)?,
            "gradcheck_entities" => self.gradcheck_entities = parse(key, v)?,
            "gradcheck_dim" => self.gradcheck_dim = parse(key, v)?,
            "data_dir" => self.data_dir = path_value(v),
            "cache" => self.cache = path_value(v),
            "checkpoint_dir" => self.checkpoint_dir = PathBuf::from(v),
            "checkpoint_every" => self.checkpoint_every = parse(key, v)?,
            "metrics_out" => self.metrics_out = path_value(v),
            "trace_out" => self.trace_out = path_value(v),
            "verdicts_out" => self.verdicts_out = path_value(v),
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{origin}:{}: expected `key = value`", i + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies the seed override from the environment, if present.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = parse(SEED_ENV, v.trim())?;
        }
        Ok(())
    }

    /// Every key with its current value, sorted by key.
    pub fn echo(&self) -> BTreeMap<&'static str, String> {
        let m = &self.model;
        let t = &self.train;
        let b = |x: bool| x.to_string();
        BTreeMap::from([
            ("seed", self.seed.to_string()),
            ("variant", m.variant.name().to_owned()),
            ("entity_dim", m.entity_dim.to_string()),
            ("relation_dim", m.relation_dim.to_string()),
            ("type_dim", m.type_dim.to_string()),
            ("attr_dim", m.attr_dim.to_string()),
            ("atomic_activation", m.atomic_activation.name().to_owned()),
            ("repr_activation", m.repr_activation.name().to_owned()),
            ("attr_aggregator", m.attr_aggregator.name().to_owned()),
            ("max_value_tokens", self.load.max_value_tokens.to_string()),
            ("strict", b(self.load.strict)),
            ("walks_per_node", self.walks.walks_per_node.to_string()),
            ("walk_length", self.walks.walk_length.to_string()),
            ("max_neighbors", self.walks.max_neighbors.to_string()),
            ("train_fraction", self.train_fraction.to_string()),
            ("neg_labels_same_type", self.negative_labels.per_type.to_string()),
            ("neg_labels_cross_type", self.negative_labels.cross_type.to_string()),
            ("negatives_per_triple", t.negatives.to_string()),
            ("negative_labels_per_triple", t.label_negatives.to_string()),
            ("margin", t.margin.to_string()),
            ("task_weight", t.task_weight.to_string()),
            ("regularization", t.regularization.to_string()),
            ("lr", t.lr.to_string()),
            ("lr_decay", t.lr_decay.to_string()),
            ("beta1", t.beta1.to_string()),
            ("beta2", t.beta2.to_string()),
            ("epsilon", t.epsilon.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("epochs", t.epochs.to_string()),
            ("corrupt_mode", t.corrupt_mode.name().to_owned()),
            ("retry_budget", t.retry_budget.to_string()),
            ("threads", t.threads.to_string()),
            ("unsupervised", b(self.unsupervised)),
            ("both_sides", b(self.both_sides)),
            ("classifier_hidden", self.classifier.hidden.to_string()),
            ("classifier_epochs", self.classifier.epochs.to_string()),
            ("classifier_lr", self.classifier.lr.to_string()),
            ("classifier_batch_size", self.classifier.batch_size.to_string()),
            ("gradcheck_probes", self.gradcheck_probes.to_string()),
            ("gradcheck_h", self.gradcheck_h.to_string()),
            ("gradcheck_tolerance", self.gradcheck_tolerance.to_string()),
            ("gradcheck_batch", self.gradcheck_batch.to_string()),
            ("gradcheck_negatives", self.gradcheck_negatives.to_string()),
            ("gradcheck_label_negatives", self.gradcheck_label_negatives.to_string()),
            ("gradcheck_entities", self.gradcheck_entities.to_string()),
            ("gradcheck_dim", self.gradcheck_dim.to_string()),
            ("data_dir", opt_path(&self.data_dir)),
            ("cache", opt_path(&self.cache)),
            ("checkpoint_dir", self.checkpoint_dir.display().to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
            ("metrics_out", opt_path(&self.metrics_out)),
            ("trace_out", opt_path(&self.trace_out)),
            ("verdicts_out", opt_path(&self.verdicts_out)),
        ])
    }

    /// `key = value` lines in key order; parses back to an equal config.
    pub fn echo_text(&self) -> String {
        self.echo().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Propagates the global seed into every seeded component.
    pub fn resolved(&self) -> RunConfig {
        let mut c = self.clone();
        c.train.seed = c.seed;
        c.walks.seed = c.seed;
        c.negative_labels.seed = c.seed;
        c.classifier.seed = c.seed;
        if c.unsupervised {
            c.train.task_weight = 1.0;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie strictly between 0 and 1".into()));
        }
        if self.walks.walks_per_node == 0 || self.walks.walk_length == 0 {
            return Err(Error::Config("walks_per_node and walk_length must be at least 1".into()));
        }
        if self.classifier.hidden == 0 {
            return Err(Error::Config("classifier_hidden must be at least 1".into()));
        }
        Ok(())
    }

    pub fn data_paths(&self) -> Result<DataPaths> {
        self.data_dir
            .as_ref()
            .map(|d| DataPaths::in_dir(d))
            .ok_or_else(|| Error::Config("data_dir is not set".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_configuration() {
        let c = RunConfig::default();
        assert_eq!(c.model.entity_dim, 256);
        assert_eq!(c.model.relation_dim, 64);
        assert_eq!(c.model.attr_dim, 16);
        assert_eq!(c.model.type_dim, 16);
        assert_eq!(c.load.max_value_tokens, 512);
        assert_eq!(c.train.batch_size, 2000);
        assert_eq!(c.train.negatives, 50);
        assert_eq!(c.train.label_negatives, 20);
        assert_eq!(c.train.task_weight, 0.6);
        assert_eq!(c.train.margin, 1.0);
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.train.lr, 0.01);
        assert_eq!(c.classifier.hidden, 64);
        assert_eq!(c.train_fraction, 0.6);
        assert_eq!((c.negative_labels.per_type, c.negative_labels.cross_type), (10, 10));
    }

    #[test]
    fn echo_round_trips() {
        let mut c = RunConfig::default();
        c.apply_text("variant = embed_attr\nlr = 0.005 # comment\ndata_dir = /tmp/x\n", "t").unwrap();
        let mut d = RunConfig::default();
        d.apply_text(&c.echo_text(), "echo").unwrap();
        assert_eq!(c, d);
        assert_eq!(c.model.variant, Variant::EmbedAttr);
    }

    #[test]
    fn bad_input_is_reported_with_line() {
        let mut c = RunConfig::default();
        let err = c.apply_text("epochs = 3\nbogus = 1\n", "cfg").unwrap_err().to_string();
        assert!(err.contains("cfg:2") && err.contains("bogus"), "{err}");
        assert!(c.apply_text("epochs = many", "cfg").is_err());
        assert!(c.apply_text("no equals sign", "cfg").is_err());
    }

    #[test]
    fn unsupervised_forces_relational_only_training() {
        let mut c = RunConfig::default();
        c.set("unsupervised", "true").unwrap();
        c.set("seed", "9").unwrap();
        let r = c.resolved();
        assert_eq!(r.train.task_weight, 1.0);
        assert_eq!((r.train.seed, r.walks.seed, r.classifier.seed), (9, 9, 9));
    }
}
