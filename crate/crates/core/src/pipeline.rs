//! End-to-end runs: load and split data, build contexts, train, evaluate,
//! score pair files and check gradients.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use crate::checkpoint::{checkpoint_path, Checkpoint};
use crate::config::RunConfig;
use crate::context::ContextCache;
use crate::error::{Error, Result};
use crate::eval::{
    auprc_from_q, link_prediction_metrics, linkage_score, unsupervised_linkage, verdicts_csv, LinkMetrics,
    VerdictRow,
};
use crate::model::{Encoder, ModelConfig, ParamSet, Variant, VocabSizes};
use crate::numerics::{GradCheckConfig, GradCheckReport};
use crate::store::{
    generate_negative_labels, load_graphs, split_dataset, LinkageLabelSet, LoadReport, MultiGraphStore, Triple,
};
use crate::testkit::RandomInstance;
use crate::train::{check_batch_gradients, train, LossContext, NegativeSampler, TrainInputs, TrainReport, TrainState};

/// Loaded data split into train and test parts, with contexts built from
/// the training triples only.
pub struct Prepared {
    pub full: MultiGraphStore,
    pub train_store: MultiGraphStore,
    pub test_triples: Vec<Triple>,
    pub train_labels: LinkageLabelSet,
    pub test_labels: LinkageLabelSet,
    pub cache: ContextCache,
    pub load_report: LoadReport,
}

impl Prepared {
    pub fn sizes(&self) -> VocabSizes {
        VocabSizes::of(self.full.vocab())
    }
}

/// `cfg` must already be [`resolved`](RunConfig::resolved).
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let (full, mut labels, load_report) = load_graphs(&cfg.data_paths()?, cfg.load)?;
    if load_report.warnings() > 0 {
        log::warn!("data load dropped records: {load_report:?}");
    }
    if labels.n_negative() == 0 {
        labels = generate_negative_labels(&full, &labels, &cfg.negative_labels);
        log::info!("generated {} negative linkage labels", labels.n_negative());
    }
    let split = split_dataset(&full, &labels, cfg.train_fraction, cfg.seed)?;
    let train_store = full.with_triples(split.train_triples);
    let cache = match &cfg.cache {
        Some(path) if path.exists() => ContextCache::load(path, &train_store, &cfg.walks)?,
        Some(path) => {
            let cache = ContextCache::build(&train_store, &cfg.walks);
            cache.save(path, &train_store, &cfg.walks)?;
            cache
        }
        None => ContextCache::build(&train_store, &cfg.walks),
    };
    Ok(Prepared {
        full,
        train_store,
        test_triples: split.test_triples,
        train_labels: split.train_labels,
        test_labels: split.test_labels,
        cache,
        load_report,
    })
}

fn shapes(model: &ModelConfig, sizes: &VocabSizes) -> Vec<(usize, usize)> {
    ParamSet::<f32>::shapes(model, sizes).to_vec()
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub state: TrainState,
    pub checkpoint: PathBuf,
    pub trace: PathBuf,
}

/// Trains from scratch, or continues `resume` up to the configured epoch count.
pub fn run_train(cfg: &RunConfig, resume: Option<Checkpoint>) -> Result<TrainOutcome> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    let data = prepare(&cfg)?;
    train_prepared(&cfg, &data, resume)
}

pub fn train_prepared(cfg: &RunConfig, data: &Prepared, resume: Option<Checkpoint>) -> Result<TrainOutcome> {
    let digest = data.full.vocab().digest();
    let sizes = data.sizes();
    let mut state = match resume {
        Some(ckpt) => {
            ckpt.ensure_digest(&digest)?;
            ckpt.ensure_shapes(&shapes(&cfg.model, &sizes))?;
            log::info!("resuming after epoch {}", ckpt.state.epochs_done);
            ckpt.state
        }
        None => TrainState::new(ParamSet::init(&cfg.model, &sizes, cfg.seed)),
    };
    let echo = cfg.echo_text();
    let make = |state: &TrainState| Checkpoint {
        config_echo: echo.clone(),
        vocab_digest: digest,
        seed: cfg.seed,
        state: state.clone(),
    };
    let inputs = TrainInputs {
        store: &data.train_store,
        labels: &data.train_labels,
        cache: &data.cache,
        model: &cfg.model,
        train: &cfg.train,
    };
    let every = cfg.checkpoint_every;
    let report = train(&inputs, &mut state, |st, summary| {
        if every > 0 && (summary.epoch + 1) % every == 0 {
            make(st).save(&checkpoint_path(&cfg.checkpoint_dir, Some(summary.epoch + 1)))?;
        }
        Ok(())
    })?;
    let checkpoint = checkpoint_path(&cfg.checkpoint_dir, None);
    make(&state).save(&checkpoint)?;
    let trace = cfg.trace_out.clone().unwrap_or_else(|| cfg.checkpoint_dir.join("trace.csv"));
    if let Some(dir) = trace.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    report.write_trace(&trace)?;
    Ok(TrainOutcome {
        report,
        state,
        checkpoint,
        trace,
    })
}

/// Run configuration for a stored checkpoint: its echo first, then `overrides`.
pub fn config_for_checkpoint(ckpt: &Checkpoint, overrides: impl FnOnce(&mut RunConfig) -> Result<()>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    cfg.apply_text(&ckpt.config_echo, "checkpoint config")?;
    overrides(&mut cfg)?;
    Ok(cfg)
}

fn checked_params(cfg: &RunConfig, data: &Prepared, ckpt: &Checkpoint) -> Result<()> {
    ckpt.ensure_digest(&data.full.vocab().digest())?;
    ckpt.ensure_shapes(&shapes(&cfg.model, &data.sizes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub graphs: BTreeMap<String, LinkMetrics>,
    /// `None` when the test labels lack a positive or a negative pair.
    pub auprc: Option<f64>,
    pub unsupervised: bool,
    pub n_pairs: usize,
    /// Supervised mode only: `e_x,e_y,q,label` rows for the test pairs.
    pub verdicts: Option<String>,
    pub json: String,
}

pub fn run_eval(cfg: &RunConfig, ckpt: &Checkpoint) -> Result<EvalOutcome> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    let data = prepare(&cfg)?;
    eval_prepared(&cfg, &data, ckpt)
}

pub fn eval_prepared(cfg: &RunConfig, data: &Prepared, ckpt: &Checkpoint) -> Result<EvalOutcome> {
    checked_params(cfg, data, ckpt)?;
    let enc = Encoder::new(&ckpt.state.params, &data.cache, &cfg.model);
    let graphs = link_prediction_metrics(&enc, &data.full, &data.test_triples, cfg.both_sides)?;
    let test_pairs = data.test_labels.pairs();
    let undefined_as_none = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Undefined(m)) => {
            log::warn!("linkage AUPRC undefined: {m}");
            Ok(None)
        }
        Err(e) => Err(e),
    };
    let (auprc, n_pairs, verdicts) = if cfg.unsupervised {
        let a = undefined_as_none(unsupervised_linkage(
            &enc,
            data.train_labels.pairs(),
            test_pairs,
            &cfg.classifier,
        ))?;
        (a, test_pairs.len(), None)
    } else {
        let vocab = data.full.vocab();
        let qs: Vec<Option<f64>> = test_pairs
            .par_iter()
            .map(|p| linkage_score(&enc, &data.full, p.a, p.b).ok().map(|v| v.q))
            .collect();
        let rows: Vec<VerdictRow> = test_pairs
            .iter()
            .zip(&qs)
            .map(|(p, &q)| VerdictRow {
                x: vocab.entity_name(p.a).to_owned(),
                y: vocab.entity_name(p.b).to_owned(),
                q,
                label: Some(p.positive),
            })
            .collect();
        let scored: Vec<(f64, bool)> = test_pairs.iter().zip(&qs).filter_map(|(p, q)| q.map(|q| (q, p.positive))).collect();
        let scored_pairs = scored.len();
        let a = undefined_as_none(auprc_from_q(&scored))?;
        (a, scored_pairs, Some(verdicts_csv(&rows)))
    };
    let key = if cfg.unsupervised { "auprc_unsupervised" } else { "auprc_supervised" };
    let config: BTreeMap<&str, String> = cfg.echo();
    let doc = json!({
        "config": config,
        "graphs": graphs,
        "linkage": { key: auprc, "n_pairs": n_pairs },
    });
    let mut json = serde_json::to_string_pretty(&doc).map_err(|e| Error::Validation(e.to_string()))?;
    json.push('\n');
    if let Some(path) = &cfg.metrics_out {
        fs::write(path, &json).map_err(|e| Error::io(path, e))?;
    }
    if let (Some(path), Some(csv)) = (&cfg.verdicts_out, &verdicts) {
        fs::write(path, csv).map_err(|e| Error::io(path, e))?;
    }
    Ok(EvalOutcome {
        graphs,
        auprc,
        unsupervised: cfg.unsupervised,
        n_pairs,
        verdicts,
        json,
    })
}

/// Reads a pair file: `e_x<TAB>e_y` with an optional third `0`/`1` label column.
pub fn read_pair_file(path: &Path) -> Result<Vec<(String, String, Option<bool>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        let parse_err = |message: String| Error::Parse {
            file: path.display().to_string(),
            line: i + 1,
            message,
        };
        let label = match f.as_slice() {
            [_, _] => None,
            [_, _, "1"] => Some(true),
            [_, _, "0"] => Some(false),
            [_, _, other] => return Err(parse_err(format!("label must be 0 or 1, found {other:?}"))),
            _ => return Err(parse_err(format!("expected 2 or 3 tab-separated fields, found {}", f.len()))),
        };
        out.push((f[0].to_owned(), f[1].to_owned(), label));
    }
    Ok(out)
}

/// Scores every pair of `pair_file`; rows whose pair cannot be scored get an
/// empty q and a warning.
pub fn run_link(cfg: &RunConfig, ckpt: &Checkpoint, pair_file: &Path) -> Result<String> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    let data = prepare(&cfg)?;
    let pairs = read_pair_file(pair_file)?;
    link_prepared(&cfg, &data, ckpt, &pairs)
}

pub fn link_prepared(
    cfg: &RunConfig,
    data: &Prepared,
    ckpt: &Checkpoint,
    pairs: &[(String, String, Option<bool>)],
) -> Result<String> {
    checked_params(cfg, data, ckpt)?;
    let enc = Encoder::new(&ckpt.state.params, &data.cache, &cfg.model);
    let vocab = data.full.vocab();
    let rows: Vec<VerdictRow> = pairs
        .par_iter()
        .map(|(x, y, label)| {
            let q = match (vocab.entity(x), vocab.entity(y)) {
                (Some(a), Some(b)) => match linkage_score(&enc, &data.full, a, b) {
                    Ok(v) => Some(v.q),
                    Err(e) => {
                        log::warn!("pair ({x}, {y}): {e}");
                        None
                    }
                },
                _ => {
                    log::warn!("pair ({x}, {y}): unknown entity");
                    None
                }
            };
            VerdictRow {
                x: x.clone(),
                y: y.clone(),
                q,
                label: *label,
            }
        })
        .collect();
    Ok(verdicts_csv(&rows))
}

#[derive(Debug, Clone)]
pub struct GradcheckCase {
    pub variant: Variant,
    pub task_weight: f64,
    pub report: GradCheckReport,
}

/// Central-difference check of the batch loss for every requested variant
/// and task weight. Uses the configured data when `data_dir` is set, and a
/// random instance of `gradcheck_entities` entities with all widths equal
/// to `gradcheck_dim` otherwise.
pub fn run_gradcheck(cfg: &RunConfig, variants: &[Variant], task_weights: &[f64]) -> Result<Vec<GradcheckCase>> {
    let cfg = cfg.resolved();
    let (store, labels, cache, base_model) = if cfg.data_dir.is_some() {
        let data = prepare(&cfg)?;
        (data.train_store, data.train_labels, data.cache, cfg.model)
    } else {
        if cfg.gradcheck_entities < 4 {
            return Err(Error::Config("gradcheck_entities must be at least 4".into()));
        }
        let inst = RandomInstance {
            entities: cfg.gradcheck_entities,
            triples: 3 * cfg.gradcheck_entities,
            seed: cfg.seed,
            ..RandomInstance::default()
        }
        .build();
        let d = cfg.gradcheck_dim;
        let model = ModelConfig {
            entity_dim: d,
            relation_dim: d,
            type_dim: d,
            attr_dim: d,
            ..cfg.model
        };
        (inst.store, inst.labels, inst.cache, model)
    };
    let batch: Vec<(usize, Triple)> = store.triples().iter().copied().enumerate().take(cfg.gradcheck_batch).collect();
    if batch.is_empty() {
        return Err(Error::Validation("no triples available for the gradient check".into()));
    }
    let gc = GradCheckConfig {
        probe_count: cfg.gradcheck_probes,
        h: cfg.gradcheck_h,
        tolerance: cfg.gradcheck_tolerance,
        seed: cfg.seed,
        ..GradCheckConfig::default()
    };
    let sampler = NegativeSampler::new(&store, cfg.train.retry_budget);
    let sizes = VocabSizes::of(store.vocab());
    let mut out = Vec::new();
    for &variant in variants {
        let model = ModelConfig { variant, ..base_model };
        model.validate()?;
        let params = ParamSet::<f64>::init(&model, &sizes, cfg.seed);
        for &task_weight in task_weights {
            let train_cfg = crate::train::TrainConfig {
                task_weight,
                negatives: cfg.gradcheck_negatives,
                label_negatives: cfg.gradcheck_label_negatives,
                ..cfg.train
            };
            train_cfg.validate()?;
            let ctx = LossContext {
                sampler: &sampler,
                labels: &labels,
                cfg: &train_cfg,
                epoch: 0,
            };
            let report = check_batch_gradients(&params, &cache, &model, &ctx, &batch, &gc);
            log::info!(
                "{} b={task_weight}: max relative error {:.3e} over {} probes",
                variant.name(),
                report.max_rel_error,
                report.probes.len()
            );
            out.push(GradcheckCase {
                variant,
                task_weight,
                report,
            });
        }
    }
    Ok(out)
}
