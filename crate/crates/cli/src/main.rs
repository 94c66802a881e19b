use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use linknbed::checkpoint::Checkpoint;
use linknbed::config::RunConfig;
use linknbed::model::Variant;
use linknbed::pipeline;
use linknbed::store::{generate_synthetic_pair, SyntheticConfig};

/// Joint embedding of several knowledge graphs for link prediction and
/// entity linkage.
///
/// Configuration is layered: checkpoint settings (eval, link), then
/// `--config`, then the LINKNBED_SEED environment variable, then `--set`
/// pairs and the dedicated flags. Later layers win.
#[derive(Parser)]
#[command(name = "linknbed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoints plus a loss trace.
    Train(TrainArgs),
    /// Evaluate a checkpoint and emit metrics JSON.
    Eval(EvalArgs),
    /// Score the pairs of a pair file with a checkpoint and emit CSV.
    Link(LinkArgs),
    /// Generate a synthetic pair of overlapping graphs.
    Synth(SynthArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Directory with triples.tsv, attributes.tsv, types.tsv and labels.tsv.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Model variant, e.g. embed_only or embed_all_attention.
    #[arg(long)]
    variant: Option<String>,
    /// Context cache file; built and written when missing.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Train relational-only and score linkage with the pair classifier.
    #[arg(long)]
    unsupervised: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Loss trace CSV (default: <checkpoint_dir>/trace.csv).
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Continue training from this checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Metrics JSON destination (default: stdout).
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Per-pair verdict CSV for the test pairs (supervised mode).
    #[arg(long)]
    verdicts_out: Option<PathBuf>,
    /// Rank both endpoints of every test triple.
    #[arg(long)]
    both_sides: bool,
}

#[derive(Args)]
struct LinkArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Tab-separated `e_x e_y [label]` lines.
    #[arg(long)]
    pairs: PathBuf,
    /// CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the four dataset files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SyntheticConfig::default().n_entities)]
    entities: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().n_relations)]
    relations: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().n_types)]
    types: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().n_attr_keys)]
    attr_keys: usize,
    /// Target triples per entity.
    #[arg(long, default_value_t = SyntheticConfig::default().density)]
    density: f64,
    #[arg(long, default_value_t = SyntheticConfig::default().duplicate_fraction)]
    duplicate_fraction: f64,
    /// Probability of dropping a copied edge.
    #[arg(long, default_value_t = SyntheticConfig::default().edge_drop)]
    edge_drop: f64,
    /// Probability of dropping a copied attribute.
    #[arg(long, default_value_t = SyntheticConfig::default().attr_drop)]
    attr_drop: f64,
    #[arg(long, default_value_t = SyntheticConfig::default().token_pool)]
    token_pool: usize,
    /// Negative labels per entity with the same primary type.
    #[arg(long, default_value_t = SyntheticConfig::default().negatives.per_type)]
    neg_same_type: usize,
    /// Negative labels per entity with a different primary type.
    #[arg(long, default_value_t = SyntheticConfig::default().negatives.cross_type)]
    neg_cross_type: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().seed)]
    seed: u64,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    common: Common,
    /// Check every variant with task weights 0, 0.6 and 1.
    #[arg(long)]
    all: bool,
    /// Task weight(s) to check (default: the configured one).
    #[arg(long = "task-weight")]
    task_weight: Vec<f64>,
}

impl Common {
    /// Applies file, environment and command-line layers on top of `cfg`.
    fn apply(&self, cfg: &mut RunConfig) -> anyhow::Result<()> {
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        cfg.apply_env()?;
        for pair in &self.set {
            let (k, v) = pair
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got {pair:?}"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(d) = &self.data {
            cfg.data_dir = Some(d.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.threads {
            cfg.train.threads = t;
        }
        if let Some(v) = &self.variant {
            cfg.set("variant", v)?;
        }
        if let Some(c) = &self.cache {
            cfg.cache = Some(c.clone());
        }
        if self.unsupervised {
            cfg.unsupervised = true;
        }
        Ok(())
    }
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::default();
    args.common.apply(&mut cfg)?;
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(b) = args.batch_size {
        cfg.train.batch_size = b;
    }
    if let Some(d) = args.checkpoint_dir {
        cfg.checkpoint_dir = d;
    }
    if let Some(t) = args.trace_out {
        cfg.trace_out = Some(t);
    }
    let resume = args.resume.as_deref().map(Checkpoint::load).transpose()?;
    let out = pipeline::run_train(&cfg, resume)?;
    for e in &out.report.epochs {
        println!("epoch {} mean_loss {:.6} wall_ms {:.0}", e.epoch, e.mean_loss, e.wall_ms);
    }
    println!("checkpoint {}", out.checkpoint.display());
    println!("trace {}", out.trace.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let cfg = pipeline::config_for_checkpoint(&ckpt, |cfg| {
        args.common.apply(cfg).map_err(|e| linknbed::Error::Config(format!("{e:#}")))?;
        if args.both_sides {
            cfg.both_sides = true;
        }
        if let Some(p) = &args.metrics_out {
            cfg.metrics_out = Some(p.clone());
        }
        if let Some(p) = &args.verdicts_out {
            cfg.verdicts_out = Some(p.clone());
        }
        Ok(())
    })?;
    let out = pipeline::run_eval(&cfg, &ckpt)?;
    if cfg.metrics_out.is_none() {
        write_or_print(None, &out.json)?;
    }
    Ok(())
}

fn cmd_link(args: LinkArgs) -> anyhow::Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let cfg = pipeline::config_for_checkpoint(&ckpt, |cfg| {
        args.common.apply(cfg).map_err(|e| linknbed::Error::Config(format!("{e:#}")))
    })?;
    let csv = pipeline::run_link(&cfg, &ckpt, &args.pairs)?;
    write_or_print(args.out.as_ref(), &csv)
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    let mut cfg = SyntheticConfig {
        n_entities: args.entities,
        n_relations: args.relations,
        n_types: args.types,
        n_attr_keys: args.attr_keys,
        density: args.density,
        duplicate_fraction: args.duplicate_fraction,
        edge_drop: args.edge_drop,
        attr_drop: args.attr_drop,
        token_pool: args.token_pool,
        seed: args.seed,
        ..SyntheticConfig::default()
    };
    cfg.negatives.per_type = args.neg_same_type;
    cfg.negatives.cross_type = args.neg_cross_type;
    cfg.negatives.seed = args.seed;
    let s = generate_synthetic_pair(&cfg, &args.out)?;
    println!(
        "X: {} entities, {} triples; Y: {} entities, {} triples; labels: {} positive, {} negative",
        s.x_entities, s.x_triples, s.y_entities, s.y_triples, s.positives, s.negatives
    );
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::default();
    args.common.apply(&mut cfg)?;
    let (variants, weights) = if args.all {
        (Variant::ALL.to_vec(), vec![0.0, 0.6, 1.0])
    } else if args.task_weight.is_empty() {
        (vec![cfg.model.variant], vec![cfg.train.task_weight])
    } else {
        (vec![cfg.model.variant], args.task_weight.clone())
    };
    let cases = pipeline::run_gradcheck(&cfg, &variants, &weights)?;
    let mut failed = Vec::new();
    for c in &cases {
        let ok = c.report.passed();
        println!(
            "{:<20} b={:<4} max_rel_error={:.3e} probes={} {}",
            c.variant.name(),
            c.task_weight,
            c.report.max_rel_error,
            c.report.probes.len(),
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failed.push(format!("{} b={}", c.variant.name(), c.task_weight));
            for p in c.report.failures() {
                println!(
                    "  {} analytic={:.6e} numeric={:.6e} rel_error={:.3e} h={:e}",
                    p.label, p.analytic, p.numeric, p.rel_error, p.h
                );
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(linknbed::Error::GradCheck(format!("tolerance exceeded for {}", failed.join(", "))).into())
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<linknbed::Error>())
        .map_or(1, |e| e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Link(a) => cmd_link(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
