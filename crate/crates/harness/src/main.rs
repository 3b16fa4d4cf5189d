use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use listops::generator::{self, corpus_stats, GenConfig, GenError};
use listops::metrics::{self, F1Report};
use listops::treebank::{self, BinaryTree, TransitionSeq};
use listops::{Example, Exec};
use listops_harness::experiments::{restart_csv, scale_csv, sweep_csv};
use listops_harness::train::load_dataset;
use listops_harness::{evaluate, random_tree_report, run_restarts, scale_sweep, sweep, train, SweepGrid, TrainConfig, TrainError};
use listops_models::{EncoderKind, Model, ModelError};

#[derive(Parser)]
#[command(name = "listops", version, about = "ListOps corpus generation, encoder training and parse evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a train/test corpus.
    Gen(GenArgs),
    /// Corpus statistics as CSV.
    Stats(StatsArgs),
    /// Train one model.
    Train(TrainArgs),
    /// Independent restarts with accuracy spread and self-F1.
    Restarts(RestartArgs),
    /// Grid search over learning rate, L2, decay and size.
    Sweep(SweepArgs),
    /// Accuracy against training-set size on nested prefixes.
    ScaleSweep(ScaleArgs),
    /// Evaluate a checkpoint on a dataset file.
    Evaluate(EvalArgs),
    /// Bracket F1 of a tree file, or of random / ground-truth / branching trees.
    ScoreTrees(ScoreArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "desk")]
    preset: String,
    #[arg(long)]
    seed: u64,
    /// Output directory for train.tsv and test.tsv.
    #[arg(long)]
    out: PathBuf,
    /// Training-set size.
    #[arg(long = "train")]
    n_train: Option<usize>,
    /// Test-set size.
    #[arg(long = "test")]
    n_test: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    max_args: Option<usize>,
    #[arg(long)]
    p_nest: Option<f64>,
    #[arg(long)]
    min_tokens: Option<usize>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    no_balance_labels: bool,
    #[arg(long)]
    no_balance_ops: bool,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// A dataset file (one example per line).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct TrainOpts {
    /// Directory holding train.tsv and test.tsv.
    #[arg(long)]
    data: Option<PathBuf>,
    /// key=value file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    mlp_hidden: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    lr_decay: Option<f64>,
    #[arg(long)]
    lr_floor: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    max_train: Option<usize>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    opts: TrainOpts,
    #[arg(long)]
    seed: u64,
    /// Directory for epochs.csv, run.csv, trees.txt and the checkpoint.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RestartArgs {
    #[command(flatten)]
    opts: TrainOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    runs: usize,
    /// Give every run the same seed (a control whose spread must be zero).
    #[arg(long)]
    identical_seeds: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    opts: TrainOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    lrs: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    l2s: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    decays: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScaleArgs {
    #[command(flatten)]
    opts: TrainOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// A dataset file (one example per line).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write predicted trees as transition strings, one per line.
    #[arg(long)]
    trees_out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct ScoreArgs {
    /// A tree file (transitions or bracketed, one per line) or one of
    /// `random`, `gt`, `lb`, `rb`.
    #[arg(long)]
    pred: String,
    /// A dataset file whose reference parses are the gold trees.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn exec(sequential: bool) -> Exec {
    if sequential { Exec::Sequential } else { Exec::Parallel }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn build_config(opts: &TrainOpts, seed: u64) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::new(EncoderKind::Lstm, 128, seed);
    if let Some(path) = &opts.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_kv_text(&text)?;
    }
    cfg.seed = seed;
    if let Some(m) = &opts.model {
        cfg.encoder.kind = m.parse()?;
    }
    let e = &mut cfg.encoder;
    if let Some(d) = opts.dim {
        e.model_dim = d;
        if opts.mlp_hidden.is_none() {
            e.mlp_hidden = d;
        }
    }
    macro_rules! over {
        ($($flag:ident => $field:expr),* $(,)?) => { $(if let Some(v) = opts.$flag { $field = v; })* };
    }
    over!(mlp_hidden => e.mlp_hidden, dropout => e.dropout, temperature => e.temperature);
    over!(lr => cfg.lr, l2 => cfg.l2, lr_decay => cfg.lr_decay, lr_floor => cfg.lr_floor,
          batch_size => cfg.batch_size, epochs => cfg.max_epochs, patience => cfg.patience);
    if opts.max_train.is_some() {
        cfg.max_train = opts.max_train;
    }
    if opts.data.is_some() {
        cfg.data_dir = opts.data.clone();
    }
    if opts.sequential {
        cfg.exec = Exec::Sequential;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn data_of(cfg: &TrainConfig) -> Result<listops::Dataset> {
    let dir = cfg.data_dir.as_deref().ok_or_else(|| TrainError::Config("--data is required".into()))?;
    Ok(load_dataset(dir)?)
}

fn trees_text(trees: &[BinaryTree]) -> String {
    trees.iter().map(|t| format!("{}\n", treebank::tree_to_transitions(t))).collect()
}

fn read_trees(path: &Path, examples: &[Example]) -> Result<Vec<BinaryTree>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != examples.len() {
        return Err(metrics::MetricsError::LengthMismatch { left: lines.len(), right: examples.len() }.into());
    }
    lines
        .iter()
        .zip(examples)
        .map(|(line, ex)| {
            let tree = if line.contains('(') {
                treebank::parse_bracketed(line)?.0
            } else {
                treebank::transitions_to_tree(&line.parse::<TransitionSeq>()?, ex.tokens.len())?
            };
            if !tree.is_complete_over(ex.tokens.len()) {
                return Err(ModelError::TreeTokenMismatch { tokens: ex.tokens.len(), leaves: tree.leaf_count() }.into());
            }
            Ok(tree)
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => {
            let mut cfg = GenConfig::preset(&a.preset, a.seed)
                .ok_or_else(|| GenError::InvalidConfig(format!("unknown preset {:?}", a.preset)))?;
            macro_rules! over {
                ($($flag:ident),*) => { $(if let Some(v) = a.$flag { cfg.$flag = v; })* };
            }
            over!(n_train, n_test, max_depth, max_args, p_nest);
            if a.min_tokens.is_some() {
                cfg.min_tokens = a.min_tokens;
            }
            if a.max_tokens.is_some() {
                cfg.max_tokens = a.max_tokens;
            }
            cfg.balance_labels = !a.no_balance_labels;
            cfg.balance_ops = !a.no_balance_ops;
            let data = generator::generate_dataset_with(&cfg, exec(a.sequential))?;
            data.write_dir(&a.out)?;
        }
        Command::Stats(a) => {
            let examples = generator::read_examples(&a.input)?;
            emit(&corpus_stats(&examples).to_csv(), a.csv.as_deref())?;
        }
        Command::Train(a) => {
            let cfg = build_config(&a.opts, a.seed)?;
            let out = train(&cfg)?;
            fs::create_dir_all(&a.out)?;
            fs::write(a.out.join("epochs.csv"), out.record.epochs_csv())?;
            let r = &out.record;
            let run_csv = format!(
                "model,config_hash,seed,best_epoch,accuracy\n{},{},{},{},{:.4}\n",
                r.kind, r.config_hash, r.seed, r.best_epoch, r.final_accuracy
            );
            fs::write(a.out.join("run.csv"), &run_csv)?;
            fs::write(a.out.join("config.txt"), cfg.canonical())?;
            if let Some(trees) = &r.test_trees {
                fs::write(a.out.join("trees.txt"), trees_text(trees))?;
            }
            out.model.save(&a.out.join("checkpoint"))?;
            print!("{run_csv}");
        }
        Command::Restarts(a) => {
            let cfg = build_config(&a.opts, a.seed)?;
            let data = data_of(&cfg)?;
            let outcome = run_restarts(&cfg, a.runs, a.identical_seeds, &data.train, &data.test)?;
            for (seed, e) in &outcome.failures {
                eprintln!("warning: run with seed {seed} failed: {e}");
            }
            emit(&restart_csv(cfg.encoder.kind, &outcome.report), a.out.as_deref())?;
        }
        Command::Sweep(a) => {
            let cfg = build_config(&a.opts, a.seed)?;
            let data = data_of(&cfg)?;
            let mut grid = SweepGrid::around(&cfg);
            if !a.lrs.is_empty() {
                grid.lr = a.lrs;
            }
            if !a.l2s.is_empty() {
                grid.l2 = a.l2s;
            }
            if !a.decays.is_empty() {
                grid.lr_decay = a.decays;
            }
            if !a.dims.is_empty() {
                grid.model_dim = a.dims;
            }
            let (rows, best) = sweep(&cfg, &grid, &data.train, &data.test)?;
            emit(&sweep_csv(&rows), a.out.as_deref())?;
            eprintln!("best: {}", rows[best].csv_row());
        }
        Command::ScaleSweep(a) => {
            let cfg = build_config(&a.opts, a.seed)?;
            let data = data_of(&cfg)?;
            let points = scale_sweep(&cfg, &a.sizes, &data.train, &data.test)?;
            emit(&scale_csv(cfg.encoder.kind, &points), a.out.as_deref())?;
        }
        Command::Evaluate(a) => {
            let model = Model::load(&a.checkpoint)?;
            let examples = generator::read_examples(&a.data)?;
            if examples.is_empty() {
                bail!(GenError::InvalidConfig(format!("{} holds no examples", a.data.display())));
            }
            let report = evaluate(&model, &examples, exec(a.sequential))?;
            if let (Some(path), Some(trees)) = (&a.trees_out, &report.trees) {
                fs::write(path, trees_text(trees))?;
            }
            emit(&report.csv(), a.out.as_deref())?;
        }
        Command::ScoreTrees(a) => {
            let examples = generator::read_examples(&a.gold)?;
            let gold: Vec<BinaryTree> = examples.iter().map(Example::reference_tree).collect();
            let report: F1Report = match a.pred.as_str() {
                "random" => random_tree_report(&examples, a.seed)?,
                "gt" => metrics::f1_report(&gold, &gold)?,
                "lb" | "rb" => {
                    let branch = if a.pred == "lb" { treebank::left_branching } else { treebank::right_branching };
                    let trees: Vec<BinaryTree> = examples.iter().map(|e| branch(e.tokens.len())).collect();
                    metrics::f1_report(&trees, &gold)?
                }
                path => metrics::f1_report(&read_trees(Path::new(path), &examples)?, &gold)?,
            };
            let mut text = format!("pred,{}\n", F1Report::CSV_HEADER);
            let _ = writeln!(text, "{},{}", a.pred, report.csv_row());
            emit(&text, a.csv.as_deref())?;
        }
    }
    Ok(())
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<TrainError>() {
            return e.kind();
        }
        if cause.downcast_ref::<GenError>().is_some() {
            return "dataset";
        }
        if let Some(e) = cause.downcast_ref::<ModelError>() {
            return TrainError::Model(e.clone()).kind();
        }
        if cause.downcast_ref::<metrics::MetricsError>().is_some() {
            return "metrics";
        }
        if cause.downcast_ref::<treebank::TreeError>().is_some() {
            return "tree";
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "other"
}

fn error_line(kind: &str, message: &str) -> String {
    let escaped = message.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
    format!("error: kind={kind} message=\"{escaped}\"")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprint!("{e}");
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", error_line("usage", &first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(error_kind(&e), &format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
