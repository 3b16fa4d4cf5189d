use std::fmt::Write as _;

use listops::metrics::{self, F1Report, RestartReport};
use listops::treebank::{self, BinaryTree};
use listops::{Example, Exec};
use listops_models::{EncoderKind, Model};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::TrainConfig;
use crate::train::{predict_all, train_on, RunRecord, TrainError};

pub struct RestartOutcome {
    pub report: RestartReport,
    pub runs: Vec<RunRecord>,
    /// Seeds whose runs failed, with the error.
    pub failures: Vec<(u64, TrainError)>,
}

/// Trains `k` independent copies with seeds `seed + i`, or all with `seed`
/// when `identical_seeds` is set, in parallel. Failed runs are reported and
/// the rest still aggregated; at least two must succeed.
pub fn run_restarts(
    cfg: &TrainConfig,
    k: usize,
    identical_seeds: bool,
    train: &[Example],
    test: &[Example],
) -> Result<RestartOutcome, TrainError> {
    if k < 2 {
        return Err(TrainError::Config(format!("restarts need k >= 2, got {k}")));
    }
    let results = cfg.exec.map_range(k, |i| {
        let mut c = cfg.clone();
        c.seed = if identical_seeds { cfg.seed } else { cfg.seed + i as u64 };
        (c.seed, train_on(&c, train, test).map(|out| out.record))
    });
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(rec) => runs.push(rec),
            Err(e) => failures.push((seed, e)),
        }
    }
    if runs.len() < 2 {
        return Err(failures.into_iter().next().map(|(_, e)| e).unwrap_or(TrainError::Config("too few runs".into())));
    }
    let accs: Vec<f64> = runs.iter().map(|r| r.final_accuracy).collect();
    let trees: Option<Vec<Vec<BinaryTree>>> =
        cfg.encoder.kind.is_latent().then(|| runs.iter().map(|r| r.test_trees.clone().expect("latent trees")).collect());
    let report = metrics::restart_report(&accs, trees.as_deref())?;
    Ok(RestartOutcome { report, runs, failures })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub lr: Vec<f64>,
    pub l2: Vec<f64>,
    pub lr_decay: Vec<f64>,
    pub model_dim: Vec<usize>,
}

impl SweepGrid {
    /// Single-point grid at the config's own values.
    pub fn around(cfg: &TrainConfig) -> Self {
        SweepGrid { lr: vec![cfg.lr], l2: vec![cfg.l2], lr_decay: vec![cfg.lr_decay], model_dim: vec![cfg.encoder.model_dim] }
    }

    pub fn configs(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &d in &self.model_dim {
            for &lr in &self.lr {
                for &l2 in &self.l2 {
                    for &decay in &self.lr_decay {
                        let mut c = base.clone();
                        c.encoder.model_dim = d;
                        c.encoder.mlp_hidden = d;
                        c.lr = lr;
                        c.l2 = l2;
                        c.lr_decay = decay;
                        out.push(c);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kind: EncoderKind,
    pub model_dim: usize,
    pub lr: f64,
    pub l2: f64,
    pub lr_decay: f64,
    pub accuracy: f64,
    pub config_hash: String,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "model,model_dim,lr,l2,lr_decay,accuracy,config_hash";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.4},{}",
            self.kind, self.model_dim, self.lr, self.l2, self.lr_decay, self.accuracy, self.config_hash
        )
    }
}

/// Trains every grid point in parallel. Rows keep grid order; the best row
/// is the one with the highest test accuracy (first on ties).
pub fn sweep(base: &TrainConfig, grid: &SweepGrid, train: &[Example], test: &[Example]) -> Result<(Vec<SweepRow>, usize), TrainError> {
    let configs = grid.configs(base);
    if configs.is_empty() {
        return Err(TrainError::Config("empty sweep grid".into()));
    }
    let results = base.exec.map(&configs, |c| train_on(c, train, test).map(|o| o.record.final_accuracy));
    let mut rows = Vec::with_capacity(configs.len());
    for (c, r) in configs.iter().zip(results) {
        rows.push(SweepRow {
            kind: c.encoder.kind,
            model_dim: c.encoder.model_dim,
            lr: c.lr,
            l2: c.l2,
            lr_decay: c.lr_decay,
            accuracy: r?,
            config_hash: c.hash(),
        });
    }
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.accuracy > rows[best].accuracy {
            best = i;
        }
    }
    Ok((rows, best))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{}\n", SweepRow::CSV_HEADER);
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalePoint {
    pub train_size: usize,
    pub accuracy: f64,
}

/// One training run per size on nested prefixes of `train`.
pub fn scale_sweep(cfg: &TrainConfig, sizes: &[usize], train: &[Example], test: &[Example]) -> Result<Vec<ScalePoint>, TrainError> {
    if sizes.is_empty() {
        return Err(TrainError::Config("no training sizes given".into()));
    }
    if let Some(&bad) = sizes.iter().find(|&&n| n == 0 || n > train.len()) {
        return Err(TrainError::Config(format!("training size {bad} outside 1..={}", train.len())));
    }
    let results = cfg.exec.map(sizes, |&n| {
        let mut c = cfg.clone();
        c.max_train = Some(n);
        train_on(&c, train, test).map(|o| ScalePoint { train_size: n, accuracy: o.record.final_accuracy })
    });
    results.into_iter().collect()
}

pub fn scale_csv(kind: EncoderKind, points: &[ScalePoint]) -> String {
    let mut out = String::from("model,train_size,accuracy\n");
    for p in points {
        let _ = writeln!(out, "{kind},{},{:.4}", p.train_size, p.accuracy);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub predictions: Vec<u8>,
    pub trees: Option<Vec<BinaryTree>>,
    pub f1: Option<F1Report>,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "examples,accuracy,f1_lb,f1_rb,f1_gt,avg_depth";

    pub fn csv(&self) -> String {
        let f1 = self.f1.map_or_else(|| "-,-,-,-".to_string(), |f| f.csv_row());
        format!("{}\n{},{:.4},{}\n", Self::CSV_HEADER, self.predictions.len(), self.accuracy, f1)
    }
}

/// Deterministic evaluation pass with bracket F1 for tree-producing models.
pub fn evaluate(model: &Model, examples: &[Example], exec: Exec) -> Result<EvalReport, TrainError> {
    let preds = predict_all(model, examples, exec)?;
    let labels: Vec<u8> = examples.iter().map(|e| e.label).collect();
    let predictions: Vec<u8> = preds.iter().map(|p| p.label).collect();
    let accuracy = metrics::accuracy(&predictions, &labels)?;
    let trees: Option<Vec<BinaryTree>> = preds.into_iter().map(|p| p.tree).collect();
    let f1 = match &trees {
        Some(t) => {
            let gold: Vec<BinaryTree> = examples.iter().map(Example::reference_tree).collect();
            Some(metrics::f1_report(t, &gold)?)
        }
        None => None,
    };
    Ok(EvalReport { accuracy, predictions, trees, f1 })
}

/// F1 row of a pseudo-encoder that samples each tree by picking uniformly
/// among legal shift-reduce actions.
pub fn random_tree_report(examples: &[Example], seed: u64) -> Result<F1Report, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trees: Vec<BinaryTree> = examples.iter().map(|e| treebank::random_tree(e.tokens.len(), &mut rng)).collect();
    let gold: Vec<BinaryTree> = examples.iter().map(Example::reference_tree).collect();
    Ok(metrics::f1_report(&trees, &gold)?)
}

pub fn restart_csv(kind: EncoderKind, report: &RestartReport) -> String {
    format!("model,{}\n{kind},{}\n", RestartReport::CSV_HEADER, report.csv_row())
}
