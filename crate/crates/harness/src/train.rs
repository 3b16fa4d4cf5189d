use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use listops::generator::{Dataset, GenError};
use listops::metrics;
use listops::treebank::BinaryTree;
use listops::Example;
use listops_autograd::{moving_baseline, Adam, AdamConfig, Gradients};
use listops_models::{EncoderKind, Model, ModelError, Prediction};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::TrainConfig;

/// Examples per gradient partial sum. Fixed so the reduction order, and
/// therefore every result, is independent of the thread count.
const GRAD_CHUNK: usize = 4;

const STREAM_SHUFFLE: u64 = 1 << 62;
const STREAM_EXAMPLE: u64 = 2 << 62;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset error: {0}")]
    Dataset(#[from] GenError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("loss became non-finite in epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl TrainError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            TrainError::Dataset(_) => "dataset",
            TrainError::Config(_) => "config",
            TrainError::Divergence { .. } => "divergence",
            TrainError::Model(ModelError::Autograd(listops_autograd::AutogradError::CheckpointMismatch(_))) => {
                "checkpoint_mismatch"
            }
            TrainError::Model(_) => "model",
            TrainError::Metrics(_) => "metrics",
            TrainError::Io(_) => "io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub kind: EncoderKind,
    pub config_hash: String,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Test accuracy of the best epoch, whose parameters are kept.
    pub final_accuracy: f64,
    pub best_epoch: usize,
    pub test_predictions: Vec<u8>,
    /// Test-set trees of the kept parameters, for tree-producing models.
    pub test_trees: Option<Vec<BinaryTree>>,
    /// Not part of any CSV, so reports stay byte-reproducible.
    pub wall_seconds: f64,
}

impl RunRecord {
    pub const EPOCH_CSV_HEADER: &'static str = "epoch,train_loss,train_accuracy,test_accuracy,lr";

    pub fn epochs_csv(&self) -> String {
        let mut out = format!("{}\n", Self::EPOCH_CSV_HEADER);
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{:.6},{:.4},{:.4},{:.6e}",
                e.epoch, e.train_loss, e.train_accuracy, e.test_accuracy, e.lr
            );
        }
        out
    }

    /// Same outcome apart from wall time.
    pub fn same_outcome(&self, other: &RunRecord) -> bool {
        RunRecord { wall_seconds: 0.0, ..self.clone() } == RunRecord { wall_seconds: 0.0, ..other.clone() }
    }
}

pub struct TrainOutput {
    pub record: RunRecord,
    /// Parameters from the best epoch.
    pub model: Model,
}

/// Trains on the dataset named by `cfg.data_dir`.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutput, TrainError> {
    let dir = cfg.data_dir.as_deref().ok_or_else(|| TrainError::Config("no data directory given".into()))?;
    let data = load_dataset(dir)?;
    train_on(cfg, &data.train, &data.test)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset, TrainError> {
    let data = Dataset::read_dir(dir)?;
    if data.train.is_empty() || data.test.is_empty() {
        return Err(TrainError::Dataset(GenError::InvalidConfig(format!("{} has an empty split", dir.display()))));
    }
    Ok(data)
}

fn gold_trees(kind: EncoderKind, examples: &[Example]) -> Vec<Option<BinaryTree>> {
    examples.iter().map(|ex| (kind == EncoderKind::TreeLstm).then(|| ex.reference_tree())).collect()
}

/// Evaluation-mode predictions, in input order.
pub fn predict_all(model: &Model, examples: &[Example], exec: listops::Exec) -> Result<Vec<Prediction>, TrainError> {
    let kind = model.config.kind;
    exec.map(examples, |ex| {
        let tree = (kind == EncoderKind::TreeLstm).then(|| ex.reference_tree());
        model.predict(&ex.tokens, tree.as_ref())
    })
    .into_iter()
    .map(|r| r.map_err(TrainError::from))
    .collect()
}

fn example_rng(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_EXAMPLE | ((epoch as u64) << 32) | index as u64);
    rng
}

/// Epoch loop with Adam. The learning rate decays by `lr_decay` whenever
/// test accuracy has not improved for `patience` epochs; training ends at
/// `max_epochs` or when the rate drops below `lr_floor`. The parameters of
/// the best epoch are returned.
pub fn train_on(cfg: &TrainConfig, train: &[Example], test: &[Example]) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    let start = Instant::now();
    let train = match cfg.max_train {
        Some(n) if n > train.len() => {
            return Err(TrainError::Config(format!("max_train {n} exceeds {} training examples", train.len())));
        }
        Some(n) => &train[..n],
        None => train,
    };
    if train.is_empty() || test.is_empty() {
        return Err(TrainError::Config("training and test sets must be nonempty".into()));
    }
    let kind = cfg.encoder.kind;
    let train_trees = gold_trees(kind, train);
    let labels: Vec<u8> = test.iter().map(|e| e.label).collect();

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Model::new(cfg.encoder, &mut init_rng)?;
    let mut adam = Adam::new(&model.store, AdamConfig { lr: cfg.lr, l2: cfg.l2, ..AdamConfig::default() });
    let mut baseline = 0.0;
    let mut lr = cfg.lr;
    let mut best: Option<(f64, usize, listops_autograd::ParamStore, Vec<Prediction>)> = None;
    let mut stale = 0;
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..cfg.max_epochs {
        let mut shuffle = ChaCha8Rng::seed_from_u64(cfg.seed);
        shuffle.set_stream(STREAM_SHUFFLE | epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut shuffle);
        adam.set_lr(lr);

        let (mut loss_sum, mut correct) = (0.0, 0.0);
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            let m = &model;
            let b = baseline;
            let parts = cfg.exec.map_chunks(batch, GRAD_CHUNK, |chunk| {
                let mut grads = Gradients::for_store(&m.store);
                let mut outcomes = Vec::with_capacity(chunk.len());
                for &i in chunk {
                    let mut rng = example_rng(cfg.seed, epoch, i);
                    let ex = &train[i];
                    outcomes.push(m.train_example(&ex.tokens, ex.label, train_trees[i].as_ref(), &mut rng, b, &mut grads)?);
                }
                Ok::<_, ModelError>((grads, outcomes))
            });
            let mut total = Gradients::for_store(&model.store);
            for part in parts {
                let (grads, outcomes) = part?;
                total.add_assign(&grads);
                for o in outcomes {
                    if !o.loss.is_finite() {
                        return Err(TrainError::Divergence { epoch, batch: batch_no });
                    }
                    loss_sum += o.loss;
                    correct += o.reward;
                    baseline = moving_baseline(baseline, o.reward, cfg.baseline_decay);
                }
            }
            model.store.accumulate(&total, 1.0 / batch.len() as f64);
            adam.step(&mut model.store).map_err(ModelError::from)?;
        }

        let preds = predict_all(&model, test, cfg.exec)?;
        let predicted: Vec<u8> = preds.iter().map(|p| p.label).collect();
        let acc = metrics::accuracy(&predicted, &labels)?;
        let n = train.len() as f64;
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: 100.0 * correct / n,
            test_accuracy: acc,
            lr,
        });
        if best.as_ref().is_none_or(|(b, ..)| acc > *b) {
            best = Some((acc, epoch, model.store.clone(), preds));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                lr *= cfg.lr_decay;
                stale = 0;
            }
        }
        if lr < cfg.lr_floor {
            break;
        }
    }

    let (final_accuracy, best_epoch, store, preds) = best.expect("at least one epoch ran");
    model.store = store;
    let test_trees = kind.emits_trees().then(|| preds.iter().map(|p| p.tree.clone().expect("tree model")).collect());
    let record = RunRecord {
        kind,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        epochs,
        final_accuracy,
        best_epoch,
        test_predictions: preds.iter().map(|p| p.label).collect(),
        test_trees,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutput { record, model })
}
