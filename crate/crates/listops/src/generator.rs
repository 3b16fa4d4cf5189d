//! Procedural ListOps corpus generation.
//!
//! Every example slot owns an independent ChaCha stream derived from the
//! master seed and the slot's position, so slots can be generated in any
//! order or in parallel and the output is identical. Label targets are
//! assigned per block of ten slots, which keeps a training set of size `n`
//! a prefix of every larger training set generated from the same seed.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, Write as _};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lang::{self, Expr, ListAst, Op, Token};
use crate::par::Exec;
use crate::treebank::{self, BinaryTree, TransitionSeq};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("could not satisfy balancing constraints: {0}")]
    BalanceUnreachable(String),
    #[error("dataset line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    /// Maximum list nesting; 1 means a single flat list.
    pub max_depth: usize,
    /// Maximum children per list.
    pub max_args: usize,
    /// Probability that a child is a sub-list when the depth budget allows.
    pub p_nest: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub balance_labels: bool,
    pub balance_ops: bool,
    pub min_tokens: Option<usize>,
    pub max_tokens: Option<usize>,
    /// Candidate draws allowed per slot before giving up.
    pub attempt_budget: usize,
}

/// Relative deviation from uniform allowed for per-operator token counts.
pub const OP_BALANCE_TOLERANCE: f64 = 0.05;

/// Slots used to calibrate operator sampling weights. Fixed, so nested
/// training sets calibrate identically.
const CALIBRATION_SLOTS: usize = 10_000;

impl GenConfig {
    /// Full-size corpus: 90k train, 10k test.
    pub fn paper(seed: u64) -> Self {
        GenConfig {
            max_depth: 10,
            max_args: 5,
            p_nest: 0.22,
            n_train: 90_000,
            n_test: 10_000,
            seed,
            balance_labels: true,
            balance_ops: true,
            min_tokens: Some(20),
            max_tokens: Some(200),
            attempt_budget: 100_000,
        }
    }

    /// Small corpus for single-machine experiments: 20k train, 2k test.
    pub fn desk(seed: u64) -> Self {
        GenConfig {
            max_depth: 8,
            max_args: 4,
            p_nest: 0.4,
            n_train: 20_000,
            n_test: 2_000,
            seed,
            balance_labels: true,
            balance_ops: true,
            min_tokens: Some(12),
            max_tokens: Some(36),
            attempt_budget: 100_000,
        }
    }

    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "paper" => Some(Self::paper(seed)),
            "desk" => Some(Self::desk(seed)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidConfig(m.to_string()));
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if self.max_args < 2 {
            return bad("max_args must be at least 2");
        }
        if !(0.0..1.0).contains(&self.p_nest) {
            return bad("p_nest must be in [0, 1)");
        }
        if self.n_train + self.n_test == 0 {
            return bad("at least one example is required");
        }
        if let (Some(lo), Some(hi)) = (self.min_tokens, self.max_tokens) {
            if lo > hi {
                return bad("min_tokens exceeds max_tokens");
            }
        }
        if self.attempt_budget == 0 {
            return bad("attempt_budget must be positive");
        }
        Ok(())
    }

    fn length_ok(&self, len: usize) -> bool {
        self.min_tokens.is_none_or(|lo| len >= lo) && self.max_tokens.is_none_or(|hi| len <= hi)
    }
}

/// Sampling weights over [`Op::ALL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpWeights(pub [f64; 4]);

impl Default for OpWeights {
    fn default() -> Self {
        OpWeights([0.25; 4])
    }
}

impl OpWeights {
    fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> Op {
        let total: f64 = self.0.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (op, w) in Op::ALL.iter().zip(self.0) {
            if u < w {
                return *op;
            }
            u -= w;
        }
        Op::SumMod
    }
}

/// Samples one expression whose root is always a list.
pub fn sample_expression<R: Rng + ?Sized>(cfg: &GenConfig, weights: &OpWeights, rng: &mut R) -> Expr {
    Expr::List(sample_list(cfg, cfg.max_depth, weights, rng))
}

fn sample_list<R: Rng + ?Sized>(cfg: &GenConfig, depth_left: usize, weights: &OpWeights, rng: &mut R) -> ListAst {
    let op = weights.choose(rng);
    let arity = rng.random_range(1..=cfg.max_args);
    // one child position is always a digit
    let digit_slot = rng.random_range(0..arity);
    let children = (0..arity)
        .map(|i| {
            if i != digit_slot && depth_left > 1 && rng.random_bool(cfg.p_nest) {
                Expr::List(sample_list(cfg, depth_left - 1, weights, rng))
            } else {
                Expr::Digit(rng.random_range(0..10))
            }
        })
        .collect();
    ListAst { op, children }
}

/// One labelled sequence with its reference parse.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub tokens: Vec<Token>,
    pub label: u8,
    pub transitions: TransitionSeq,
    /// Maximum list nesting in the expression.
    pub depth: usize,
    pub avg_token_depth: f64,
}

impl Example {
    pub fn from_expr(expr: &Expr) -> Example {
        let tree = treebank::reference_parse(expr);
        Example {
            tokens: expr.tokens(),
            label: lang::eval_ast(expr),
            transitions: treebank::tree_to_transitions(&tree),
            depth: expr.nesting_depth(),
            avg_token_depth: tree.avg_token_depth(),
        }
    }

    pub fn from_tokens(tokens: &[Token]) -> Result<Example, lang::LangError> {
        Ok(Example::from_expr(&lang::parse_prefix(tokens)?))
    }

    pub fn reference_tree(&self) -> BinaryTree {
        treebank::transitions_to_tree(&self.transitions, self.tokens.len())
            .expect("stored transitions are valid for their tokens")
    }

    pub fn op_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for t in &self.tokens {
            if let Token::Open(op) = t {
                counts[op.index()] += 1;
            }
        }
        counts
    }

    /// `label TAB tokens TAB transitions`, no line terminator.
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}", self.label, lang::detokenize(&self.tokens), self.transitions)
    }

    /// Parses and validates one dataset line: the label must match the
    /// evaluated tokens and the transitions must be a valid bracketing.
    pub fn parse_line(line: &str, line_no: usize) -> Result<Example, GenError> {
        let malformed = |message: String| GenError::Malformed { line: line_no, message };
        let mut fields = line.split('\t');
        let (Some(label), Some(text), Some(trans), None) = (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(malformed("expected three tab-separated fields".into()));
        };
        let label: u8 = match label.parse() {
            Ok(l) if l <= 9 => l,
            _ => return Err(malformed(format!("bad label {label:?}"))),
        };
        let tokens = lang::tokenize(text).map_err(|e| malformed(e.to_string()))?;
        let expr = lang::parse_prefix(&tokens).map_err(|e| malformed(e.to_string()))?;
        if lang::eval_ast(&expr) != label {
            return Err(malformed(format!("label {label} does not match expression value")));
        }
        let transitions: TransitionSeq = trans.parse().map_err(|e: treebank::TreeError| malformed(e.to_string()))?;
        let tree = treebank::transitions_to_tree(&transitions, tokens.len()).map_err(|e| malformed(e.to_string()))?;
        Ok(Example {
            depth: expr.nesting_depth(),
            avg_token_depth: tree.avg_token_depth(),
            tokens,
            label,
            transitions,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

#[derive(Clone, Copy)]
enum Split {
    Test = 0,
    Train = 1,
}

// stream namespaces, kept disjoint by the top bits
const STREAM_SLOT: u64 = 0;
const STREAM_LABELS: u64 = 1 << 60;
const STREAM_REPAIR: u64 = 2 << 60;

fn slot_stream(split: Split, index: usize) -> u64 {
    STREAM_SLOT | ((split as u64) << 48) | index as u64
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Label assigned to a slot: each aligned block of ten slots gets a seeded
/// permutation of the ten digits.
fn label_target(seed: u64, split: Split, index: usize) -> u8 {
    let block = index / 10;
    let mut rng = rng_for(seed, STREAM_LABELS | ((split as u64) << 48) | block as u64);
    let mut perm: [u8; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];
    perm.shuffle(&mut rng);
    perm[index % 10]
}

/// Draws candidates until one satisfies the length bounds, the label target
/// and `accept`.
fn draw<R: Rng + ?Sized>(
    cfg: &GenConfig,
    weights: &OpWeights,
    target: Option<u8>,
    rng: &mut R,
    accept: impl Fn(&Example) -> bool,
) -> Option<Example> {
    for _ in 0..cfg.attempt_budget {
        let expr = sample_expression(cfg, weights, rng);
        if !cfg.length_ok(expr.token_len()) {
            continue;
        }
        if let Some(t) = target {
            if lang::eval_ast(&expr) != t {
                continue;
            }
        }
        let ex = Example::from_expr(&expr);
        if accept(&ex) {
            return Some(ex);
        }
    }
    None
}

struct Slot {
    split: Split,
    index: usize,
}

fn generate_slots(
    cfg: &GenConfig,
    weights: &OpWeights,
    slots: &[Slot],
    exec: Exec,
) -> Result<Vec<Example>, GenError> {
    let drawn = exec.map(slots, |slot| {
        let target = cfg.balance_labels.then(|| label_target(cfg.seed, slot.split, slot.index));
        let mut rng = rng_for(cfg.seed, slot_stream(slot.split, slot.index));
        draw(cfg, weights, target, &mut rng, |_| true).ok_or(target)
    });
    let mut out = Vec::with_capacity(slots.len());
    for (slot, ex) in slots.iter().zip(drawn) {
        match ex {
            Ok(ex) => out.push(ex),
            Err(target) => {
                return Err(GenError::BalanceUnreachable(format!(
                    "slot {} exhausted {} attempts (label target {:?})",
                    slot.index, cfg.attempt_budget, target
                )))
            }
        }
    }
    dedup(cfg, weights, slots, &mut out)?;
    Ok(out)
}

/// Replaces every repeated token sequence, scanning slots in order, so the
/// fix-ups for a prefix of the slots never depend on later slots.
fn dedup(cfg: &GenConfig, weights: &OpWeights, slots: &[Slot], examples: &mut [Example]) -> Result<(), GenError> {
    let mut seen: HashSet<Vec<Token>> = HashSet::with_capacity(examples.len());
    let mut repair = rng_for(cfg.seed, STREAM_REPAIR);
    for (slot, ex) in slots.iter().zip(examples.iter_mut()) {
        if seen.contains(&ex.tokens) {
            let target = cfg.balance_labels.then_some(ex.label);
            *ex = draw(cfg, weights, target, &mut repair, |c| !seen.contains(&c.tokens)).ok_or_else(|| {
                GenError::BalanceUnreachable(format!("no unique replacement found for slot {}", slot.index))
            })?;
        }
        seen.insert(ex.tokens.clone());
    }
    Ok(())
}

fn op_frequencies<'a>(examples: impl IntoIterator<Item = &'a Example>) -> [f64; 4] {
    let mut counts = [0usize; 4];
    for ex in examples {
        for (c, n) in counts.iter_mut().zip(ex.op_counts()) {
            *c += n;
        }
    }
    let total: usize = counts.iter().sum();
    counts.map(|c| if total == 0 { 0.25 } else { c as f64 / total as f64 })
}

/// Largest relative deviation of any operator's share from uniform.
pub fn op_imbalance<'a>(examples: impl IntoIterator<Item = &'a Example>) -> f64 {
    op_frequencies(examples).iter().map(|f| (f / 0.25 - 1.0).abs()).fold(0.0, f64::max)
}

fn reweight(weights: &OpWeights, freqs: [f64; 4]) -> OpWeights {
    let mut w = weights.0;
    for (w, f) in w.iter_mut().zip(freqs) {
        *w *= 0.25 / f.max(1e-6);
    }
    let total: f64 = w.iter().sum();
    OpWeights(w.map(|x| x / total))
}

fn all_slots(cfg: &GenConfig, n_train: usize) -> Vec<Slot> {
    (0..cfg.n_test)
        .map(|index| Slot { split: Split::Test, index })
        .chain((0..n_train).map(|index| Slot { split: Split::Train, index }))
        .collect()
}

/// Generates train and test splits. Deterministic in `cfg`; the execution
/// mode only affects speed.
pub fn generate_dataset(cfg: &GenConfig) -> Result<Dataset, GenError> {
    generate_dataset_with(cfg, Exec::default())
}

pub fn generate_dataset_with(cfg: &GenConfig, exec: Exec) -> Result<Dataset, GenError> {
    cfg.validate()?;
    let mut weights = OpWeights::default();
    if cfg.balance_ops {
        // calibrate on the test slots plus a fixed-size training prefix
        let slots = all_slots(cfg, cfg.n_train.min(CALIBRATION_SLOTS));
        for _ in 0..8 {
            let examples = generate_slots(cfg, &weights, &slots, exec)?;
            if op_imbalance(&examples) <= OP_BALANCE_TOLERANCE * 0.5 {
                break;
            }
            weights = reweight(&weights, op_frequencies(&examples));
        }
    }

    let slots = all_slots(cfg, cfg.n_train);
    let mut rounds = 0;
    loop {
        let mut examples = generate_slots(cfg, &weights, &slots, exec)?;
        if !cfg.balance_ops || op_imbalance(&examples) <= OP_BALANCE_TOLERANCE {
            let train = examples.split_off(cfg.n_test);
            return Ok(Dataset { train, test: examples });
        }
        rounds += 1;
        if rounds > 4 {
            return Err(GenError::BalanceUnreachable(format!(
                "operator imbalance {:.3} above tolerance",
                op_imbalance(&examples)
            )));
        }
        weights = reweight(&weights, op_frequencies(&examples));
    }
}

impl Dataset {
    /// Writes `train.tsv` and `test.tsv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), GenError> {
        fs::create_dir_all(dir)?;
        write_examples(&dir.join("train.tsv"), &self.train)?;
        write_examples(&dir.join("test.tsv"), &self.test)?;
        Ok(())
    }

    /// Reads the pair written by [`Dataset::write_dir`].
    pub fn read_dir(dir: &Path) -> Result<Dataset, GenError> {
        Ok(Dataset { train: read_examples(&dir.join("train.tsv"))?, test: read_examples(&dir.join("test.tsv"))? })
    }
}

pub fn write_examples(path: &Path, examples: &[Example]) -> Result<(), GenError> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    for ex in examples {
        out.write_all(ex.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_examples(path: &Path) -> Result<Vec<Example>, GenError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        out.push(Example::parse_line(&line, i + 1)?);
    }
    Ok(out)
}

/// Corpus summary; the depth histogram uses unit-width buckets over
/// `avg_token_depth`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusStats {
    pub examples: usize,
    pub label_counts: [usize; 10],
    pub op_counts: [usize; 4],
    pub depth_histogram: Vec<usize>,
    pub mean_avg_token_depth: f64,
    pub mean_nesting_depth: f64,
    pub mean_tokens: f64,
}

pub fn corpus_stats(examples: &[Example]) -> CorpusStats {
    let mut s = CorpusStats { examples: examples.len(), ..CorpusStats::default() };
    if examples.is_empty() {
        return s;
    }
    let (mut depth, mut nesting, mut tokens) = (0.0, 0usize, 0usize);
    for ex in examples {
        s.label_counts[ex.label as usize] += 1;
        for (c, n) in s.op_counts.iter_mut().zip(ex.op_counts()) {
            *c += n;
        }
        let bucket = ex.avg_token_depth.floor() as usize;
        if s.depth_histogram.len() <= bucket {
            s.depth_histogram.resize(bucket + 1, 0);
        }
        s.depth_histogram[bucket] += 1;
        depth += ex.avg_token_depth;
        nesting += ex.depth;
        tokens += ex.tokens.len();
    }
    let n = examples.len() as f64;
    s.mean_avg_token_depth = depth / n;
    s.mean_nesting_depth = nesting as f64 / n;
    s.mean_tokens = tokens as f64 / n;
    s
}

impl CorpusStats {
    /// Long-format CSV: `statistic,key,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("statistic,key,value\n");
        let _ = writeln!(out, "examples,,{}", self.examples);
        for (label, c) in self.label_counts.iter().enumerate() {
            let _ = writeln!(out, "label_count,{label},{c}");
        }
        for (op, c) in Op::ALL.iter().zip(self.op_counts) {
            let _ = writeln!(out, "op_count,{},{c}", op.name());
        }
        for (bucket, c) in self.depth_histogram.iter().enumerate() {
            let _ = writeln!(out, "avg_depth_bucket,{bucket},{c}");
        }
        let _ = writeln!(out, "mean_avg_token_depth,,{:.6}", self.mean_avg_token_depth);
        let _ = writeln!(out, "mean_nesting_depth,,{:.6}", self.mean_nesting_depth);
        let _ = writeln!(out, "mean_tokens,,{:.6}", self.mean_tokens);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> GenConfig {
        GenConfig { n_train: 300, n_test: 50, ..GenConfig::desk(seed) }
    }

    #[test]
    fn flat_when_depth_or_nesting_disabled() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = OpWeights::default();
        let cfg = GenConfig { max_depth: 1, p_nest: 0.9, ..GenConfig::desk(0) };
        for _ in 0..500 {
            assert_eq!(sample_expression(&cfg, &w, &mut rng).nesting_depth(), 1);
        }
        let cfg = GenConfig { max_depth: 8, p_nest: 0.0, ..GenConfig::desk(0) };
        for _ in 0..500 {
            assert_eq!(sample_expression(&cfg, &w, &mut rng).nesting_depth(), 1);
        }
    }

    #[test]
    fn sampled_expressions_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = GenConfig { max_depth: 4, max_args: 3, p_nest: 0.6, ..GenConfig::desk(0) };
        fn check(list: &ListAst, max_args: usize) {
            assert!(!list.children.is_empty() && list.children.len() <= max_args);
            assert!(list.children.iter().any(|c| matches!(c, Expr::Digit(_))));
            for c in &list.children {
                if let Expr::List(l) = c {
                    check(l, max_args);
                }
            }
        }
        for _ in 0..500 {
            let e = sample_expression(&cfg, &OpWeights::default(), &mut rng);
            assert!(e.nesting_depth() <= 4);
            let Expr::List(l) = &e else { panic!("root must be a list") };
            check(l, 3);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            GenConfig { max_depth: 0, ..small(0) },
            GenConfig { max_args: 1, ..small(0) },
            GenConfig { p_nest: 1.0, ..small(0) },
            GenConfig { min_tokens: Some(9), max_tokens: Some(3), ..small(0) },
        ] {
            assert!(matches!(generate_dataset(&cfg), Err(GenError::InvalidConfig(_))));
        }
    }

    #[test]
    fn generated_examples_are_consistent() {
        let cfg = small(3);
        let ds = generate_dataset(&cfg).unwrap();
        let (lo, hi) = (cfg.min_tokens.unwrap(), cfg.max_tokens.unwrap());
        assert_eq!(ds.train.len(), 300);
        assert_eq!(ds.test.len(), 50);
        for ex in ds.train.iter().chain(&ds.test) {
            assert_eq!(lang::eval_stack(&ex.tokens).unwrap(), ex.label);
            let tree = ex.reference_tree();
            assert!(tree.is_complete_over(ex.tokens.len()));
            assert_eq!(ex.transitions, treebank::tree_to_transitions(&tree));
            assert!((lo..=hi).contains(&ex.tokens.len()));
        }
        let train: HashSet<_> = ds.train.iter().map(|e| &e.tokens).collect();
        assert!(ds.test.iter().all(|e| !train.contains(&e.tokens)));
    }

    #[test]
    fn label_balance_is_exact_per_block() {
        let ds = generate_dataset(&small(4)).unwrap();
        let stats = corpus_stats(&ds.train);
        assert_eq!(stats.label_counts, [30; 10]);
        assert!(op_imbalance(&ds.train) <= OP_BALANCE_TOLERANCE + 0.05);
    }

    #[test]
    fn unbalanced_labels_when_disabled() {
        let cfg = GenConfig { balance_labels: false, balance_ops: false, ..small(5) };
        let ds = generate_dataset(&cfg).unwrap();
        assert_eq!(ds.train.len(), 300);
        let stats = corpus_stats(&ds.train);
        assert_ne!(stats.label_counts, [30; 10]);
    }

    #[test]
    fn execution_mode_does_not_change_output() {
        let cfg = small(6);
        assert_eq!(
            generate_dataset_with(&cfg, Exec::Sequential).unwrap(),
            generate_dataset_with(&cfg, Exec::Parallel).unwrap()
        );
    }

    #[test]
    fn smaller_train_sets_are_prefixes() {
        let base = GenConfig { balance_ops: false, ..small(7) };
        let a = generate_dataset(&GenConfig { n_train: 200, ..base.clone() }).unwrap();
        let b = generate_dataset(&GenConfig { n_train: 500, ..base }).unwrap();
        assert_eq!(a.test, b.test);
        assert_eq!(a.train[..], b.train[..200]);
    }

    #[test]
    fn line_round_trip_and_validation() {
        let ex = Example::from_tokens(&lang::tokenize("[MAX 2 9 [MIN 4 7 ] 0 ]").unwrap()).unwrap();
        assert_eq!(ex.to_line(), "9\t[MAX 2 9 [MIN 4 7 ] 0 ]\tSSRSRSSRSRSRRSRSR");
        assert_eq!(Example::parse_line(&ex.to_line(), 1).unwrap(), ex);
        assert!(Example::parse_line("8\t[MAX 2 9 [MIN 4 7 ] 0 ]\tSSRSRSSRSRSRRSRSR", 1).is_err());
        assert!(Example::parse_line("9\t[MAX 2 9 [MIN 4 7 ] 0 ]\tSSRSR", 1).is_err());
        assert!(Example::parse_line("9\t[MAX 2 9 [MIN 4 7 ] 0 ]", 1).is_err());
    }

    #[test]
    fn stats_on_empty_and_hand_corpus() {
        assert_eq!(corpus_stats(&[]), CorpusStats::default());
        let lines = [
            "[MAX 2 9 [MIN 4 7 ] 0 ]",
            "[SM 5 ]",
            "[SM [SM 5 ] 5 ]",
            "[MIN 3 ]",
            "[MED 1 2 3 ]",
            "[MED 4 8 ]",
            "[MAX 0 [MAX 1 ] ]",
            "[MIN 9 9 ]",
            "[SM 1 2 3 4 ]",
            "[MAX 7 ]",
        ];
        let exs: Vec<Example> =
            lines.iter().map(|s| Example::from_tokens(&lang::tokenize(s).unwrap()).unwrap()).collect();
        let s = corpus_stats(&exs);
        assert_eq!(s.examples, 10);
        // labels: 9, 5, 0, 3, 2, 6, 1, 9, 0, 7
        assert_eq!(s.label_counts, [2, 1, 1, 1, 0, 1, 1, 1, 0, 2]);
        // MAX x4 (one nested), MIN x3 (one nested), MED x2, SM x4 (one nested)
        assert_eq!(s.op_counts, [4, 3, 2, 4]);
        assert_eq!(s.depth_histogram.iter().sum::<usize>(), 10);
        assert_eq!(s.mean_tokens, (9 + 3 + 6 + 3 + 5 + 4 + 6 + 4 + 6 + 3) as f64 / 10.0);
        assert!(s.to_csv().starts_with("statistic,key,value\nexamples,,10\n"));
    }
}
