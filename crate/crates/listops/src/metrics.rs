//! Parse-quality and task metrics.
//!
//! Bracket F1 is unlabeled and counts one span per internal node, root
//! included. Corpus F1 is the macro average of per-sentence F1, scaled to
//! percent.

use thiserror::Error;

use crate::par::Exec;
use crate::treebank::{self, BinaryTree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("F1 needs at least two tokens, got {0}")]
    TooShort(usize),
    #[error("self-F1 needs at least two runs, got {0}")]
    TooFewRuns(usize),
    #[error("empty input")]
    Empty,
}

fn check_len(left: usize, right: usize) -> Result<(), MetricsError> {
    if left != right {
        return Err(MetricsError::LengthMismatch { left, right });
    }
    Ok(())
}

/// Unlabeled bracket F1 in `[0, 1]` between two trees over the same tokens.
pub fn unlabeled_f1(pred: &BinaryTree, gold: &BinaryTree) -> Result<f64, MetricsError> {
    let n = pred.leaf_count();
    check_len(n, gold.leaf_count())?;
    if n < 2 {
        return Err(MetricsError::TooShort(n));
    }
    let mut p = pred.spans();
    let mut g = gold.spans();
    p.sort_unstable();
    g.sort_unstable();
    let (mut i, mut j, mut shared) = (0, 0, 0usize);
    while i < p.len() && j < g.len() {
        match p[i].cmp(&g[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    // harmonic mean of precision and recall, 2|P∩G| / (|P| + |G|)
    Ok((2 * shared) as f64 / (p.len() + g.len()) as f64)
}

/// Macro-averaged F1 over aligned tree lists, in percent.
pub fn corpus_f1(preds: &[BinaryTree], refs: &[BinaryTree]) -> Result<f64, MetricsError> {
    corpus_f1_with(preds, refs, Exec::default())
}

pub fn corpus_f1_with(preds: &[BinaryTree], refs: &[BinaryTree], exec: Exec) -> Result<f64, MetricsError> {
    check_len(preds.len(), refs.len())?;
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let pairs: Vec<(&BinaryTree, &BinaryTree)> = preds.iter().zip(refs).collect();
    let scores = exec.map(&pairs, |(p, r)| unlabeled_f1(p, r));
    let mut total = 0.0;
    for s in scores {
        total += s?;
    }
    Ok(100.0 * total / preds.len() as f64)
}

/// Mean corpus F1 over all unordered pairs of runs.
pub fn self_f1(runs: &[Vec<BinaryTree>]) -> Result<f64, MetricsError> {
    if runs.len() < 2 {
        return Err(MetricsError::TooFewRuns(runs.len()));
    }
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            total += corpus_f1(&runs[i], &runs[j])?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Percentage of matching predictions.
pub fn accuracy(preds: &[u8], labels: &[u8]) -> Result<f64, MetricsError> {
    check_len(preds.len(), labels.len())?;
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(100.0 * correct as f64 / preds.len() as f64)
}

/// F1 of a set of parses against left-branching, right-branching and
/// ground-truth trees, plus their average token depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Report {
    pub f1_lb: f64,
    pub f1_rb: f64,
    pub f1_gt: f64,
    pub avg_depth: f64,
}

impl F1Report {
    pub const CSV_HEADER: &'static str = "f1_lb,f1_rb,f1_gt,avg_depth";

    pub fn csv_row(&self) -> String {
        format!("{:.4},{:.4},{:.4},{:.4}", self.f1_lb, self.f1_rb, self.f1_gt, self.avg_depth)
    }
}

/// Builds an [`F1Report`], skipping sentences shorter than two tokens.
pub fn f1_report(preds: &[BinaryTree], gold: &[BinaryTree]) -> Result<F1Report, MetricsError> {
    check_len(preds.len(), gold.len())?;
    let kept: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].leaf_count() >= 2).collect();
    if kept.is_empty() {
        return Err(MetricsError::Empty);
    }
    let p: Vec<BinaryTree> = kept.iter().map(|&i| preds[i].clone()).collect();
    let g: Vec<BinaryTree> = kept.iter().map(|&i| gold[i].clone()).collect();
    let lb: Vec<BinaryTree> = p.iter().map(|t| treebank::left_branching(t.leaf_count())).collect();
    let rb: Vec<BinaryTree> = p.iter().map(|t| treebank::right_branching(t.leaf_count())).collect();
    let avg_depth = p.iter().map(BinaryTree::avg_token_depth).sum::<f64>() / p.len() as f64;
    Ok(F1Report {
        f1_lb: corpus_f1(&p, &lb)?,
        f1_rb: corpus_f1(&p, &rb)?,
        f1_gt: corpus_f1(&p, &g)?,
        avg_depth,
    })
}

/// Accuracy spread across restarts plus their parse agreement.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartReport {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    pub max: f64,
    /// Absent for models that do not produce their own parses.
    pub self_f1: Option<f64>,
}

impl RestartReport {
    pub const CSV_HEADER: &'static str = "runs,mean,stddev,max,self_f1";

    pub fn csv_row(&self) -> String {
        let self_f1 = self.self_f1.map_or_else(|| "-".to_string(), |f| format!("{f:.4}"));
        format!("{},{:.4},{:.4},{:.4},{}", self.accuracies.len(), self.mean, self.stddev, self.max, self_f1)
    }
}

pub fn restart_report(accuracies: &[f64], trees: Option<&[Vec<BinaryTree>]>) -> Result<RestartReport, MetricsError> {
    if accuracies.len() < 2 {
        return Err(MetricsError::TooFewRuns(accuracies.len()));
    }
    let n = accuracies.len() as f64;
    let mean = accuracies.iter().sum::<f64>() / n;
    let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let max = accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let self_f1 = match trees {
        Some(runs) => Some(self_f1(runs)?),
        None => None,
    };
    Ok(RestartReport { accuracies: accuracies.to_vec(), mean, stddev: var.sqrt(), max, self_f1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{left_branching, random_tree, right_branching};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bal4() -> BinaryTree {
        BinaryTree::node(
            BinaryTree::node(BinaryTree::Leaf(0), BinaryTree::Leaf(1)),
            BinaryTree::node(BinaryTree::Leaf(2), BinaryTree::Leaf(3)),
        )
    }

    #[test]
    fn f1_worked_values() {
        assert_eq!(unlabeled_f1(&left_branching(5), &left_branching(5)), Ok(1.0));
        assert_eq!(unlabeled_f1(&left_branching(5), &right_branching(5)), Ok(0.25));
        assert_eq!(unlabeled_f1(&left_branching(3), &right_branching(3)), Ok(0.5));
        assert_eq!(
            unlabeled_f1(&left_branching(3), &left_branching(4)),
            Err(MetricsError::LengthMismatch { left: 3, right: 4 })
        );
        assert_eq!(unlabeled_f1(&left_branching(1), &left_branching(1)), Err(MetricsError::TooShort(1)));
        // LB(4) spans {01,02,03}, balanced {01,23,03}: two shared of three
        assert!((unlabeled_f1(&left_branching(4), &bal4()).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn corpus_f1_hand_corpus() {
        let preds = vec![left_branching(5), left_branching(3), left_branching(4)];
        let refs = vec![right_branching(5), left_branching(3), bal4()];
        let want = 100.0 * (0.25 + 1.0 + 2.0 / 3.0) / 3.0;
        assert!((corpus_f1(&preds, &refs).unwrap() - want).abs() < 1e-12);
        assert_eq!(corpus_f1(&preds, &preds), Ok(100.0));
        assert_eq!(corpus_f1(&preds[..1], &refs[..1]), Ok(25.0));
        assert!(corpus_f1(&preds, &refs[..2]).is_err());
    }

    #[test]
    fn self_f1_cases() {
        let run = vec![left_branching(5), bal4()];
        assert_eq!(self_f1(&[run.clone(), run.clone(), run.clone()]), Ok(100.0));
        let other = vec![right_branching(5), left_branching(4)];
        assert_eq!(self_f1(&[run.clone(), other.clone()]), corpus_f1(&run, &other));
        assert_eq!(self_f1(&[run]), Err(MetricsError::TooFewRuns(1)));
    }

    #[test]
    fn self_f1_of_random_runs_is_low() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lens: Vec<usize> = (0..300).map(|_| rng.random_range(20..60)).collect();
        let runs: Vec<Vec<BinaryTree>> =
            (0..4).map(|_| lens.iter().map(|&n| random_tree(n, &mut rng)).collect()).collect();
        let s = self_f1(&runs).unwrap();
        assert!(s > 5.0 && s < 40.0, "random self-F1 {s}");
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&[1, 2, 3, 4], &[1, 2, 3, 4]), Ok(100.0));
        assert_eq!(accuracy(&[1, 2, 3, 4], &[0, 0, 0, 0]), Ok(0.0));
        assert_eq!(accuracy(&[1, 2, 3, 4], &[1, 2, 3, 0]), Ok(75.0));
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn restart_report_cases() {
        let r = restart_report(&[71.5, 71.5], None).unwrap();
        assert_eq!((r.mean, r.stddev, r.max, r.self_f1), (71.5, 0.0, 71.5, None));
        assert!(r.csv_row().ends_with(",-"));
        let r = restart_report(&[70.0, 74.0, 72.0, 72.0], None).unwrap();
        assert_eq!(r.mean, 72.0);
        assert!((r.stddev - 2.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.max, 74.0);
        let trees = vec![vec![left_branching(6)], vec![left_branching(6)]];
        assert_eq!(restart_report(&[1.0, 2.0], Some(&trees)).unwrap().self_f1, Some(100.0));
        assert!(restart_report(&[1.0], None).is_err());
    }

    #[test]
    fn f1_report_of_branchings() {
        let preds: Vec<BinaryTree> = (2..10).map(left_branching).collect();
        let r = f1_report(&preds, &preds).unwrap();
        assert_eq!(r.f1_lb, 100.0);
        assert_eq!(r.f1_gt, 100.0);
        assert!(r.f1_rb < 100.0);
        let with_short = vec![left_branching(1), left_branching(4)];
        let r = f1_report(&with_short, &with_short).unwrap();
        assert_eq!(r.avg_depth, left_branching(4).avg_token_depth());
    }
}
