use crate::graph::{Graph, Var};
use crate::tensor::Tensor;
use crate::AutogradError;

pub const DEFAULT_BASELINE_DECAY: f64 = 0.9;

/// Score-function surrogate `-(reward - baseline) * sum(log_probs)`.
///
/// Reward and baseline are plain numbers, so no gradient reaches them. An
/// empty episode yields a constant zero.
pub fn reinforce_loss(g: &mut Graph<'_>, log_probs: &[Var], reward: f64, baseline: f64) -> Result<Var, AutogradError> {
    let mut total: Option<Var> = None;
    for &lp in log_probs {
        let s = g.sum(lp);
        total = Some(match total {
            Some(t) => g.add(t, s)?,
            None => s,
        });
    }
    Ok(match total {
        Some(t) => g.scale(t, -(reward - baseline)),
        None => g.constant(Tensor::scalar(0.0)),
    })
}

/// Exponential moving average `decay * prev + (1 - decay) * reward`.
pub fn moving_baseline(prev: f64, reward: f64, decay: f64) -> f64 {
    decay * prev + (1.0 - decay) * reward
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{Adam, AdamConfig};
    use crate::params::ParamStore;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn baseline_cases() {
        assert_eq!(moving_baseline(0.4, 0.4, 0.9), 0.4);
        assert!((moving_baseline(0.2, 1.0, 0.999_999) - 0.2).abs() < 1e-5);
        let mut b = 0.0;
        for _ in 0..400 {
            b = moving_baseline(b, 0.7, DEFAULT_BASELINE_DECAY);
        }
        assert!((b - 0.7).abs() < 1e-12);
    }

    fn policy_grad(reward: f64, baseline: f64) -> Vec<f64> {
        let mut s = ParamStore::new();
        let id = s.add("logits", Tensor::vector(vec![0.3, -0.1]));
        let mut g = Graph::new(&s);
        let l = g.param(id);
        let lp = g.log_softmax(l).unwrap();
        let chosen = g.slice(lp, 0, 1).unwrap();
        let loss = reinforce_loss(&mut g, &[chosen], reward, baseline).unwrap();
        g.backward(loss).unwrap().get(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0, 0.0])
    }

    #[test]
    fn reinforce_sign_and_zero_advantage() {
        assert!(policy_grad(0.5, 0.5).iter().all(|&x| x == 0.0));
        // descending the loss raises the chosen logit when reward beats the baseline
        let gr = policy_grad(1.0, 0.2);
        assert!(gr[0] < 0.0 && gr[1] > 0.0);
        let gr = policy_grad(0.0, 0.6);
        assert!(gr[0] > 0.0 && gr[1] < 0.0);
    }

    #[test]
    fn empty_episode_is_constant_zero() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let loss = reinforce_loss(&mut g, &[], 1.0, 0.0).unwrap();
        assert_eq!(g.value(loss).item(), 0.0);
    }

    #[test]
    fn two_armed_bandit_learns_rewarding_arm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = ParamStore::new();
        let id = s.add("logits", Tensor::zeros(&[2]));
        let mut adam = Adam::new(&s, AdamConfig { lr: 0.05, ..AdamConfig::default() });
        let mut baseline = 0.0;
        for _ in 0..500 {
            let grads = {
                let mut g = Graph::new(&s);
                let l = g.param(id);
                let lp = g.log_softmax(l).unwrap();
                let p0 = g.value(lp).data()[0].exp();
                let arm = if rng.random::<f64>() < p0 { 0 } else { 1 };
                let reward = if arm == 0 { 1.0 } else { 0.0 };
                let chosen = g.slice(lp, arm, 1).unwrap();
                let loss = reinforce_loss(&mut g, &[chosen], reward, baseline).unwrap();
                baseline = moving_baseline(baseline, reward, DEFAULT_BASELINE_DECAY);
                g.backward(loss).unwrap()
            };
            s.accumulate(&grads, 1.0);
            adam.step(&mut s).unwrap();
        }
        let p = crate::graph::softmax(s.value(id).data());
        assert!(p[0] > 0.95, "arm probability {}", p[0]);
    }

    #[test]
    fn gumbel_frequencies_match_softmax() {
        let logits = [1.0, 0.0, -0.5, 0.3];
        let probs = crate::graph::softmax(&logits);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = [0usize; 4];
        let draws = 100_000;
        let mut store = ParamStore::new();
        let id = store.add("l", Tensor::vector(logits.to_vec()));
        let mut g = Graph::new(&store);
        let l = g.param(id);
        for _ in 0..draws {
            let y = g.gumbel_softmax_st(l, 1.0, Some(&mut rng)).unwrap();
            counts[g.value(y).argmax()] += 1;
        }
        for i in 0..4 {
            let freq = counts[i] as f64 / draws as f64;
            assert!((freq - probs[i]).abs() < 0.01, "arm {i}: {freq} vs {}", probs[i]);
        }
    }
}
