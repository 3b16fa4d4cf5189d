use std::path::Path;

use listops::lang::{self, Token, VOCAB_SIZE};
use listops::treebank::{self, BinaryTree, Transition, TransitionSeq, TreeError};
use listops_autograd::checkpoint;
use listops_autograd::{reinforce_loss, AutogradError, Gradients, Graph, ParamId, ParamStore, Tensor, Var};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cells::{self, State};
use crate::config::{EncoderConfig, EncoderKind};
use crate::ModelError;

pub const NUM_CLASSES: usize = 10;

/// How RL-SPINN picks between legal SHIFT and REDUCE actions.
pub enum Policy<'a> {
    Sample(&'a mut dyn RngCore),
    Greedy,
    /// Replays a given transition sequence.
    Gold(&'a TransitionSeq),
}

/// Output of a forward pass recorded on a graph.
#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: Var,
    pub tree: Option<BinaryTree>,
    /// Log-probabilities of the parser's free choices (RL-SPINN only).
    pub log_probs: Vec<Var>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: u8,
    pub tree: Option<BinaryTree>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Cross-entropy of the example.
    pub loss: f64,
    /// 1 when the training-mode prediction was correct, else 0.
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Ids {
    embedding: ParamId,
    lstm: Option<[ParamId; 3]>,
    leaf: Option<[ParamId; 2]>,
    compose: Option<[ParamId; 2]>,
    policy: Option<[ParamId; 4]>,
    query: Option<ParamId>,
    mlp: [ParamId; 4],
}

/// An encoder plus classifier and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: EncoderConfig,
    pub store: ParamStore,
    ids: Ids,
}

fn zeros_param(store: &mut ParamStore, name: &str, shape: &[usize]) -> ParamId {
    store.add(name, Tensor::zeros(shape))
}

impl Model {
    pub fn new<R: Rng + ?Sized>(config: EncoderConfig, rng: &mut R) -> Result<Model, ModelError> {
        config.validate()?;
        let d = config.model_dim;
        let fan = |n: usize| 1.0 / (n as f64).sqrt();
        let mut s = ParamStore::new();
        let embedding = s.add_uniform("embedding", &[VOCAB_SIZE, d], fan(d), rng);
        let tree_model = config.kind != EncoderKind::Lstm;
        let lstm = (config.kind == EncoderKind::Lstm).then(|| {
            let w_x = s.add_uniform("lstm.w_x", &[4 * d, d], fan(d), rng);
            let w_h = s.add_uniform("lstm.w_h", &[4 * d, d], fan(d), rng);
            let mut bias = vec![0.0; 4 * d];
            bias[d..2 * d].iter_mut().for_each(|x| *x = 1.0);
            let b = s.add("lstm.b", Tensor::vector(bias));
            [w_x, w_h, b]
        });
        let leaf = tree_model.then(|| {
            [s.add_uniform("leaf.w", &[2 * d, d], fan(d), rng), zeros_param(&mut s, "leaf.b", &[2 * d])]
        });
        let compose = tree_model.then(|| {
            let w = s.add_uniform("compose.w", &[5 * d, 2 * d], fan(2 * d), rng);
            let mut bias = vec![0.0; 5 * d];
            bias[d..3 * d].iter_mut().for_each(|x| *x = 1.0);
            [w, s.add("compose.b", Tensor::vector(bias))]
        });
        let policy = (config.kind == EncoderKind::RlSpinn).then(|| {
            [
                s.add_uniform("policy.w1", &[d, 3 * d], fan(3 * d), rng),
                zeros_param(&mut s, "policy.b1", &[d]),
                s.add_uniform("policy.w2", &[2, d], fan(d), rng),
                zeros_param(&mut s, "policy.b2", &[2]),
            ]
        });
        let query = (config.kind == EncoderKind::StGumbel).then(|| s.add_uniform("query", &[d], fan(d), rng));
        let h = config.mlp_hidden;
        let mlp = [
            s.add_uniform("mlp.w1", &[h, d], fan(d), rng),
            zeros_param(&mut s, "mlp.b1", &[h]),
            s.add_uniform("mlp.w2", &[NUM_CLASSES, h], fan(h), rng),
            zeros_param(&mut s, "mlp.b2", &[NUM_CLASSES]),
        ];
        Ok(Model { config, store: s, ids: Ids { embedding, lstm, leaf, compose, policy, query, mlp } })
    }

    fn dim(&self) -> usize {
        self.config.model_dim
    }

    fn params<const N: usize>(g: &mut Graph<'_>, ids: Option<[ParamId; N]>) -> [Var; N] {
        let ids = ids.expect("parameter group exists for this encoder kind");
        ids.map(|id| g.param(id))
    }

    /// One embedding node per distinct token; repeated tokens share a node.
    pub fn embed(&self, g: &mut Graph<'_>, tokens: &[Token]) -> Result<Vec<Var>, ModelError> {
        if tokens.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        let table = g.param(self.ids.embedding);
        let mut cache = [None; VOCAB_SIZE];
        tokens
            .iter()
            .map(|t| {
                let i = t.index();
                if let Some(v) = cache[i] {
                    return Ok(v);
                }
                let v = g.gather(table, i)?;
                cache[i] = Some(v);
                Ok(v)
            })
            .collect()
    }

    /// Embeds raw text, reporting unknown tokens.
    pub fn embed_text(&self, g: &mut Graph<'_>, text: &str) -> Result<Vec<Var>, ModelError> {
        self.embed(g, &lang::tokenize(text)?)
    }

    fn leaves(&self, g: &mut Graph<'_>, tokens: &[Token]) -> Result<Vec<State>, ModelError> {
        let d = self.dim();
        let [w, b] = Self::params(g, self.ids.leaf);
        let embs = self.embed(g, tokens)?;
        let mut cache: [Option<State>; VOCAB_SIZE] = [None; VOCAB_SIZE];
        let mut out = Vec::with_capacity(tokens.len());
        for (t, e) in tokens.iter().zip(embs) {
            let i = t.index();
            let s = match cache[i] {
                Some(s) => s,
                None => {
                    let s = cells::leaf_state(g, d, w, b, e)?;
                    cache[i] = Some(s);
                    s
                }
            };
            out.push(s);
        }
        Ok(out)
    }

    /// Runs the LSTM over the sequence and returns the final state.
    pub fn lstm_encode(&self, g: &mut Graph<'_>, tokens: &[Token]) -> Result<State, ModelError> {
        let d = self.dim();
        let [w_x, w_h, b] = Self::params(g, self.ids.lstm);
        let embs = self.embed(g, tokens)?;
        let mut proj: [Option<Var>; VOCAB_SIZE] = [None; VOCAB_SIZE];
        let mut state = None;
        for (t, e) in tokens.iter().zip(embs) {
            let x = match proj[t.index()] {
                Some(x) => x,
                None => {
                    let x = g.affine(w_x, e, b)?;
                    proj[t.index()] = Some(x);
                    x
                }
            };
            state = Some(cells::lstm_step(g, d, x, w_h, state)?);
        }
        Ok(state.expect("nonempty sequence"))
    }

    pub fn compose(&self, g: &mut Graph<'_>, left: State, right: State) -> Result<State, ModelError> {
        let [w, b] = Self::params(g, self.ids.compose);
        Ok(cells::treelstm_compose(g, self.dim(), w, b, left, right)?)
    }

    /// Composes bottom-up along a given tree.
    pub fn treelstm_encode(&self, g: &mut Graph<'_>, tokens: &[Token], tree: &BinaryTree) -> Result<State, ModelError> {
        if !tree.is_complete_over(tokens.len()) {
            return Err(ModelError::TreeTokenMismatch { tokens: tokens.len(), leaves: tree.leaf_count() });
        }
        let leaves = self.leaves(g, tokens)?;
        let mut stack: Vec<State> = Vec::new();
        let mut next = 0;
        for action in treebank::tree_to_transitions(tree).0 {
            match action {
                Transition::Shift => {
                    stack.push(leaves[next]);
                    next += 1;
                }
                Transition::Reduce => {
                    let right = stack.pop().expect("valid tree");
                    let left = stack.pop().expect("valid tree");
                    stack.push(self.compose(g, left, right)?);
                }
            }
        }
        Ok(stack.pop().expect("valid tree"))
    }

    fn policy_log_probs(&self, g: &mut Graph<'_>, stack: &[State], next: Option<State>) -> Result<Var, ModelError> {
        let d = self.dim();
        let [w1, b1, w2, b2] = Self::params(g, self.ids.policy);
        // features are read as constants so no parser gradient reaches the composition
        let mut features = vec![0.0; 3 * d];
        let slots = [stack.last().copied(), stack.len().checked_sub(2).map(|i| stack[i]), next];
        for (k, slot) in slots.iter().enumerate() {
            if let Some(s) = slot {
                features[k * d..(k + 1) * d].copy_from_slice(g.value(s.h).data());
            }
        }
        let f = g.constant(Tensor::vector(features));
        let hidden = g.affine(w1, f, b1)?;
        let hidden = g.tanh(hidden);
        let logits = g.affine(w2, hidden, b2)?;
        Ok(g.log_softmax(logits)?)
    }

    /// Shift-reduce episode. Steps with a single legal action are taken
    /// without consulting the policy and contribute no log-probability.
    pub fn rl_spinn_encode(
        &self,
        g: &mut Graph<'_>,
        tokens: &[Token],
        mut policy: Policy<'_>,
    ) -> Result<(State, TransitionSeq, Vec<Var>), ModelError> {
        let leaves = self.leaves(g, tokens)?;
        let n = leaves.len();
        if let Policy::Gold(seq) = &policy {
            if seq.len() != 2 * n - 1 {
                return Err(ModelError::TreeTokenMismatch { tokens: n, leaves: seq.token_count() });
            }
        }
        let mut stack: Vec<State> = Vec::with_capacity(n);
        let mut next = 0;
        let mut actions = Vec::with_capacity(2 * n - 1);
        let mut log_probs = Vec::new();
        while next < n || stack.len() > 1 {
            let step = actions.len();
            let can_shift = next < n;
            let can_reduce = stack.len() >= 2;
            let action = if can_shift && can_reduce {
                let lp = self.policy_log_probs(g, &stack, leaves.get(next).copied())?;
                let action = match &mut policy {
                    Policy::Sample(rng) => {
                        let p_shift = g.value(lp).data()[0].exp();
                        if rng.random::<f64>() < p_shift {
                            Transition::Shift
                        } else {
                            Transition::Reduce
                        }
                    }
                    Policy::Greedy => {
                        if g.value(lp).argmax() == 0 {
                            Transition::Shift
                        } else {
                            Transition::Reduce
                        }
                    }
                    Policy::Gold(seq) => seq.0[step],
                };
                let index = if action == Transition::Shift { 0 } else { 1 };
                log_probs.push(g.slice(lp, index, 1)?);
                action
            } else {
                let forced = if can_shift { Transition::Shift } else { Transition::Reduce };
                if let Policy::Gold(seq) = &policy {
                    if seq.0[step] != forced {
                        return Err(TreeError::InvalidTransitionSeq { index: step }.into());
                    }
                }
                forced
            };
            match action {
                Transition::Shift => {
                    stack.push(leaves[next]);
                    next += 1;
                }
                Transition::Reduce => {
                    let right = stack.pop().expect("legal reduce");
                    let left = stack.pop().expect("legal reduce");
                    stack.push(self.compose(g, left, right)?);
                }
            }
            actions.push(action);
        }
        Ok((stack.pop().expect("nonempty"), TransitionSeq(actions), log_probs))
    }

    /// Layer-wise greedy merging. Every layer composes all adjacent pairs,
    /// scores them against a query vector and keeps one via a
    /// straight-through Gumbel-softmax choice. Without `rng` the choice is a
    /// plain argmax.
    pub fn st_gumbel_encode(
        &self,
        g: &mut Graph<'_>,
        tokens: &[Token],
        mut rng: Option<&mut (dyn RngCore + '_)>,
    ) -> Result<(State, BinaryTree), ModelError> {
        let d = self.dim();
        let leaves = self.leaves(g, tokens)?;
        let n = leaves.len();
        let mut trees: Vec<BinaryTree> = (0..n).map(BinaryTree::Leaf).collect();
        if n == 1 {
            return Ok((leaves[0], trees.pop().expect("one leaf")));
        }
        let [w, b] = Self::params(g, self.ids.compose);
        let q = g.param(self.ids.query.expect("query exists for st-gumbel"));
        let hs: Vec<Var> = leaves.iter().map(|s| s.h).collect();
        let cs: Vec<Var> = leaves.iter().map(|s| s.c).collect();
        let mut h_row = g.concat(&hs)?;
        let mut c_row = g.concat(&cs)?;
        let mut m = n;
        loop {
            let mut cands = Vec::with_capacity(m - 1);
            for i in 0..m - 1 {
                let hh = g.slice(h_row, i * d, 2 * d)?;
                let c_l = g.slice(c_row, i * d, d)?;
                let c_r = g.slice(c_row, (i + 1) * d, d)?;
                cands.push(cells::treelstm_compose_concat(g, d, w, b, hh, c_l, c_r)?);
            }
            if m == 2 {
                let right = trees.pop().expect("two trees");
                let left = trees.pop().expect("two trees");
                return Ok((cands[0], BinaryTree::node(left, right)));
            }
            let k = m - 1;
            let cand_h: Vec<Var> = cands.iter().map(|s| s.h).collect();
            let cand_c: Vec<Var> = cands.iter().map(|s| s.c).collect();
            let cand_h = g.concat(&cand_h)?;
            let cand_h = g.reshape(cand_h, &[k, d])?;
            let cand_c = g.concat(&cand_c)?;
            let cand_c = g.reshape(cand_c, &[k, d])?;
            let scores = g.matmul(cand_h, q)?;
            let y = g.gumbel_softmax_st(scores, self.config.temperature, rng.as_deref_mut())?;
            let chosen = g.value(y).argmax();

            // keep rows left of the choice, the merged pair at it, shifted rows right of it
            let cum = g.cumsum(y)?;
            let ones = g.constant(Tensor::vector(vec![1.0; k]));
            let keep_left = g.sub(ones, cum)?;
            let keep_right = g.sub(cum, y)?;
            let mut next_rows = [h_row, c_row];
            for (row, cand) in next_rows.iter_mut().zip([cand_h, cand_c]) {
                let mat = g.reshape(*row, &[m, d])?;
                let left = g.slice(mat, 0, k)?;
                let right = g.slice(mat, 1, k)?;
                let a = g.scale_rows(left, keep_left)?;
                let bsel = g.scale_rows(cand, y)?;
                let c = g.scale_rows(right, keep_right)?;
                let sum = g.add(a, bsel)?;
                let sum = g.add(sum, c)?;
                *row = g.reshape(sum, &[k * d])?;
            }
            [h_row, c_row] = next_rows;

            let right = trees.remove(chosen + 1);
            let left = std::mem::replace(&mut trees[chosen], BinaryTree::Leaf(0));
            trees[chosen] = BinaryTree::node(left, right);
            m = k;
        }
    }

    /// Ten-way logits from a sentence vector.
    pub fn classify(&self, g: &mut Graph<'_>, h: Var) -> Result<Var, ModelError> {
        let [w1, b1, w2, b2] = self.ids.mlp.map(|id| g.param(id));
        Ok(cells::mlp(g, w1, b1, w2, b2, h)?)
    }

    /// Full forward pass. `tree` is required by the TreeLSTM and ignored
    /// otherwise. Passing `rng` selects training behaviour: sampled parser
    /// actions, Gumbel noise and dropout.
    pub fn forward(
        &self,
        g: &mut Graph<'_>,
        tokens: &[Token],
        tree: Option<&BinaryTree>,
        mut rng: Option<&mut (dyn RngCore + '_)>,
    ) -> Result<Forward, ModelError> {
        let (root, out_tree, log_probs) = match self.config.kind {
            EncoderKind::Lstm => (self.lstm_encode(g, tokens)?, None, Vec::new()),
            EncoderKind::TreeLstm => {
                let tree = tree.ok_or(ModelError::TreeTokenMismatch { tokens: tokens.len(), leaves: 0 })?;
                (self.treelstm_encode(g, tokens, tree)?, Some(tree.clone()), Vec::new())
            }
            EncoderKind::RlSpinn => {
                let policy = match rng.as_deref_mut() {
                    Some(r) => Policy::Sample(r),
                    None => Policy::Greedy,
                };
                let (root, seq, lps) = self.rl_spinn_encode(g, tokens, policy)?;
                (root, Some(treebank::transitions_to_tree(&seq, tokens.len())?), lps)
            }
            EncoderKind::StGumbel => {
                let (root, t) = self.st_gumbel_encode(g, tokens, rng.as_deref_mut())?;
                (root, Some(t), Vec::new())
            }
        };
        let mut h = root.h;
        if let Some(r) = rng {
            let p = self.config.dropout;
            if p > 0.0 {
                let mask: Vec<f64> =
                    (0..self.dim()).map(|_| if r.random::<f64>() < p { 0.0 } else { 1.0 / (1.0 - p) }).collect();
                let mask = g.constant(Tensor::vector(mask));
                h = g.mul(h, mask)?;
            }
        }
        Ok(Forward { logits: self.classify(g, h)?, tree: out_tree, log_probs })
    }

    /// Deterministic evaluation-mode prediction.
    pub fn predict(&self, tokens: &[Token], tree: Option<&BinaryTree>) -> Result<Prediction, ModelError> {
        let mut g = Graph::new(&self.store);
        let fwd = self.forward(&mut g, tokens, tree, None)?;
        Ok(Prediction { label: g.value(fwd.logits).argmax() as u8, tree: fwd.tree })
    }

    /// Training-mode pass on one example; adds its gradient into `grads`.
    /// RL-SPINN adds the REINFORCE surrogate with reward 1 for a correct
    /// prediction and the given baseline.
    pub fn train_example(
        &self,
        tokens: &[Token],
        label: u8,
        tree: Option<&BinaryTree>,
        rng: &mut dyn RngCore,
        baseline: f64,
        grads: &mut Gradients,
    ) -> Result<StepOutcome, ModelError> {
        let mut g = Graph::new(&self.store);
        let fwd = self.forward(&mut g, tokens, tree, Some(rng))?;
        let ce = g.cross_entropy(fwd.logits, label as usize)?;
        let reward = if g.value(fwd.logits).argmax() == label as usize { 1.0 } else { 0.0 };
        let loss = if self.config.kind == EncoderKind::RlSpinn {
            let surrogate = reinforce_loss(&mut g, &fwd.log_probs, reward, baseline)?;
            g.add(ce, surrogate)?
        } else {
            ce
        };
        g.backward_into(loss, grads)?;
        Ok(StepOutcome { loss: g.value(ce).item(), reward })
    }

    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        Ok(checkpoint::save(dir, &self.store, &self.config.to_manifest())?)
    }

    /// Rebuilds a model from a checkpoint directory.
    pub fn load(dir: &Path) -> Result<Model, ModelError> {
        let config = EncoderConfig::from_manifest(&checkpoint::read_manifest(dir)?)?;
        let mut model = Model::new(config, &mut ChaCha8Rng::seed_from_u64(0))?;
        checkpoint::load_into(dir, &mut model.store)?;
        Ok(model)
    }

    /// Like [`Model::load`] but fails unless the stored config equals `expected`.
    pub fn load_expecting(dir: &Path, expected: &EncoderConfig) -> Result<Model, ModelError> {
        let model = Model::load(dir)?;
        if &model.config != expected {
            return Err(AutogradError::CheckpointMismatch(format!(
                "checkpoint holds {:?}, expected {:?}",
                model.config, expected
            ))
            .into());
        }
        Ok(model)
    }
}
