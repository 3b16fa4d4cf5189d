//! Recurrent and recursive cells built from graph primitives.

use listops_autograd::{AutogradError, Graph, Var};

/// Hidden and memory vectors of one node or time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct State {
    pub h: Var,
    pub c: Var,
}

/// One LSTM step. `x_proj` is `W_x x + b` laid out as gate blocks
/// `[i, f, o, u]`; a missing `prev` is the zero state.
pub fn lstm_step(g: &mut Graph<'_>, dim: usize, x_proj: Var, w_h: Var, prev: Option<State>) -> Result<State, AutogradError> {
    let pre = match prev {
        Some(s) => {
            let hh = g.matmul(w_h, s.h)?;
            g.add(x_proj, hh)?
        }
        None => x_proj,
    };
    let gates = g.slice(pre, 0, 3 * dim)?;
    let gates = g.sigmoid(gates);
    let i = g.slice(gates, 0, dim)?;
    let o = g.slice(gates, 2 * dim, dim)?;
    let u = g.slice(pre, 3 * dim, dim)?;
    let u = g.tanh(u);
    let iu = g.mul(i, u)?;
    let c = match prev {
        Some(s) => {
            let f = g.slice(gates, dim, dim)?;
            let fc = g.mul(f, s.c)?;
            g.add(fc, iu)?
        }
        None => iu,
    };
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok(State { h, c })
}

/// Binary TreeLSTM cell on a pre-concatenated `[h_l; h_r]`. Gate blocks of
/// `w hh + b` are `[i, f_l, f_r, o, u]`.
pub fn treelstm_compose_concat(
    g: &mut Graph<'_>,
    dim: usize,
    w: Var,
    b: Var,
    hh: Var,
    c_l: Var,
    c_r: Var,
) -> Result<State, AutogradError> {
    let pre = g.affine(w, hh, b)?;
    let gates = g.slice(pre, 0, 4 * dim)?;
    let gates = g.sigmoid(gates);
    let i = g.slice(gates, 0, dim)?;
    let f_l = g.slice(gates, dim, dim)?;
    let f_r = g.slice(gates, 2 * dim, dim)?;
    let o = g.slice(gates, 3 * dim, dim)?;
    let u = g.slice(pre, 4 * dim, dim)?;
    let u = g.tanh(u);
    let iu = g.mul(i, u)?;
    let lc = g.mul(f_l, c_l)?;
    let rc = g.mul(f_r, c_r)?;
    let c = g.add(iu, lc)?;
    let c = g.add(c, rc)?;
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok(State { h, c })
}

pub fn treelstm_compose(g: &mut Graph<'_>, dim: usize, w: Var, b: Var, left: State, right: State) -> Result<State, AutogradError> {
    let hh = g.concat(&[left.h, right.h])?;
    treelstm_compose_concat(g, dim, w, b, hh, left.c, right.c)
}

/// Linear leaf transform: `W e + b` split into `(h, c)`.
pub fn leaf_state(g: &mut Graph<'_>, dim: usize, w: Var, b: Var, emb: Var) -> Result<State, AutogradError> {
    let out = g.affine(w, emb, b)?;
    Ok(State { h: g.slice(out, 0, dim)?, c: g.slice(out, dim, dim)? })
}

/// `W2 relu(W1 x + b1) + b2`
pub fn mlp(g: &mut Graph<'_>, w1: Var, b1: Var, w2: Var, b2: Var, x: Var) -> Result<Var, AutogradError> {
    let hidden = g.affine(w1, x, b1)?;
    let hidden = g.relu(hidden);
    g.affine(w2, hidden, b2)
}
