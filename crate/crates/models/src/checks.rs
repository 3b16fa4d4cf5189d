//! Finite-difference checks of the composite cells at random points.

use listops_autograd::gradcheck::{check, project, DEFAULT_FLOOR, DEFAULT_STEP};
use listops_autograd::{AutogradError, ParamStore};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cells::{self, State};

const DIM: usize = 4;

fn run(
    points: usize,
    seed: u64,
    shapes: &[(&str, &[usize])],
    build: impl Fn(&mut listops_autograd::Graph<'_>, &[listops_autograd::Var]) -> Result<listops_autograd::Var, AutogradError>,
) -> Result<f64, AutogradError> {
    let mut worst: f64 = 0.0;
    for point in 0..points as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(point));
        let mut store = ParamStore::new();
        let ids: Vec<_> = shapes.iter().map(|(name, shape)| store.add_uniform(*name, shape, 1.0, &mut rng)).collect();
        let report = check(&mut store, DEFAULT_STEP, DEFAULT_FLOOR, |g| {
            let vars: Vec<_> = ids.iter().map(|&id| g.param(id)).collect();
            let out = build(g, &vars)?;
            project(g, out, seed ^ point)
        })?;
        worst = worst.max(report.max_rel_error);
    }
    Ok(worst)
}

/// Worst relative error for the LSTM step, the TreeLSTM composition and the
/// classifier, each over `points` random parameter and input draws.
pub fn cell_gradient_checks(points: usize, seed: u64) -> Result<Vec<(&'static str, f64)>, AutogradError> {
    let d = DIM;
    let lstm = run(
        points,
        seed,
        &[("x_proj", &[4 * d]), ("w_h", &[4 * d, d]), ("h", &[d]), ("c", &[d])],
        |g, p| {
            let s = cells::lstm_step(g, d, p[0], p[1], Some(State { h: p[2], c: p[3] }))?;
            g.concat(&[s.h, s.c])
        },
    )?;
    let tree = run(
        points,
        seed + 1,
        &[("w", &[5 * d, 2 * d]), ("b", &[5 * d]), ("h_l", &[d]), ("c_l", &[d]), ("h_r", &[d]), ("c_r", &[d])],
        |g, p| {
            let s = cells::treelstm_compose(g, d, p[0], p[1], State { h: p[2], c: p[3] }, State { h: p[4], c: p[5] })?;
            g.concat(&[s.h, s.c])
        },
    )?;
    let classifier = run(
        points,
        seed + 2,
        &[("w1", &[6, d]), ("b1", &[6]), ("w2", &[10, 6]), ("b2", &[10]), ("x", &[d])],
        |g, p| {
            let logits = cells::mlp(g, p[0], p[1], p[2], p[3], p[4])?;
            g.cross_entropy(logits, 3)
        },
    )?;
    Ok(vec![("lstm_step", lstm), ("treelstm_compose", tree), ("classifier", classifier)])
}
