//! Central finite-difference gradient checks.

use crate::graph::{Graph, Var};
use crate::params::ParamStore;
use crate::AutogradError;

pub const DEFAULT_STEP: f64 = 1e-5;
/// Denominator floor so near-zero gradients are compared absolutely.
pub const DEFAULT_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameter name and element index of the largest error.
    pub worst: Option<(String, usize)>,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares reverse-mode gradients of `loss_fn` with central differences
/// over every element of every parameter. `loss_fn` must be deterministic.
pub fn check<F>(store: &mut ParamStore, step: f64, floor: f64, loss_fn: F) -> Result<GradCheckReport, AutogradError>
where
    F: Fn(&mut Graph<'_>) -> Result<Var, AutogradError>,
{
    let analytic = {
        let mut g = Graph::new(store);
        let loss = loss_fn(&mut g)?;
        g.backward(loss)?
    };
    let eval = |store: &ParamStore| -> Result<f64, AutogradError> {
        let mut g = Graph::new(store);
        let loss = loss_fn(&mut g)?;
        Ok(g.value(loss).item())
    };
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, worst: None };
    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
    for id in ids {
        for j in 0..store.value(id).len() {
            let orig = store.value(id).data()[j];
            store.get_mut(id).value.data_mut()[j] = orig + step;
            let plus = eval(store)?;
            store.get_mut(id).value.data_mut()[j] = orig - step;
            let minus = eval(store)?;
            store.get_mut(id).value.data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.get(id).map_or(0.0, |g| g[j]);
            let err = relative_error(a, numeric, floor);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((store.get(id).name.clone(), j));
            }
        }
    }
    Ok(report)
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

type Build = fn(&mut Graph<'_>, &[Var]) -> Result<Var, AutogradError>;

struct Case {
    name: &'static str,
    shapes: &'static [&'static [usize]],
    build: Build,
    /// Keep inputs away from a kink at zero.
    avoid_zero: bool,
}

const CASES: &[Case] = &[
    Case { name: "matmul_vec", shapes: &[&[3, 4], &[4]], build: |g, p| g.matmul(p[0], p[1]), avoid_zero: false },
    Case { name: "matmul_mat", shapes: &[&[3, 4], &[4, 2]], build: |g, p| g.matmul(p[0], p[1]), avoid_zero: false },
    Case { name: "add", shapes: &[&[5], &[5]], build: |g, p| g.add(p[0], p[1]), avoid_zero: false },
    Case { name: "sub", shapes: &[&[5], &[5]], build: |g, p| g.sub(p[0], p[1]), avoid_zero: false },
    Case { name: "mul", shapes: &[&[5], &[5]], build: |g, p| g.mul(p[0], p[1]), avoid_zero: false },
    Case { name: "mul_broadcast", shapes: &[&[1], &[5]], build: |g, p| g.mul(p[0], p[1]), avoid_zero: false },
    Case { name: "scale", shapes: &[&[4]], build: |g, p| Ok(g.scale(p[0], -1.7)), avoid_zero: false },
    Case { name: "concat", shapes: &[&[2], &[3]], build: |g, p| g.concat(&[p[0], p[1], p[0]]), avoid_zero: false },
    Case { name: "concat_rows", shapes: &[&[2, 3], &[1, 3]], build: |g, p| g.concat(&[p[0], p[1]]), avoid_zero: false },
    Case { name: "slice", shapes: &[&[6]], build: |g, p| g.slice(p[0], 1, 3), avoid_zero: false },
    Case { name: "slice_rows", shapes: &[&[3, 2]], build: |g, p| g.slice(p[0], 1, 2), avoid_zero: false },
    Case { name: "reshape", shapes: &[&[6]], build: |g, p| g.reshape(p[0], &[2, 3]), avoid_zero: false },
    Case { name: "scale_rows", shapes: &[&[3, 4], &[3]], build: |g, p| g.scale_rows(p[0], p[1]), avoid_zero: false },
    Case { name: "sigmoid", shapes: &[&[5]], build: |g, p| Ok(g.sigmoid(p[0])), avoid_zero: false },
    Case { name: "tanh", shapes: &[&[5]], build: |g, p| Ok(g.tanh(p[0])), avoid_zero: false },
    Case { name: "relu", shapes: &[&[5]], build: |g, p| Ok(g.relu(p[0])), avoid_zero: true },
    Case { name: "softmax", shapes: &[&[5]], build: |g, p| g.softmax(p[0]), avoid_zero: false },
    Case { name: "softmax_rows", shapes: &[&[2, 4]], build: |g, p| g.softmax(p[0]), avoid_zero: false },
    Case { name: "log_softmax", shapes: &[&[5]], build: |g, p| g.log_softmax(p[0]), avoid_zero: false },
    Case { name: "gather", shapes: &[&[4, 3]], build: |g, p| g.gather(p[0], 2), avoid_zero: false },
    Case { name: "cross_entropy", shapes: &[&[6]], build: |g, p| g.cross_entropy(p[0], 2), avoid_zero: false },
    Case { name: "sum", shapes: &[&[4]], build: |g, p| Ok(g.sum(p[0])), avoid_zero: false },
    Case { name: "mean", shapes: &[&[4]], build: |g, p| Ok(g.mean(p[0])), avoid_zero: false },
    Case { name: "cumsum", shapes: &[&[5]], build: |g, p| g.cumsum(p[0]), avoid_zero: false },
];

/// Random linear read-out so every output element contributes to the loss.
pub fn project(g: &mut Graph<'_>, out: Var, seed: u64) -> Result<Var, AutogradError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = g.value(out).shape().to_vec();
    let n: usize = shape.iter().product();
    let w = Tensor::new(&shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let w = g.constant(w);
    let prod = g.mul(out, w)?;
    Ok(g.sum(prod))
}

/// Worst relative error per differentiable primitive over `points` random
/// inputs each.
pub fn primitive_checks(points: usize, seed: u64) -> Result<Vec<(&'static str, f64)>, AutogradError> {
    let mut out = Vec::new();
    for (c, case) in CASES.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for point in 0..points {
            let point_seed = seed ^ ((c as u64) << 32) ^ point as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(point_seed);
            let mut store = ParamStore::new();
            let ids: Vec<_> = case
                .shapes
                .iter()
                .enumerate()
                .map(|(i, shape)| {
                    let n: usize = shape.iter().product();
                    let data = (0..n)
                        .map(|_| {
                            let x: f64 = rng.random_range(-2.0..2.0);
                            if case.avoid_zero && x.abs() < 0.1 { x.signum() * 0.1 + x } else { x }
                        })
                        .collect();
                    store.add(format!("x{i}"), Tensor::new(shape, data).expect("sized"))
                })
                .collect();
            let report = check(&mut store, DEFAULT_STEP, DEFAULT_FLOOR, |g| {
                let vars: Vec<Var> = ids.iter().map(|&id| g.param(id)).collect();
                let y = (case.build)(g, &vars)?;
                project(g, y, point_seed.wrapping_add(1))
            })?;
            worst = worst.max(report.max_rel_error);
        }
        out.push((case.name, worst));
    }
    Ok(out)
}

/// Worst relative error between the straight-through Gumbel backward pass
/// and central differences of its relaxed surrogate `softmax((l + g) / tau)`
/// under the same noise draw.
pub fn straight_through_check(points: usize, seed: u64) -> Result<f64, AutogradError> {
    let mut worst: f64 = 0.0;
    for point in 0..points {
        let point_seed = seed ^ (0x57u64 << 40) ^ point as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(point_seed);
        let n = rng.random_range(2..7);
        let tau: f64 = rng.random_range(0.5..2.0);
        let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let noise_seed = rng.random::<u64>();
        let noise: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(noise_seed);
            (0..n).map(|_| crate::sample_gumbel(&mut r)).collect()
        };
        let mut store = ParamStore::new();
        let id = store.add("logits", Tensor::vector(logits));
        let analytic = {
            let mut g = Graph::new(&store);
            let l = g.param(id);
            let mut r = ChaCha8Rng::seed_from_u64(noise_seed);
            let y = g.gumbel_softmax_st(l, tau, Some(&mut r))?;
            let loss = project(&mut g, y, point_seed)?;
            g.backward(loss)?.get(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n])
        };
        let surrogate = |store: &ParamStore| -> Result<f64, AutogradError> {
            let mut g = Graph::new(store);
            let l = g.param(id);
            let c = g.constant(Tensor::vector(noise.clone()));
            let z = g.add(l, c)?;
            let z = g.scale(z, 1.0 / tau);
            let y = g.softmax(z)?;
            let loss = project(&mut g, y, point_seed)?;
            Ok(g.value(loss).item())
        };
        for (j, &a) in analytic.iter().enumerate() {
            let orig = store.value(id).data()[j];
            store.get_mut(id).value.data_mut()[j] = orig + DEFAULT_STEP;
            let plus = surrogate(&store)?;
            store.get_mut(id).value.data_mut()[j] = orig - DEFAULT_STEP;
            let minus = surrogate(&store)?;
            store.get_mut(id).value.data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * DEFAULT_STEP);
            worst = worst.max(relative_error(a, numeric, DEFAULT_FLOOR));
        }
    }
    Ok(worst)
}
