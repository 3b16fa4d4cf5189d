use crate::params::ParamStore;
use crate::AutogradError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2 penalty added to each gradient.
    pub l2: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, l2: 0.0 }
    }
}

/// Adam with bias correction. Moments are allocated per parameter of the
/// store the optimizer was created for.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    steps: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let zeros = |_| store.iter().map(|(_, p)| vec![0.0; p.value.len()]).collect();
        Adam { config, m: zeros(()), v: zeros(()), steps: 0 }
    }

    /// An optimizer with no moment buffers; [`Adam::step`] fails until
    /// [`Adam::init`] is called.
    pub fn uninitialized(config: AdamConfig) -> Self {
        Adam { config, m: Vec::new(), v: Vec::new(), steps: 0 }
    }

    pub fn init(&mut self, store: &ParamStore) {
        *self = Adam::new(store, self.config);
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn lr(&self) -> f64 {
        self.config.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// Applies one update from the stored gradients, then zeroes them.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<(), AutogradError> {
        let matches = self.m.len() == store.len()
            && store.iter().zip(&self.m).all(|((_, p), m)| m.len() == p.value.len());
        if !matches {
            return Err(AutogradError::UninitializedState);
        }
        self.steps += 1;
        let AdamConfig { lr, beta1, beta2, eps, l2 } = self.config;
        let t = self.steps as f64;
        let c1 = 1.0 - beta1.powf(t);
        let c2 = 1.0 - beta2.powf(t);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let values = p.value.data_mut();
            for j in 0..values.len() {
                let g = p.grad[j] + l2 * values[j];
                m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                values[j] -= lr * m_hat / (v_hat.sqrt() + eps);
                p.grad[j] = 0.0;
            }
        }
        Ok(())
    }
}
