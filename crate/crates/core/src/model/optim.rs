use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};

/// Adam with decoupled weight decay. Decay applies to matrices only, never to
/// biases or layer-norm gains.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub hyper: AdamHyper,
    pub step: u64,
    pub(crate) m: ParamStore,
    pub(crate) v: ParamStore,
    decay: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.005,
        }
    }
}

impl AdamW {
    pub fn new(params: &ParamStore, hyper: AdamHyper) -> Self {
        let decay = (0..params.len()).map(|i| params.shape(i).len() == 2).collect();
        Self {
            hyper,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
            decay,
        }
    }

    /// Restore moments saved by a checkpoint.
    pub(crate) fn from_state(params: &ParamStore, hyper: AdamHyper, step: u64, m: ParamStore, v: ParamStore) -> Result<Self> {
        let mut opt = Self::new(params, hyper);
        for (store, name) in [(&m, "first"), (&v, "second")] {
            if store.len() != params.len() || (0..params.len()).any(|i| store.shape(i) != params.shape(i)) {
                return Err(Error::Checkpoint(format!("{name} moment shapes do not match the model")));
            }
        }
        opt.step = step;
        opt.m = m;
        opt.v = v;
        Ok(opt)
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &ParamStore, lr: f64) {
        self.step += 1;
        let AdamHyper {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.hyper;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let decay = if self.decay[i] { 1.0 - lr * weight_decay } else { 1.0 };
            let g = grads.get(i);
            let m = self.m.get_mut(i);
            let v = self.v.get_mut(i);
            for (((p, &gi), mi), vi) in params.get_mut(i).iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *p = *p * decay - lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
