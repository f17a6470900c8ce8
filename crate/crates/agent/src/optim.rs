//! Adam with an L2 penalty folded into the gradient.

use serde::{Deserialize, Serialize};

use crate::nn::ParamStore;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub l2: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64, l2: f64) -> Self {
        let zeros: Vec<Tensor> = store.values.iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            l2,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update; `lrf(group)` scales the learning rate per layer.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Tensor], lrf: impl Fn(usize) -> f64) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for (i, value) in store.values.iter_mut().enumerate() {
            let lr = self.lr * lrf(store.groups[i]);
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], &grads[i]);
            for k in 0..value.data.len() {
                let gk = g.data[k] + self.l2 * value.data[k];
                m.data[k] = self.beta1 * m.data[k] + (1.0 - self.beta1) * gk;
                v.data[k] = self.beta2 * v.data[k] + (1.0 - self.beta2) * gk * gk;
                let mh = m.data[k] / b1t;
                let vh = v.data[k] / b2t;
                value.data[k] -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

/// Adam on a single scalar (the log temperature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarAdam {
    pub lr: f64,
    m: f64,
    v: f64,
    t: u64,
}

impl ScalarAdam {
    pub fn new(lr: f64) -> Self {
        ScalarAdam { lr, m: 0.0, v: 0.0, t: 0 }
    }

    pub fn step(&mut self, x: &mut f64, grad: f64) {
        self.t += 1;
        self.m = 0.9 * self.m + 0.1 * grad;
        self.v = 0.999 * self.v + 0.001 * grad * grad;
        let mh = self.m / (1.0 - 0.9_f64.powi(self.t as i32));
        let vh = self.v / (1.0 - 0.999_f64.powi(self.t as i32));
        *x -= self.lr * mh / (vh.sqrt() + 1e-8);
    }
}
