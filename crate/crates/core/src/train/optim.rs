use alloc::vec::Vec;

use super::network::{Gradients, Network};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Optimizer {
    /// `w ← w − lr·g`.
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub const fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Self::adam()
    }
}

/// Per-parameter optimizer memory, flattened in [`Network::values`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: Optimizer,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, params: &Network) -> Self {
        let n = match kind {
            Optimizer::Sgd => 0,
            Optimizer::Adam { .. } => params.values().count(),
        };
        Self {
            kind,
            step: 0,
            m: alloc::vec![0.0; n],
            v: alloc::vec![0.0; n],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub(crate) fn apply(&mut self, params: &mut Network, grads: &Gradients, lr: f64) {
        self.step += 1;
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in params.values_mut().zip(grads.values()) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let t = self.step as f64;
                let c1 = 1.0 - libm::pow(beta1, t);
                let c2 = 1.0 - libm::pow(beta2, t);
                let state = self.m.iter_mut().zip(self.v.iter_mut());
                for ((p, &g), (m, v)) in params.values_mut().zip(grads.values()).zip(state) {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / (libm::sqrt(*v / c2) + epsilon);
                }
            }
        }
    }
}
