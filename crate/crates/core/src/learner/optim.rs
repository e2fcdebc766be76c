use serde::{Deserialize, Serialize};

use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    /// `θ ← θ − lr·∇L`.
    Sgd { lr: f64 },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer<T> {
    Sgd { lr: T },
    Adam {
        lr: T,
        beta1: T,
        beta2: T,
        eps: T,
        m: Vec<T>,
        v: Vec<T>,
        t: i32,
    },
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(config: OptimizerConfig, n_params: usize) -> Self {
        match config {
            OptimizerConfig::Sgd { lr } => Optimizer::Sgd { lr: T::lit(lr) },
            OptimizerConfig::Adam { lr, beta1, beta2, eps } => Optimizer::Adam {
                lr: T::lit(lr),
                beta1: T::lit(beta1),
                beta2: T::lit(beta2),
                eps: T::lit(eps),
                m: vec![T::zero(); n_params],
                v: vec![T::zero(); n_params],
                t: 0,
            },
        }
    }

    pub fn apply(&mut self, params: &mut [T], grads: &[T]) {
        debug_assert_eq!(params.len(), grads.len());
        match self {
            Optimizer::Sgd { lr } => {
                for (p, &g) in params.iter_mut().zip(grads) {
                    *p = *p - *lr * g;
                }
            }
            Optimizer::Adam { lr, beta1, beta2, eps, m, v, t } => {
                *t += 1;
                let one = T::one();
                let c1 = one - beta1.powi(*t);
                let c2 = one - beta2.powi(*t);
                for i in 0..params.len() {
                    let g = grads[i];
                    m[i] = *beta1 * m[i] + (one - *beta1) * g;
                    v[i] = *beta2 * v[i] + (one - *beta2) * g * g;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    params[i] = params[i] - *lr * m_hat / (v_hat.sqrt() + *eps);
                }
            }
        }
    }
}
