use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

/// Plain SGD or Adam over a flat parameter slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, param_count: usize) -> Self {
        let moments = if kind == OptimizerKind::Adam { param_count } else { 0 };
        Optimizer {
            kind,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
            t: 0,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// One descent step. Non-finite gradients abort without touching `params`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::DimensionMismatch {
                what: "gradient",
                expected: params.len(),
                found: grads.len(),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= self.learning_rate * g;
                }
            }
            OptimizerKind::Adam => {
                if self.m.len() != params.len() {
                    return Err(Error::DimensionMismatch {
                        what: "optimizer state",
                        expected: self.m.len(),
                        found: params.len(),
                    });
                }
                self.t = self.t.saturating_add(1);
                let c1 = 1.0 - math::powi(self.beta1, self.t);
                let c2 = 1.0 - math::powi(self.beta2, self.t);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                    self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    params[i] -= self.learning_rate * m_hat / (math::sqrt(v_hat) + self.epsilon);
                }
            }
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("parameters became non-finite".into()));
        }
        Ok(())
    }
}

/// Rescales `grads` in place so its L2 norm is at most `max_norm`.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) {
    let norm = math::sqrt(grads.iter().map(|g| g * g).sum());
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads {
            *g *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut o = Optimizer::new(OptimizerKind::Sgd, 0.5, 2);
        let mut p = [1.0, 2.0];
        o.step(&mut p, &[2.0, -2.0]).unwrap();
        assert_eq!(p, [0.0, 3.0]);
    }

    #[test]
    fn zero_rate_keeps_params() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut o = Optimizer::new(kind, 0.0, 2);
            let mut p = [1.0, 2.0];
            o.step(&mut p, &[3.0, -1.0]).unwrap();
            assert_eq!(p, [1.0, 2.0]);
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut o = Optimizer::new(OptimizerKind::Adam, 0.1, 1);
        let mut p = [0.0];
        o.step(&mut p, &[5.0]).unwrap();
        assert!((p[0] + 0.1).abs() < 1e-6);
    }

    #[test]
    fn nan_gradient_rejected() {
        let mut o = Optimizer::new(OptimizerKind::Sgd, 0.1, 1);
        let mut p = [0.0];
        assert!(matches!(o.step(&mut p, &[f64::NAN]), Err(Error::Numeric(_))));
        assert_eq!(p, [0.0]);
    }

    #[test]
    fn clipping() {
        let mut g = [3.0, 4.0];
        clip_grad_norm(&mut g, 1.0);
        assert!((g[0] - 0.6).abs() < 1e-12 && (g[1] - 0.8).abs() < 1e-12);
    }
}
