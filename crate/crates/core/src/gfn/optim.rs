use serde::{Deserialize, Serialize};

use super::model::FlowModel;
use crate::error::{Error, Result};

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates over `(params, log_z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(model: &FlowModel, config: AdamConfig) -> Self {
        let n = model.gradient_len();
        Self {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one Adam step. A zero gradient leaves the parameters untouched.
    pub fn update(&mut self, model: &mut FlowModel, grad: &[f64]) -> Result<()> {
        let n = model.gradient_len();
        if grad.len() != n || self.m.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                actual: if grad.len() != n { grad.len() } else { self.m.len() },
            });
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.t.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - beta2.powi(self.t.min(i32::MAX as u64) as i32);
        let p = model.num_params();
        for i in 0..n {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let step = lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
            if i < p {
                model.params_mut()[i] -= step;
            } else {
                model.log_z -= step;
            }
        }
        model.steps += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut model = FlowModel::zeros(&[3, 4, 2]).unwrap();
        model.params_mut()[0] = 0.7;
        model.log_z = 1.5;
        let before = model.clone();
        let mut opt = Adam::new(&model, AdamConfig::default());
        let g = vec![0.0; model.gradient_len()];
        opt.update(&mut model, &g).unwrap();
        assert_eq!(model.params(), before.params());
        assert_eq!(model.log_z, before.log_z);
    }

    #[test]
    fn deterministic() {
        let base = FlowModel::zeros(&[2, 2]).unwrap();
        let g: Vec<f64> = (0..base.gradient_len()).map(|i| i as f64 - 2.0).collect();
        let run = || {
            let mut m = base.clone();
            let mut o = Adam::new(&m, AdamConfig::default());
            o.update(&mut m, &g).unwrap();
            o.update(&mut m, &g).unwrap();
            m
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch() {
        let mut model = FlowModel::zeros(&[2, 2]).unwrap();
        let mut opt = Adam::new(&model, AdamConfig::default());
        assert!(matches!(opt.update(&mut model, &[0.0]), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut model = FlowModel::zeros(&[1, 1]).unwrap();
        let mut opt = Adam::new(&model, AdamConfig::default());
        let g = vec![3.0; model.gradient_len()];
        opt.update(&mut model, &g).unwrap();
        assert!((model.log_z + 1e-3).abs() < 1e-9);
    }
}
