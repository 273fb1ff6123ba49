use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// The learning rate is multiplied by `decay_factor` every
    /// `decay_every` updates.
    pub decay_every: u64,
    pub decay_factor: f64,
    /// Rescale the gradient to at most this L2 norm. Off by default.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decay_every: 50_000,
            decay_factor: 0.5,
            clip_norm: None,
        }
    }
}

impl AdamConfig {
    /// Learning rate used for update number `step` (0-based).
    pub fn lr_at(&self, step: u64) -> f64 {
        if self.decay_every == 0 {
            return self.lr;
        }
        self.lr * self.decay_factor.powi((step / self.decay_every) as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: usize) -> Self {
        Adam {
            config,
            m: vec![0.0; params],
            v: vec![0.0; params],
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn current_lr(&self) -> f64 {
        self.config.lr_at(self.step)
    }

    /// One bias-corrected update. Non-finite gradients leave everything
    /// untouched and report divergence.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::invalid(format!(
                "optimizer holds {} moments, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDiverged(format!(
                "non-finite gradient at update {}",
                self.step
            )));
        }
        let c = &self.config;
        let scale = match c.clip_norm {
            Some(max) => {
                let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        let lr = c.lr_at(self.step);
        self.step += 1;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i] * scale;
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + c.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut a = Adam::new(AdamConfig::default(), 3);
        let mut p = vec![1.0, -2.0, 0.5];
        a.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_is_bounded_by_lr() {
        let cfg = AdamConfig::default();
        let mut a = Adam::new(cfg, 4);
        let mut p = vec![0.0; 4];
        a.step(&mut p, &[3.0, -0.01, 1e4, -7.0]).unwrap();
        for (v, g) in p.iter().zip([3.0, -0.01, 1e4, -7.0f64]) {
            assert!(v.abs() <= cfg.lr * (1.0 + 1e-6));
            assert_eq!(v.signum(), -g.signum());
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut a = Adam::new(AdamConfig::default(), 2);
            let mut p = vec![0.3, 0.4];
            for k in 0..10 {
                a.step(&mut p, &[k as f64 * 0.1, -1.0]).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn lr_halves_on_schedule() {
        let c = AdamConfig::default();
        assert_eq!(c.lr_at(0), 1e-3);
        assert_eq!(c.lr_at(49_999), 1e-3);
        assert_eq!(c.lr_at(50_000), 5e-4);
        assert_eq!(c.lr_at(100_000), 2.5e-4);
    }

    #[test]
    fn non_finite_gradient_diverges() {
        let mut a = Adam::new(AdamConfig::default(), 2);
        let mut p = vec![1.0, 1.0];
        assert!(matches!(a.step(&mut p, &[f64::NAN, 0.0]), Err(Error::TrainingDiverged(_))));
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(a.steps(), 0);
    }

    #[test]
    fn clipping_rescales() {
        let cfg = AdamConfig {
            clip_norm: Some(1.0),
            ..AdamConfig::default()
        };
        let mut clipped = Adam::new(cfg, 2);
        let mut plain = Adam::new(AdamConfig::default(), 2);
        let (mut p1, mut p2) = (vec![0.0; 2], vec![0.0; 2]);
        // Adam is scale invariant on the first step, so compare the moments
        clipped.step(&mut p1, &[30.0, 40.0]).unwrap();
        plain.step(&mut p2, &[30.0, 40.0]).unwrap();
        assert!((clipped.m[0] - 0.1 * 0.6).abs() < 1e-12);
        assert!((plain.m[0] - 0.1 * 30.0).abs() < 1e-12);
    }
}
