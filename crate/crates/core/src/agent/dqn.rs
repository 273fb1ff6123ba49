//! Double-DQN regression step.

use crate::data::replay::Transition;
use crate::env::Observation;
use crate::error::{Error, Result};
use crate::nn::loss::argmax;
use crate::nn::network::{ForwardPass, NetInput, QNetwork};

/// A differentiable action-value function over a flat parameter vector.
pub trait QModel: Clone {
    type Obs;
    type Pass;

    fn actions(&self) -> usize;
    fn forward(&self, obs: &[&Self::Obs]) -> Result<Self::Pass>;
    /// Row-major `[batch, actions]` values of a forward pass.
    fn q<'p>(&self, pass: &'p Self::Pass) -> &'p [f64];
    /// Gradient of `Σ grad_q · q` with respect to the parameters.
    fn backward(&self, pass: &Self::Pass, grad_q: &[f64]) -> Result<Vec<f64>>;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
}

impl QModel for QNetwork {
    type Obs = Observation;
    type Pass = ForwardPass;

    fn actions(&self) -> usize {
        self.config().actions()
    }

    fn forward(&self, obs: &[&Observation]) -> Result<ForwardPass> {
        QNetwork::forward(self, &NetInput::from_observations(self.config(), obs)?)
    }

    fn q<'p>(&self, pass: &'p ForwardPass) -> &'p [f64] {
        pass.q()
    }

    fn backward(&self, pass: &ForwardPass, grad_q: &[f64]) -> Result<Vec<f64>> {
        QNetwork::backward(self, pass, grad_q)
    }

    fn params(&self) -> &[f64] {
        QNetwork::params(self)
    }

    fn params_mut(&mut self) -> &mut [f64] {
        QNetwork::params_mut(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdqnStep {
    /// `mean_i w_i (y_i − Q(s_i, a_i))²`
    pub loss: f64,
    /// `|y_i − Q(s_i, a_i)|` per batch entry.
    pub td_errors: Vec<f64>,
    pub targets: Vec<f64>,
    pub grads: Vec<f64>,
}

/// One Double-DQN step on `(transition, importance weight)` pairs: the
/// online network picks the next action, the target network scores it.
pub fn ddqn_update<M: QModel>(
    online: &M,
    target: &M,
    batch: &[(&Transition<M::Obs>, f64)],
    gamma: f64,
) -> Result<DdqnStep> {
    if batch.is_empty() {
        return Err(Error::invalid("empty DDQN batch"));
    }
    let n = online.actions();
    let obs: Vec<&M::Obs> = batch.iter().map(|(t, _)| &t.obs).collect();
    let next: Vec<&M::Obs> = batch.iter().map(|(t, _)| &t.next_obs).collect();
    let pass = online.forward(&obs)?;
    let q = online.q(&pass);
    let next_online = online.forward(&next)?;
    let next_target = target.forward(&next)?;
    let (qo, qt) = (online.q(&next_online), target.q(&next_target));

    let b = batch.len() as f64;
    let mut grad_q = vec![0.0; q.len()];
    let mut td_errors = Vec::with_capacity(batch.len());
    let mut targets = Vec::with_capacity(batch.len());
    let mut loss = 0.0;
    for (i, (t, w)) in batch.iter().enumerate() {
        if t.action >= n {
            return Err(Error::invalid(format!("action {} out of range", t.action)));
        }
        let y = if t.terminal {
            t.reward
        } else {
            let best = argmax(&qo[i * n..(i + 1) * n]);
            t.reward + gamma * qt[i * n + best]
        };
        if !y.is_finite() {
            return Err(Error::TrainingDiverged(format!("non-finite TD target {y}")));
        }
        let delta = y - q[i * n + t.action];
        loss += w * delta * delta / b;
        grad_q[i * n + t.action] = -2.0 * w * delta / b;
        td_errors.push(delta.abs());
        targets.push(y);
    }
    let grads = online.backward(&pass, &grad_q)?;
    Ok(DdqnStep {
        loss,
        td_errors,
        targets,
        grads,
    })
}
