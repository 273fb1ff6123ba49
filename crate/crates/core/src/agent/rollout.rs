//! Unrolling a policy on a reference and averaging over reference sets.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::explore::{choose_action, Exploration};
use crate::canvas::Canvas;
use crate::env::{max_reward, Action, EpisodeState, Observation, Reward, RewardParams};
use crate::error::{Error, Result};
use crate::nn::network::QNetwork;

pub trait Policy {
    fn act(&mut self, obs: &Observation, state: &EpisodeState) -> Result<Action>;
}

/// Greedy Q-network policy with rare exploration.
pub struct GreedyPolicy<'n> {
    net: &'n QNetwork,
    exploration: Exploration,
    rng: ChaCha8Rng,
}

impl<'n> GreedyPolicy<'n> {
    pub fn new(net: &'n QNetwork, seed: u64) -> Self {
        GreedyPolicy {
            net,
            exploration: Exploration::Rare,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn with_exploration(mut self, exploration: Exploration) -> Self {
        self.exploration = exploration;
        self
    }
}

impl Policy for GreedyPolicy<'_> {
    fn act(&mut self, obs: &Observation, state: &EpisodeState) -> Result<Action> {
        let q = self.net.q_values(obs)?;
        let c = choose_action(&q, state.history(), &self.exploration, u64::MAX, &mut self.rng);
        Action::from_index(c.index, state.media())
    }
}

/// Keeps the pen lifted in place.
pub struct StationaryPolicy;

impl Policy for StationaryPolicy {
    fn act(&mut self, _: &Observation, _: &EpisodeState) -> Result<Action> {
        Ok(Action::STAY)
    }
}

/// Plays a fixed action list, then stays put.
pub struct ScriptedPolicy {
    actions: Vec<Action>,
    next: usize,
}

impl ScriptedPolicy {
    pub fn new(actions: Vec<Action>) -> Self {
        ScriptedPolicy { actions, next: 0 }
    }
}

impl Policy for ScriptedPolicy {
    fn act(&mut self, _: &Observation, _: &EpisodeState) -> Result<Action> {
        let a = self.actions.get(self.next).copied().unwrap_or(Action::STAY);
        self.next += 1;
        Ok(a)
    }
}

#[derive(Debug, Clone)]
pub struct RolloutResult {
    /// Canvas after each step.
    pub frames: Vec<Canvas>,
    pub actions: Vec<Action>,
    pub rewards: Vec<Reward>,
    pub accumulated_reward: f64,
    /// `s_0`, the accumulated pixel reward of a perfect reproduction.
    pub max_reward: f64,
}

impl RolloutResult {
    pub fn pixel_reward(&self) -> f64 {
        self.rewards.iter().map(|r| r.pixel).sum()
    }

    pub fn penalty(&self) -> f64 {
        self.rewards.iter().map(|r| r.penalties()).sum()
    }

    pub fn final_canvas(&self) -> Option<&Canvas> {
        self.frames.last()
    }
}

/// Runs `policy` for `steps` steps from a blank canvas with the pen lifted
/// at the center, scored with the medium's default rewards.
pub fn rollout<P: Policy + ?Sized>(policy: &mut P, reference: Arc<Canvas>, steps: usize) -> Result<RolloutResult> {
    let params = RewardParams::for_media(reference.media());
    rollout_with_rewards(policy, reference, steps, &params)
}

pub fn rollout_with_rewards<P: Policy + ?Sized>(
    policy: &mut P,
    reference: Arc<Canvas>,
    steps: usize,
    params: &RewardParams,
) -> Result<RolloutResult> {
    let max = max_reward(&reference);
    let mut state = EpisodeState::reset(reference, None, steps)?;
    let mut obs = state.observe();
    let mut result = RolloutResult {
        frames: Vec::with_capacity(steps),
        actions: Vec::with_capacity(steps),
        rewards: Vec::with_capacity(steps),
        accumulated_reward: 0.0,
        max_reward: max,
    };
    while !state.is_terminal() {
        let action = policy.act(&obs, &state)?;
        let out = state.step(action, params)?;
        result.accumulated_reward += out.reward.total();
        result.frames.push(out.observation.canvas().as_ref().clone());
        result.actions.push(action);
        result.rewards.push(out.reward);
        obs = out.observation;
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean_accumulated: f64,
    pub mean_max: f64,
    pub mean_pixel: f64,
    pub mean_penalty: f64,
    pub per_reference: Vec<f64>,
}

impl Evaluation {
    /// Mean accumulated over mean max reward; 1 for perfect reproduction.
    pub fn ratio(&self) -> f64 {
        self.mean_accumulated / self.mean_max
    }

    pub fn from_rollouts(results: &[RolloutResult]) -> Result<Self> {
        if results.is_empty() {
            return Err(Error::invalid("no rollouts to average"));
        }
        let n = results.len() as f64;
        let mean = |f: &dyn Fn(&RolloutResult) -> f64| results.iter().map(f).sum::<f64>() / n;
        Ok(Evaluation {
            mean_accumulated: mean(&|r| r.accumulated_reward),
            mean_max: mean(&|r| r.max_reward),
            mean_pixel: mean(&|r| r.pixel_reward()),
            mean_penalty: mean(&|r| r.penalty()),
            per_reference: results.iter().map(|r| r.accumulated_reward).collect(),
        })
    }
}

/// Exploration seed for one reference, derived from its pixels so equal
/// references always roll out identically.
pub fn reference_seed(reference: &Canvas, seed: u64) -> u64 {
    let mut h = DefaultHasher::new();
    seed.hash(&mut h);
    reference.pixels().hash(&mut h);
    h.finish()
}

/// Greedy rollouts of `net` on every reference.
pub fn evaluate(net: &QNetwork, refs: &[Arc<Canvas>], steps: usize, seed: u64) -> Result<Evaluation> {
    evaluate_with_rewards(net, refs, steps, seed, None)
}

/// [`evaluate`] with explicit reward terms; `None` uses each medium's defaults.
pub fn evaluate_with_rewards(
    net: &QNetwork,
    refs: &[Arc<Canvas>],
    steps: usize,
    seed: u64,
    params: Option<&RewardParams>,
) -> Result<Evaluation> {
    let results = refs
        .par_iter()
        .map(|r| {
            let params = params.copied().unwrap_or_else(|| RewardParams::for_media(r.media()));
            let mut policy = GreedyPolicy::new(net, reference_seed(r, seed));
            rollout_with_rewards(&mut policy, Arc::clone(r), steps, &params)
        })
        .collect::<Result<Vec<_>>>()?;
    Evaluation::from_rollouts(&results)
}

/// [`evaluate`] for policies that need no network.
pub fn evaluate_with<P, F>(make_policy: F, refs: &[Arc<Canvas>], steps: usize) -> Result<Evaluation>
where
    P: Policy,
    F: Fn(usize) -> P,
{
    let results = refs
        .iter()
        .enumerate()
        .map(|(i, r)| rollout(&mut make_policy(i), Arc::clone(r), steps))
        .collect::<Result<Vec<_>>>()?;
    Evaluation::from_rollouts(&results)
}
