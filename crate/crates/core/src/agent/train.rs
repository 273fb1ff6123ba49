//! Double-DQN fine-tuning with prioritized replay.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::dqn::ddqn_update;
use crate::agent::explore::{choose_action, Exploration};
use crate::agent::rollout::evaluate_with_rewards;
use crate::canvas::Canvas;
use crate::data::replay::{PerConfig, PrioritizedReplay, Transition};
use crate::env::{EpisodeState, RewardParams, DEFAULT_MAX_STEPS};
use crate::error::{Error, Result};
use crate::nn::adam::{Adam, AdamConfig};
use crate::nn::network::{NetConfig, QNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RlConfig {
    pub total_frames: u64,
    pub episode_steps: usize,
    pub gamma: f64,
    /// Gradient updates between target-network copies.
    pub target_sync: u64,
    /// Frames collected before the first update.
    pub warmup_frames: u64,
    pub batch: usize,
    /// Frames between gradient updates.
    pub update_every: u64,
    /// Multiplies rewards before they enter the TD target.
    pub reward_scale: f64,
    pub exploration: Exploration,
    pub use_local_stream: bool,
    pub use_pretrained_init: bool,
    /// Frames between probe evaluations; 0 disables them.
    pub eval_every: u64,
    /// Size of the fixed probe set taken from the front of the references.
    pub eval_refs: usize,
    pub per: PerConfig,
    pub adam: AdamConfig,
    /// Reward terms; `None` uses the medium's defaults.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardParams>,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            total_frames: 600_000,
            episode_steps: DEFAULT_MAX_STEPS,
            gamma: 0.99,
            target_sync: 1000,
            warmup_frames: 2000,
            batch: 32,
            update_every: 1,
            reward_scale: 1.0,
            exploration: Exploration::Rare,
            use_local_stream: true,
            use_pretrained_init: true,
            eval_every: 10_000,
            eval_refs: 16,
            per: PerConfig::default(),
            adam: AdamConfig::default(),
            reward: None,
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup_frames > self.per.capacity as u64 {
            return Err(Error::invalid("warmup must not exceed the replay capacity"));
        }
        if self.batch == 0 || self.update_every == 0 || self.target_sync == 0 || self.episode_steps == 0 {
            return Err(Error::invalid(
                "batch, update_every, target_sync and episode_steps must be positive",
            ));
        }
        if !(0.0..1.0).contains(&self.gamma) || self.gamma == 0.0 {
            return Err(Error::invalid("gamma must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Starting network for fine-tuning. Fresh He-uniform weights, with every
/// matching tensor of `pretrained` copied over when the config asks for it.
pub fn initial_network<R: Rng + ?Sized>(
    net_cfg: &NetConfig,
    pretrained: Option<&QNetwork>,
    cfg: &RlConfig,
    rng: &mut R,
) -> Result<QNetwork> {
    let mut arch = net_cfg.clone();
    if !cfg.use_local_stream {
        arch.local.clear();
    }
    let mut net = QNetwork::new(arch, rng)?;
    if cfg.use_pretrained_init {
        if let Some(p) = pretrained {
            if p.config().media != net.config().media || p.config().side != net.config().side {
                return Err(Error::ConfigMismatch(format!(
                    "pretrained network is {} at {}px, training wants {} at {}px",
                    p.config().media.name(),
                    p.config().side,
                    net.config().media.name(),
                    net.config().side
                )));
            }
            net.copy_matching_from(p);
        }
    }
    Ok(net)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub frame: u64,
    /// Mean accumulated reward of greedy rollouts on the probe set.
    pub mean_reward: f64,
    /// Mean DDQN loss over updates since the previous point.
    pub loss: f64,
    pub epsilon: f64,
    /// Fraction of frames since the previous point where the pen was stuck.
    pub stuck_rate: f64,
}

#[derive(Debug, Clone)]
pub struct RlOutcome {
    pub net: QNetwork,
    pub curve: Vec<CurvePoint>,
    pub updates: u64,
    pub episodes: u64,
}

pub fn train_rl<R: Rng + ?Sized>(
    init: &QNetwork,
    refs: &[Arc<Canvas>],
    cfg: &RlConfig,
    rng: &mut R,
) -> Result<RlOutcome> {
    train_rl_with(init, refs, cfg, rng, |_| {})
}

/// [`train_rl`] with a callback invoked on every new curve point.
pub fn train_rl_with<R: Rng + ?Sized, F: FnMut(&CurvePoint)>(
    init: &QNetwork,
    refs: &[Arc<Canvas>],
    cfg: &RlConfig,
    rng: &mut R,
    mut on_point: F,
) -> Result<RlOutcome> {
    if refs.is_empty() {
        return Err(Error::EmptyDataset("no reference images to train on".into()));
    }
    cfg.validate()?;
    let media = init.config().media;
    if let Some(r) = refs.iter().find(|r| r.media() != media || r.side() != init.config().side) {
        return Err(Error::ConfigMismatch(format!(
            "reference is {} at {}px, network expects {} at {}px",
            r.media().name(),
            r.side(),
            media.name(),
            init.config().side
        )));
    }
    let params = cfg.reward.unwrap_or_else(|| RewardParams::for_media(media));
    let probe = &refs[..cfg.eval_refs.clamp(1, refs.len())];

    let mut online = init.clone();
    let mut target = online.clone();
    let mut adam = Adam::new(cfg.adam, online.param_count());
    let mut replay = PrioritizedReplay::new(cfg.per)?;
    let mut curve = Vec::new();
    let (mut frame, mut updates, mut episodes) = (0u64, 0u64, 0u64);
    let (mut loss_sum, mut loss_n, mut stuck_n, mut window) = (0.0, 0u64, 0u64, 0u64);

    while frame < cfg.total_frames {
        let reference = Arc::clone(&refs[rng.random_range(0..refs.len())]);
        let mut state = EpisodeState::reset(reference, None, cfg.episode_steps)?;
        let mut obs = state.observe();
        episodes += 1;
        while !state.is_terminal() && frame < cfg.total_frames {
            let q = online.q_values(&obs)?;
            let choice = choose_action(&q, state.history(), &cfg.exploration, frame, rng);
            let out = state.step_index_action(choice.index, &params)?;
            replay.insert_max(Transition {
                obs,
                action: choice.index,
                reward: out.reward.total() * cfg.reward_scale,
                next_obs: out.observation.clone(),
                terminal: out.terminal,
            });
            obs = out.observation;
            frame += 1;
            window += 1;
            stuck_n += u64::from(choice.stuck);

            if frame >= cfg.warmup_frames && frame % cfg.update_every == 0 && replay.len() >= cfg.batch {
                let beta = cfg.per.beta_at(frame as f64 / cfg.total_frames as f64);
                let samples = replay.sample(cfg.batch, beta, rng)?;
                let batch: Vec<_> = samples.iter().map(|s| (s.item, s.weight)).collect();
                let step = ddqn_update(&online, &target, &batch, cfg.gamma)?;
                let indices: Vec<usize> = samples.iter().map(|s| s.index).collect();
                adam.step(online.params_mut(), &step.grads)?;
                for (i, td) in indices.into_iter().zip(step.td_errors) {
                    replay.update(i, td)?;
                }
                loss_sum += step.loss;
                loss_n += 1;
                updates += 1;
                if updates % cfg.target_sync == 0 {
                    target = online.clone();
                }
            }

            if cfg.eval_every > 0 && frame % cfg.eval_every == 0 {
                let eval = evaluate_with_rewards(&online, probe, cfg.episode_steps, frame, Some(&params))?;
                let point = CurvePoint {
                    frame,
                    mean_reward: eval.mean_accumulated,
                    loss: if loss_n > 0 { loss_sum / loss_n as f64 } else { 0.0 },
                    epsilon: cfg.exploration.epsilon(frame),
                    stuck_rate: stuck_n as f64 / window as f64,
                };
                on_point(&point);
                curve.push(point);
                (loss_sum, loss_n, stuck_n, window) = (0.0, 0, 0, 0);
            }
        }
    }
    Ok(RlOutcome {
        net: online,
        curve,
        updates,
        episodes,
    })
}
