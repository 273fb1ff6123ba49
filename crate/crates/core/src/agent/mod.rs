//! Two-stage learner: supervised pretraining on demonstrations, then
//! Double-DQN fine-tuning; plus rollouts and evaluation.

pub mod dqn;
pub mod explore;
pub mod pretrain;
pub mod rollout;
pub mod train;

pub use dqn::{ddqn_update, DdqnStep, QModel};
pub use explore::{choose_action, unstuck_action, Choice, Exploration};
pub use pretrain::{accuracy, pretrain, pretrain_samples, split_episodes, split_samples, EpochMetrics, PretrainConfig, PretrainOutcome};
pub use rollout::{
    evaluate, evaluate_with, evaluate_with_rewards, reference_seed, rollout, rollout_with_rewards, Evaluation, GreedyPolicy,
    Policy, RolloutResult, ScriptedPolicy, StationaryPolicy,
};
pub use train::{initial_network, train_rl, train_rl_with, CurvePoint, RlConfig, RlOutcome};
