//! Value-based reinforcement learning for adversaries and ego policies.

mod adversary;
mod checkpoint;
mod dqn;
mod network;
mod replay;
mod sut;

pub use adversary::{
    train_adversary, AdversaryConfig, AdversaryOutcome, EpisodeSummary, FailureArchive, FailureRecord,
    ScenarioSource, StepOneSampler,
};
pub use checkpoint::{Checkpoint, NamedArray};
pub use dqn::{epsilon_at, select_action, td_loss_and_grad, td_update, DqnAgent, DqnConfig, GreedyPolicy};
pub use network::{argmax, Activations, Adam, QNetwork};
pub use replay::{ReplayBuffer, Transition};
pub use sut::{
    evaluate_driving, sut_step_reward, train_sut, DrivingStats, SutConfig, SutKind, SutRewardWeights,
};
