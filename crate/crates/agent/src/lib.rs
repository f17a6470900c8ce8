//! Soft actor-critic agent for the rebalancing environment: a small
//! reverse-mode differentiation core, convolution + attention networks,
//! a tanh-squashed Gaussian policy, replay, training and checkpoints.

pub mod autodiff;
pub mod buffer;
pub mod checkpoint;
pub mod envs;
pub mod gradcheck;
pub mod nn;
pub mod optim;
pub mod policy;
pub mod rng;
pub mod sac;
pub mod tensor;
pub mod train;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] nn::NetworkError),
    #[error(transparent)]
    Env(#[from] duplex_core::env::EnvError),
    #[error("replay buffer holds {have} transitions, batch needs {need}")]
    BufferUnderflow { have: usize, need: usize },
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error(transparent)]
    Checkpoint(#[from] checkpoint::CheckpointError),
}

pub use buffer::{ReplayBuffer, Transition};
pub use checkpoint::Checkpoint;
pub use envs::{BanditEnv, Environment, PortfolioEnv};
pub use nn::{Actor, Critic, NetworkSpec, PolicyOutput};
pub use sac::{LossReport, Sac, SacConfig};
pub use train::{train, CurvePoint, TrainConfig};
