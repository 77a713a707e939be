//! Policy optimization: networks, normalization, GAE, PPO, training and
//! checkpoints.

pub mod checkpoint;
pub mod gae;
pub mod net;
pub mod normalizer;
pub mod policy;
pub mod ppo;
pub mod schedule;
pub mod task;
pub mod train;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use gae::{compute_gae, normalize_advantages};
pub use net::{Gaussian, NetShape, PolicyParams};
pub use normalizer::RunningNormalizer;
pub use policy::{GreedyPolicy, PpoPolicy, ShooterPolicy};
pub use ppo::{ppo_update, Adam, Coefficients, LossStats, PpoConfig, Transition};
pub use schedule::schedule;
pub use task::{Episodic, ShooterTask, StepOutcome};
pub use train::{train, EpisodeStat, SummaryRow, TrainOptions, TrainOutcome};

#[derive(Debug, Error)]
pub enum RlError {
    #[error("stream lengths differ: {rewards} rewards, {values} values, {dones} done flags")]
    LengthMismatch {
        rewards: usize,
        values: usize,
        dones: usize,
    },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(
        "non-finite loss in epoch {epoch} (policy {policy_loss}, value {value_loss}, entropy {entropy})"
    )]
    NonFiniteLoss {
        epoch: usize,
        policy_loss: f64,
        value_loss: f64,
        entropy: f64,
    },
    #[error("parameters became non-finite")]
    NonFiniteParams,
    #[error("environment: {0}")]
    Env(#[from] crate::env::EnvError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}
