//! Episodic environments as seen by the trainer.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::RlError;
use crate::env::{Action, EndReason, EnvConfig, Mode, ShooterEnv, OBS_DIM};
use crate::seed;
use crate::world::{BuildingLayout, ExitMask};

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// The episode ended in a terminal state.
    pub terminal: bool,
    /// The episode was cut short; its value past `obs` is bootstrapped.
    pub truncated: bool,
}

pub trait Episodic: Send {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn reset(&mut self) -> Result<Vec<f64>, RlError>;
    fn step(&mut self, action: &[f64]) -> Result<StepOutcome, RlError>;
}

/// Training episodes of the shooter environment, each with a fresh seed
/// drawn from the task's own stream.
pub struct ShooterTask {
    layout: Arc<BuildingLayout>,
    mask: ExitMask,
    cfg: EnvConfig,
    seeds: ChaCha8Rng,
    env: Option<ShooterEnv>,
}

impl ShooterTask {
    pub fn new(layout: Arc<BuildingLayout>, mask: ExitMask, cfg: EnvConfig, seed: u64) -> Self {
        ShooterTask {
            layout,
            mask,
            cfg,
            seeds: seed::rng(seed),
            env: None,
        }
    }
}

impl Episodic for ShooterTask {
    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn act_dim(&self) -> usize {
        2
    }

    fn reset(&mut self) -> Result<Vec<f64>, RlError> {
        let rng = seed::rng(self.seeds.random());
        let (env, obs) = ShooterEnv::reset(
            self.layout.clone(),
            self.mask,
            self.cfg.clone(),
            Mode::Training,
            rng,
        )?;
        self.env = Some(env);
        Ok(obs.as_slice().to_vec())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome, RlError> {
        let env = self.env.as_mut().expect("reset before step");
        let r = env.step(Action::new(action[0], action[1]))?;
        Ok(StepOutcome {
            obs: r.obs.as_slice().to_vec(),
            reward: r.reward.total,
            terminal: r.done.is_some_and(|d| d != EndReason::StepCap),
            truncated: r.done == Some(EndReason::StepCap),
        })
    }
}
