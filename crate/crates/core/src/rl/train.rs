//! The collect-then-update training loop.

use std::path::PathBuf;

use rayon::prelude::*;

use super::checkpoint::{save_checkpoint, Checkpoint};
use super::gae::compute_gae;
use super::net::{NetShape, PolicyParams};
use super::ppo::{ppo_update, Adam, Coefficients, LossStats, PpoConfig, Transition};
use super::task::{Episodic, StepOutcome};
use super::RlError;
use crate::seed::{self, Stream};

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub n_envs: usize,
    pub seed: u64,
    /// Where checkpoints go; none are written when unset.
    pub checkpoint_dir: Option<PathBuf>,
    pub config_hash: [u8; 32],
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub step: u64,
    pub episodes: usize,
    pub mean_reward: f64,
    pub mean_episode_len: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub lr: f64,
    pub beta: f64,
    pub epsilon: f64,
}

/// A finished episode: global step at its end, return, length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStat {
    pub step: u64,
    pub reward: f64,
    pub length: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub rows: Vec<SummaryRow>,
    pub episodes: Vec<EpisodeStat>,
    pub updates: usize,
    pub checkpoints: Vec<PathBuf>,
}

struct Slot<E> {
    env: E,
    obs: Vec<f64>,
    segment: Vec<Transition>,
    reward: f64,
    length: u64,
}

/// Trains a fresh policy on `n_envs` copies of an environment built by
/// `make_env(index, seed)`. Deterministic given the seed and `n_envs`.
pub fn train<E, F>(
    cfg: &PpoConfig,
    opts: &TrainOptions,
    mut make_env: F,
    mut on_row: impl FnMut(&SummaryRow),
) -> Result<TrainOutcome, RlError>
where
    E: Episodic,
    F: FnMut(usize, u64) -> E,
{
    cfg.validate()?;
    if opts.n_envs == 0 {
        return Err(RlError::Config("n_envs must be at least 1".into()));
    }
    let mut slots = Vec::with_capacity(opts.n_envs);
    for i in 0..opts.n_envs {
        let mut env = make_env(i, seed::derive(opts.seed, Stream::TrainEnv, i as u64));
        let obs = env.reset()?;
        slots.push(Slot {
            env,
            obs,
            segment: Vec::new(),
            reward: 0.0,
            length: 0,
        });
    }
    let shape = NetShape::new(slots[0].env.obs_dim(), &cfg.hidden(), slots[0].env.act_dim());
    let mut params = PolicyParams::init(shape, &mut seed::stream_rng(opts.seed, Stream::Init, 0));
    let mut adam = Adam::new(params.len());
    let mut action_rng = seed::stream_rng(opts.seed, Stream::TrainAction, 0);
    let mut shuffle_rng = seed::stream_rng(opts.seed, Stream::Shuffle, 0);

    let mut buffer: Vec<Transition> = Vec::with_capacity(cfg.buffer_size + opts.n_envs);
    let mut out = TrainOutcome {
        params: params.clone(),
        rows: Vec::new(),
        episodes: Vec::new(),
        updates: 0,
        checkpoints: Vec::new(),
    };
    let mut step = 0u64;
    let mut next_summary = cfg.summary_frequency;
    let mut episodes_at_row = 0usize;
    let mut last_stats = LossStats::default();

    while step < cfg.max_steps {
        // Batched inference at the barrier, in environment order.
        for s in &slots {
            params.normalizer.update(&s.obs);
        }
        let mut pending = Vec::with_capacity(slots.len());
        for s in &slots {
            let x = params.normalizer.normalize(&s.obs);
            let (dist, value) = params.forward(&x);
            let action = dist.sample(&mut action_rng);
            let log_prob = dist.log_prob(&action);
            pending.push((x, action, log_prob, value));
        }
        let outcomes: Vec<Result<StepOutcome, RlError>> = slots
            .par_iter_mut()
            .zip(pending.par_iter())
            .map(|(s, p)| s.env.step(&p.1))
            .collect();
        step += slots.len() as u64;

        for ((s, (x, action, log_prob, value)), outcome) in slots.iter_mut().zip(pending).zip(outcomes) {
            let o = outcome?;
            let reward = o.reward * cfg.extrinsic_strength;
            s.reward += o.reward;
            s.length += 1;
            s.segment.push(Transition {
                obs: x,
                action,
                log_prob,
                reward,
                value,
                done: o.terminal,
                advantage: 0.0,
                ret: 0.0,
            });
            if o.terminal || o.truncated {
                let boot = if o.terminal {
                    0.0
                } else {
                    params.value(&params.normalizer.normalize(&o.obs))
                };
                close_segment(&mut s.segment, boot, cfg, &mut buffer)?;
                out.episodes.push(EpisodeStat {
                    step,
                    reward: s.reward,
                    length: s.length,
                });
                s.reward = 0.0;
                s.length = 0;
                s.obs = s.env.reset()?;
            } else {
                s.obs = o.obs;
                if s.segment.len() >= cfg.time_horizon {
                    let boot = params.value(&params.normalizer.normalize(&s.obs));
                    close_segment(&mut s.segment, boot, cfg, &mut buffer)?;
                }
            }
        }

        let collected = buffer.len() + slots.iter().map(|s| s.segment.len()).sum::<usize>();
        if collected >= cfg.buffer_size {
            for s in slots.iter_mut() {
                if !s.segment.is_empty() {
                    let boot = params.value(&params.normalizer.normalize(&s.obs));
                    close_segment(&mut s.segment, boot, cfg, &mut buffer)?;
                }
            }
            let coef = Coefficients::at(cfg, step);
            last_stats = ppo_update(&mut params, &mut adam, &mut buffer, cfg, coef, &mut shuffle_rng)?;
            buffer.clear();
            out.updates += 1;
        }

        let finished = step >= cfg.max_steps;
        while step >= next_summary || (finished && out.rows.last().is_none_or(|r| r.step != step)) {
            let row_step = if step >= next_summary { next_summary } else { step };
            let recent = &out.episodes[episodes_at_row..];
            let n = recent.len();
            let coef = Coefficients::at(cfg, row_step);
            let row = SummaryRow {
                step: row_step,
                episodes: n,
                mean_reward: recent.iter().map(|e| e.reward).sum::<f64>() / n as f64,
                mean_episode_len: recent.iter().map(|e| e.length as f64).sum::<f64>() / n as f64,
                policy_loss: last_stats.policy_loss,
                value_loss: last_stats.value_loss,
                entropy: last_stats.entropy,
                lr: coef.learning_rate,
                beta: coef.beta,
                epsilon: coef.epsilon,
            };
            episodes_at_row = out.episodes.len();
            on_row(&row);
            out.rows.push(row);
            if let Some(dir) = &opts.checkpoint_dir {
                let path = dir.join(format!("checkpoint-{:010}.ckpt", row.step));
                let ckpt = Checkpoint {
                    params: params.clone(),
                    step: row.step,
                    config_hash: opts.config_hash,
                };
                save_checkpoint(&ckpt, &path)?;
                out.checkpoints.push(path);
                while out.checkpoints.len() > cfg.keep_checkpoints.max(1) {
                    let old = out.checkpoints.remove(0);
                    std::fs::remove_file(&old).map_err(|source| {
                        RlError::Checkpoint(super::CheckpointError::Io {
                            path: old.display().to_string(),
                            source,
                        })
                    })?;
                }
            }
            if step >= next_summary {
                next_summary += cfg.summary_frequency;
            } else {
                break;
            }
        }
    }
    out.params = params;
    Ok(out)
}

fn close_segment(
    segment: &mut Vec<Transition>,
    bootstrap: f64,
    cfg: &PpoConfig,
    buffer: &mut Vec<Transition>,
) -> Result<(), RlError> {
    let rewards: Vec<f64> = segment.iter().map(|t| t.reward).collect();
    let values: Vec<f64> = segment.iter().map(|t| t.value).collect();
    let dones: Vec<bool> = segment.iter().map(|t| t.done).collect();
    let (adv, ret) = compute_gae(&rewards, &values, &dones, bootstrap, cfg.gamma, cfg.lambda)?;
    for ((mut t, a), r) in segment.drain(..).zip(adv).zip(ret) {
        t.advantage = a;
        t.ret = r;
        buffer.push(t);
    }
    Ok(())
}
