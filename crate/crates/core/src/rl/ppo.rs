//! Clipped-surrogate PPO: loss, gradient, optimizer and update.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gae::normalize_advantages;
use super::net::{Gaussian, PolicyParams};
use super::schedule::schedule;
use super::RlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub max_steps: u64,
    pub time_horizon: usize,
    pub summary_frequency: u64,
    pub keep_checkpoints: usize,
    pub batch_size: usize,
    pub buffer_size: usize,
    pub learning_rate: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub num_epoch: usize,
    pub gamma: f64,
    /// Multiplier on the environment reward.
    pub extrinsic_strength: f64,
    pub hidden_units: usize,
    pub num_layers: usize,
    pub value_coef: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            max_steps: 5_000_000,
            time_horizon: 64,
            summary_frequency: 50_000,
            keep_checkpoints: 100,
            batch_size: 2048,
            buffer_size: 20480,
            learning_rate: 3e-4,
            beta: 0.01,
            epsilon: 0.2,
            lambda: 0.95,
            num_epoch: 3,
            gamma: 0.99,
            extrinsic_strength: 1.0,
            hidden_units: 128,
            num_layers: 2,
            value_coef: 0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: String| Err(RlError::Config(m));
        if self.batch_size == 0 || !self.buffer_size.is_multiple_of(self.batch_size) {
            return bad(format!(
                "buffer_size {} must be a positive multiple of batch_size {}",
                self.buffer_size, self.batch_size
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("gamma and lambda must lie in (0, 1]".into());
        }
        if self.time_horizon == 0 || self.num_epoch == 0 || self.summary_frequency == 0 {
            return bad("time_horizon, num_epoch and summary_frequency must be positive".into());
        }
        if self.hidden_units == 0 || self.num_layers == 0 {
            return bad("network must have at least one hidden layer".into());
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("beta", self.beta),
            ("epsilon", self.epsilon),
            ("extrinsic_strength", self.extrinsic_strength),
            ("value_coef", self.value_coef),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }

    pub fn hidden(&self) -> Vec<usize> {
        vec![self.hidden_units; self.num_layers]
    }
}

/// One collected step with its GAE targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Normalized observation the action was chosen from.
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
    pub advantage: f64,
    pub ret: f64,
}

/// Annealed coefficients at one point of training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub learning_rate: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl Coefficients {
    pub fn at(cfg: &PpoConfig, step: u64) -> Self {
        Coefficients {
            learning_rate: schedule(cfg.learning_rate, step, cfg.max_steps),
            beta: schedule(cfg.beta, step, cfg.max_steps),
            epsilon: schedule(cfg.epsilon, step, cfg.max_steps),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

impl LossStats {
    pub fn total(&self, value_coef: f64, beta: f64) -> f64 {
        self.policy_loss + value_coef * self.value_loss - beta * self.entropy
    }
}

/// Mean loss over `batch` and its gradient (added into `grad`). Each
/// sample is `(transition, normalized advantage)`.
pub fn loss_and_grad(
    params: &PolicyParams,
    batch: &[&Transition],
    epsilon: f64,
    beta: f64,
    value_coef: f64,
    grad: &mut [f64],
) -> LossStats {
    let n = batch.len() as f64;
    let log_std = params.log_std().to_vec();
    let std: Vec<f64> = log_std.iter().map(|l| l.exp()).collect();
    let act_dim = log_std.len();
    let mut stats = LossStats::default();
    let mut d_mean = vec![0.0; act_dim];
    let mut d_log_std = vec![0.0; act_dim];
    for tr in batch {
        let trace = params.trace(&tr.obs);
        let dist = Gaussian {
            mean: trace.mean().to_vec(),
            log_std: log_std.clone(),
        };
        let a = tr.advantage;
        let ratio = (dist.log_prob(&tr.action) - tr.log_prob).exp();
        let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
        let unclipped_active = ratio * a <= clipped * a;
        stats.policy_loss -= (ratio * a).min(clipped * a) / n;
        // d(-surrogate)/d(log pi), zero when the clipped branch is chosen.
        let d_logp = if unclipped_active { -a * ratio / n } else { 0.0 };
        for j in 0..act_dim {
            let z = (tr.action[j] - dist.mean[j]) / std[j];
            d_mean[j] = d_logp * z / std[j];
            d_log_std[j] = d_logp * (z * z - 1.0);
        }

        let v = trace.value();
        let v_clip = tr.value + (v - tr.value).clamp(-epsilon, epsilon);
        let l1 = (v - tr.ret).powi(2);
        let l2 = (v_clip - tr.ret).powi(2);
        stats.value_loss += 0.5 * l1.max(l2) / n;
        let d_v = if l1 >= l2 {
            v - tr.ret
        } else if (v - tr.value).abs() < epsilon {
            v_clip - tr.ret
        } else {
            0.0
        };
        params.backward(&tr.obs, &trace, &d_mean, &d_log_std, value_coef * d_v / n, grad);
    }
    stats.entropy = Gaussian {
        mean: vec![0.0; act_dim],
        log_std: log_std.clone(),
    }
    .entropy();
    // The entropy bonus depends on log-std only.
    let ls_off = params.len() - act_dim;
    for g in &mut grad[ls_off..] {
        *g -= beta;
    }
    stats
}

/// First-order optimizer with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One descent step on `theta` along `grad`.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            theta[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Runs the configured epochs of minibatch descent over `buffer`, whose
/// advantages are normalized here. Returns mean statistics over all
/// minibatches. Parameters are left untouched if any loss is non-finite.
pub fn ppo_update<R: Rng>(
    params: &mut PolicyParams,
    adam: &mut Adam,
    buffer: &mut [Transition],
    cfg: &PpoConfig,
    coef: Coefficients,
    rng: &mut R,
) -> Result<LossStats, RlError> {
    let mut adv: Vec<f64> = buffer.iter().map(|t| t.advantage).collect();
    normalize_advantages(&mut adv);
    for (t, a) in buffer.iter_mut().zip(adv) {
        t.advantage = a;
    }
    let backup = (params.theta.clone(), adam.clone());
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let batch = cfg.batch_size.min(buffer.len()).max(1);
    let mut sum = LossStats::default();
    let mut batches = 0usize;
    let mut grad = vec![0.0; params.len()];
    for epoch in 0..cfg.num_epoch {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            if chunk.len() < batch {
                continue;
            }
            let mb: Vec<&Transition> = chunk.iter().map(|&i| &buffer[i]).collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let stats = loss_and_grad(params, &mb, coef.epsilon, coef.beta, cfg.value_coef, &mut grad);
            let total = stats.total(cfg.value_coef, coef.beta);
            if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                params.theta = backup.0;
                *adam = backup.1;
                return Err(RlError::NonFiniteLoss {
                    epoch,
                    policy_loss: stats.policy_loss,
                    value_loss: stats.value_loss,
                    entropy: stats.entropy,
                });
            }
            adam.step(&mut params.theta, &grad, coef.learning_rate);
            sum.policy_loss += stats.policy_loss;
            sum.value_loss += stats.value_loss;
            sum.entropy += stats.entropy;
            batches += 1;
        }
    }
    if !params.is_finite() {
        params.theta = backup.0;
        *adam = backup.1;
        return Err(RlError::NonFiniteParams);
    }
    let k = batches.max(1) as f64;
    Ok(LossStats {
        policy_loss: sum.policy_loss / k,
        value_loss: sum.value_loss / k,
        entropy: sum.entropy / k,
    })
}
