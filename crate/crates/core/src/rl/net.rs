//! Policy and value networks over one flat parameter vector.
//!
//! Both networks are tanh MLPs with their own trunks. The policy maps an
//! observation to the mean of a diagonal Gaussian over actions; its
//! log standard deviation is a free, state-independent parameter. The
//! value network maps an observation to a scalar estimate of the
//! discounted return.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::normalizer::RunningNormalizer;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub act_dim: usize,
}

impl NetShape {
    pub fn new(obs_dim: usize, hidden: &[usize], act_dim: usize) -> Self {
        NetShape {
            obs_dim,
            hidden: hidden.to_vec(),
            act_dim,
        }
    }

    fn dims(&self, out: usize) -> Vec<usize> {
        let mut d = vec![self.obs_dim];
        d.extend(&self.hidden);
        d.push(out);
        d
    }
}

/// Offsets of one dense layer inside the flat vector.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dense {
    w: usize,
    b: usize,
    inp: usize,
    out: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    policy: Vec<Dense>,
    log_std: usize,
    value: Vec<Dense>,
    len: usize,
}

impl Layout {
    fn new(shape: &NetShape) -> Self {
        let mut off = 0;
        let mut stack = |dims: Vec<usize>| {
            dims.windows(2)
                .map(|p| {
                    let d = Dense {
                        w: off,
                        b: off + p[0] * p[1],
                        inp: p[0],
                        out: p[1],
                    };
                    off += p[0] * p[1] + p[1];
                    d
                })
                .collect::<Vec<_>>()
        };
        let policy = stack(shape.dims(shape.act_dim));
        let value = stack(shape.dims(1));
        let log_std = off;
        Layout {
            policy,
            log_std,
            value,
            len: off + shape.act_dim,
        }
    }
}

/// Diagonal Gaussian over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl Gaussian {
    pub fn log_prob(&self, a: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(a)
            .map(|((m, ls), x)| {
                let z = (x - m) / ls.exp();
                -0.5 * z * z - ls - 0.5 * LN_2PI
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 * (LN_2PI + 1.0)).sum()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let z: f64 = StandardNormal.sample(rng);
                m + ls.exp() * z
            })
            .collect()
    }
}

/// Network weights plus the observation normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    shape: NetShape,
    layout: Layout,
    pub theta: Vec<f64>,
    pub normalizer: RunningNormalizer,
}

/// Activations kept for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    policy: Vec<Vec<f64>>,
    value: Vec<Vec<f64>>,
}

impl Trace {
    pub fn mean(&self) -> &[f64] {
        self.policy.last().expect("forward ran")
    }

    pub fn value(&self) -> f64 {
        self.value.last().expect("forward ran")[0]
    }
}

impl PolicyParams {
    pub fn zeros(shape: NetShape) -> Self {
        let layout = Layout::new(&shape);
        PolicyParams {
            theta: vec![0.0; layout.len],
            normalizer: RunningNormalizer::new(shape.obs_dim),
            layout,
            shape,
        }
    }

    /// Scaled-uniform (Glorot) weights, zero biases, log-std 0. Output
    /// layers start small so the initial policy is near zero mean.
    pub fn init<R: Rng>(shape: NetShape, rng: &mut R) -> Self {
        let mut p = Self::zeros(shape);
        let n_policy = p.layout.policy.len();
        for (i, d) in p.layout.policy.clone().into_iter().enumerate() {
            let gain = if i + 1 == n_policy { 0.01 } else { 1.0 };
            fill_glorot(&mut p.theta[d.w..d.b], d.inp, d.out, gain, rng);
        }
        for d in p.layout.value.clone() {
            fill_glorot(&mut p.theta[d.w..d.b], d.inp, d.out, 1.0, rng);
        }
        p
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn log_std(&self) -> &[f64] {
        &self.theta[self.layout.log_std..]
    }

    /// Action distribution and value for a normalized observation.
    pub fn forward(&self, obs: &[f64]) -> (Gaussian, f64) {
        let t = self.trace(obs);
        (
            Gaussian {
                mean: t.mean().to_vec(),
                log_std: self.log_std().to_vec(),
            },
            t.value(),
        )
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        mlp_forward(&self.theta, &self.layout.value, obs)
            .pop()
            .expect("non-empty")[0]
    }

    pub fn mean_action(&self, obs: &[f64]) -> Vec<f64> {
        mlp_forward(&self.theta, &self.layout.policy, obs)
            .pop()
            .expect("non-empty")
    }

    pub fn trace(&self, obs: &[f64]) -> Trace {
        assert_eq!(obs.len(), self.shape.obs_dim, "observation length");
        Trace {
            policy: mlp_forward(&self.theta, &self.layout.policy, obs),
            value: mlp_forward(&self.theta, &self.layout.value, obs),
        }
    }

    /// Accumulates into `grad` the gradient of a loss whose partials with
    /// respect to the policy mean, the log-stds and the value output are
    /// given.
    pub fn backward(
        &self,
        obs: &[f64],
        trace: &Trace,
        d_mean: &[f64],
        d_log_std: &[f64],
        d_value: f64,
        grad: &mut [f64],
    ) {
        mlp_backward(&self.theta, &self.layout.policy, obs, &trace.policy, d_mean, grad);
        mlp_backward(&self.theta, &self.layout.value, obs, &trace.value, &[d_value], grad);
        for (g, d) in grad[self.layout.log_std..].iter_mut().zip(d_log_std) {
            *g += d;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|x| x.is_finite())
    }
}

fn fill_glorot<R: Rng>(w: &mut [f64], inp: usize, out: usize, gain: f64, rng: &mut R) {
    let limit = gain * (6.0 / (inp + out) as f64).sqrt();
    for x in w {
        *x = rng.random_range(-limit..limit);
    }
}

/// Activations of every layer; hidden layers are tanh, the last linear.
fn mlp_forward(theta: &[f64], layers: &[Dense], x: &[f64]) -> Vec<Vec<f64>> {
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
    for (i, d) in layers.iter().enumerate() {
        let input = if i == 0 { x } else { &acts[i - 1] };
        let w = &theta[d.w..d.b];
        let b = &theta[d.b..d.b + d.out];
        let last = i + 1 == layers.len();
        let out: Vec<f64> = (0..d.out)
            .map(|o| {
                let row = &w[o * d.inp..(o + 1) * d.inp];
                let z = b[o] + dot(row, input);
                if last {
                    z
                } else {
                    z.tanh()
                }
            })
            .collect();
        acts.push(out);
    }
    acts
}

fn mlp_backward(
    theta: &[f64],
    layers: &[Dense],
    x: &[f64],
    acts: &[Vec<f64>],
    d_out: &[f64],
    grad: &mut [f64],
) {
    let mut delta = d_out.to_vec();
    for i in (0..layers.len()).rev() {
        let d = layers[i];
        if i + 1 != layers.len() {
            // Through tanh: d/dz = 1 - a^2.
            for (g, a) in delta.iter_mut().zip(&acts[i]) {
                *g *= 1.0 - a * a;
            }
        }
        let input = if i == 0 { x } else { &acts[i - 1] };
        for (o, &g) in delta.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            axpy(g, input, &mut grad[d.w + o * d.inp..d.w + (o + 1) * d.inp]);
            grad[d.b + o] += g;
        }
        if i > 0 {
            let w = &theta[d.w..d.b];
            let mut prev = vec![0.0; d.inp];
            for (o, &g) in delta.iter().enumerate() {
                if g != 0.0 {
                    axpy(g, &w[o * d.inp..(o + 1) * d.inp], &mut prev);
                }
            }
            delta = prev;
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] += a[c * 4 + k] * b[c * 4 + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in chunks * 4..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
