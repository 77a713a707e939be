//! Evaluation-time shooter policies.

use super::net::PolicyParams;
use crate::env::{Action, Observation, ShooterEnv};
use crate::geom::Vec2;
use crate::world::{ray_offsets, RayTag, WallKind, RAY_COUNT};

pub trait ShooterPolicy: Sync {
    fn name(&self) -> &str;
    /// Next action. Learned policies use only `obs`; scripted ones may
    /// also look at the environment.
    fn act(&self, env: &ShooterEnv, obs: &Observation) -> Action;
}

/// Mean action of a trained network, with its normalizer frozen.
#[derive(Debug, Clone)]
pub struct PpoPolicy {
    pub params: PolicyParams,
}

impl PpoPolicy {
    pub fn new(params: PolicyParams) -> Self {
        PpoPolicy { params }
    }
}

impl ShooterPolicy for PpoPolicy {
    fn name(&self) -> &str {
        "ppo"
    }

    fn act(&self, _env: &ShooterEnv, obs: &Observation) -> Action {
        let x = self.params.normalizer.normalize(obs.as_slice());
        let m = self.params.mean_action(&x);
        Action::new(m[0], m[1])
    }
}

/// Scripted baseline. Heads for the nearest target its rays see;
/// otherwise follows the most open ray. Never steps into contact with an
/// exterior wall or portal: when the preferred heading is unsafe it turns
/// to the nearest safe one.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyPolicy;

const TURN_STEP_DEG: f64 = 15.0;
/// Extra clearance kept from exterior walls, in metres.
const EXTERIOR_MARGIN: f64 = 0.3;
const LOOKAHEAD_STEPS: usize = 3;

impl GreedyPolicy {
    fn preferred_offset(obs: &Observation) -> f64 {
        let offsets = ray_offsets();
        let centre = (RAY_COUNT / 2) as f64;
        let target = (0..RAY_COUNT)
            .filter(|&r| obs.ray(r).tag() == RayTag::Target)
            .min_by(|&a, &b| {
                obs.ray(a)
                    .normalized_distance()
                    .total_cmp(&obs.ray(b).normalized_distance())
            });
        let pick = target.unwrap_or_else(|| {
            let score = |r: usize| {
                let ray = obs.ray(r);
                let mut s = ray.normalized_distance() - 0.02 * (r as f64 - centre).abs();
                if ray.tag() == RayTag::ExteriorWall {
                    s -= 0.1;
                }
                s
            };
            (0..RAY_COUNT)
                .max_by(|&a, &b| score(a).total_cmp(&score(b)).then(b.cmp(&a)))
                .expect("rays")
        });
        offsets[pick]
    }

    fn safe(env: &ShooterEnv, dir: Vec2) -> bool {
        let cfg = env.config();
        let step = cfg.shooter_speed * cfg.dt;
        let start = env.shooter().pos;
        (1..=LOOKAHEAD_STEPS).all(|k| {
            let p = start + dir * (step * k as f64);
            env.body_walls().iter().all(|w| {
                let d = w.segment().distance_to_point(p);
                match w.kind {
                    WallKind::Exterior => d >= cfg.shooter_radius + EXTERIOR_MARGIN,
                    // Only the first step has to be free of interior walls.
                    WallKind::Interior => k > 1 || d >= cfg.shooter_radius,
                }
            })
        })
    }
}

impl ShooterPolicy for GreedyPolicy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn act(&self, env: &ShooterEnv, obs: &Observation) -> Action {
        let heading = env.shooter().heading;
        let want = Self::preferred_offset(obs);
        let turns = (180.0 / TURN_STEP_DEG) as i32;
        for k in 0..=turns {
            for sign in [1.0, -1.0] {
                if k == 0 && sign < 0.0 {
                    continue;
                }
                let off = want + sign * (k as f64 * TURN_STEP_DEG).to_radians();
                if Self::safe(env, Vec2::from_angle(heading + off)) {
                    let (s, c) = off.sin_cos();
                    return Action::new(c, s);
                }
            }
        }
        Action::new(0.0, 0.0)
    }
}
