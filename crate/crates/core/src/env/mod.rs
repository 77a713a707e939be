//! The shooter's environment: spawning, sensing, moving, harming,
//! rewarding and ending episodes.

mod observation;
pub mod reward;

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use observation::{Observation, RayView, OBS_DIM, RAY_BLOCK, SELF_BLOCK};
pub use reward::RewardBreakdown;

use crate::geom::Vec2;
use crate::occupants::{
    self, decide_goal, mark_harmed, step_occupant, Census, OccupantError, OccupantState,
    OccupantStatus,
};
use crate::world::{build_ray_fan, raycast, BuildingLayout, ExitMask, WallKind, WallSegment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Seconds per step.
    pub dt: f64,
    pub harm_radius: f64,
    pub ray_range: f64,
    pub shooter_speed: f64,
    pub shooter_radius: f64,
    /// Evaluation episodes end after this long without reaching a target.
    pub no_target_timeout: f64,
    pub occupant_count: usize,
    pub occupant_speed: f64,
    pub freeze_time: f64,
    /// Training episodes are cut after this many steps.
    pub max_episode_steps: u64,
    /// Occupants never leave their spawn points.
    pub static_occupants: bool,
    /// When false the shooter neither moves nor harms anyone.
    pub shooter_active: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            dt: 0.1,
            harm_radius: 2.7,
            ray_range: 20.0,
            shooter_speed: 2.0,
            shooter_radius: 0.4,
            no_target_timeout: 20.0,
            occupant_count: 100,
            occupant_speed: occupants::DEFAULT_OCCUPANT_SPEED,
            freeze_time: occupants::DEFAULT_FREEZE_TIME,
            max_episode_steps: 3000,
            static_occupants: false,
            shooter_active: true,
        }
    }
}

impl EnvConfig {
    /// Defaults for training: 60 occupants per episode.
    pub fn training() -> Self {
        EnvConfig {
            occupant_count: 60,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let positive = [
            ("dt", self.dt),
            ("harm_radius", self.harm_radius),
            ("ray_range", self.ray_range),
            ("shooter_speed", self.shooter_speed),
            ("shooter_radius", self.shooter_radius),
            ("no_target_timeout", self.no_target_timeout),
            ("occupant_speed", self.occupant_speed),
            ("freeze_time", self.freeze_time),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EnvError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_episode_steps == 0 {
            return Err(EnvError::Config("max_episode_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn timeout_steps(&self) -> u64 {
        (self.no_target_timeout / self.dt).round() as u64
    }

    fn freeze_steps(&self) -> u64 {
        (self.freeze_time / self.dt).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Training,
    Evaluation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EndReason {
    ExteriorWall,
    Timeout,
    AllResolved,
    StepCap,
}

impl EndReason {
    pub fn as_str(self) -> &'static str {
        match self {
            EndReason::ExteriorWall => "exterior_wall",
            EndReason::Timeout => "timeout",
            EndReason::AllResolved => "all_resolved",
            EndReason::StepCap => "step_cap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "exterior_wall" => EndReason::ExteriorWall,
            "timeout" => EndReason::Timeout,
            "all_resolved" => EndReason::AllResolved,
            "step_cap" => EndReason::StepCap,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    TargetReached,
    ExteriorWallHit,
    InteriorWallHit,
    OccupantEvacuated,
    EpisodeEnd(EndReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeEvent {
    /// Step index (1-based: events of the first step carry 1).
    pub t: u64,
    pub kind: EventKind,
    /// Occupant id for occupant events, 0 otherwise.
    pub subject: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShooterState {
    pub pos: Vec2,
    pub heading: f64,
    pub velocity: Vec2,
    /// Targets reached so far.
    pub count: u32,
}

/// Egocentric move command: `x` forward along the heading, `y` to the
/// left. Clipped to the unit disc and scaled by the shooter speed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Action {
    pub x: f64,
    pub y: f64,
}

impl Action {
    pub fn new(x: f64, y: f64) -> Self {
        Action { x, y }
    }

    pub fn clipped(self) -> Vec2 {
        let v = Vec2::new(self.x, self.y);
        if !v.is_finite() {
            return Vec2::ZERO;
        }
        let len = v.length();
        if len > 1.0 {
            v * (1.0 / len)
        } else {
            v
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EnvError {
    #[error("scenario leaves no exit open besides the entrance")]
    InsufficientEgress,
    #[error("step called after the episode ended")]
    StepAfterDone,
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error("no spawn position with wall clearance found")]
    NoSpawnPosition,
    #[error(transparent)]
    Occupant(#[from] OccupantError),
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: RewardBreakdown,
    pub events: Vec<EpisodeEvent>,
    pub done: Option<EndReason>,
}

/// Everything an evaluation run records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeLog {
    pub events: Vec<EpisodeEvent>,
    /// Shooter position after each step.
    pub trajectory: Vec<(u64, Vec2)>,
}

#[derive(Debug, Clone)]
pub struct ShooterEnv {
    layout: Arc<BuildingLayout>,
    cfg: EnvConfig,
    mode: Mode,
    mask: ExitMask,
    sensor_walls: Vec<WallSegment>,
    body_walls: Vec<WallSegment>,
    shooter: ShooterState,
    occupants: Vec<OccupantState>,
    step_index: u64,
    steps_since_target: u64,
    touching_exterior: bool,
    touching_interior: bool,
    done: Option<EndReason>,
    log: Option<EpisodeLog>,
    rng: ChaCha8Rng,
}

impl ShooterEnv {
    /// Starts a new episode.
    pub fn reset(
        layout: Arc<BuildingLayout>,
        mask: ExitMask,
        cfg: EnvConfig,
        mode: Mode,
        mut rng: ChaCha8Rng,
    ) -> Result<(Self, Observation), EnvError> {
        cfg.validate()?;
        if !layout.exits().iter().any(|e| mask.is_open(e.id)) {
            return Err(EnvError::InsufficientEgress);
        }
        let body_walls = layout.body_walls();
        let pos = match mode {
            Mode::Evaluation => {
                let zone = layout.spawn_zone().rect();
                sample_clear(&layout, &body_walls, cfg.shooter_radius, &mut rng, |r| {
                    Vec2::new(
                        r.random_range(zone.min.x..zone.max.x),
                        r.random_range(zone.min.y..zone.max.y),
                    )
                })?
            }
            Mode::Training => {
                let b = layout.bounds();
                sample_clear(&layout, &body_walls, cfg.shooter_radius, &mut rng, |r| {
                    Vec2::new(r.random_range(b.min.x..b.max.x), r.random_range(b.min.y..b.max.y))
                })?
            }
        };
        let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let occupants =
            occupants::spawn_occupants(&layout, cfg.occupant_count, cfg.occupant_speed, &mut rng)?;
        Self::with_state(layout, mask, cfg, mode, pos, heading, occupants, rng)
    }

    /// Starts an episode from explicit shooter and occupant placements.
    #[allow(clippy::too_many_arguments)]
    pub fn with_state(
        layout: Arc<BuildingLayout>,
        mask: ExitMask,
        cfg: EnvConfig,
        mode: Mode,
        pos: Vec2,
        heading: f64,
        occupants: Vec<OccupantState>,
        rng: ChaCha8Rng,
    ) -> Result<(Self, Observation), EnvError> {
        cfg.validate()?;
        let env = ShooterEnv {
            sensor_walls: layout.sensor_walls(mask),
            body_walls: layout.body_walls(),
            layout,
            cfg,
            mode,
            mask,
            shooter: ShooterState {
                pos,
                heading,
                velocity: Vec2::ZERO,
                count: 0,
            },
            occupants,
            step_index: 0,
            steps_since_target: 0,
            touching_exterior: false,
            touching_interior: false,
            done: None,
            log: None,
            rng,
        };
        let obs = env.observe();
        Ok((env, obs))
    }

    /// Starts recording events and the shooter trajectory.
    pub fn record(&mut self) {
        self.log = Some(EpisodeLog::default());
    }

    pub fn take_log(&mut self) -> Option<EpisodeLog> {
        self.log.take()
    }

    pub fn layout(&self) -> &BuildingLayout {
        &self.layout
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn mask(&self) -> ExitMask {
        self.mask
    }

    pub fn shooter(&self) -> &ShooterState {
        &self.shooter
    }

    /// Walls the shooter's body collides with.
    pub fn body_walls(&self) -> &[WallSegment] {
        &self.body_walls
    }

    pub fn occupants(&self) -> &[OccupantState] {
        &self.occupants
    }

    pub fn census(&self) -> Census {
        Census::of(&self.occupants)
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn elapsed(&self) -> f64 {
        self.step_index as f64 * self.cfg.dt
    }

    pub fn done(&self) -> Option<EndReason> {
        self.done
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Seven-ray sensor reading plus self state.
    pub fn observe(&self) -> Observation {
        let targets: Vec<Vec2> = self
            .occupants
            .iter()
            .filter(|o| o.status.is_live())
            .map(|o| o.pos)
            .collect();
        let fan = build_ray_fan(self.shooter.heading);
        let range = self.cfg.ray_range;
        let rays = fan.map(|d| raycast(&self.sensor_walls, self.shooter.pos, d, &targets, range));
        let b = self.layout.bounds();
        let p = self.shooter.pos;
        Observation::encode(
            &rays,
            range,
            [self.shooter.velocity.x, self.shooter.velocity.y],
            [(p.x - b.min.x) / b.width(), (p.y - b.min.y) / b.height()],
        )
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if self.done.is_some() {
            return Err(EnvError::StepAfterDone);
        }
        let t = self.step_index as f64 * self.cfg.dt;
        let step_no = self.step_index + 1;
        let mut events = Vec::new();
        let count_before = self.shooter.count;

        // Move.
        let local = if self.cfg.shooter_active {
            action.clipped()
        } else {
            Vec2::ZERO
        };
        let world = local.rotated(self.shooter.heading);
        let disp = world * (self.cfg.shooter_speed * self.cfg.dt);
        let contact = self.blocking_kinds(self.shooter.pos + disp);
        let start = self.shooter.pos;
        if contact == (false, false) {
            self.shooter.pos = start + disp;
        } else {
            let slides = [Vec2::new(disp.x, 0.0), Vec2::new(0.0, disp.y)];
            if let Some(s) = slides
                .into_iter()
                .find(|s| s.length() > 0.0 && self.blocking_kinds(start + *s) == (false, false))
            {
                self.shooter.pos = start + s;
            }
        }
        self.shooter.velocity = (self.shooter.pos - start) * (1.0 / self.cfg.dt);
        if local.length() > 1e-9 {
            self.shooter.heading = world.angle();
        }

        let (ext_now, int_now) = contact;
        let mut r_ext = 0.0;
        let mut r_int = 0.0;
        if ext_now && !self.touching_exterior {
            r_ext = reward::exterior_wall_penalty(count_before);
            events.push(EpisodeEvent {
                t: step_no,
                kind: EventKind::ExteriorWallHit,
                subject: 0,
            });
        }
        if int_now && !self.touching_interior {
            r_int = reward::INTERIOR_WALL_PENALTY;
            events.push(EpisodeEvent {
                t: step_no,
                kind: EventKind::InteriorWallHit,
                subject: 0,
            });
        }
        self.touching_exterior = ext_now;
        self.touching_interior = int_now;

        // Harm everyone in range, in id order.
        let mut r_target = 0.0;
        let shooter_pos = self.shooter.pos;
        let radius = self.cfg.harm_radius;
        for occ in self.occupants.iter_mut() {
            if self.cfg.shooter_active
                && occ.status.is_live()
                && occ.pos.distance(shooter_pos) <= radius
            {
                mark_harmed(occ)?;
                r_target += reward::target_reward(self.shooter.count);
                self.shooter.count += 1;
                events.push(EpisodeEvent {
                    t: step_no,
                    kind: EventKind::TargetReached,
                    subject: occ.id,
                });
            }
        }
        let reached = self.shooter.count > count_before;

        // Occupants.
        if !self.cfg.static_occupants {
            let moving_now = self.step_index >= self.cfg.freeze_steps();
            for occ in self.occupants.iter_mut() {
                if moving_now && occ.status == OccupantStatus::Frozen && occ.goal.is_none() {
                    decide_goal(occ, &self.layout, self.mask)?;
                }
                // Gate on the integer step count rather than float time.
                let freeze_gate = if moving_now { 0.0 } else { f64::INFINITY };
                if step_occupant(occ, t, self.cfg.dt, freeze_gate)
                    == Some(OccupantStatus::Evacuated)
                {
                    events.push(EpisodeEvent {
                        t: step_no,
                        kind: EventKind::OccupantEvacuated,
                        subject: occ.id,
                    });
                }
            }
        }

        self.step_index = step_no;
        self.steps_since_target = if reached { 0 } else { self.steps_since_target + 1 };

        let reward = RewardBreakdown::new(r_target, r_ext, r_int, reward::TIME_PENALTY);
        let done = self.check_termination(ext_now);
        if let Some(reason) = done {
            self.done = Some(reason);
            events.push(EpisodeEvent {
                t: step_no,
                kind: EventKind::EpisodeEnd(reason),
                subject: 0,
            });
        }
        if let Some(log) = self.log.as_mut() {
            log.events.extend_from_slice(&events);
            log.trajectory.push((step_no, self.shooter.pos));
        }
        Ok(StepResult {
            obs: self.observe(),
            reward,
            events,
            done,
        })
    }

    /// End-of-episode rule for the current state. `exterior_contact` is
    /// whether the last move touched an exterior wall.
    pub fn check_termination(&self, exterior_contact: bool) -> Option<EndReason> {
        let all_resolved = self.occupants.iter().all(|o| o.status.is_terminal());
        match self.mode {
            Mode::Evaluation => {
                if exterior_contact {
                    Some(EndReason::ExteriorWall)
                } else if all_resolved {
                    Some(EndReason::AllResolved)
                } else if self.steps_since_target >= self.cfg.timeout_steps() {
                    Some(EndReason::Timeout)
                } else {
                    None
                }
            }
            Mode::Training => {
                if all_resolved {
                    Some(EndReason::AllResolved)
                } else if self.step_index >= self.cfg.max_episode_steps {
                    Some(EndReason::StepCap)
                } else {
                    None
                }
            }
        }
    }

    /// Which wall kinds the shooter's body would overlap at `pos`.
    fn blocking_kinds(&self, pos: Vec2) -> (bool, bool) {
        let r = self.cfg.shooter_radius;
        let mut ext = false;
        let mut int = false;
        for w in &self.body_walls {
            if w.segment().distance_to_point(pos) < r {
                match w.kind {
                    WallKind::Exterior => ext = true,
                    WallKind::Interior => int = true,
                }
            }
        }
        (ext, int)
    }

    /// Test hook: overrides the time since the last reached target.
    #[doc(hidden)]
    pub fn set_steps_since_target(&mut self, steps: u64) {
        self.steps_since_target = steps;
    }

    /// Test hook: overrides the step counter.
    #[doc(hidden)]
    pub fn set_step_index(&mut self, steps: u64) {
        self.step_index = steps;
    }
}

fn sample_clear(
    layout: &BuildingLayout,
    walls: &[WallSegment],
    clearance: f64,
    rng: &mut ChaCha8Rng,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Vec2,
) -> Result<Vec2, EnvError> {
    for _ in 0..100_000 {
        let p = draw(rng);
        if layout.is_walkable(p) && walls.iter().all(|w| w.segment().distance_to_point(p) >= clearance)
        {
            return Ok(p);
        }
    }
    Err(EnvError::NoSpawnPosition)
}
