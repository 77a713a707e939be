//! Agent-based simulation of active-shooter incidents in office buildings.
//!
//! A shooter agent trained with proximal policy optimization hunts
//! occupants who freeze, then walk to the nearest hiding place or open
//! exit. The experiment harness sweeps exit configurations and tests the
//! effect of exit count and placement on evacuation and harm rates with
//! one-way ANOVA.
//!
//! Modules:
//! - [`world`]: layouts, ray casting, walking distances
//! - [`occupants`]: scripted occupant behaviour
//! - [`env`]: the shooter's reinforcement-learning environment
//! - [`rl`]: networks, normalization, GAE, PPO, training, checkpoints
//! - [`experiments`]: scenarios, evaluation runs, statistics, reports
//! - [`io`]: configuration, result and log files, run manifests

pub mod env;
pub mod experiments;
pub mod geom;
pub mod io;
pub mod occupants;
pub mod rl;
pub mod seed;
pub mod world;

pub use geom::Vec2;
pub use world::{BuildingLayout, ExitMask, GoalRef};
