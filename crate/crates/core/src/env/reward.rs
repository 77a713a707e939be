//! Shooter reward terms.

use serde::{Deserialize, Serialize};

pub const TARGET_BASE: f64 = 10.0;
pub const TARGET_PER_COUNT: f64 = 5.0;
pub const EXTERIOR_BASE: f64 = -2.0;
pub const EXTERIOR_PER_COUNT: f64 = -0.2;
pub const INTERIOR_WALL_PENALTY: f64 = -0.5;
pub const TIME_PENALTY: f64 = -0.001;

/// Reward for reaching a new target when `count` targets were reached
/// before it.
pub fn target_reward(count: u32) -> f64 {
    TARGET_BASE + f64::from(count) * TARGET_PER_COUNT
}

/// Penalty for touching an exterior wall after `count` targets.
pub fn exterior_wall_penalty(count: u32) -> f64 {
    EXTERIOR_BASE + f64::from(count) * EXTERIOR_PER_COUNT
}

/// Total target reward for `k` targets reached one at a time from zero.
pub fn cumulative_target_reward(k: u32) -> f64 {
    (0..k).map(target_reward).sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_target: f64,
    pub r_exterior_wall: f64,
    pub r_interior_wall: f64,
    pub r_time: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn new(r_target: f64, r_exterior_wall: f64, r_interior_wall: f64, r_time: f64) -> Self {
        RewardBreakdown {
            r_target,
            r_exterior_wall,
            r_interior_wall,
            r_time,
            total: r_exterior_wall + r_interior_wall + r_target + r_time,
        }
    }
}
