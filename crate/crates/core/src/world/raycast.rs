//! Planar ray sensor.

use serde::{Deserialize, Serialize};

use super::layout::{WallKind, WallSegment};
use crate::geom::{ray_disc_hit, Vec2};

pub const RAY_COUNT: usize = 7;
pub const DEFAULT_RAY_RANGE: f64 = 20.0;
/// Angle of the outermost ray on each side of the heading.
pub const MAX_RAY_DEGREES: f64 = 70.0;
/// Body radius used when rays test against occupants.
pub const TARGET_RADIUS: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RayTag {
    Target,
    InteriorWall,
    ExteriorWall,
    None,
}

impl From<WallKind> for RayTag {
    fn from(k: WallKind) -> Self {
        match k {
            WallKind::Exterior => RayTag::ExteriorWall,
            WallKind::Interior => RayTag::InteriorWall,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub hit: bool,
    pub distance: f64,
    pub tag: RayTag,
}

impl RayHit {
    pub fn miss(max_range: f64) -> Self {
        RayHit {
            hit: false,
            distance: max_range,
            tag: RayTag::None,
        }
    }
}

/// Offsets from the heading of the seven sensor rays, evenly spaced from
/// -70° to +70°.
pub fn ray_offsets() -> [f64; RAY_COUNT] {
    let max = MAX_RAY_DEGREES.to_radians();
    let half = (RAY_COUNT / 2) as f64;
    std::array::from_fn(|i| max * (i as f64 - half) / half)
}

pub fn build_ray_fan(heading: f64) -> [Vec2; RAY_COUNT] {
    ray_offsets().map(|o| Vec2::from_angle(heading + o))
}

/// Nearest wall or target disc along the ray within `max_range`.
///
/// Ties between a wall and a target at the same distance resolve to the
/// wall.
pub fn raycast(
    walls: &[WallSegment],
    origin: Vec2,
    dir: Vec2,
    targets: &[Vec2],
    max_range: f64,
) -> RayHit {
    let mut best = RayHit::miss(max_range);
    let mut consider = |d: f64, tag: RayTag| {
        if d > 0.0 && d <= max_range && (!best.hit || d < best.distance) {
            best = RayHit {
                hit: true,
                distance: d,
                tag,
            };
        }
    };
    for w in walls {
        if let Some(d) = w.segment().ray_hit(origin, dir) {
            consider(d, w.kind.into());
        }
    }
    for &c in targets {
        // Cheap reject before the quadratic.
        let rel = c - origin;
        let along = rel.dot(dir);
        if along < -TARGET_RADIUS || along > max_range + TARGET_RADIUS {
            continue;
        }
        if let Some(d) = ray_disc_hit(origin, dir, c, TARGET_RADIUS) {
            consider(d, RayTag::Target);
        }
    }
    best
}
