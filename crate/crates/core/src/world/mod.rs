//! Geometry kernel: building layouts, ray casting and walkable-space
//! distances.

mod layout;
pub mod nav;
mod raycast;

pub use layout::{
    load_layout, BuildingLayout, Exit, ExitMask, GoalRef, HidingPlace, LayoutError, SpawnZone,
    WallKind, WallSegment, AREA_PER_OCCUPANT_M2, DEFAULT_LAYOUT, HIDING_PLACE_COUNT, MAX_EXIT_ID, TOY_LAYOUT,
};
pub use nav::{NavError, CELL_SIZE};
pub use raycast::{
    build_ray_fan, ray_offsets, raycast, RayHit, RayTag, DEFAULT_RAY_RANGE, MAX_RAY_DEGREES,
    RAY_COUNT, TARGET_RADIUS,
};

use crate::geom::Vec2;

/// Index into `goals` of the goal with the shortest walking distance from
/// `pos`. Ties go to the lowest index.
pub fn nearest_goal(
    layout: &BuildingLayout,
    pos: Vec2,
    goals: &[GoalRef],
) -> Result<usize, NavError> {
    let nav = layout.nav();
    let cell = nav.walkable_cell(pos).ok_or(NavError::NotWalkable(pos))?;
    let mut best: Option<(usize, f64)> = None;
    for (i, g) in goals.iter().enumerate() {
        let Some(field) = layout.field(*g) else {
            continue;
        };
        let d = field.distance_from(nav, cell, pos);
        if !d.is_finite() {
            continue;
        }
        // Relative tolerance so float summation order cannot break ties.
        if best.is_none_or(|(_, bd)| d < bd - 1e-9 * bd.max(1.0)) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i).ok_or(NavError::Unreachable)
}

/// Walking distance from `pos` to a goal.
pub fn goal_distance(layout: &BuildingLayout, pos: Vec2, goal: GoalRef) -> Result<f64, NavError> {
    let nav = layout.nav();
    let cell = nav.walkable_cell(pos).ok_or(NavError::NotWalkable(pos))?;
    let field = layout.field(goal).ok_or(NavError::Unreachable)?;
    let d = field.distance_from(nav, cell, pos);
    if d.is_finite() {
        Ok(d)
    } else {
        Err(NavError::Unreachable)
    }
}

/// Waypoints from `pos` to a goal.
pub fn path_to_goal(
    layout: &BuildingLayout,
    pos: Vec2,
    goal: GoalRef,
) -> Result<Vec<Vec2>, NavError> {
    let field = layout.field(goal).ok_or(NavError::Unreachable)?;
    layout.nav().path_to(field, pos)
}
