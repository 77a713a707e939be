//! Scripted occupants: freeze, pick the nearest refuge, walk there at a
//! constant speed.

use rand::Rng;

use crate::geom::Vec2;
use crate::world::{self, BuildingLayout, ExitMask, GoalRef, NavError};

pub const DEFAULT_OCCUPANT_SPEED: f64 = 1.5;
pub const DEFAULT_FREEZE_TIME: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum OccupantStatus {
    Frozen,
    Moving,
    Hiding,
    Evacuated,
    Harmed,
}

impl OccupantStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, OccupantStatus::Evacuated | OccupantStatus::Harmed)
    }

    /// Still inside and unharmed, hence visible to and reachable by the
    /// shooter.
    pub fn is_live(self) -> bool {
        !self.is_terminal()
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OccupantError {
    #[error("{requested} occupants exceed the occupancy limit of {limit}")]
    OverCapacity { requested: usize, limit: usize },
    #[error("occupant {id}: no reachable goal ({source})")]
    NoReachableGoal { id: usize, source: NavError },
    #[error("occupant {id} is already {status:?}")]
    AlreadyTerminal { id: usize, status: OccupantStatus },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupantState {
    pub id: usize,
    pub pos: Vec2,
    pub status: OccupantStatus,
    pub goal: Option<GoalRef>,
    pub speed: f64,
    /// Remaining waypoints; the last one is the goal point.
    pub path: Vec<Vec2>,
    /// Arrival happens on entering this radius around the goal point.
    arrive_radius: f64,
}

impl OccupantState {
    pub fn new(id: usize, pos: Vec2, speed: f64) -> Self {
        OccupantState {
            id,
            pos,
            status: OccupantStatus::Frozen,
            goal: None,
            speed,
            path: Vec::new(),
            arrive_radius: 0.0,
        }
    }
}

/// Places `n` occupants uniformly at random over the walkable floor.
pub fn spawn_occupants<R: Rng>(
    layout: &BuildingLayout,
    n: usize,
    speed: f64,
    rng: &mut R,
) -> Result<Vec<OccupantState>, OccupantError> {
    let limit = layout.occupancy_limit();
    if n > limit {
        return Err(OccupantError::OverCapacity { requested: n, limit });
    }
    let b = layout.bounds();
    Ok((0..n)
        .map(|id| loop {
            let p = Vec2::new(
                rng.random_range(b.min.x..b.max.x),
                rng.random_range(b.min.y..b.max.y),
            );
            if layout.is_walkable(p) {
                break OccupantState::new(id, p, speed);
            }
        })
        .collect())
}

/// Chooses the closest of the entrance, the open exits and the hiding
/// places by walking distance, and plans the route there.
pub fn decide_goal(
    occ: &mut OccupantState,
    layout: &BuildingLayout,
    open: ExitMask,
) -> Result<GoalRef, OccupantError> {
    if occ.status.is_terminal() {
        return Err(OccupantError::AlreadyTerminal {
            id: occ.id,
            status: occ.status,
        });
    }
    let candidates = layout.candidate_goals(open);
    let unreachable = |source| OccupantError::NoReachableGoal { id: occ.id, source };
    let i = world::nearest_goal(layout, occ.pos, &candidates).map_err(unreachable)?;
    let goal = candidates[i];
    occ.path = world::path_to_goal(layout, occ.pos, goal).map_err(unreachable)?;
    occ.arrive_radius = match goal {
        GoalRef::Hiding(h) => layout.hiding_places()[h].radius,
        _ => 0.0,
    };
    occ.goal = Some(goal);
    Ok(goal)
}

/// Advances one occupant by `dt` seconds at episode time `t`. Returns the
/// new status when it changed.
///
/// Frozen occupants start moving once `t >= freeze_time` and a goal has
/// been chosen. Reaching an egress point evacuates; reaching a hiding
/// place's radius hides.
pub fn step_occupant(
    occ: &mut OccupantState,
    t: f64,
    dt: f64,
    freeze_time: f64,
) -> Option<OccupantStatus> {
    let mut changed = None;
    match occ.status {
        OccupantStatus::Frozen if t >= freeze_time && occ.goal.is_some() => {
            occ.status = OccupantStatus::Moving;
            changed = Some(OccupantStatus::Moving);
        }
        OccupantStatus::Moving => {}
        _ => return None,
    }
    let goal = occ.goal.expect("moving occupants have a goal");

    if occ.arrive_radius > 0.0 {
        if let Some(&last) = occ.path.last() {
            if occ.pos.distance(last) <= occ.arrive_radius {
                occ.status = OccupantStatus::Hiding;
                occ.path.clear();
                return Some(OccupantStatus::Hiding);
            }
        }
    }

    let mut budget = occ.speed * dt;
    while budget > 0.0 {
        let Some(&next) = occ.path.first() else {
            break;
        };
        let final_leg = occ.path.len() == 1;
        let d = occ.pos.distance(next);
        let stop_short = if final_leg { occ.arrive_radius } else { 0.0 };
        if d - stop_short <= budget {
            if final_leg && stop_short > 0.0 {
                occ.pos = occ.pos.lerp(next, (d - stop_short) / d);
            } else {
                occ.pos = next;
            }
            budget -= (d - stop_short).max(0.0);
            if final_leg {
                occ.path.clear();
                let arrived = if goal.is_egress() {
                    OccupantStatus::Evacuated
                } else {
                    OccupantStatus::Hiding
                };
                occ.status = arrived;
                return Some(arrived);
            }
            occ.path.remove(0);
        } else {
            occ.pos = occ.pos + (next - occ.pos) * (budget / d);
            budget = 0.0;
        }
    }
    changed
}

pub fn mark_harmed(occ: &mut OccupantState) -> Result<(), OccupantError> {
    if occ.status.is_terminal() {
        return Err(OccupantError::AlreadyTerminal {
            id: occ.id,
            status: occ.status,
        });
    }
    occ.status = OccupantStatus::Harmed;
    occ.path.clear();
    Ok(())
}

/// Occupant counts by terminal class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Census {
    pub evacuated: usize,
    pub harmed: usize,
    pub remaining: usize,
}

impl Census {
    pub fn of(occupants: &[OccupantState]) -> Self {
        occupants.iter().fold(Census::default(), |mut c, o| {
            match o.status {
                OccupantStatus::Evacuated => c.evacuated += 1,
                OccupantStatus::Harmed => c.harmed += 1,
                _ => c.remaining += 1,
            }
            c
        })
    }

    pub fn total(&self) -> usize {
        self.evacuated + self.harmed + self.remaining
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moving(pos: Vec2, path: Vec<Vec2>, goal: GoalRef) -> OccupantState {
        let mut o = OccupantState::new(0, pos, 1.5);
        o.path = path;
        o.goal = Some(goal);
        o.status = OccupantStatus::Moving;
        o
    }

    #[test]
    fn frozen_before_three_seconds() {
        let mut o = OccupantState::new(0, Vec2::ZERO, 1.5);
        o.goal = Some(GoalRef::Exit(1));
        o.path = vec![Vec2::new(10.0, 0.0)];
        assert_eq!(step_occupant(&mut o, 2.9, 0.1, 3.0), None);
        assert_eq!(o.pos, Vec2::ZERO);
        assert_eq!(o.status, OccupantStatus::Frozen);
        assert_eq!(step_occupant(&mut o, 3.0, 0.1, 3.0), Some(OccupantStatus::Moving));
        assert!((o.pos.x - 0.15).abs() < 1e-12);
    }

    #[test]
    fn constant_speed_along_a_leg() {
        let mut o = moving(Vec2::ZERO, vec![Vec2::new(10.0, 0.0)], GoalRef::Exit(1));
        for _ in 0..5 {
            let before = o.pos;
            step_occupant(&mut o, 10.0, 0.1, 3.0);
            assert!((o.pos.distance(before) - 0.15).abs() < 1e-12);
        }
    }

    #[test]
    fn reaching_an_exit_evacuates() {
        let mut o = moving(Vec2::ZERO, vec![Vec2::new(0.1, 0.0)], GoalRef::Exit(3));
        assert_eq!(step_occupant(&mut o, 10.0, 0.1, 3.0), Some(OccupantStatus::Evacuated));
        assert_eq!(o.pos, Vec2::new(0.1, 0.0));
        assert_eq!(step_occupant(&mut o, 10.1, 0.1, 3.0), None);
    }

    #[test]
    fn hiding_stops_at_the_region_edge() {
        let mut o = moving(Vec2::ZERO, vec![Vec2::new(2.0, 0.0)], GoalRef::Hiding(0));
        o.arrive_radius = 1.0;
        let mut t = 3.0;
        while o.status == OccupantStatus::Moving {
            step_occupant(&mut o, t, 0.1, 3.0);
            t += 0.1;
        }
        assert_eq!(o.status, OccupantStatus::Hiding);
        assert!((o.pos.x - 1.0).abs() < 1e-12);
        let fixed = o.pos;
        step_occupant(&mut o, t, 0.1, 3.0);
        assert_eq!(o.pos, fixed);
    }

    #[test]
    fn harm_rules() {
        let mut o = moving(Vec2::ZERO, vec![Vec2::new(5.0, 0.0)], GoalRef::Exit(1));
        mark_harmed(&mut o).unwrap();
        assert_eq!(o.status, OccupantStatus::Harmed);
        step_occupant(&mut o, 5.0, 0.1, 3.0);
        assert_eq!(o.pos, Vec2::ZERO);
        assert!(mark_harmed(&mut o).is_err());

        let mut hiding = moving(Vec2::ZERO, vec![], GoalRef::Hiding(1));
        hiding.status = OccupantStatus::Hiding;
        mark_harmed(&mut hiding).unwrap();

        let mut gone = moving(Vec2::ZERO, vec![], GoalRef::Exit(1));
        gone.status = OccupantStatus::Evacuated;
        assert!(matches!(mark_harmed(&mut gone), Err(OccupantError::AlreadyTerminal { .. })));
    }
}
