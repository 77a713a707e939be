mod common;

use std::collections::VecDeque;

use asisim::geom::Vec2;
use asisim::world::{
    load_layout, nearest_goal, raycast, BuildingLayout, ExitMask, GoalRef, LayoutError, NavError,
    RayTag, WallKind, WallSegment, CELL_SIZE, TARGET_RADIUS,
};
use common::{march, minimal_room, square_room, v, MINIMAL_ROOM};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn minimal_room_loads() {
    let l = minimal_room();
    assert_eq!(l.floor_area_m2(), 100.0);
    assert_eq!(l.exits().len(), 2);
    assert_eq!(l.hiding_places().len(), 4);
}

#[test]
fn default_layout_matches_the_office() {
    let l = BuildingLayout::default_office();
    assert!((l.floor_area_m2() - 2400.0).abs() <= 24.0);
    assert_eq!(l.exits().len(), 6);
    assert_eq!(l.hiding_places().len(), 4);
    assert_eq!(l.occupancy_limit(), 172);
    let ids: Vec<u8> = l.exits().iter().map(|e| e.id).collect();
    assert_eq!(ids, [1, 2, 3, 4, 5, 6]);
    for g in l.goals() {
        assert!(l.is_walkable(l.goal_point(g).unwrap()), "{g}");
    }
}

#[test]
fn layout_text_round_trips() {
    let l = BuildingLayout::default_office();
    let again = load_layout(&l.to_layout_text()).unwrap();
    assert_eq!(l.walls(), again.walls());
    assert_eq!(l.exits(), again.exits());
    assert_eq!(l.floor_area_m2(), again.floor_area_m2());
}

#[test]
fn exit_on_interior_wall_is_rejected() {
    // Split the room with an interior wall and put exit 2 in its doorway.
    let text = MINIMAL_ROOM
        .replace(
            "{ id = 2, a = [4.0, 10.0], b = [6.0, 10.0] }",
            "{ id = 2, a = [7.0, 8.0], b = [8.0, 8.0] }",
        )
        .replace(
            "{ a = [6.0, 10.0], b = [10.0, 10.0], kind = \"exterior\" },",
            "{ a = [6.0, 10.0], b = [10.0, 10.0], kind = \"exterior\" },\n\
             { a = [4.0, 10.0], b = [6.0, 10.0], kind = \"exterior\" },\n\
             { a = [5.0, 8.0], b = [7.0, 8.0], kind = \"interior\" },\n\
             { a = [8.0, 8.0], b = [10.0, 8.0], kind = \"interior\" },",
        );
    match load_layout(&text) {
        Err(LayoutError::Exit { id: 2, reason }) => assert!(reason.contains("exterior")),
        other => panic!("expected exit error, got {other:?}"),
    }
}

#[test]
fn invalid_layouts_name_the_problem() {
    assert!(matches!(load_layout("units = "), Err(LayoutError::Parse(_))));
    let wrong_area = MINIMAL_ROOM.replace("declared_area_m2 = 100.0", "declared_area_m2 = 120.0");
    assert!(matches!(load_layout(&wrong_area), Err(LayoutError::Area { .. })));
    let outside = MINIMAL_ROOM.replace("center = [3.0, 5.0], side = 4.0", "center = [30.0, 5.0], side = 4.0");
    assert!(matches!(load_layout(&outside), Err(LayoutError::SpawnZone(_))));
    let too_big = MINIMAL_ROOM.replace("center = [3.0, 5.0], side = 4.0", "center = [3.0, 5.0], side = 7.0");
    assert!(matches!(load_layout(&too_big), Err(LayoutError::SpawnZone(_))));
    let leaky = MINIMAL_ROOM.replace(
        "{ a = [0.0, 0.0], b = [10.0, 0.0], kind = \"exterior\" },",
        "{ a = [0.0, 0.0], b = [8.0, 0.0], kind = \"exterior\" },",
    );
    assert!(load_layout(&leaky).is_err());
    let dup = MINIMAL_ROOM.replace("{ id = 2,", "{ id = 1,");
    assert!(matches!(load_layout(&dup), Err(LayoutError::Exit { id: 1, .. })));
    let three = MINIMAL_ROOM.replace("    { center = [9.0, 9.0], radius = 0.5 },\n", "");
    assert!(matches!(load_layout(&three), Err(LayoutError::HidingPlaceCount(3))));
}

#[test]
fn closed_exits_become_exterior_wall_for_sensors() {
    let l = BuildingLayout::default_office();
    let open = l.sensor_walls(ExitMask::all_open());
    let closed = l.sensor_walls(ExitMask::with_closed(&[5, 6]));
    assert_eq!(closed.len(), open.len() + 2);
    let exit5 = l.exit(5).unwrap().portal;
    // Ray straight down at exit 5 from inside the southern office.
    let origin = exit5.midpoint() + v(0.0, 3.0);
    let down = v(0.0, -1.0);
    assert!(!raycast(&open, origin, down, &[], 20.0).hit);
    let h = raycast(&closed, origin, down, &[], 20.0);
    assert_eq!(h.tag, RayTag::ExteriorWall);
    assert!((h.distance - 3.0).abs() < 1e-12);
}

#[test]
fn raycast_agrees_with_ray_marching() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut hits = 0;
    for scene in 0..200 {
        let walls: Vec<WallSegment> = (0..rng.random_range(1..6))
            .map(|_| WallSegment {
                a: v(rng.random_range(-25.0..25.0), rng.random_range(-25.0..25.0)),
                b: v(rng.random_range(-25.0..25.0), rng.random_range(-25.0..25.0)),
                kind: if rng.random_bool(0.5) { WallKind::Exterior } else { WallKind::Interior },
            })
            .collect();
        let targets: Vec<Vec2> = (0..rng.random_range(0..6))
            .map(|_| v(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)))
            .filter(|c| c.length() > TARGET_RADIUS + 0.05)
            .collect();
        let dir = Vec2::from_angle(rng.random_range(-3.2..3.2));
        let got = raycast(&walls, Vec2::ZERO, dir, &targets, 20.0);
        let (hit, tag, dist) = march(&walls, Vec2::ZERO, dir, &targets, 20.0);
        assert_eq!(got.hit, hit, "scene {scene}");
        assert_eq!(got.tag, tag, "scene {scene}");
        assert!((got.distance - dist).abs() <= 2e-3, "scene {scene}: {} vs {dist}", got.distance);
        hits += hit as usize;
    }
    // The scene generator must exercise both outcomes.
    assert!(hits > 40 && hits < 190, "{hits}");
}

// ---------------------------------------------------------------------------
// Walking distances

#[test]
fn empty_room_distance_is_close_to_straight_line() {
    let l = square_room(20.0);
    let d = l.shortest_path_distance(v(0.0, 0.0), v(3.0, 4.0)).unwrap();
    // 8-connected grid paths overestimate straight lines by at most
    // sqrt(4 - 2 sqrt 2) ~ 8.2%, plus the legs to the cell centers.
    assert!(d >= 5.0);
    assert!(d <= 5.0 * 1.0824 + CELL_SIZE * std::f64::consts::SQRT_2, "{d}");
    let axis = l.shortest_path_distance(v(0.125, 0.125), v(4.125, 0.125)).unwrap();
    assert!((axis - 4.0).abs() < 1e-9, "{axis}");
}

#[test]
fn wall_forces_a_detour() {
    let l = BuildingLayout::default_office();
    // Either side of the wall between two northern offices.
    let a = v(11.0, 32.0);
    let b = v(13.0, 32.0);
    let d = l.shortest_path_distance(a, b).unwrap();
    assert!(d > a.distance(b) + 10.0, "{d}");
}

#[test]
fn unwalkable_endpoint_is_an_error() {
    let l = minimal_room();
    assert!(matches!(
        l.shortest_path_distance(v(5.0, 5.0), v(50.0, 5.0)),
        Err(NavError::NotWalkable(_))
    ));
}

/// Independent grid search: rasterize walls into blocked cell edges on a
/// 0.25 m lattice and run label-correcting search with a FIFO queue.
struct GridOracle {
    origin: Vec2,
    nx: usize,
    ny: usize,
    walls: Vec<(Vec2, Vec2)>,
}

impl GridOracle {
    fn new(l: &BuildingLayout) -> Self {
        let b = l.bounds();
        let origin = b.min - v(1.0, 1.0);
        let mut walls: Vec<(Vec2, Vec2)> = l.walls().iter().map(|w| (w.a, w.b)).collect();
        walls.extend(l.exits().iter().map(|e| (e.portal.a, e.portal.b)));
        walls.push((l.entrance().a, l.entrance().b));
        GridOracle {
            origin,
            nx: ((b.width() + 2.0) / 0.25).ceil() as usize,
            ny: ((b.height() + 2.0) / 0.25).ceil() as usize,
            walls,
        }
    }

    fn center(&self, i: usize, j: usize) -> Vec2 {
        self.origin + v((i as f64 + 0.5) * 0.25, (j as f64 + 0.5) * 0.25)
    }

    fn cell(&self, p: Vec2) -> (usize, usize) {
        (((p.x - self.origin.x) / 0.25) as usize, ((p.y - self.origin.y) / 0.25) as usize)
    }

    fn crosses(&self, p: Vec2, q: Vec2) -> bool {
        fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
            (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
        }
        fn within(a: Vec2, b: Vec2, c: Vec2) -> bool {
            c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
        }
        self.walls.iter().any(|&(a, b)| {
            let (d1, d2) = (orient(a, b, p), orient(a, b, q));
            let (d3, d4) = (orient(p, q, a), orient(p, q, b));
            (d1 * d2 < 0.0 && d3 * d4 < 0.0)
                || (d1 == 0.0 && within(a, b, p))
                || (d2 == 0.0 && within(a, b, q))
                || (d3 == 0.0 && within(p, q, a))
                || (d4 == 0.0 && within(p, q, b))
        })
    }

    fn distance(&self, from: Vec2, to: Vec2) -> Option<f64> {
        let (si, sj) = self.cell(from);
        let (ti, tj) = self.cell(to);
        if (si, sj) == (ti, tj) {
            return Some(from.distance(to));
        }
        let mut dist = vec![f64::INFINITY; self.nx * self.ny];
        let mut queue = VecDeque::new();
        dist[sj * self.nx + si] = 0.0;
        queue.push_back((si, sj));
        while let Some((i, j)) = queue.pop_front() {
            let d = dist[j * self.nx + i];
            for di in -1i32..=1 {
                for dj in -1i32..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ni, nj) = (i as i32 + di, j as i32 + dj);
                    if ni < 0 || nj < 0 || ni as usize >= self.nx || nj as usize >= self.ny {
                        continue;
                    }
                    let (ni, nj) = (ni as usize, nj as usize);
                    if self.crosses(self.center(i, j), self.center(ni, nj)) {
                        continue;
                    }
                    let step = if di != 0 && dj != 0 { 0.25 * 2f64.sqrt() } else { 0.25 };
                    if d + step < dist[nj * self.nx + ni] - 1e-12 {
                        dist[nj * self.nx + ni] = d + step;
                        queue.push_back((ni, nj));
                    }
                }
            }
        }
        let g = dist[tj * self.nx + ti];
        g.is_finite().then(|| from.distance(self.center(si, sj)) + g + self.center(ti, tj).distance(to))
    }
}

fn random_walkable(l: &BuildingLayout, rng: &mut ChaCha8Rng) -> Vec2 {
    let b = l.bounds();
    loop {
        let p = v(rng.random_range(b.min.x..b.max.x), rng.random_range(b.min.y..b.max.y));
        if l.is_walkable(p) {
            return p;
        }
    }
}

#[test]
fn shortest_paths_match_grid_search_oracle() {
    let l = BuildingLayout::default_office();
    let oracle = GridOracle::new(&l);
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..50 {
        let a = random_walkable(&l, &mut rng);
        let b = random_walkable(&l, &mut rng);
        let got = l.shortest_path_distance(a, b).unwrap();
        let want = oracle.distance(a, b).unwrap();
        assert!((got - want).abs() <= CELL_SIZE * std::f64::consts::SQRT_2, "{a:?}->{b:?}: {got} vs {want}");
        assert!(got >= a.distance(b) - 1e-9);
    }
}

#[test]
fn distances_are_symmetric_and_nearly_metric() {
    let l = BuildingLayout::default_office();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let (a, b, c) = (
            random_walkable(&l, &mut rng),
            random_walkable(&l, &mut rng),
            random_walkable(&l, &mut rng),
        );
        let ab = l.shortest_path_distance(a, b).unwrap();
        let ba = l.shortest_path_distance(b, a).unwrap();
        let bc = l.shortest_path_distance(b, c).unwrap();
        let ac = l.shortest_path_distance(a, c).unwrap();
        assert!((ab - ba).abs() <= CELL_SIZE);
        assert!(ac <= ab + bc + 2.0 * CELL_SIZE);
    }
}

// ---------------------------------------------------------------------------
// Goal choice

#[test]
fn nearest_goal_basics() {
    let l = minimal_room();
    let pos = v(7.0, 5.0);
    assert_eq!(nearest_goal(&l, pos, &[GoalRef::Entrance]).unwrap(), 0);
    // Exit 1 (east wall) is ~2.7 m away, the entrance ~6.7 m.
    assert_eq!(nearest_goal(&l, pos, &[GoalRef::Entrance, GoalRef::Exit(1)]).unwrap(), 1);
}

#[test]
fn equidistant_goals_break_ties_by_lowest_index() {
    // 10.25 m wide so the mirror axis x = 5.125 runs through cell centers.
    let text = MINIMAL_ROOM
        .replace("declared_area_m2 = 100.0", "declared_area_m2 = 102.5")
        .replace("[10.0, 4.0], b = [10.0, 6.0]", "[10.25, 4.0], b = [10.25, 6.0]")
        .replace("b = [10.0, 0.0]", "b = [10.25, 0.0]")
        .replace("{ a = [10.0, 0.0], b = [10.0, 4.0]", "{ a = [10.25, 0.0], b = [10.25, 4.0]")
        .replace("{ a = [10.0, 6.0], b = [10.0, 10.0]", "{ a = [10.25, 6.0], b = [10.25, 10.0]")
        .replace("b = [10.0, 10.0], kind", "b = [10.25, 10.0], kind");
    let l = load_layout(&text).unwrap();
    let on_axis = v(5.125, 5.125);
    assert_eq!(nearest_goal(&l, on_axis, &[GoalRef::Exit(1), GoalRef::Entrance]).unwrap(), 0);
    assert_eq!(nearest_goal(&l, on_axis, &[GoalRef::Entrance, GoalRef::Exit(1)]).unwrap(), 0);
}

#[test]
fn closing_an_exit_never_shortens_the_best_route() {
    let l = BuildingLayout::default_office();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let best = |mask: ExitMask, p: Vec2| {
        let goals = l.candidate_goals(mask);
        let i = nearest_goal(&l, p, &goals).unwrap();
        asisim::world::goal_distance(&l, p, goals[i]).unwrap()
    };
    for _ in 0..100 {
        let p = random_walkable(&l, &mut rng);
        let full = best(ExitMask::all_open(), p);
        for id in 1..=6 {
            assert!(best(ExitMask::with_closed(&[id]), p) >= full);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn removing_a_wall_never_shortens_a_ray(
        seed in any::<u64>(),
        angle in -std::f64::consts::PI..std::f64::consts::PI,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let walls: Vec<WallSegment> = (0..4)
            .map(|_| WallSegment {
                a: v(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)),
                b: v(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)),
                kind: WallKind::Interior,
            })
            .collect();
        let dir = Vec2::from_angle(angle);
        let full = raycast(&walls, Vec2::ZERO, dir, &[], 20.0);
        prop_assert!(full.distance > 0.0 && full.distance <= 20.0);
        for skip in 0..walls.len() {
            let fewer: Vec<_> = walls.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, w)| *w).collect();
            let h = raycast(&fewer, Vec2::ZERO, dir, &[], 20.0);
            prop_assert!(h.distance >= full.distance);
        }
    }
}
