//! Building layouts: file schema, validation and derived navigation data.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::nav::{DistanceField, NavError, NavGrid, CELL_SIZE};
use crate::geom::{Rect, Segment, Vec2};

/// Floor area required per occupant for business occupancies (150 ft²).
pub const AREA_PER_OCCUPANT_M2: f64 = 13.94;
pub const AREA_TOLERANCE: f64 = 0.01;
pub const HIDING_PLACE_COUNT: usize = 4;
pub const MAX_EXIT_ID: u8 = 6;
/// Distance from a portal's midpoint to the goal point occupants walk to.
pub const PORTAL_GOAL_INSET: f64 = 0.3;

/// The bundled office floor plan.
pub const DEFAULT_LAYOUT: &str = include_str!("../../assets/default_office.layout");

/// A single 10 m x 10 m room for quick training runs.
pub const TOY_LAYOUT: &str = include_str!("../../assets/toy_room.layout");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WallKind {
    Exterior,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallSegment {
    pub a: Vec2,
    pub b: Vec2,
    pub kind: WallKind,
}

impl WallSegment {
    pub fn segment(&self) -> Segment {
        Segment::new(self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exit {
    pub id: u8,
    pub portal: Segment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HidingPlace {
    pub center: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpawnZone {
    pub center: Vec2,
    pub side: f64,
}

impl SpawnZone {
    pub fn rect(&self) -> Rect {
        Rect::centered(self.center, self.side)
    }
}

/// Which exits are open in a scenario. Bit `id - 1` set means open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExitMask(u8);

impl ExitMask {
    pub const fn all_open() -> Self {
        ExitMask(u8::MAX)
    }

    pub fn with_closed(ids: &[u8]) -> Self {
        let mut m = Self::all_open();
        for &id in ids {
            m.close(id);
        }
        m
    }

    pub fn close(&mut self, id: u8) {
        self.0 &= !(1 << (id - 1));
    }

    pub fn is_open(&self, id: u8) -> bool {
        self.0 & (1 << (id - 1)) != 0
    }
}

impl Default for ExitMask {
    fn default() -> Self {
        Self::all_open()
    }
}

/// Something an occupant can walk to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GoalRef {
    Entrance,
    Exit(u8),
    Hiding(usize),
}

impl GoalRef {
    pub fn is_egress(&self) -> bool {
        !matches!(self, GoalRef::Hiding(_))
    }
}

impl fmt::Display for GoalRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalRef::Entrance => write!(f, "entrance"),
            GoalRef::Exit(id) => write!(f, "exit-{id}"),
            GoalRef::Hiding(i) => write!(f, "hiding-{}", i + 1),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LayoutError {
    #[error("malformed layout: {0}")]
    Parse(String),
    #[error("unsupported units `{0}` (only meters)")]
    Units(String),
    #[error("wall {index}: {reason}")]
    Wall { index: usize, reason: String },
    #[error("exit {id}: {reason}")]
    Exit { id: u8, reason: String },
    #[error("entrance: {0}")]
    Entrance(String),
    #[error("hiding place {index}: {reason}")]
    HidingPlace { index: usize, reason: String },
    #[error("expected exactly {HIDING_PLACE_COUNT} hiding places, found {0}")]
    HidingPlaceCount(usize),
    #[error("spawn zone: {0}")]
    SpawnZone(String),
    #[error("building envelope is open: the interior connects to the outside")]
    OpenEnvelope,
    #[error("floor area {computed:.2} m² differs from the declared {declared:.2} m² by more than 1%")]
    Area { computed: f64, declared: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PortalDoc {
    a: Vec2,
    b: Vec2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExitDoc {
    id: u8,
    a: Vec2,
    b: Vec2,
}

/// On-disk representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutDoc {
    units: String,
    declared_area_m2: f64,
    walls: Vec<WallSegment>,
    entrance: PortalDoc,
    exits: Vec<ExitDoc>,
    hiding_places: Vec<HidingPlace>,
    spawn_zone: SpawnZone,
}

/// A validated building. Immutable after construction.
#[derive(Debug, Clone)]
pub struct BuildingLayout {
    walls: Vec<WallSegment>,
    entrance: Segment,
    exits: Vec<Exit>,
    hiding_places: Vec<HidingPlace>,
    spawn_zone: SpawnZone,
    bounds: Rect,
    declared_area_m2: f64,
    floor_area_m2: f64,
    nav: NavGrid,
    goals: Vec<(GoalRef, DistanceField)>,
}

/// Parses and validates a layout document.
pub fn load_layout(text: &str) -> Result<BuildingLayout, LayoutError> {
    let doc: LayoutDoc = toml::from_str(text).map_err(|e| LayoutError::Parse(e.to_string()))?;
    BuildingLayout::from_doc(doc)
}

impl BuildingLayout {
    pub fn default_office() -> Self {
        load_layout(DEFAULT_LAYOUT).expect("bundled layout is valid")
    }

    pub fn toy_room() -> Self {
        load_layout(TOY_LAYOUT).expect("bundled layout is valid")
    }

    fn from_doc(doc: LayoutDoc) -> Result<Self, LayoutError> {
        if doc.units != "meters" {
            return Err(LayoutError::Units(doc.units));
        }
        for (index, w) in doc.walls.iter().enumerate() {
            check_segment(w.a, w.b).map_err(|reason| LayoutError::Wall { index, reason })?;
        }
        check_segment(doc.entrance.a, doc.entrance.b).map_err(LayoutError::Entrance)?;
        let mut exits: Vec<Exit> = Vec::with_capacity(doc.exits.len());
        for e in &doc.exits {
            if e.id == 0 || e.id > MAX_EXIT_ID {
                return Err(LayoutError::Exit {
                    id: e.id,
                    reason: format!("id must be in 1..={MAX_EXIT_ID}"),
                });
            }
            if exits.iter().any(|x| x.id == e.id) {
                return Err(LayoutError::Exit {
                    id: e.id,
                    reason: "duplicate id".into(),
                });
            }
            check_segment(e.a, e.b).map_err(|reason| LayoutError::Exit { id: e.id, reason })?;
            exits.push(Exit {
                id: e.id,
                portal: Segment::new(e.a, e.b),
            });
        }
        exits.sort_by_key(|e| e.id);
        if doc.hiding_places.len() != HIDING_PLACE_COUNT {
            return Err(LayoutError::HidingPlaceCount(doc.hiding_places.len()));
        }
        if !(doc.spawn_zone.side > 0.0 && doc.spawn_zone.center.is_finite()) {
            return Err(LayoutError::SpawnZone("side must be positive".into()));
        }
        if doc.declared_area_m2.is_nan() || doc.declared_area_m2 <= 0.0 {
            return Err(LayoutError::Parse("declared_area_m2 must be positive".into()));
        }

        let entrance = Segment::new(doc.entrance.a, doc.entrance.b);
        let portals: Vec<Segment> = exits
            .iter()
            .map(|e| e.portal)
            .chain(std::iter::once(entrance))
            .collect();
        if !fills_envelope_gap(entrance, &doc.walls, &portals) {
            return Err(LayoutError::Entrance(
                "portal does not fill a gap in the exterior wall".into(),
            ));
        }
        for e in &exits {
            if !fills_envelope_gap(e.portal, &doc.walls, &portals) {
                return Err(LayoutError::Exit {
                    id: e.id,
                    reason: "portal does not fill a gap in the exterior wall".into(),
                });
            }
        }
        let mut bounds: Option<Rect> = None;
        let mut grow = |p: Vec2| {
            let r = bounds.get_or_insert(Rect::new(p, p));
            r.min = Vec2::new(r.min.x.min(p.x), r.min.y.min(p.y));
            r.max = Vec2::new(r.max.x.max(p.x), r.max.y.max(p.y));
        };
        for w in &doc.walls {
            grow(w.a);
            grow(w.b);
        }
        for s in exits.iter().map(|e| e.portal).chain(std::iter::once(entrance)) {
            grow(s.a);
            grow(s.b);
        }
        let bounds = bounds.expect("entrance always contributes");

        // Navigation treats every portal as closed: occupants finish at the
        // goal point just inside it.
        let barriers: Vec<Segment> = doc
            .walls
            .iter()
            .map(WallSegment::segment)
            .chain(exits.iter().map(|e| e.portal))
            .chain(std::iter::once(entrance))
            .collect();
        let mut nav = NavGrid::build(bounds, barriers);
        let closed = nav
            .flood_fill(doc.spawn_zone.center)
            .map_err(|_| LayoutError::SpawnZone("center lies outside the building".into()))?;
        if !closed {
            return Err(LayoutError::OpenEnvelope);
        }
        if !nav.is_walkable(doc.spawn_zone.center) {
            return Err(LayoutError::SpawnZone("center is not walkable".into()));
        }

        let floor_area_m2 = nav.walkable_cell_count() as f64 * CELL_SIZE * CELL_SIZE;
        if (floor_area_m2 - doc.declared_area_m2).abs() > AREA_TOLERANCE * doc.declared_area_m2 {
            return Err(LayoutError::Area {
                computed: floor_area_m2,
                declared: doc.declared_area_m2,
            });
        }

        let mut goals = Vec::new();
        let inset = |s: Segment| inward_goal(&nav, s);
        let g = inset(entrance).ok_or_else(|| {
            LayoutError::Entrance("portal is not on the building perimeter".into())
        })?;
        goals.push((GoalRef::Entrance, g));
        for e in &exits {
            let g = inset(e.portal).ok_or_else(|| LayoutError::Exit {
                id: e.id,
                reason: "portal is not on the building perimeter".into(),
            })?;
            goals.push((GoalRef::Exit(e.id), g));
        }
        for (index, h) in doc.hiding_places.iter().enumerate() {
            if h.radius.is_nan() || h.radius <= 0.0 {
                return Err(LayoutError::HidingPlace {
                    index,
                    reason: "radius must be positive".into(),
                });
            }
            if !nav.is_walkable(h.center) {
                return Err(LayoutError::HidingPlace {
                    index,
                    reason: "center is not walkable".into(),
                });
            }
            goals.push((GoalRef::Hiding(index), h.center));
        }

        check_spawn_zone(&nav, &doc.spawn_zone)?;

        let goals = goals
            .into_iter()
            .map(|(r, p)| {
                let f = nav.distance_field(p).expect("goal point validated as walkable");
                (r, f)
            })
            .collect();

        Ok(BuildingLayout {
            walls: doc.walls,
            entrance,
            exits,
            hiding_places: doc.hiding_places,
            spawn_zone: doc.spawn_zone,
            bounds,
            declared_area_m2: doc.declared_area_m2,
            floor_area_m2,
            nav,
            goals,
        })
    }

    /// Serializes back to the layout file format.
    pub fn to_layout_text(&self) -> String {
        let doc = LayoutDoc {
            units: "meters".into(),
            declared_area_m2: self.declared_area_m2,
            walls: self.walls.clone(),
            entrance: PortalDoc {
                a: self.entrance.a,
                b: self.entrance.b,
            },
            exits: self
                .exits
                .iter()
                .map(|e| ExitDoc {
                    id: e.id,
                    a: e.portal.a,
                    b: e.portal.b,
                })
                .collect(),
            hiding_places: self.hiding_places.clone(),
            spawn_zone: self.spawn_zone,
        };
        toml::to_string(&doc).expect("layout document serializes")
    }

    pub fn walls(&self) -> &[WallSegment] {
        &self.walls
    }

    pub fn entrance(&self) -> Segment {
        self.entrance
    }

    pub fn exits(&self) -> &[Exit] {
        &self.exits
    }

    pub fn exit(&self, id: u8) -> Option<&Exit> {
        self.exits.iter().find(|e| e.id == id)
    }

    pub fn hiding_places(&self) -> &[HidingPlace] {
        &self.hiding_places
    }

    pub fn spawn_zone(&self) -> SpawnZone {
        self.spawn_zone
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn declared_area_m2(&self) -> f64 {
        self.declared_area_m2
    }

    pub fn floor_area_m2(&self) -> f64 {
        self.floor_area_m2
    }

    /// Largest occupant count the floor area admits.
    pub fn occupancy_limit(&self) -> usize {
        (self.floor_area_m2 / AREA_PER_OCCUPANT_M2).floor() as usize
    }

    pub fn nav(&self) -> &NavGrid {
        &self.nav
    }

    pub fn is_walkable(&self, p: Vec2) -> bool {
        self.nav.is_walkable(p)
    }

    pub fn shortest_path_distance(&self, from: Vec2, to: Vec2) -> Result<f64, NavError> {
        self.nav.shortest_path_distance(from, to)
    }

    /// All goals in candidate order: entrance, exits by id, hiding places.
    pub fn goals(&self) -> impl Iterator<Item = GoalRef> + '_ {
        self.goals.iter().map(|(g, _)| *g)
    }

    pub fn goal_point(&self, goal: GoalRef) -> Option<Vec2> {
        self.field(goal).map(DistanceField::goal)
    }

    pub(crate) fn field(&self, goal: GoalRef) -> Option<&DistanceField> {
        self.goals.iter().find(|(g, _)| *g == goal).map(|(_, f)| f)
    }

    /// Goals available to occupants under `mask`: entrance, open exits and
    /// every hiding place.
    pub fn candidate_goals(&self, mask: ExitMask) -> Vec<GoalRef> {
        self.goals()
            .filter(|g| match g {
                GoalRef::Exit(id) => mask.is_open(*id),
                _ => true,
            })
            .collect()
    }

    /// Walls as seen by the ray sensor: closed exits become exterior wall,
    /// open portals are absent.
    pub fn sensor_walls(&self, mask: ExitMask) -> Vec<WallSegment> {
        let mut out = self.walls.clone();
        out.extend(
            self.exits
                .iter()
                .filter(|e| !mask.is_open(e.id))
                .map(|e| closed_portal(e.portal)),
        );
        out
    }

    /// Walls the shooter's body collides with. Portals are part of the
    /// envelope for the shooter whether open or not.
    pub fn body_walls(&self) -> Vec<WallSegment> {
        let mut out = self.walls.clone();
        out.extend(self.exits.iter().map(|e| closed_portal(e.portal)));
        out.push(closed_portal(self.entrance));
        out
    }
}

fn closed_portal(s: Segment) -> WallSegment {
    WallSegment {
        a: s.a,
        b: s.b,
        kind: WallKind::Exterior,
    }
}

/// Each portal endpoint must meet a collinear exterior wall (or another
/// portal) end to end.
fn fills_envelope_gap(portal: Segment, walls: &[WallSegment], portals: &[Segment]) -> bool {
    const EPS: f64 = 1e-6;
    let dir = portal.b - portal.a;
    let meets = |p: Vec2, s: Segment| {
        let collinear = (s.b - s.a).cross(dir).abs() <= EPS * s.length() * dir.length();
        collinear && (s.a.distance(p) <= EPS || s.b.distance(p) <= EPS)
    };
    [portal.a, portal.b].into_iter().all(|p| {
        walls
            .iter()
            .filter(|w| w.kind == WallKind::Exterior)
            .map(WallSegment::segment)
            .chain(portals.iter().copied().filter(|s| *s != portal))
            .any(|s| meets(p, s))
    })
}

fn check_segment(a: Vec2, b: Vec2) -> Result<(), String> {
    if !a.is_finite() || !b.is_finite() {
        return Err("non-finite coordinate".into());
    }
    if a == b {
        return Err("endpoints coincide".into());
    }
    Ok(())
}

/// Goal point just inside a perimeter portal, or `None` when the portal
/// does not separate the interior from the outside.
fn inward_goal(nav: &NavGrid, portal: Segment) -> Option<Vec2> {
    let mid = portal.midpoint();
    let normal = (portal.b - portal.a).perp().normalized()?;
    let probe = CELL_SIZE;
    let pos = nav.is_walkable(mid + normal * probe);
    let neg = nav.is_walkable(mid - normal * probe);
    let inward = match (pos, neg) {
        (true, false) => normal,
        (false, true) => -normal,
        _ => return None,
    };
    let goal = mid + inward * PORTAL_GOAL_INSET;
    nav.is_walkable(goal).then_some(goal)
}

fn check_spawn_zone(nav: &NavGrid, zone: &SpawnZone) -> Result<(), LayoutError> {
    let r = zone.rect();
    let edges = [
        Segment::new(r.min, Vec2::new(r.max.x, r.min.y)),
        Segment::new(Vec2::new(r.max.x, r.min.y), r.max),
        Segment::new(r.max, Vec2::new(r.min.x, r.max.y)),
        Segment::new(Vec2::new(r.min.x, r.max.y), r.min),
    ];
    for b in nav.barriers() {
        if edges.iter().any(|e| e.intersects(b)) || r.contains(b.a) {
            return Err(LayoutError::SpawnZone("a wall crosses the zone".into()));
        }
    }
    let corners = [
        r.min,
        r.max,
        Vec2::new(r.min.x, r.max.y),
        Vec2::new(r.max.x, r.min.y),
    ];
    if corners.iter().any(|&c| !nav.is_walkable(c)) {
        return Err(LayoutError::SpawnZone("zone extends outside the walkable region".into()));
    }
    Ok(())
}
