//! Uniform navigation grid over the building footprint.
//!
//! Cells are 0.25 m squares. Two neighbouring cells (8-connected) are
//! linked when the segment between their centers touches no barrier.
//! Straight moves cost one cell width, diagonal moves `sqrt(2)` widths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geom::{Rect, Segment, Vec2};

pub const CELL_SIZE: f64 = 0.25;

/// Neighbour offsets; index is the direction bit in `NavGrid::links`.
pub(crate) const DIRS: [(i32, i32); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NavError {
    #[error("point ({}, {}) is outside the walkable region", .0.x, .0.y)]
    NotWalkable(Vec2),
    #[error("no walkable path connects the two points")]
    Unreachable,
}

#[derive(Debug, Clone)]
pub struct NavGrid {
    origin: Vec2,
    nx: usize,
    ny: usize,
    /// Bit `k` set when the move `DIRS[k]` is unobstructed.
    links: Vec<u8>,
    walkable: Vec<bool>,
    barriers: Vec<Segment>,
}

impl NavGrid {
    /// Builds the link structure over `area` (expanded by one meter so the
    /// outside of the envelope is represented) without a walkable region.
    pub fn build(area: Rect, barriers: Vec<Segment>) -> Self {
        let area = area.expanded(1.0);
        let nx = (area.width() / CELL_SIZE).ceil() as usize;
        let ny = (area.height() / CELL_SIZE).ceil() as usize;
        let mut grid = NavGrid {
            origin: area.min,
            nx,
            ny,
            links: vec![0; nx * ny],
            walkable: vec![false; nx * ny],
            barriers,
        };
        // Bucket barriers by cell row/column span to avoid testing every
        // barrier for every link.
        let buckets = grid.bucket_barriers();
        for j in 0..ny {
            for i in 0..nx {
                let here = grid.center(i, j);
                let idx = j * nx + i;
                // Forward half of the directions, mirrored onto the neighbour.
                for (k, &(di, dj)) in DIRS.iter().enumerate().take(4) {
                    let (ni, nj) = (i as i32 + di, j as i32 + dj);
                    if ni < 0 || nj < 0 || ni as usize >= nx || nj as usize >= ny {
                        continue;
                    }
                    let (ni, nj) = (ni as usize, nj as usize);
                    let link = Segment::new(here, grid.center(ni, nj));
                    let blocked = buckets
                        .candidates(i.min(ni), j.min(nj))
                        .any(|b| grid.barriers[b].intersects(&link));
                    if !blocked {
                        grid.links[idx] |= 1 << k;
                        grid.links[nj * nx + ni] |= 1 << (k + 4);
                    }
                }
            }
        }
        grid
    }

    fn bucket_barriers(&self) -> Buckets {
        let mut b = Buckets {
            nx: self.nx,
            cells: vec![Vec::new(); self.nx * self.ny],
        };
        for (n, s) in self.barriers.iter().enumerate() {
            let (i0, j0) = self.cell_coords_clamped(Vec2::new(s.a.x.min(s.b.x), s.a.y.min(s.b.y)));
            let (i1, j1) = self.cell_coords_clamped(Vec2::new(s.a.x.max(s.b.x), s.a.y.max(s.b.y)));
            // A link from (i, j) spans cells i..=i+1, j..=j+1; register the
            // barrier with every link origin whose span could reach it.
            for j in j0.saturating_sub(1)..=j1.min(self.ny - 1) {
                for i in i0.saturating_sub(1)..=i1.min(self.nx - 1) {
                    b.cells[j * self.nx + i].push(n);
                }
            }
        }
        b
    }

    /// Marks every cell reachable from `seed` as walkable. Returns false if
    /// the fill reached the border of the grid (the envelope leaks).
    pub fn flood_fill(&mut self, seed: Vec2) -> Result<bool, NavError> {
        let start = self.cell_of(seed).ok_or(NavError::NotWalkable(seed))?;
        self.walkable.iter_mut().for_each(|w| *w = false);
        let mut stack = vec![start];
        self.walkable[start] = true;
        let mut closed = true;
        while let Some(c) = stack.pop() {
            let (i, j) = (c % self.nx, c / self.nx);
            if i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1 {
                closed = false;
            }
            let next: Vec<usize> = self.neighbors(c).map(|(n, _)| n).collect();
            for n in next {
                if !self.walkable[n] {
                    self.walkable[n] = true;
                    stack.push(n);
                }
            }
        }
        Ok(closed)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn barriers(&self) -> &[Segment] {
        &self.barriers
    }

    pub fn walkable_cell_count(&self) -> usize {
        self.walkable.iter().filter(|w| **w).count()
    }

    pub fn is_cell_walkable(&self, cell: usize) -> bool {
        self.walkable[cell]
    }

    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (i as f64 + 0.5) * CELL_SIZE,
            self.origin.y + (j as f64 + 0.5) * CELL_SIZE,
        )
    }

    pub fn cell_center(&self, cell: usize) -> Vec2 {
        self.center(cell % self.nx, cell / self.nx)
    }

    fn cell_coords_clamped(&self, p: Vec2) -> (usize, usize) {
        let i = ((p.x - self.origin.x) / CELL_SIZE).floor();
        let j = ((p.y - self.origin.y) / CELL_SIZE).floor();
        (
            i.clamp(0.0, (self.nx - 1) as f64) as usize,
            j.clamp(0.0, (self.ny - 1) as f64) as usize,
        )
    }

    pub fn cell_of(&self, p: Vec2) -> Option<usize> {
        if !p.is_finite() {
            return None;
        }
        let i = ((p.x - self.origin.x) / CELL_SIZE).floor();
        let j = ((p.y - self.origin.y) / CELL_SIZE).floor();
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return None;
        }
        Some(j as usize * self.nx + i as usize)
    }

    /// True if `p` lies in a walkable cell and sees that cell's center.
    pub fn is_walkable(&self, p: Vec2) -> bool {
        self.walkable_cell(p).is_some()
    }

    pub fn walkable_cell(&self, p: Vec2) -> Option<usize> {
        let c = self.cell_of(p)?;
        if !self.walkable[c] {
            return None;
        }
        let link = Segment::new(p, self.cell_center(c));
        (!self.barriers.iter().any(|b| b.intersects(&link))).then_some(c)
    }

    /// Walkable neighbours of `cell` with their step costs.
    pub fn neighbors(&self, cell: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (i, j) = ((cell % self.nx) as i32, (cell / self.nx) as i32);
        let links = self.links[cell];
        DIRS.iter().enumerate().filter_map(move |(k, &(di, dj))| {
            if links & (1 << k) == 0 {
                return None;
            }
            let n = (j + dj) as usize * self.nx + (i + di) as usize;
            let cost = if di != 0 && dj != 0 {
                CELL_SIZE * std::f64::consts::SQRT_2
            } else {
                CELL_SIZE
            };
            Some((n, cost))
        })
    }

    pub fn line_of_sight(&self, a: Vec2, b: Vec2) -> bool {
        let s = Segment::new(a, b);
        !self.barriers.iter().any(|w| w.intersects(&s))
    }

    /// Length of the shortest 8-connected grid path between two walkable
    /// points, including the legs from each point to its cell center.
    pub fn shortest_path_distance(&self, from: Vec2, to: Vec2) -> Result<f64, NavError> {
        let s = self.walkable_cell(from).ok_or(NavError::NotWalkable(from))?;
        let t = self.walkable_cell(to).ok_or(NavError::NotWalkable(to))?;
        if s == t {
            return Ok(from.distance(to));
        }
        let grid = self.astar(s, t).ok_or(NavError::Unreachable)?;
        Ok(from.distance(self.cell_center(s)) + grid + self.cell_center(t).distance(to))
    }

    fn octile(&self, a: usize, b: usize) -> f64 {
        let dx = (a % self.nx).abs_diff(b % self.nx) as f64;
        let dy = (a / self.nx).abs_diff(b / self.nx) as f64;
        let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
        CELL_SIZE * (hi - lo + lo * std::f64::consts::SQRT_2)
    }

    fn astar(&self, start: usize, goal: usize) -> Option<f64> {
        let mut g = vec![f64::INFINITY; self.len()];
        let mut open = BinaryHeap::new();
        g[start] = 0.0;
        open.push(Node {
            f: self.octile(start, goal),
            cell: start,
        });
        while let Some(Node { cell, .. }) = open.pop() {
            if cell == goal {
                return Some(g[goal]);
            }
            let gc = g[cell];
            for (n, cost) in self.neighbors(cell) {
                let cand = gc + cost;
                // Tolerance guards against re-expanding equal-cost ties
                // produced by different summation orders.
                if cand + 1e-12 < g[n] {
                    g[n] = cand;
                    open.push(Node {
                        f: cand + self.octile(n, goal),
                        cell: n,
                    });
                }
            }
        }
        None
    }

    /// Grid distance from every cell to `goal` (the goal leg included).
    pub fn distance_field(&self, goal: Vec2) -> Result<DistanceField, NavError> {
        let gcell = self.walkable_cell(goal).ok_or(NavError::NotWalkable(goal))?;
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut heap = BinaryHeap::new();
        dist[gcell] = self.cell_center(gcell).distance(goal);
        heap.push(Node {
            f: dist[gcell],
            cell: gcell,
        });
        while let Some(Node { f, cell }) = heap.pop() {
            if f > dist[cell] {
                continue;
            }
            for (n, cost) in self.neighbors(cell) {
                let cand = f + cost;
                if cand < dist[n] {
                    dist[n] = cand;
                    heap.push(Node { f: cand, cell: n });
                }
            }
        }
        Ok(DistanceField {
            goal,
            goal_cell: gcell,
            dist,
        })
    }

    /// Waypoints from `from` to the field's goal, shortened by removing
    /// intermediate cell centers that are in direct line of sight.
    pub fn path_to(&self, field: &DistanceField, from: Vec2) -> Result<Vec<Vec2>, NavError> {
        let mut cell = self.walkable_cell(from).ok_or(NavError::NotWalkable(from))?;
        if !field.dist[cell].is_finite() {
            return Err(NavError::Unreachable);
        }
        let mut cells = vec![cell];
        while cell != field.goal_cell {
            let next = self
                .neighbors(cell)
                .map(|(n, cost)| (n, field.dist[n] + cost))
                .filter(|&(n, _)| field.dist[n] < field.dist[cell])
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .map(|(n, _)| n)
                .ok_or(NavError::Unreachable)?;
            cells.push(next);
            cell = next;
        }
        let mut raw: Vec<Vec2> = cells.iter().map(|&c| self.cell_center(c)).collect();
        raw.push(field.goal);

        // Consecutive raw points are linked, so the point after the anchor
        // is always visible and the scan advances at least one step.
        let mut out = Vec::new();
        let mut anchor = from;
        let mut k = 0;
        while k < raw.len() {
            let mut best = k;
            while best + 1 < raw.len() && self.line_of_sight(anchor, raw[best + 1]) {
                best += 1;
            }
            out.push(raw[best]);
            anchor = raw[best];
            k = best + 1;
        }
        Ok(out)
    }
}

struct Buckets {
    nx: usize,
    cells: Vec<Vec<usize>>,
}

impl Buckets {
    fn candidates(&self, i: usize, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.cells[j * self.nx + i].iter().copied()
    }
}

/// Grid distance to one goal point from every cell.
#[derive(Debug, Clone)]
pub struct DistanceField {
    goal: Vec2,
    goal_cell: usize,
    dist: Vec<f64>,
}

impl DistanceField {
    pub fn goal(&self) -> Vec2 {
        self.goal
    }

    /// Distance from `p` (whose walkable cell is `cell`) to the goal.
    pub fn distance_from(&self, grid: &NavGrid, cell: usize, p: Vec2) -> f64 {
        if cell == self.goal_cell {
            return p.distance(self.goal);
        }
        self.dist[cell] + p.distance(grid.cell_center(cell))
    }
}

#[derive(Debug, PartialEq)]
struct Node {
    f: f64,
    cell: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then_with(|| o.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
