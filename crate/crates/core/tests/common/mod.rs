#![allow(dead_code)]

use asisim::geom::Vec2;
use asisim::world::{load_layout, BuildingLayout, RayTag, WallSegment, TARGET_RADIUS};

/// 10 m x 10 m room: entrance on the west wall, exits 1 (east) and
/// 2 (north), four hiding places in the corners.
pub const MINIMAL_ROOM: &str = r#"
units = "meters"
declared_area_m2 = 100.0
entrance = { a = [0.0, 4.0], b = [0.0, 6.0] }
spawn_zone = { center = [3.0, 5.0], side = 4.0 }
exits = [
    { id = 1, a = [10.0, 4.0], b = [10.0, 6.0] },
    { id = 2, a = [4.0, 10.0], b = [6.0, 10.0] },
]
hiding_places = [
    { center = [1.0, 1.0], radius = 0.5 },
    { center = [9.0, 1.0], radius = 0.5 },
    { center = [1.0, 9.0], radius = 0.5 },
    { center = [9.0, 9.0], radius = 0.5 },
]
walls = [
    { a = [0.0, 0.0], b = [10.0, 0.0], kind = "exterior" },
    { a = [0.0, 0.0], b = [0.0, 4.0], kind = "exterior" },
    { a = [0.0, 6.0], b = [0.0, 10.0], kind = "exterior" },
    { a = [10.0, 0.0], b = [10.0, 4.0], kind = "exterior" },
    { a = [10.0, 6.0], b = [10.0, 10.0], kind = "exterior" },
    { a = [0.0, 10.0], b = [4.0, 10.0], kind = "exterior" },
    { a = [6.0, 10.0], b = [10.0, 10.0], kind = "exterior" },
]
"#;

pub fn minimal_room() -> BuildingLayout {
    load_layout(MINIMAL_ROOM).expect("minimal room is valid")
}

/// A square room of the given side with the entrance on the west wall and
/// one exit on the east wall, origin at (-side/2, -side/2).
pub fn square_room(side: f64) -> BuildingLayout {
    let h = side / 2.0;
    let text = format!(
        r#"
units = "meters"
declared_area_m2 = {area}
entrance = {{ a = [{mh}, -1.0], b = [{mh}, 1.0] }}
spawn_zone = {{ center = [0.0, 0.0], side = 4.0 }}
exits = [ {{ id = 1, a = [{h}, -1.0], b = [{h}, 1.0] }} ]
hiding_places = [
    {{ center = [{hc}, {hc}], radius = 0.5 }},
    {{ center = [{mhc}, {hc}], radius = 0.5 }},
    {{ center = [{hc}, {mhc}], radius = 0.5 }},
    {{ center = [{mhc}, {mhc}], radius = 0.5 }},
]
walls = [
    {{ a = [{mh}, {mh}], b = [{h}, {mh}], kind = "exterior" }},
    {{ a = [{mh}, {h}], b = [{h}, {h}], kind = "exterior" }},
    {{ a = [{mh}, {mh}], b = [{mh}, -1.0], kind = "exterior" }},
    {{ a = [{mh}, 1.0], b = [{mh}, {h}], kind = "exterior" }},
    {{ a = [{h}, {mh}], b = [{h}, -1.0], kind = "exterior" }},
    {{ a = [{h}, 1.0], b = [{h}, {h}], kind = "exterior" }},
]
"#,
        area = side * side,
        h = h,
        mh = -h,
        hc = h - 1.0,
        mhc = -h + 1.0,
    );
    load_layout(&text).expect("square room is valid")
}

pub fn v(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

// ---------------------------------------------------------------------------
// Ray-marching oracle

/// Marches along the ray in 1 mm steps; returns (hit, tag, distance).
pub fn march(walls: &[WallSegment], origin: Vec2, dir: Vec2, targets: &[Vec2], range: f64) -> (bool, RayTag, f64) {
    let step = 1e-3;
    let n = (range / step).round() as usize;
    let side = |w: &WallSegment, p: Vec2| (w.b - w.a).cross(p - w.a);
    let mut prev = origin;
    for k in 1..=n {
        let p = origin + dir * (k as f64 * step);
        for w in walls {
            let (s0, s1) = (side(w, prev), side(w, p));
            if s0 == 0.0 || s1 == 0.0 || (s0 > 0.0) != (s1 > 0.0) {
                // Crossing of the infinite line; keep it if within the segment.
                let ab = w.b - w.a;
                let t = (p - w.a).dot(ab) / ab.length_squared();
                if (-1e-3..=1.0 + 1e-3).contains(&t) {
                    return (true, w.kind.into(), k as f64 * step);
                }
            }
        }
        for c in targets {
            if p.distance(*c) <= TARGET_RADIUS {
                return (true, RayTag::Target, k as f64 * step);
            }
        }
        prev = p;
    }
    (false, RayTag::None, range)
}

/// Three-state Markov chain whose transitions and rewards ignore the
/// action. Observations are one-hot; episodes are cut (not terminated)
/// every `cut` steps.
pub struct ChainMdp {
    pub state: usize,
    pub t: usize,
    pub cut: usize,
    rng: rand_chacha::ChaCha8Rng,
}

pub const CHAIN_P: [[f64; 3]; 3] = [[0.97, 0.02, 0.01], [0.02, 0.96, 0.02], [0.01, 0.02, 0.97]];
pub const CHAIN_R: [f64; 3] = [0.04, 0.01, 0.0];

impl ChainMdp {
    pub fn new(seed: u64) -> Self {
        ChainMdp {
            state: 0,
            t: 0,
            cut: 100,
            rng: asisim::seed::rng(seed),
        }
    }

    fn obs(&self) -> Vec<f64> {
        let mut o = vec![0.0; 3];
        o[self.state] = 1.0;
        o
    }

    /// Solves (I - gamma P) V = R by Gaussian elimination.
    pub fn exact_values(gamma: f64) -> [f64; 3] {
        let mut a = [[0.0; 4]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = if i == j { 1.0 } else { 0.0 } - gamma * CHAIN_P[i][j];
            }
            a[i][3] = CHAIN_R[i];
        }
        for c in 0..3 {
            let p = (c..3).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
            a.swap(c, p);
            for r in 0..3 {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for k in c..4 {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
        [a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]]
    }
}

impl asisim::rl::Episodic for ChainMdp {
    fn obs_dim(&self) -> usize {
        3
    }

    fn act_dim(&self) -> usize {
        2
    }

    fn reset(&mut self) -> Result<Vec<f64>, asisim::rl::RlError> {
        use rand::Rng;
        self.state = self.rng.random_range(0..3);
        self.t = 0;
        Ok(self.obs())
    }

    fn step(&mut self, _action: &[f64]) -> Result<asisim::rl::StepOutcome, asisim::rl::RlError> {
        use rand::Rng;
        let reward = CHAIN_R[self.state];
        let u: f64 = self.rng.random();
        let row = CHAIN_P[self.state];
        self.state = if u < row[0] {
            0
        } else if u < row[0] + row[1] {
            1
        } else {
            2
        };
        self.t += 1;
        Ok(asisim::rl::StepOutcome {
            obs: self.obs(),
            reward,
            terminal: false,
            truncated: self.t >= self.cut,
        })
    }
}
