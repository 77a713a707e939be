use crate::world::{RayHit, RayTag, RAY_COUNT};

pub const RAY_BLOCK: usize = 5;
pub const SELF_BLOCK: usize = 4;
pub const OBS_DIM: usize = RAY_COUNT * RAY_BLOCK + SELF_BLOCK;

/// Per ray: one-hot {target, interior wall, exterior wall}, miss flag,
/// distance / range. Then velocity (m/s) and position scaled to the
/// layout bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn encode(rays: &[RayHit; RAY_COUNT], range: f64, velocity: [f64; 2], position: [f64; 2]) -> Self {
        let mut v = [0.0; OBS_DIM];
        for (r, h) in rays.iter().enumerate() {
            let block = &mut v[r * RAY_BLOCK..(r + 1) * RAY_BLOCK];
            match h.tag {
                RayTag::Target => block[0] = 1.0,
                RayTag::InteriorWall => block[1] = 1.0,
                RayTag::ExteriorWall => block[2] = 1.0,
                RayTag::None => block[3] = 1.0,
            }
            block[4] = (h.distance / range).clamp(0.0, 1.0);
        }
        let s = RAY_COUNT * RAY_BLOCK;
        v[s] = velocity[0];
        v[s + 1] = velocity[1];
        v[s + 2] = position[0];
        v[s + 3] = position[1];
        Observation(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn ray(&self, r: usize) -> RayView<'_> {
        RayView(&self.0[r * RAY_BLOCK..(r + 1) * RAY_BLOCK])
    }

    pub fn velocity(&self) -> [f64; 2] {
        let s = RAY_COUNT * RAY_BLOCK;
        [self.0[s], self.0[s + 1]]
    }

    pub fn position(&self) -> [f64; 2] {
        let s = RAY_COUNT * RAY_BLOCK;
        [self.0[s + 2], self.0[s + 3]]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RayView<'a>(&'a [f64]);

impl RayView<'_> {
    pub fn tag(&self) -> RayTag {
        match self.0.iter().take(4).position(|&x| x == 1.0) {
            Some(0) => RayTag::Target,
            Some(1) => RayTag::InteriorWall,
            Some(2) => RayTag::ExteriorWall,
            _ => RayTag::None,
        }
    }

    pub fn normalized_distance(&self) -> f64 {
        self.0[4]
    }
}
