//! Running per-dimension mean and variance of observations.

pub const NORM_EPS: f64 = 1e-8;
pub const NORM_CLIP: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RunningNormalizer {
    pub count: u64,
    pub mean: Vec<f64>,
    /// Sum of squared deviations from the mean.
    pub m2: Vec<f64>,
}

impl RunningNormalizer {
    pub fn new(dim: usize) -> Self {
        RunningNormalizer {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Welford update with one sample.
    pub fn update(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    /// Population variance.
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; self.dim()];
        }
        self.m2.iter().map(|s| s / self.count as f64).collect()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        x.iter()
            .zip(&self.mean)
            .zip(&self.m2)
            .map(|((v, m), s)| ((v - m) / (s / n + NORM_EPS).sqrt()).clamp(-NORM_CLIP, NORM_CLIP))
            .collect()
    }
}
