//! One-way ANOVA and the special functions behind its p-values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("ANOVA needs at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {group} has {n} samples; at least 2 are needed")]
    GroupTooSmall { group: usize, n: usize },
    #[error("non-finite sample in group {0}")]
    NonFinite(usize),
}

/// Natural log of the gamma function for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta I_x(a, b).
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    // The continued fraction converges fast on this side of the mean.
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a) / b
    }
}

/// Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Upper-tail probability P(F > f) of the F distribution.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    reg_inc_beta(df2 / (df2 + df1 * f), df2 / 2.0, df1 / 2.0).clamp(0.0, 1.0)
}

/// Cohen's d from partial eta squared: d = 2 sqrt(eta / (1 - eta)).
pub fn cohen_d_from_eta(eta_sq: f64) -> f64 {
    2.0 * (eta_sq / (1.0 - eta_sq)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
}

impl GroupSummary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        GroupSummary { n, mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
    pub eta_p_sq: f64,
    pub d: f64,
    /// Zero within-group variance: F is infinite (p = 0) when the means
    /// differ and reported as 0 (p = 1) when they do not.
    pub degenerate: bool,
    pub groups: Vec<GroupSummary>,
}

pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(StatsError::GroupTooSmall { group: i, n: g.len() });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::NonFinite(i));
        }
    }
    let summaries: Vec<GroupSummary> = groups.iter().map(|g| GroupSummary::of(g)).collect();
    let n_total: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n_total as f64;
    let ss_between: f64 = summaries
        .iter()
        .map(|s| s.n as f64 * (s.mean - grand).powi(2))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&summaries)
        .map(|(g, s)| g.iter().map(|x| (x - s.mean).powi(2)).sum::<f64>())
        .sum();
    let df_between = groups.len() - 1;
    let df_within = n_total - groups.len();
    // Spread below rounding noise of the data counts as none.
    let scale = groups.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let noise = (f64::EPSILON * scale).powi(2) * n_total as f64 * 16.0;
    let between_zero = ss_between <= noise;
    let within_zero = ss_within <= noise;
    let (f, p, degenerate) = match (within_zero, between_zero) {
        (true, true) => (0.0, 1.0, true),
        (true, false) => (f64::INFINITY, 0.0, true),
        _ => {
            let ssb = if between_zero { 0.0 } else { ss_between };
            let f = (ssb / df_between as f64) / (ss_within / df_within as f64);
            (f, f_sf(f, df_between as f64, df_within as f64), false)
        }
    };
    let eta_p_sq = if between_zero {
        0.0
    } else {
        ss_between / (ss_between + ss_within)
    };
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p,
        eta_p_sq,
        d: cohen_d_from_eta(eta_p_sq),
        degenerate,
        groups: summaries,
    })
}
