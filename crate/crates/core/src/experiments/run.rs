//! Evaluation episodes and their metrics.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::ScenarioConfig;
use crate::env::{EndReason, EnvConfig, EnvError, EpisodeLog, EventKind, Mode, ShooterEnv};
use crate::rl::ShooterPolicy;
use crate::seed;
use crate::world::BuildingLayout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Percent of occupants who left through the entrance or an exit.
    pub evacuation_rate: f64,
    /// Percent of occupants the shooter reached.
    pub harm_rate: f64,
    pub duration_s: f64,
    pub end_reason: EndReason,
    pub evacuated: usize,
    pub harmed: usize,
}

/// Metrics recounted from an episode's event log.
pub fn compute_metrics(log: &EpisodeLog, n_occupants: usize, dt: f64) -> Option<RunMetrics> {
    let mut evacuated = 0;
    let mut harmed = 0;
    let mut end = None;
    for e in &log.events {
        match e.kind {
            EventKind::OccupantEvacuated => evacuated += 1,
            EventKind::TargetReached => harmed += 1,
            EventKind::EpisodeEnd(r) => end = Some((e.t, r)),
            _ => {}
        }
    }
    let (steps, end_reason) = end?;
    let pct = |k: usize| {
        if n_occupants == 0 {
            0.0
        } else {
            100.0 * k as f64 / n_occupants as f64
        }
    };
    Some(RunMetrics {
        evacuation_rate: pct(evacuated),
        harm_rate: pct(harmed),
        duration_s: steps as f64 * dt,
        end_reason,
        evacuated,
        harmed,
    })
}

/// One evaluation run of a scenario.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub scenario_label: String,
    pub run_index: usize,
    pub seed: u64,
    pub metrics: RunMetrics,
    pub log: EpisodeLog,
}

/// Plays one evaluation episode to its end with `policy`.
pub fn run_episode(
    layout: Arc<BuildingLayout>,
    scenario: &ScenarioConfig,
    cfg: &EnvConfig,
    policy: &dyn ShooterPolicy,
    run_seed: u64,
) -> Result<(RunMetrics, EpisodeLog), EnvError> {
    let cfg = EnvConfig {
        occupant_count: scenario.occupants,
        ..cfg.clone()
    };
    let dt = cfg.dt;
    let n = cfg.occupant_count;
    let (mut env, mut obs) = ShooterEnv::reset(layout, scenario.mask(), cfg, Mode::Evaluation, seed::rng(run_seed))?;
    env.record();
    loop {
        let r = env.step(policy.act(&env, &obs))?;
        obs = r.obs;
        if r.done.is_some() {
            break;
        }
    }
    let log = env.take_log().expect("recording");
    let metrics = compute_metrics(&log, n, dt).expect("episode ended");
    Ok((metrics, log))
}

/// All runs of a scenario, in run order. Runs execute in parallel.
pub fn run_scenario(
    scenario: &ScenarioConfig,
    layout: &Arc<BuildingLayout>,
    policy: &dyn ShooterPolicy,
    cfg: &EnvConfig,
) -> Result<Vec<RunRecord>, EnvError> {
    (0..scenario.runs)
        .into_par_iter()
        .map(|i| {
            let s = scenario.run_seed(i);
            let (metrics, log) = run_episode(layout.clone(), scenario, cfg, policy, s)?;
            Ok(RunRecord {
                scenario_label: scenario.label.clone(),
                run_index: i,
                seed: s,
                metrics,
                log,
            })
        })
        .collect()
}

/// Runs every scenario and returns the records sorted by label, then run
/// index.
pub fn run_sweep(
    scenarios: &[ScenarioConfig],
    layout: &Arc<BuildingLayout>,
    policy: &dyn ShooterPolicy,
    cfg: &EnvConfig,
) -> Result<Vec<RunRecord>, EnvError> {
    let mut all = Vec::new();
    for s in scenarios {
        all.extend(run_scenario(s, layout, policy, cfg)?);
    }
    all.sort_by(|a, b| {
        a.scenario_label
            .cmp(&b.scenario_label)
            .then(a.run_index.cmp(&b.run_index))
    });
    Ok(all)
}
