mod common;

use std::sync::Arc;

use asisim::env::{EndReason, EnvConfig, EpisodeEvent, EpisodeLog, EventKind, Mode, ShooterEnv};
use asisim::experiments::*;
use asisim::rl::{GreedyPolicy, ShooterPolicy};
use asisim::seed;
use asisim::{BuildingLayout, GoalRef};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

/// Upper-tail F probabilities computed with scipy.stats.f.sf.
const F_TABLE: [(f64, f64, f64, f64); 10] = [
    (3.09839121214078, 3.0, 20.0, 0.05),
    (5.636326187669078, 5.0, 10.0, 0.01),
    (27.796, 2.0, 2197.0, 1.1982576069952643e-12),
    (2.308, 6.0, 693.0, 0.03254566808161607),
    (3.622, 14.0, 1485.0, 5.961611935110674e-06),
    (0.5, 4.0, 7.0, 0.7376864906326512),
    (2.5, 10.0, 30.0, 0.02556200682455132),
    (100.0, 3.0, 5.0, 6.96862549032698e-05),
    (1.0, 1.0, 1.0, 0.5000000000000001),
    (3.098391, 3.0, 20.0, 0.050000009959492935),
];

#[test]
fn f_tail_matches_reference_table() {
    for (f, d1, d2, p) in F_TABLE {
        let got = f_sf(f, d1, d2);
        assert!((got - p).abs() <= 1e-10_f64.max(1e-9 * p), "F({d1},{d2})={f}: {got} vs {p}");
    }
}

#[test]
fn two_groups_match_pooled_t_test() {
    let a = [12.1, 14.3, 9.8, 11.0, 13.7, 10.4, 12.9, 15.2];
    let b = [9.4, 10.1, 8.7, 11.9, 9.9, 8.2, 10.6];
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let ssa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let ssb: f64 = b.iter().map(|x| (x - mb).powi(2)).sum();
    let sp2 = (ssa + ssb) / (na + nb - 2.0);
    let t = (ma - mb) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
    let tdist = StudentsT::new(0.0, 1.0, na + nb - 2.0).unwrap();
    let p_t = 2.0 * (1.0 - tdist.cdf(t.abs()));

    let r = one_way_anova(&[a.to_vec(), b.to_vec()]).unwrap();
    assert!((r.f - t * t).abs() <= 1e-9 * r.f);
    assert!((r.p - p_t).abs() <= 1e-9);
    assert_eq!((r.df_between, r.df_within), (1, 13));
}

#[test]
fn copies_of_one_group_give_no_effect() {
    let g: Vec<f64> = (0..30).map(|i| ((i * 7919) % 101) as f64 / 3.0).collect();
    let r = one_way_anova(&[g.clone(), g.clone(), g.clone(), g]).unwrap();
    assert!(r.f.abs() < 1e-12);
    assert!((r.p - 1.0).abs() < 1e-12);
    assert_eq!(r.d, 0.0);
}

#[test]
fn paper_effect_sizes() {
    assert_eq!(format!("{:.3}", cohen_d_from_eta(0.025)), "0.320");
    assert_eq!(format!("{:.3}", cohen_d_from_eta(0.139)), "0.804");
}

fn groups_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 2..15), 2..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn f_tail_agrees_with_statrs(f in 0.01f64..20.0, d1 in 1u32..40, d2 in 2u32..3000) {
        let dist = FisherSnedecor::new(d1 as f64, d2 as f64).unwrap();
        let want = dist.sf(f);
        let got = f_sf(f, d1 as f64, d2 as f64);
        prop_assert!((got - want).abs() <= 1e-9, "{} vs {}", got, want);
    }

    #[test]
    fn anova_is_scale_invariant(groups in groups_strategy(), k in 0.01f64..100.0) {
        let a = one_way_anova(&groups).unwrap();
        let scaled: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|x| x * k).collect()).collect();
        let b = one_way_anova(&scaled).unwrap();
        prop_assume!(!a.degenerate && !b.degenerate);
        prop_assert!((a.f - b.f).abs() <= 1e-8 * a.f.max(1.0));
        prop_assert!((a.p - b.p).abs() <= 1e-8);
        prop_assert!((a.eta_p_sq - b.eta_p_sq).abs() <= 1e-10);
        prop_assert!((a.d - b.d).abs() <= 1e-8 * a.d.max(1.0));
    }

    #[test]
    fn anova_ranges(groups in groups_strategy()) {
        let r = one_way_anova(&groups).unwrap();
        prop_assert!(r.f >= 0.0);
        prop_assert!((0.0..=1.0).contains(&r.p));
        prop_assert!((0.0..1.0).contains(&r.eta_p_sq));
        prop_assert!(r.d >= 0.0);
    }

    #[test]
    fn eta_grows_with_between_spread(groups in groups_strategy(), shift in 0.1f64..10.0) {
        // Pushing group means apart raises SS_between and leaves SS_within.
        let base = one_way_anova(&groups).unwrap();
        let spread: Vec<Vec<f64>> = groups
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let m = g.iter().sum::<f64>() / g.len() as f64;
                g.iter().map(|x| x + m * shift + i as f64 * shift).collect()
            })
            .collect();
        let wider = one_way_anova(&spread).unwrap();
        prop_assume!(!base.degenerate);
        prop_assert!(wider.eta_p_sq > base.eta_p_sq);
    }

    #[test]
    fn d_is_monotone(a in 0.0f64..0.99, b in 0.0f64..0.99) {
        prop_assume!(a < b);
        prop_assert!(cohen_d_from_eta(a) < cohen_d_from_eta(b));
    }
}

fn event(t: u64, kind: EventKind, subject: usize) -> EpisodeEvent {
    EpisodeEvent { t, kind, subject }
}

#[test]
fn metrics_from_direct_counts() {
    let mut log = EpisodeLog::default();
    for i in 0..40 {
        log.events.push(event(10, EventKind::OccupantEvacuated, i));
    }
    for i in 40..75 {
        log.events.push(event(12, EventKind::TargetReached, i));
    }
    log.events.push(event(300, EventKind::EpisodeEnd(EndReason::Timeout), 0));
    let m = compute_metrics(&log, 100, 0.1).unwrap();
    assert_eq!((m.evacuation_rate, m.harm_rate), (40.0, 35.0));
    assert!((m.duration_s - 30.0).abs() < 1e-12);
    assert_eq!(m.end_reason, EndReason::Timeout);
}

fn office() -> Arc<BuildingLayout> {
    use std::sync::OnceLock;
    static L: OnceLock<Arc<BuildingLayout>> = OnceLock::new();
    L.get_or_init(|| Arc::new(BuildingLayout::default_office())).clone()
}

#[test]
fn event_log_recount_matches_engine_counters() {
    let layout = office();
    for k in 0..10u64 {
        let (mut env, mut obs) = ShooterEnv::reset(
            layout.clone(),
            asisim::ExitMask::with_closed(&[(k % 6 + 1) as u8]),
            EnvConfig::default(),
            Mode::Evaluation,
            seed::rng(k),
        )
        .unwrap();
        env.record();
        while env.done().is_none() {
            obs = env.step(GreedyPolicy.act(&env, &obs)).unwrap().obs;
        }
        let census = env.census();
        let log = env.take_log().unwrap();
        let m = compute_metrics(&log, 100, 0.1).unwrap();
        assert_eq!(m.evacuated, census.evacuated);
        assert_eq!(m.harmed, census.harmed);
        assert!(m.evacuation_rate + m.harm_rate <= 100.0);
        assert_eq!(m.end_reason, env.done().unwrap());
    }
}

#[test]
fn shooter_disabled_harms_nobody() {
    let cfg = EnvConfig {
        shooter_active: false,
        ..EnvConfig::default()
    };
    let s = ScenarioConfig::new(&[], 3, 100, 1);
    for r in run_scenario(&s, &office(), &GreedyPolicy, &cfg).unwrap() {
        assert_eq!(r.metrics.harm_rate, 0.0);
    }
}

#[test]
fn runs_are_deterministic() {
    let s = ScenarioConfig::new(&[5, 6], 1, 100, 9);
    let a = run_scenario(&s, &office(), &GreedyPolicy, &EnvConfig::default()).unwrap();
    let b = run_scenario(&s, &office(), &GreedyPolicy, &EnvConfig::default()).unwrap();
    assert_eq!(a[0].metrics, b[0].metrics);
    assert_eq!(a[0].log, b[0].log);
}

#[test]
fn closed_exits_are_walls_for_everyone() {
    let layout = office();
    let s = ScenarioConfig::new(&[5, 6], 1, 100, 2);
    let closed: Vec<_> = layout.exits().iter().filter(|e| !s.mask().is_open(e.id)).collect();
    let sensors = layout.sensor_walls(s.mask());
    for e in &closed {
        assert!(sensors
            .iter()
            .any(|w| w.kind == asisim::world::WallKind::Exterior && w.a == e.portal.a && w.b == e.portal.b));
    }
    let (mut env, mut obs) =
        ShooterEnv::reset(layout.clone(), s.mask(), EnvConfig::default(), Mode::Evaluation, seed::rng(2)).unwrap();
    while env.done().is_none() {
        obs = env.step(GreedyPolicy.act(&env, &obs)).unwrap().obs;
    }
    for o in env.occupants() {
        assert!(!matches!(o.goal, Some(GoalRef::Exit(5 | 6))));
    }
}

#[test]
fn sweep_rows_are_sorted() {
    let mut scenarios = enumerate_scenarios(&[1, 2, 3, 4, 5, 6], 1, 2, 20, 4).unwrap();
    scenarios.extend(enumerate_scenarios(&[1, 2, 3, 4, 5, 6], 0, 2, 20, 4).unwrap());
    let cfg = EnvConfig {
        occupant_count: 20,
        ..EnvConfig::default()
    };
    let recs = run_sweep(&scenarios, &office(), &GreedyPolicy, &cfg).unwrap();
    assert_eq!(recs.len(), 14);
    let keys: Vec<(String, usize)> = recs.iter().map(|r| (r.scenario_label.clone(), r.run_index)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(recs[0].scenario_label, "full");
}

#[test]
fn report_stats_match_recomputation() {
    let mut rows = Vec::new();
    let mut rng = seed::rng(77);
    use rand::Rng;
    for label in ["full", "no-1", "no-2", "no-1-2", "no-3-4"] {
        for i in 0..100 {
            rows.push(ResultRow {
                scenario_label: label.into(),
                run_index: i,
                seed: 0,
                evacuation_rate: rng.random_range(0.0..60.0),
                harm_rate: rng.random_range(0.0..40.0),
                duration_s: 1.0,
                end_reason: "timeout".into(),
            });
        }
    }
    let rep = sweep_report(&rows, 6).unwrap();
    for s in &rep.scenarios {
        let xs: Vec<f64> = rows.iter().filter(|r| r.scenario_label == s.label).map(|r| r.evacuation_rate).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert_eq!(s.evacuation.n, 100);
        assert!((s.evacuation.mean - mean).abs() < 1e-10);
        assert!((s.evacuation.sd - sd).abs() < 1e-10);
    }
    let count = rep.anova.iter().find(|b| b.effect == "exit_count").unwrap();
    assert_eq!((count.result.df_between, count.result.df_within), (2, 497));
    let five = rep.anova.iter().find(|b| b.effect == "configuration_5_exits").unwrap();
    assert_eq!(five.levels, vec!["full", "no-1", "no-2"]);
    assert_eq!((five.result.df_between, five.result.df_within), (2, 297));
}
