//! Sweep summaries and ANOVA tables.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::scenario::{parse_label, ScenarioError};
use super::stats::{one_way_anova, AnovaResult, GroupSummary, StatsError};
use crate::env::EndReason;

/// One line of a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario_label: String,
    pub run_index: usize,
    pub seed: u64,
    pub evacuation_rate: f64,
    pub harm_rate: f64,
    pub duration_s: f64,
    pub end_reason: String,
}

impl ResultRow {
    pub fn end_reason(&self) -> Option<EndReason> {
        EndReason::parse(&self.end_reason)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReportError {
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("no result rows")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub label: String,
    pub open_exits: usize,
    pub evacuation: GroupSummary,
    pub harm: GroupSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaBlock {
    /// "exit_count" or "configuration_<k>_exits".
    pub effect: String,
    pub metric: String,
    pub levels: Vec<String>,
    pub result: AnovaResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub total_exits: usize,
    /// Sorted by mean evacuation rate, highest first.
    pub scenarios: Vec<ScenarioSummary>,
    pub anova: Vec<AnovaBlock>,
}

/// Selects one metric's samples from a group.
type Pick = for<'g> fn(&'g Group<'_>) -> &'g Vec<f64>;

struct Group<'a> {
    label: &'a str,
    blocked: usize,
    evac: Vec<f64>,
    harm: Vec<f64>,
}

/// Summaries and ANOVAs for a sweep over a building with `total_exits`
/// exits.
///
/// The exit-count effect compares groups by number of open exits. For
/// each reduced count there is a configuration effect across the
/// scenarios with that count; with one exit closed the full-access
/// scenario joins as a reference level.
pub fn sweep_report(rows: &[ResultRow], total_exits: usize) -> Result<SweepReport, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut groups: BTreeMap<&str, Group> = BTreeMap::new();
    for r in rows {
        let blocked = parse_label(&r.scenario_label)?.len();
        let g = groups.entry(&r.scenario_label).or_insert_with(|| Group {
            label: &r.scenario_label,
            blocked,
            evac: Vec::new(),
            harm: Vec::new(),
        });
        g.evac.push(r.evacuation_rate);
        g.harm.push(r.harm_rate);
    }
    let mut scenarios: Vec<ScenarioSummary> = groups
        .values()
        .map(|g| ScenarioSummary {
            label: g.label.to_string(),
            open_exits: total_exits.saturating_sub(g.blocked),
            evacuation: GroupSummary::of(&g.evac),
            harm: GroupSummary::of(&g.harm),
        })
        .collect();
    scenarios.sort_by(|a, b| {
        b.evacuation
            .mean
            .total_cmp(&a.evacuation.mean)
            .then_with(|| a.label.cmp(&b.label))
    });

    let mut anova = Vec::new();
    let mut counts: BTreeMap<usize, Vec<&Group>> = BTreeMap::new();
    for g in groups.values() {
        counts.entry(g.blocked).or_default().push(g);
    }
    let metrics: [(&str, Pick); 2] =
        [("evacuation_rate", |g| &g.evac), ("harm_rate", |g| &g.harm)];

    if counts.len() >= 2 {
        let levels: Vec<String> = counts
            .keys()
            .map(|k| format!("{} exits", total_exits.saturating_sub(*k)))
            .collect();
        for (metric, pick) in metrics {
            let samples: Vec<Vec<f64>> = counts
                .values()
                .map(|gs| gs.iter().flat_map(|g| pick(g).iter().copied()).collect())
                .collect();
            anova.push(AnovaBlock {
                effect: "exit_count".into(),
                metric: metric.into(),
                levels: levels.clone(),
                result: one_way_anova(&samples)?,
            });
        }
    }
    for (&k, gs) in counts.iter().filter(|(k, _)| **k > 0) {
        let mut members: Vec<&Group> = Vec::new();
        if k == 1 {
            if let Some(full) = counts.get(&0) {
                members.extend(full.iter().copied());
            }
        }
        members.extend(gs.iter().copied());
        if members.len() < 2 {
            continue;
        }
        let levels: Vec<String> = members.iter().map(|g| g.label.to_string()).collect();
        for (metric, pick) in metrics {
            let samples: Vec<Vec<f64>> = members.iter().map(|g| pick(g).clone()).collect();
            anova.push(AnovaBlock {
                effect: format!("configuration_{}_exits", total_exits.saturating_sub(k)),
                metric: metric.into(),
                levels: levels.clone(),
                result: one_way_anova(&samples)?,
            });
        }
    }
    if anova.is_empty() {
        return Err(StatsError::TooFewGroups(groups.len()).into());
    }
    Ok(SweepReport {
        total_exits,
        scenarios,
        anova,
    })
}

impl SweepReport {
    /// Plain-text tables.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Scenarios by mean evacuation rate");
        let _ = writeln!(
            s,
            "{:<10} {:>5} {:>5} {:>18} {:>18}",
            "scenario", "exits", "n", "evacuation % (sd)", "harm % (sd)"
        );
        for r in &self.scenarios {
            let _ = writeln!(
                s,
                "{:<10} {:>5} {:>5} {:>10.2} ({:>5.2}) {:>10.2} ({:>5.2})",
                r.label,
                r.open_exits,
                r.evacuation.n,
                r.evacuation.mean,
                r.evacuation.sd,
                r.harm.mean,
                r.harm.sd
            );
        }
        for b in &self.anova {
            let a = &b.result;
            let _ = writeln!(s);
            let _ = writeln!(s, "One-way ANOVA: {} on {}", b.effect, b.metric);
            for (level, g) in b.levels.iter().zip(&a.groups) {
                let _ = writeln!(s, "  {:<10} n={:<5} mean={:.3} sd={:.3}", level, g.n, g.mean, g.sd);
            }
            let _ = writeln!(
                s,
                "  F({}, {}) = {:.3}, p = {}, eta_p^2 = {:.3}, d = {:.3}{}",
                a.df_between,
                a.df_within,
                a.f,
                format_p(a.p),
                a.eta_p_sq,
                a.d,
                if a.degenerate { " (degenerate: no within-group variance)" } else { "" }
            );
        }
        s
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

fn format_p(p: f64) -> String {
    if p < 0.001 {
        format!("{p:.3e} (< 0.001)")
    } else {
        format!("{p:.4}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(label: &str, i: usize, evac: f64, harm: f64) -> ResultRow {
        ResultRow {
            scenario_label: label.into(),
            run_index: i,
            seed: i as u64,
            evacuation_rate: evac,
            harm_rate: harm,
            duration_s: 10.0,
            end_reason: "timeout".into(),
        }
    }

    #[test]
    fn table_is_sorted_by_evacuation() {
        let mut rows = Vec::new();
        for (label, m) in [("no-1", 44.0), ("no-2", 31.0), ("no-3", 40.0)] {
            for i in 0..3 {
                rows.push(row(label, i, m + i as f64, 10.0 + i as f64));
            }
        }
        let r = sweep_report(&rows, 6).unwrap();
        let order: Vec<f64> = r.scenarios.iter().map(|s| s.evacuation.mean).collect();
        assert_eq!(order, vec![45.0, 41.0, 32.0]);
        assert_eq!(r.anova.len(), 2);
        assert_eq!(r.anova[0].effect, "configuration_5_exits");
    }

    #[test]
    fn single_scenario_is_an_error() {
        let rows: Vec<ResultRow> = (0..5).map(|i| row("full", i, 50.0 + i as f64, 1.0)).collect();
        assert_eq!(sweep_report(&rows, 6), Err(ReportError::Stats(StatsError::TooFewGroups(1))));
    }

    #[test]
    fn renders_and_serializes() {
        let rows: Vec<ResultRow> = ["full", "no-1", "no-1-2"]
            .iter()
            .flat_map(|l| (0..4).map(move |i| row(l, i, 10.0 * i as f64, 5.0 + i as f64)))
            .collect();
        let r = sweep_report(&rows, 6).unwrap();
        let text = r.render_text();
        assert!(text.contains("exit_count on harm_rate"));
        let back: SweepReport = toml::from_str(&r.to_toml()).unwrap();
        assert_eq!(back, r);
    }
}
