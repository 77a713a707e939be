//! Exit-configuration experiments: scenarios, evaluation runs, metrics
//! and statistics.

pub mod report;
pub mod run;
pub mod scenario;
pub mod stats;

pub use report::{sweep_report, AnovaBlock, ReportError, ResultRow, ScenarioSummary, SweepReport};
pub use run::{compute_metrics, run_episode, run_scenario, run_sweep, RunMetrics, RunRecord};
pub use scenario::{enumerate_scenarios, label_for, parse_label, ScenarioConfig, ScenarioError, DEFAULT_RUNS};
pub use stats::{cohen_d_from_eta, f_sf, ln_gamma, one_way_anova, reg_inc_beta, AnovaResult, GroupSummary, StatsError};

impl RunRecord {
    pub fn row(&self) -> ResultRow {
        ResultRow {
            scenario_label: self.scenario_label.clone(),
            run_index: self.run_index,
            seed: self.seed,
            evacuation_rate: self.metrics.evacuation_rate,
            harm_rate: self.metrics.harm_rate,
            duration_s: self.metrics.duration_s,
            end_reason: self.metrics.end_reason.as_str().to_string(),
        }
    }
}
