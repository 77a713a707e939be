//! Exit configurations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{self, Stream};
use crate::world::ExitMask;

pub const DEFAULT_RUNS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("cannot block {blocked} of {exits} exits: at least one must stay open")]
    TooManyBlocked { blocked: usize, exits: usize },
    #[error("bad scenario label {0:?}")]
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub label: String,
    /// Closed exit ids, ascending.
    pub blocked: Vec<u8>,
    pub runs: usize,
    pub occupants: usize,
    pub seed_base: u64,
}

impl ScenarioConfig {
    pub fn new(blocked: &[u8], runs: usize, occupants: usize, master_seed: u64) -> Self {
        let mut blocked = blocked.to_vec();
        blocked.sort_unstable();
        let label = label_for(&blocked);
        let code = blocked.iter().fold(0u64, |acc, id| acc | 1 << (id - 1));
        ScenarioConfig {
            label,
            seed_base: seed::derive(master_seed, Stream::Scenario, code),
            blocked,
            runs,
            occupants,
        }
    }

    pub fn mask(&self) -> ExitMask {
        ExitMask::with_closed(&self.blocked)
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed_base.wrapping_add(run as u64)
    }

    pub fn open_exits(&self, total_exits: usize) -> usize {
        total_exits - self.blocked.len()
    }
}

/// "full" for no closures, otherwise "no-" followed by the closed ids.
pub fn label_for(blocked: &[u8]) -> String {
    if blocked.is_empty() {
        "full".into()
    } else {
        let ids: Vec<String> = blocked.iter().map(u8::to_string).collect();
        format!("no-{}", ids.join("-"))
    }
}

/// Closed exit ids encoded in a label.
pub fn parse_label(label: &str) -> Result<Vec<u8>, ScenarioError> {
    if label == "full" {
        return Ok(Vec::new());
    }
    let err = || ScenarioError::Label(label.to_string());
    let rest = label.strip_prefix("no-").ok_or_else(err)?;
    let ids = rest
        .split('-')
        .map(|s| s.parse::<u8>().map_err(|_| err()))
        .collect::<Result<Vec<_>, _>>()?;
    if ids.windows(2).any(|w| w[0] >= w[1]) || ids.iter().any(|&i| i == 0 || i > 8) {
        return Err(err());
    }
    Ok(ids)
}

/// Every way of closing `n_blocked` of `exit_ids`, in lexicographic order
/// of the closed ids.
pub fn enumerate_scenarios(
    exit_ids: &[u8],
    n_blocked: usize,
    runs: usize,
    occupants: usize,
    master_seed: u64,
) -> Result<Vec<ScenarioConfig>, ScenarioError> {
    if n_blocked >= exit_ids.len() {
        return Err(ScenarioError::TooManyBlocked {
            blocked: n_blocked,
            exits: exit_ids.len(),
        });
    }
    let mut ids = exit_ids.to_vec();
    ids.sort_unstable();
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(n_blocked);
    combinations(&ids, n_blocked, 0, &mut pick, &mut |c| {
        out.push(ScenarioConfig::new(c, runs, occupants, master_seed));
    });
    Ok(out)
}

fn combinations(ids: &[u8], k: usize, from: usize, pick: &mut Vec<u8>, emit: &mut impl FnMut(&[u8])) {
    if pick.len() == k {
        emit(pick);
        return;
    }
    for i in from..ids.len() {
        pick.push(ids[i]);
        combinations(ids, k, i + 1, pick, emit);
        pick.pop();
    }
}
