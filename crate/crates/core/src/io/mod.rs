//! Files: run configuration, results, training logs, episode logs and
//! run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::{EnvConfig, EpisodeEvent, EpisodeLog, EventKind};
use crate::experiments::ResultRow;
use crate::geom::Vec2;
use crate::rl::{PpoConfig, SummaryRow};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}, line {line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(fs_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(fs_err(dir))?;
    }
    fs::write(path, text).map_err(fs_err(path))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Training and environment settings, as read from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub ppo: PpoConfig,
    pub env: EnvConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::parse(&read_text(path)?).map_err(|message| IoError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_toml().as_bytes()).into()
    }
}

/// What a command ran with, written before any other output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub layout_path: String,
    pub layout_sha256: String,
    pub seed: u64,
    pub started_unix_s: u64,
    /// Command-specific settings (checkpoint, blocked exits, runs, ...).
    #[serde(default)]
    pub settings: toml::Table,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn new(command: &str, layout_path: &str, layout_text: &str, seed: u64, config: RunConfig) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            layout_path: layout_path.to_string(),
            layout_sha256: sha256_hex(layout_text.as_bytes()),
            seed,
            started_unix_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            settings: toml::Table::new(),
            config,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), IoError> {
        write_text(&dir.join("manifest.toml"), &toml::to_string(self).expect("manifest serializes"))
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        toml::from_str(&read_text(path)?).map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(fs_err(dir))?;
    }
    let f = fs::File::create(path).map_err(fs_err(path))?;
    Ok(csv::Writer::from_writer(f))
}

fn csv_fail(path: &Path) -> impl Fn(csv::Error) -> IoError + '_ {
    move |e| match e.position() {
        Some(pos) => IoError::Row {
            path: path.to_path_buf(),
            line: pos.line(),
            message: e.to_string(),
        },
        None => IoError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), IoError> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(csv_fail(path))?;
    }
    w.flush().map_err(fs_err(path))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, IoError> {
    let f = fs::File::open(path).map_err(fs_err(path))?;
    csv::Reader::from_reader(f)
        .deserialize()
        .map(|r| r.map_err(csv_fail(path)))
        .collect()
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), IoError> {
    write_rows(path, rows)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, IoError> {
    let rows: Vec<ResultRow> = read_rows(path)?;
    for (i, r) in rows.iter().enumerate() {
        let line = i as u64 + 2;
        let bad = |message: String| IoError::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        for (name, v) in [("evacuation_rate", r.evacuation_rate), ("harm_rate", r.harm_rate)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(bad(format!("{name} {v} outside [0, 100]")));
            }
        }
        if r.end_reason().is_none() {
            return Err(bad(format!("unknown end_reason {:?}", r.end_reason)));
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub step: u64,
    pub episodes: usize,
    pub mean_reward: f64,
    pub mean_episode_len: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub lr: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl From<&SummaryRow> for TrainLogRow {
    fn from(r: &SummaryRow) -> Self {
        TrainLogRow {
            step: r.step,
            episodes: r.episodes,
            mean_reward: r.mean_reward,
            mean_episode_len: r.mean_episode_len,
            policy_loss: r.policy_loss,
            value_loss: r.value_loss,
            entropy: r.entropy,
            lr: r.lr,
            beta: r.beta,
            epsilon: r.epsilon,
        }
    }
}

/// Append-only training log.
pub struct TrainLog {
    path: PathBuf,
    w: csv::Writer<fs::File>,
}

impl TrainLog {
    pub fn create(path: &Path) -> Result<Self, IoError> {
        Ok(TrainLog {
            path: path.to_path_buf(),
            w: csv_writer(path)?,
        })
    }

    pub fn append(&mut self, row: &SummaryRow) -> Result<(), IoError> {
        self.w.serialize(TrainLogRow::from(row)).map_err(csv_fail(&self.path))?;
        self.w.flush().map_err(fs_err(&self.path))
    }
}

pub fn read_train_log(path: &Path) -> Result<Vec<TrainLogRow>, IoError> {
    read_rows(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub step: u64,
    pub t: f64,
    pub kind: String,
    pub subject: usize,
}

impl EventRow {
    pub fn new(e: &EpisodeEvent, dt: f64) -> Self {
        let kind = match e.kind {
            EventKind::TargetReached => "target_reached".to_string(),
            EventKind::ExteriorWallHit => "exterior_wall_hit".to_string(),
            EventKind::InteriorWallHit => "interior_wall_hit".to_string(),
            EventKind::OccupantEvacuated => "occupant_evacuated".to_string(),
            EventKind::EpisodeEnd(r) => format!("episode_end:{}", r.as_str()),
        };
        EventRow {
            step: e.t,
            t: e.t as f64 * dt,
            kind,
            subject: e.subject,
        }
    }

    pub fn to_event(&self) -> Option<EpisodeEvent> {
        let kind = match self.kind.as_str() {
            "target_reached" => EventKind::TargetReached,
            "exterior_wall_hit" => EventKind::ExteriorWallHit,
            "interior_wall_hit" => EventKind::InteriorWallHit,
            "occupant_evacuated" => EventKind::OccupantEvacuated,
            other => EventKind::EpisodeEnd(crate::env::EndReason::parse(other.strip_prefix("episode_end:")?)?),
        };
        Some(EpisodeEvent {
            t: self.step,
            kind,
            subject: self.subject,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub scenario_label: String,
    pub run_index: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Writes `<stem>.events.csv` and `<stem>.trajectory.csv`.
pub fn write_episode_log(dir: &Path, stem: &str, log: &EpisodeLog, dt: f64) -> Result<(), IoError> {
    write_rows(
        &dir.join(format!("{stem}.events.csv")),
        log.events.iter().map(|e| EventRow::new(e, dt)),
    )?;
    write_rows(
        &dir.join(format!("{stem}.trajectory.csv")),
        log.trajectory.iter().map(|(k, p)| TrajectoryRow {
            t: *k as f64 * dt,
            x: p.x,
            y: p.y,
        }),
    )
}

pub fn read_events(path: &Path) -> Result<Vec<EpisodeEvent>, IoError> {
    let rows: Vec<EventRow> = read_rows(path)?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            r.to_event().ok_or_else(|| IoError::Row {
                path: path.to_path_buf(),
                line: i as u64 + 2,
                message: format!("unknown event kind {:?}", r.kind),
            })
        })
        .collect()
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>, IoError> {
    read_rows(path)
}

pub fn write_trajectory(path: &Path, rows: &[TrajectoryRow]) -> Result<(), IoError> {
    write_rows(path, rows)
}

pub fn write_overlay(path: &Path, rows: &[OverlayRow]) -> Result<(), IoError> {
    write_rows(path, rows)
}

/// Episode log file stem for a run.
pub fn run_stem(label: &str, run_index: usize) -> String {
    format!("{label}.run-{run_index:04}")
}

/// Splits a run stem back into scenario label and run index.
pub fn parse_run_stem(stem: &str) -> Option<(String, usize)> {
    let (label, idx) = stem.rsplit_once(".run-")?;
    Some((label.to_string(), idx.parse().ok()?))
}

pub fn trajectory_points(rows: &[TrajectoryRow]) -> Vec<Vec2> {
    rows.iter().map(|r| Vec2::new(r.x, r.y)).collect()
}
