//! `asisim`: train the shooter agent, sweep exit configurations, run the
//! statistics and export shooter trajectories.

mod commands;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "asisim", version, about = "Active-shooter evacuation simulator")]
struct Cli {
    /// Root for default output directories.
    #[arg(long, global = true, env = "ASISIM_OUT", default_value = "asisim-out")]
    out_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a shooter policy with PPO.
    Train(TrainArgs),
    /// Evaluate a policy over every scenario with the given number of
    /// blocked exits.
    Sweep(SweepArgs),
    /// Evaluate a policy on a single scenario.
    Evaluate(EvaluateArgs),
    /// Summaries and one-way ANOVAs for a results file.
    Stats(StatsArgs),
    /// Shooter trajectories from sweep or evaluation logs.
    ExportTrajectories(ExportArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    /// Layout file; the bundled office when omitted.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Config file with [ppo] and [env] tables; defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub n_envs: usize,
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// Occupants per training episode.
    #[arg(long)]
    pub occupants: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    /// Trained network from --checkpoint.
    Checkpoint,
    /// Scripted nearest-visible-target baseline.
    Greedy,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Checkpoint => "checkpoint",
            PolicyKind::Greedy => "greedy",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Blocked {
    #[value(name = "0")]
    Zero,
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    /// 0, 1 and 2 blocked exits.
    All,
}

impl Blocked {
    pub fn counts(self) -> &'static [usize] {
        match self {
            Blocked::Zero => &[0],
            Blocked::One => &[1],
            Blocked::Two => &[2],
            Blocked::All => &[0, 1, 2],
        }
    }
}

#[derive(Args)]
pub struct PolicyArgs {
    #[arg(long, value_enum, default_value_t = PolicyKind::Checkpoint)]
    pub policy: PolicyKind,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Config file; only its [env] table is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    /// Occupants per run; the config value when omitted.
    #[arg(long)]
    pub occupants: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip per-run event and trajectory files.
    #[arg(long)]
    pub no_logs: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value_t = Blocked::All)]
    pub blocked: Blocked,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Scenario label: `full` or `no-<id>[-<id>...]`.
    #[arg(long, default_value = "full")]
    pub scenario: String,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub results: PathBuf,
    /// Number of exits in the building; read from --layout when omitted.
    #[arg(long)]
    pub total_exits: Option<usize>,
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Output directory; `stats/` next to the results file by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    /// One `t,x,y` file per run.
    PerRun,
    /// One file per scenario with every run tagged by index.
    Overlay,
}

#[derive(Args)]
pub struct ExportArgs {
    /// Directory holding `*.trajectory.csv` files.
    #[arg(long)]
    pub logs: PathBuf,
    #[arg(long, value_enum, default_value_t = ExportFormat::PerRun)]
    pub format: ExportFormat,
    /// Only runs of this scenario.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Bad input from the user: exit code 2.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

/// The error and its causes, skipping causes whose text the previous
/// message already includes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if last.contains(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
        last = msg;
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let root = cli.out_root;
    let result = match cli.command {
        Command::Train(a) => commands::train(&root, a),
        Command::Sweep(a) => commands::sweep(&root, a),
        Command::Evaluate(a) => commands::evaluate(&root, a),
        Command::Stats(a) => commands::stats(a),
        Command::ExportTrajectories(a) => commands::export_trajectories(&root, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            if e.downcast_ref::<Invalid>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
