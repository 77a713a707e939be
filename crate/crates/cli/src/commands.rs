use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use asisim::env::{EnvConfig, OBS_DIM};
use asisim::experiments::{
    enumerate_scenarios, parse_label, run_sweep, sweep_report, ResultRow, ScenarioConfig,
};
use asisim::io::{self, OverlayRow, RunConfig, RunManifest, TrainLog};
use asisim::rl::{
    load_checkpoint, save_checkpoint, train as train_policy, Checkpoint, GreedyPolicy, PpoConfig, PpoPolicy,
    ShooterPolicy, ShooterTask, TrainOptions,
};
use asisim::world::{load_layout, BuildingLayout, DEFAULT_LAYOUT};
use asisim::ExitMask;

use crate::{EvalArgs, EvaluateArgs, ExportArgs, ExportFormat, Invalid, PolicyKind, StatsArgs, SweepArgs, TrainArgs};

const BUILTIN_LAYOUT: &str = "<builtin:default_office>";

fn invalid(msg: impl Display) -> anyhow::Error {
    Invalid(msg.to_string()).into()
}

fn at(path: &Path, msg: impl Display) -> anyhow::Error {
    invalid(format!("{}: {msg}", path.display()))
}

struct LoadedLayout {
    layout: Arc<BuildingLayout>,
    path: String,
    text: String,
}

fn load_layout_arg(path: Option<&Path>) -> Result<LoadedLayout> {
    let Some(path) = path else {
        return Ok(LoadedLayout {
            layout: Arc::new(BuildingLayout::default_office()),
            path: BUILTIN_LAYOUT.into(),
            text: DEFAULT_LAYOUT.into(),
        });
    };
    let text = io::read_text(path).map_err(invalid)?;
    let layout = load_layout(&text).map_err(|e| at(path, e))?;
    Ok(LoadedLayout {
        layout: Arc::new(layout),
        path: path.display().to_string(),
        text,
    })
}

fn load_config(path: Option<&Path>, default: RunConfig) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).map_err(invalid),
        None => Ok(default),
    }
}

fn prepare_out(out: Option<PathBuf>, root: &Path, command: &str) -> Result<PathBuf> {
    let dir = out.unwrap_or_else(|| root.join(command));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn train(root: &Path, a: TrainArgs) -> Result<()> {
    let layout = load_layout_arg(a.layout.as_deref())?;
    let mut cfg = load_config(
        a.config.as_deref(),
        RunConfig {
            ppo: PpoConfig::default(),
            env: EnvConfig::training(),
        },
    )?;
    if let Some(n) = a.max_steps {
        cfg.ppo.max_steps = n;
    }
    if let Some(n) = a.occupants {
        cfg.env.occupant_count = n;
    }
    cfg.ppo.validate().map_err(invalid)?;
    cfg.env.validate().map_err(invalid)?;
    if a.n_envs == 0 {
        return Err(invalid("--n-envs must be at least 1"));
    }
    if cfg.env.occupant_count > layout.layout.occupancy_limit() {
        return Err(invalid(format!(
            "{} occupants exceed the layout's limit of {}",
            cfg.env.occupant_count,
            layout.layout.occupancy_limit()
        )));
    }

    let out = prepare_out(a.out, root, "train")?;
    let mut manifest = RunManifest::new("train", &layout.path, &layout.text, a.seed, cfg.clone());
    manifest.settings.insert("n_envs".into(), (a.n_envs as i64).into());
    manifest.write(&out)?;

    let mut log = TrainLog::create(&out.join("train.csv"))?;
    let mut log_err = None;
    let hash = cfg.hash();
    let opts = TrainOptions {
        n_envs: a.n_envs,
        seed: a.seed,
        checkpoint_dir: Some(out.join("checkpoints")),
        config_hash: hash,
    };
    let env_cfg = cfg.env.clone();
    let outcome = train_policy(
        &cfg.ppo,
        &opts,
        |_, s| ShooterTask::new(layout.layout.clone(), ExitMask::all_open(), env_cfg.clone(), s),
        |row| {
            eprintln!(
                "step {:>9}  episodes {:>5}  mean reward {:>9.3}  mean length {:>7.1}  lr {:.2e}",
                row.step, row.episodes, row.mean_reward, row.mean_episode_len, row.lr
            );
            if let Err(e) = log.append(row) {
                log_err.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = log_err {
        return Err(e.into());
    }
    let step = outcome.rows.last().map_or(0, |r| r.step);
    let final_path = out.join("final.ckpt");
    save_checkpoint(
        &Checkpoint {
            params: outcome.params,
            step,
            config_hash: hash,
        },
        &final_path,
    )?;
    println!(
        "trained {step} steps, {} episodes, {} updates; policy in {}",
        outcome.episodes.len(),
        outcome.updates,
        final_path.display()
    );
    Ok(())
}

/// Checkpoint path and SHA-256, for the manifest.
type CheckpointId = (String, String);

fn load_policy(p: &crate::PolicyArgs) -> Result<(Box<dyn ShooterPolicy>, Option<CheckpointId>)> {
    match p.policy {
        PolicyKind::Greedy => Ok((Box::new(GreedyPolicy), None)),
        PolicyKind::Checkpoint => {
            let path = p
                .checkpoint
                .as_deref()
                .ok_or_else(|| invalid("--checkpoint is required with --policy checkpoint"))?;
            let ckpt = load_checkpoint(path).map_err(|e| {
                let msg = e.to_string();
                if msg.contains(&path.display().to_string()) {
                    invalid(msg)
                } else {
                    at(path, msg)
                }
            })?;
            ckpt.check_compatible(OBS_DIM).map_err(|e| at(path, e))?;
            let bytes = std::fs::read(path).with_context(|| path.display().to_string())?;
            Ok((
                Box::new(PpoPolicy::new(ckpt.params)),
                Some((path.display().to_string(), io::sha256_hex(&bytes))),
            ))
        }
    }
}

/// Runs `scenarios`, writing manifest, results and logs under `out`.
fn evaluate_scenarios(
    command: &str,
    e: &EvalArgs,
    layout: &LoadedLayout,
    cfg: &RunConfig,
    scenarios: &[ScenarioConfig],
    extra: &[(&str, toml::Value)],
    out: &Path,
) -> Result<Vec<ResultRow>> {
    let (policy, ckpt) = load_policy(&e.policy)?;
    let mut manifest = RunManifest::new(command, &layout.path, &layout.text, e.seed, cfg.clone());
    let s = &mut manifest.settings;
    s.insert("policy".into(), e.policy.policy.to_string().into());
    if let Some((path, sha)) = ckpt {
        s.insert("checkpoint".into(), path.into());
        s.insert("checkpoint_sha256".into(), sha.into());
    }
    s.insert("runs".into(), (e.runs as i64).into());
    s.insert("occupants".into(), (scenarios[0].occupants as i64).into());
    for (k, v) in extra {
        s.insert((*k).into(), v.clone());
    }
    manifest.write(out)?;

    let recs = run_sweep(scenarios, &layout.layout, policy.as_ref(), &cfg.env)?;
    let rows: Vec<ResultRow> = recs.iter().map(|r| r.row()).collect();
    io::write_results(&out.join("results.csv"), &rows)?;
    if !e.no_logs {
        let logs = out.join("logs");
        for r in &recs {
            io::write_episode_log(&logs, &io::run_stem(&r.scenario_label, r.run_index), &r.log, cfg.env.dt)?;
        }
    }
    Ok(rows)
}

fn eval_setup(e: &EvalArgs) -> Result<(LoadedLayout, RunConfig, usize)> {
    let layout = load_layout_arg(e.layout.as_deref())?;
    let cfg = load_config(e.config.as_deref(), RunConfig::default())?;
    cfg.env.validate().map_err(invalid)?;
    let occupants = e.occupants.unwrap_or(cfg.env.occupant_count);
    if occupants > layout.layout.occupancy_limit() {
        return Err(invalid(format!(
            "{occupants} occupants exceed the layout's limit of {}",
            layout.layout.occupancy_limit()
        )));
    }
    if e.runs == 0 {
        return Err(invalid("--runs must be at least 1"));
    }
    Ok((layout, cfg, occupants))
}

fn print_means(rows: &[ResultRow]) {
    let mut by: BTreeMap<&str, (usize, f64, f64)> = BTreeMap::new();
    for r in rows {
        let g = by.entry(&r.scenario_label).or_default();
        g.0 += 1;
        g.1 += r.evacuation_rate;
        g.2 += r.harm_rate;
    }
    for (label, (n, e, h)) in by {
        let n_f = n as f64;
        println!("{label:<10} runs {n:>4}  evacuation {:>6.2}%  harm {:>6.2}%", e / n_f, h / n_f);
    }
}

pub fn sweep(root: &Path, a: SweepArgs) -> Result<()> {
    let e = &a.eval;
    let (layout, cfg, occupants) = eval_setup(e)?;
    let ids: Vec<u8> = layout.layout.exits().iter().map(|x| x.id).collect();
    let mut scenarios = Vec::new();
    for &k in a.blocked.counts() {
        scenarios.extend(enumerate_scenarios(&ids, k, e.runs, occupants, e.seed).map_err(invalid)?);
    }
    let out = prepare_out(e.out.clone(), root, "sweep")?;
    let blocked: Vec<toml::Value> = a.blocked.counts().iter().map(|&k| toml::Value::from(k as i64)).collect();
    let rows = evaluate_scenarios(
        "sweep",
        e,
        &layout,
        &cfg,
        &scenarios,
        &[("blocked", toml::Value::Array(blocked))],
        &out,
    )?;
    print_means(&rows);
    println!("{} rows in {}", rows.len(), out.join("results.csv").display());
    Ok(())
}

pub fn evaluate(root: &Path, a: EvaluateArgs) -> Result<()> {
    let e = &a.eval;
    let (layout, cfg, occupants) = eval_setup(e)?;
    let blocked = parse_label(&a.scenario).map_err(invalid)?;
    for id in &blocked {
        if layout.layout.exit(*id).is_none() {
            return Err(invalid(format!("scenario {}: the layout has no exit {id}", a.scenario)));
        }
    }
    if blocked.len() >= layout.layout.exits().len() {
        return Err(invalid(format!("scenario {} closes every exit", a.scenario)));
    }
    let scenario = ScenarioConfig::new(&blocked, e.runs, occupants, e.seed);
    let out = prepare_out(e.out.clone(), root, "evaluate")?;
    let rows = evaluate_scenarios(
        "evaluate",
        e,
        &layout,
        &cfg,
        &[scenario],
        &[("scenario", a.scenario.clone().into())],
        &out,
    )?;
    print_means(&rows);
    println!("{} rows in {}", rows.len(), out.join("results.csv").display());
    Ok(())
}

pub fn stats(a: StatsArgs) -> Result<()> {
    let layout = load_layout_arg(a.layout.as_deref())?;
    let total_exits = a.total_exits.unwrap_or(layout.layout.exits().len());
    let rows = io::read_results(&a.results).map_err(invalid)?;
    let report = sweep_report(&rows, total_exits).map_err(|e| at(&a.results, e))?;
    let out = match a.out {
        Some(o) => o,
        None => a.results.parent().unwrap_or(Path::new(".")).join("stats"),
    };
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = RunManifest::new("stats", &layout.path, &layout.text, 0, RunConfig::default());
    let bytes = std::fs::read(&a.results).with_context(|| a.results.display().to_string())?;
    manifest.settings.insert("results".into(), a.results.display().to_string().into());
    manifest.settings.insert("results_sha256".into(), io::sha256_hex(&bytes).into());
    manifest.settings.insert("total_exits".into(), (total_exits as i64).into());
    manifest.write(&out)?;
    let text = report.render_text();
    io::write_text(&out.join("report.txt"), &text)?;
    io::write_text(&out.join("report.toml"), &report.to_toml())?;
    print!("{text}");
    Ok(())
}

pub fn export_trajectories(root: &Path, a: ExportArgs) -> Result<()> {
    if !a.logs.is_dir() {
        return Err(at(&a.logs, "not a directory"));
    }
    let mut runs: Vec<(String, usize, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(&a.logs).with_context(|| a.logs.display().to_string())? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(stem) = name.strip_suffix(".trajectory.csv") else {
            continue;
        };
        let Some((label, idx)) = io::parse_run_stem(stem) else {
            continue;
        };
        if a.scenario.as_ref().is_none_or(|s| *s == label) {
            runs.push((label, idx, path));
        }
    }
    if runs.is_empty() {
        return Err(at(&a.logs, "no trajectory logs found"));
    }
    runs.sort();

    let out = prepare_out(a.out, root, "trajectories")?;
    let mut manifest = RunManifest::new("export-trajectories", "", "", 0, RunConfig::default());
    manifest.settings.insert("logs".into(), a.logs.display().to_string().into());
    let format = match a.format {
        ExportFormat::PerRun => "per-run",
        ExportFormat::Overlay => "overlay",
    };
    manifest.settings.insert("format".into(), format.into());
    manifest.write(&out)?;

    let mut overlays: BTreeMap<String, Vec<OverlayRow>> = BTreeMap::new();
    for (label, idx, path) in &runs {
        let rows = io::read_trajectory(path).map_err(invalid)?;
        match a.format {
            ExportFormat::PerRun => {
                io::write_trajectory(&out.join(format!("{}.csv", io::run_stem(label, *idx))), &rows)?;
            }
            ExportFormat::Overlay => {
                overlays.entry(label.clone()).or_default().extend(rows.iter().map(|r| OverlayRow {
                    scenario_label: label.clone(),
                    run_index: *idx,
                    t: r.t,
                    x: r.x,
                    y: r.y,
                }));
            }
        }
    }
    for (label, rows) in &overlays {
        io::write_overlay(&out.join(format!("{label}.overlay.csv")), rows)?;
    }
    println!("exported {} trajectories to {}", runs.len(), out.display());
    Ok(())
}
