//! Benchmark command-line harness: configure an environment, planner
//! and budget, run batches, and emit machine-readable result rows plus
//! human-readable summaries.
//!
//! Results are line-oriented JSON records (append-safe, one object per
//! line, each carrying a schema version `v`), so long sweeps survive
//! interruption and repeated runs with the same seed produce
//! byte-identical files. Wall-clock timings appear only in trace files,
//! never in result rows.

use crate::bprost::{extract_bprost, read_fixture, BackgroundMap, FeatureLayout, TilingConfig};
use crate::control::{run_batch, BatchResult, EpisodeConfig, PlannerKind};
use crate::env::{Budget, Simulator, ToyEnv, ToyEnvConfig};
use crate::planners::GoalSet;
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "pixelplan",
    about = "Width-based planning benchmarks over pixel features",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a batch of episodes and write result rows.
    Run(RunArgs),
    /// Print feature-space sizes and the active-feature count for a
    /// screen fixture.
    Features(FeaturesArgs),
    /// Run a budgets × planners (× envs) sweep, one results file per
    /// cell plus a combined table.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct RunArgs {
    /// Declarative TOML config mirroring these flags; flags override
    /// file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Environment spec: chain:L, latched-chain:L:LATCH, collector:WxH,
    /// hazard:L, frozen, or @path/to/env.toml.
    #[arg(long)]
    pub env: Option<String>,
    /// Planner name: iw1, iw2, iwg, iws, rollout-iw, ra-rollout-iw,
    /// ras-rollout-iw (trailing digit selects width).
    #[arg(long)]
    pub planner: Option<String>,
    /// Per-decision budget in simulator calls (the deterministic mode).
    #[arg(long, conflicts_with = "budget_seconds")]
    pub budget_calls: Option<u64>,
    /// Per-decision wall-clock budget in seconds (excluded from
    /// determinism guarantees).
    #[arg(long)]
    pub budget_seconds: Option<f64>,
    #[arg(long)]
    pub frameskip: Option<u32>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Episodes per data point.
    #[arg(long)]
    pub runs: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_frames: Option<u64>,
    /// Reuse lookahead state across decisions.
    #[arg(long)]
    pub caching: Option<bool>,
    /// Results file (JSON lines).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trace verbosity: 1 writes per-decision records next to the
    /// results file, 2 adds a lookahead-tree dump to each record.
    #[arg(long)]
    pub trace: Option<u8>,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    /// Screen fixture path (PPSF format).
    pub fixture: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Comma-separated environment specs.
    #[arg(long, default_value = "chain:8")]
    pub envs: String,
    /// Comma-separated planner names.
    #[arg(long, default_value = "iw1,rollout-iw")]
    pub planners: String,
    /// Comma-separated budgets, each calls:N or seconds:X (bare numbers
    /// mean calls).
    #[arg(long, default_value = "calls:100,calls:400")]
    pub budgets: String,
    #[arg(long)]
    pub frameskip: Option<u32>,
    #[arg(long)]
    pub runs: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for per-cell results files.
    #[arg(long, default_value = "sweep-out")]
    pub out: PathBuf,
}

/// File form of the run flags.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    env: Option<String>,
    planner: Option<String>,
    budget_calls: Option<u64>,
    budget_seconds: Option<f64>,
    frameskip: Option<u32>,
    gamma: Option<f64>,
    alpha: Option<f64>,
    runs: Option<u32>,
    seed: Option<u64>,
    max_frames: Option<u64>,
    caching: Option<bool>,
    out: Option<String>,
    trace: Option<u8>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub env_spec: String,
    pub episode: EpisodeConfig,
    pub runs: u32,
    pub out: PathBuf,
    pub trace: u8,
}

/// Parses an environment spec string into a toy-env config.
pub fn parse_env_spec(spec: &str) -> Result<ToyEnvConfig> {
    if let Some(path) = spec.strip_prefix('@') {
        let text = fs::read_to_string(path).with_context(|| format!("reading env config {path}"))?;
        return ToyEnvConfig::from_toml(&text).map_err(|e| anyhow!("env config {path}: {e}"));
    }
    let parts: Vec<&str> = spec.split(':').collect();
    match parts[0] {
        "chain" => {
            let len: u32 = parts.get(1).unwrap_or(&"8").parse()?;
            Ok(ToyEnvConfig::pixel_chain(len))
        }
        "latched-chain" => {
            let len: u32 = parts.get(1).ok_or_else(|| anyhow!("latched-chain:L:LATCH"))?.parse()?;
            let latch: u32 = parts.get(2).ok_or_else(|| anyhow!("latched-chain:L:LATCH"))?.parse()?;
            Ok(ToyEnvConfig::latched_chain(len, latch))
        }
        "collector" => {
            let dims = parts.get(1).unwrap_or(&"4x3");
            let (w, h) = dims
                .split_once('x')
                .ok_or_else(|| anyhow!("collector:WxH"))?;
            let (w, h): (u32, u32) = (w.parse()?, h.parse()?);
            if w < 2 || h < 1 {
                bail!("collector grid must be at least 2x1");
            }
            let mut items = vec![((w - 1, h - 1), 1.0)];
            if h > 1 {
                items.push(((w - 1, 0), 1.0));
            }
            Ok(ToyEnvConfig::collector_grid(w, h, &items))
        }
        "hazard" => {
            let len: u32 = parts.get(1).unwrap_or(&"6").parse()?;
            if len < 2 {
                bail!("hazard corridor needs length >= 2");
            }
            Ok(ToyEnvConfig::hazard_corridor(len))
        }
        "frozen" => Ok(ToyEnvConfig::frozen()),
        other => bail!("unknown environment {other:?}"),
    }
}

fn parse_budget_label(label: &str) -> Result<Budget> {
    if let Some(n) = label.strip_prefix("calls:") {
        return Ok(Budget::Calls(n.parse()?));
    }
    if let Some(s) = label.strip_prefix("seconds:") {
        return Ok(Budget::Seconds(s.parse()?));
    }
    Ok(Budget::Calls(label.parse().map_err(|_| {
        anyhow!("budget {label:?} must be calls:N, seconds:X, or a call count")
    })?))
}

pub fn budget_label(budget: Budget) -> String {
    match budget {
        Budget::Calls(n) => format!("calls:{n}"),
        Budget::Seconds(s) => format!("seconds:{s}"),
        Budget::Unlimited => "unlimited".to_string(),
    }
}

/// Merges the optional config file with flag overrides and defaults.
pub fn resolve_run_config(args: &RunArgs) -> Result<RunConfig> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading config {path:?}"))?;
            toml::from_str(&text).with_context(|| format!("parsing config {path:?}"))?
        }
        None => FileConfig::default(),
    };
    let env_spec = args
        .env
        .clone()
        .or(file.env)
        .ok_or_else(|| anyhow!("no environment given (--env or config file)"))?;
    let planner_name = args
        .planner
        .clone()
        .or(file.planner)
        .unwrap_or_else(|| "rollout-iw".to_string());
    let planner = PlannerKind::parse(&planner_name)
        .ok_or_else(|| anyhow!("unknown planner {planner_name:?}"))?;

    let mut episode = EpisodeConfig {
        planner,
        ..EpisodeConfig::default()
    };
    episode.budget = match (
        args.budget_calls.or(file.budget_calls),
        args.budget_seconds.or(file.budget_seconds),
    ) {
        (Some(_), Some(_)) => bail!("budget-calls and budget-seconds are mutually exclusive"),
        (Some(n), None) => Budget::Calls(n),
        (None, Some(s)) => Budget::Seconds(s),
        (None, None) => Budget::Calls(300),
    };
    if let Some(f) = args.frameskip.or(file.frameskip) {
        if f == 0 {
            bail!("frameskip must be at least 1");
        }
        episode.frameskip = f;
    }
    if let Some(g) = args.gamma.or(file.gamma) {
        if !(0.0 < g && g < 1.0) {
            bail!("gamma must lie in (0, 1)");
        }
        episode.gamma = g;
    }
    if let Some(a) = args.alpha.or(file.alpha) {
        episode.alpha = a;
        episode.death_penalty = -10.0 * a;
    }
    if let Some(s) = args.seed.or(file.seed) {
        episode.seed = s;
    }
    if let Some(m) = args.max_frames.or(file.max_frames) {
        episode.max_frames = m;
    }
    if let Some(c) = args.caching.or(file.caching) {
        episode.caching = c;
    }
    Ok(RunConfig {
        env_spec,
        episode,
        runs: args.runs.or(file.runs).unwrap_or(5),
        out: args
            .out
            .clone()
            .or(file.out.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("results.jsonl")),
        trace: args.trace.or(file.trace).unwrap_or(0),
    })
}

#[derive(Serialize)]
struct RunRow<'a> {
    v: u32,
    kind: &'static str,
    env: &'a str,
    planner: String,
    budget: String,
    frameskip: u32,
    seed: u64,
    run: u32,
    score: f64,
    decisions: usize,
    calls: u64,
    frames: u64,
}

#[derive(Serialize)]
struct MeanRow<'a> {
    v: u32,
    kind: &'static str,
    env: &'a str,
    planner: String,
    budget: String,
    frameskip: u32,
    seed: u64,
    runs: u32,
    score: f64,
}

#[derive(Serialize)]
struct TraceRow<'a> {
    v: u32,
    kind: &'static str,
    run: u32,
    #[serde(flatten)]
    record: &'a crate::control::DecisionRecord,
}

fn result_rows(cfg: &RunConfig, batch: &BatchResult) -> Result<String> {
    let mut out = String::new();
    let planner = cfg.episode.planner.name();
    let budget = budget_label(cfg.episode.budget);
    for (i, episode) in batch.runs.iter().enumerate() {
        let row = RunRow {
            v: 1,
            kind: "run",
            env: &cfg.env_spec,
            planner: planner.clone(),
            budget: budget.clone(),
            frameskip: cfg.episode.frameskip,
            seed: cfg.episode.seed,
            run: i as u32,
            score: episode.total_raw_score,
            decisions: episode.decisions.len(),
            calls: episode.decisions.iter().map(|d| d.simulator_calls).sum(),
            frames: episode.frames,
        };
        out.push_str(&serde_json::to_string(&row)?);
        out.push('\n');
    }
    let mean = MeanRow {
        v: 1,
        kind: "mean",
        env: &cfg.env_spec,
        planner,
        budget,
        frameskip: cfg.episode.frameskip,
        seed: cfg.episode.seed,
        runs: cfg.runs,
        score: batch.mean_score,
    };
    out.push_str(&serde_json::to_string(&mean)?);
    out.push('\n');
    Ok(out)
}

/// Goal features for subgoaling planners, read off a probe instance.
fn env_goals(env_cfg: &ToyEnvConfig) -> Result<Option<GoalSet>> {
    let probe = ToyEnv::new(env_cfg.clone())?;
    let layout = probe.layout();
    let goals = probe.goal_features(&layout);
    if goals.is_empty() {
        Ok(None)
    } else {
        Ok(Some(GoalSet::new(goals)?))
    }
}

/// Runs a batch per the config and writes the results file (and the
/// trace file when requested). Returns the batch for inspection.
pub fn cmd_run(cfg: &RunConfig) -> Result<BatchResult> {
    let env_cfg = parse_env_spec(&cfg.env_spec)?;
    let mut episode = cfg.episode.clone();
    episode.dump_trees = cfg.trace >= 2;
    let goals = env_goals(&env_cfg)?;
    if matches!(cfg.episode.planner, PlannerKind::IwG) && goals.is_none() {
        bail!(
            "planner iwg needs an environment with goal cells (env {:?} has none)",
            cfg.env_spec
        );
    }
    let batch = run_batch(
        || {
            let mut env = ToyEnv::new(env_cfg.clone()).expect("validated env config");
            env.reset();
            env
        },
        &episode,
        goals.as_ref(),
        cfg.runs,
    )?;

    if let Some(dir) = cfg.out.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(&cfg.out, result_rows(cfg, &batch)?)?;

    if cfg.trace >= 1 {
        let trace_path = cfg.out.with_extension("trace.jsonl");
        let mut text = String::new();
        for (i, episode) in batch.runs.iter().enumerate() {
            for record in &episode.decisions {
                let row = TraceRow {
                    v: 1,
                    kind: "decision",
                    run: i as u32,
                    record,
                };
                text.push_str(&serde_json::to_string(&row)?);
                text.push('\n');
            }
        }
        fs::write(trace_path, text)?;
    }
    Ok(batch)
}

/// Feature-space report for a screen fixture: per-family sizes for the
/// fixture's dimensions plus the active count of the stored screen
/// pair. Background is calibrated from the pair itself (the first
/// screen's colors are the reference), so pixels that never vary within
/// the fixture are masked and an unchanged pair reports zero active
/// features.
pub fn cmd_features(path: &Path) -> Result<String> {
    let (prev, cur) = read_fixture(path)?;
    let tiling = TilingConfig::for_screen(cur.width(), cur.height());
    let layout = FeatureLayout::new(tiling, cur.palette_size());
    let sizes = layout.sizes();
    let mut bg = BackgroundMap::from_screen(prev.as_ref().unwrap_or(&cur));
    bg.update(&cur)?;
    let state = extract_bprost(prev.as_ref(), &cur, &bg, &layout)?;
    let mut out = String::new();
    out.push_str(&format!(
        "screen: {}x{} palette {} tiles {}x{}\n",
        cur.width(),
        cur.height(),
        cur.palette_size(),
        tiling.tile_cols,
        tiling.tile_rows
    ));
    out.push_str(&format!("basic: {}\n", sizes.basic));
    out.push_str(&format!("bpros: {}\n", sizes.bpros));
    out.push_str(&format!("bprot: {}\n", sizes.bprot));
    out.push_str(&format!("total: {}\n", sizes.total));
    out.push_str(&format!("active: {}\n", state.features.len()));
    Ok(out)
}

#[derive(Serialize)]
struct SweepCellRow {
    v: u32,
    kind: &'static str,
    env: String,
    planner: String,
    budget: String,
    score: Option<f64>,
    error: Option<String>,
    file: String,
}

/// Sweep over env × planner × budget. Cell failures are isolated: the
/// sweep continues and the failure is recorded in the combined table.
/// Returns the number of failed cells.
pub fn cmd_sweep(args: &SweepArgs) -> Result<usize> {
    let envs: Vec<&str> = args.envs.split(',').filter(|s| !s.is_empty()).collect();
    let planners: Vec<&str> = args.planners.split(',').filter(|s| !s.is_empty()).collect();
    let budgets: Vec<&str> = args.budgets.split(',').filter(|s| !s.is_empty()).collect();
    if envs.is_empty() || planners.is_empty() || budgets.is_empty() {
        println!("empty sweep matrix; nothing to do");
        return Ok(0);
    }
    fs::create_dir_all(&args.out)?;
    let mut cells = Vec::new();
    let mut failed = 0usize;
    for env in &envs {
        for planner in &planners {
            for budget in &budgets {
                let file = format!(
                    "{}__{}__{}.jsonl",
                    env.replace([':', '/'], "-"),
                    planner,
                    budget.replace(':', "-")
                );
                let cell = run_sweep_cell(args, env, planner, budget, &args.out.join(&file));
                match cell {
                    Ok(score) => cells.push(SweepCellRow {
                        v: 1,
                        kind: "cell",
                        env: env.to_string(),
                        planner: planner.to_string(),
                        budget: budget.to_string(),
                        score: Some(score),
                        error: None,
                        file,
                    }),
                    Err(e) => {
                        failed += 1;
                        cells.push(SweepCellRow {
                            v: 1,
                            kind: "cell",
                            env: env.to_string(),
                            planner: planner.to_string(),
                            budget: budget.to_string(),
                            score: None,
                            error: Some(format!("{e:#}")),
                            file,
                        });
                    }
                }
            }
        }
    }

    let mut combined = String::new();
    for row in &cells {
        combined.push_str(&serde_json::to_string(row)?);
        combined.push('\n');
    }
    fs::write(args.out.join("combined.jsonl"), combined)?;

    // human-readable table: env rows, planner@budget columns
    let mut header = format!("{:<20}", "env");
    for planner in &planners {
        for budget in &budgets {
            header.push_str(&format!("{:>24}", format!("{planner}@{budget}")));
        }
    }
    println!("{header}");
    for env in &envs {
        let mut line = format!("{:<20}", env);
        for planner in &planners {
            for budget in &budgets {
                let cell = cells
                    .iter()
                    .find(|c| c.env == *env && c.planner == *planner && c.budget == *budget)
                    .expect("cell recorded");
                match cell.score {
                    Some(s) => line.push_str(&format!("{s:>24.2}")),
                    None => line.push_str(&format!("{:>24}", "failed")),
                }
            }
        }
        println!("{line}");
    }
    Ok(failed)
}

fn run_sweep_cell(
    args: &SweepArgs,
    env: &str,
    planner: &str,
    budget: &str,
    out: &Path,
) -> Result<f64> {
    let planner_kind =
        PlannerKind::parse(planner).ok_or_else(|| anyhow!("unknown planner {planner:?}"))?;
    let mut episode = EpisodeConfig {
        planner: planner_kind,
        budget: parse_budget_label(budget)?,
        ..EpisodeConfig::default()
    };
    if let Some(f) = args.frameskip {
        episode.frameskip = f;
    }
    if let Some(s) = args.seed {
        episode.seed = s;
    }
    let cfg = RunConfig {
        env_spec: env.to_string(),
        episode,
        runs: args.runs.unwrap_or(5),
        out: out.to_path_buf(),
        trace: 0,
    };
    let batch = cmd_run(&cfg)?;
    Ok(batch.mean_score)
}

/// Top-level dispatch; returns the process exit code.
pub fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let cfg = resolve_run_config(&args)?;
            let batch = cmd_run(&cfg)?;
            println!(
                "env {} planner {} budget {} runs {}",
                cfg.env_spec,
                cfg.episode.planner.name(),
                budget_label(cfg.episode.budget),
                cfg.runs
            );
            for (i, score) in batch.scores.iter().enumerate() {
                println!("  run {i}: score {score}");
            }
            println!("  mean: {}", batch.mean_score);
            println!("results written to {}", cfg.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Features(args) => {
            let report = cmd_features(&args.fixture)?;
            print!("{report}");
            std::io::stdout().flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(args) => {
            let failed = cmd_sweep(&args)?;
            if failed > 0 {
                eprintln!("{failed} sweep cell(s) failed");
                Ok(ExitCode::FAILURE)
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
    }
}
