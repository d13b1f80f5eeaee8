//! Command-line front end. Exit codes: 0 success, 1 validation error,
//! 2 runtime error.

pub mod serve;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::engine::{
    analyze_log_text, boxplot_csv, range_sweep, run, to_jsonl, ConfigError, RunOutput, ScenarioConfig, SweepPoint,
};
use crate::mission::BuoyMode;
use crate::vehicle::Role;

#[derive(Debug, Parser)]
#[command(name = "auvnet", version, about = "Multi-AUV acoustic network simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write events.jsonl and metrics.json.
    Run(RunArgs),
    /// Monte Carlo over seeds, optionally sweeping the follower range.
    Mc(McArgs),
    /// Paced run with a TCP control channel for an operator console.
    Serve(ServeArgs),
    /// Reconstruct timelines and delays from an event log.
    Analyze(AnalyzeArgs),
    /// Check a scenario without running it.
    Validate(ScenarioArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Dotted-path override applied after loading, e.g. `link.noise_level_db=120`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    /// `range=<m>,<m>,...`
    #[arg(long)]
    pub sweep: Option<String>,
    /// First seed; defaults to the scenario seed.
    #[arg(long)]
    pub seed_base: Option<u64>,
    /// Worker threads; defaults to the number of logical CPUs.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Simulated seconds per wall-clock second.
    #[arg(long, default_value_t = 10.0)]
    pub pace: f64,
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub listen: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parses `range=500,1000` into metres; every value must be at least 1 m.
pub fn parse_sweep(arg: &str) -> Result<Vec<f64>, CliError> {
    let bad = |m: String| CliError::Validation(format!("--sweep {arg:?}: {m}"));
    let (key, values) = arg
        .split_once('=')
        .ok_or_else(|| bad("expected range=<m>,<m>,...".into()))?;
    if key.trim() != "range" {
        return Err(bad(format!("unknown sweep key `{key}`; only `range` is supported")));
    }
    let ranges = values
        .split(',')
        .map(|v| {
            let r: f64 = v.trim().parse().map_err(|_| bad(format!("`{v}` is not a number")))?;
            if !(r >= 1.0 && r.is_finite()) {
                return Err(bad(format!("range {r} must be at least 1 m")));
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if ranges.is_empty() {
        return Err(bad("no ranges given".into()));
    }
    Ok(ranges)
}

fn load(args: &ScenarioArgs) -> Result<ScenarioConfig, CliError> {
    let cfg = ScenarioConfig::load_with_overrides(&args.scenario, &args.set)?;
    cfg.validate()?;
    Ok(cfg)
}

fn default_out(kind: &str) -> PathBuf {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    PathBuf::from("out").join(format!("{kind}-{secs}"))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

/// Writes `events.jsonl` and `metrics.json`.
pub fn write_run_artifacts(dir: &Path, out: &RunOutput) -> Result<(), CliError> {
    write_file(dir, "events.jsonl", &to_jsonl(&out.events))?;
    let metrics = serde_json::to_string_pretty(&out.metrics).map_err(runtime)?;
    write_file(dir, "metrics.json", &(metrics + "\n"))
}

fn counts_line(out: &RunOutput, burst: u32) -> String {
    format!(
        "baseline: {}/{burst}  optimized: {}/{burst}",
        out.metrics.baseline.received, out.metrics.optimized.received
    )
}

fn cmd_run(args: &RunArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load(&args.scenario)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = run(&cfg)?;
    let dir = args.out.clone().unwrap_or_else(|| default_out("run"));
    write_run_artifacts(&dir, &out)?;
    writeln!(stdout, "{}", counts_line(&out, cfg.mission.burst_count)).map_err(runtime)?;
    if !out.metrics.completion {
        writeln!(stdout, "run incomplete: follower did not finish the optimized burst").map_err(runtime)?;
    }
    writeln!(stdout, "artifacts: {}", dir.display()).map_err(runtime)?;
    Ok(())
}

#[derive(Serialize)]
struct McReport<'a> {
    runs: usize,
    seed_base: u64,
    points: &'a [SweepPoint],
}

fn cmd_mc(args: &McArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.runs == 0 {
        return Err(CliError::Validation("--runs must be at least 1".into()));
    }
    let ranges = args.sweep.as_deref().map(parse_sweep).transpose()?;
    let cfg = load(&args.scenario)?;
    let ranges = match ranges {
        Some(r) => r,
        None => {
            let leader = cfg.leader().expect("validated");
            let follower = cfg.nodes.iter().find(|n| n.role == Role::Follower).expect("validated");
            vec![(follower.x - leader.x).hypot(follower.y - leader.y).max(1.0)]
        }
    };
    let seed_base = args.seed_base.unwrap_or(cfg.seed);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(CliError::Validation("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(runtime)?;
    let points = pool.install(|| range_sweep(&cfg, &ranges, args.runs, seed_base))?;

    let dir = args.out.clone().unwrap_or_else(|| default_out("mc"));
    write_file(&dir, "boxplot.csv", &boxplot_csv(&points))?;
    let report = McReport {
        runs: args.runs,
        seed_base,
        points: &points,
    };
    write_file(
        &dir,
        "summary.json",
        &(serde_json::to_string_pretty(&report).map_err(runtime)? + "\n"),
    )?;

    writeln!(stdout, "range_m  phase      median_per  n    incomplete").map_err(runtime)?;
    for p in &points {
        for (phase, d) in [("baseline", &p.summary.baseline), ("optimized", &p.summary.optimized)] {
            let median = d.summary.map_or_else(|| "-".to_owned(), |s| format!("{:.4}", s.median));
            writeln!(
                stdout,
                "{:<8} {:<10} {:<11} {:<4} {}",
                p.range_m,
                phase,
                median,
                d.samples.len(),
                p.summary.incomplete
            )
            .map_err(runtime)?;
        }
    }
    writeln!(stdout, "artifacts: {}", dir.display()).map_err(runtime)?;
    Ok(())
}

fn cmd_serve(args: &ServeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load(&args.scenario)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if cfg.mission.buoy_mode != BuoyMode::Manual {
        log::warn!("serve forces mission.buoy_mode = manual");
        writeln!(stdout, "warning: buoy_mode forced to manual").map_err(runtime)?;
        cfg.mission.buoy_mode = BuoyMode::Manual;
    }
    if !(args.pace > 0.0 && args.pace.is_finite()) {
        return Err(CliError::Validation(format!(
            "--pace must be positive, got {}",
            args.pace
        )));
    }
    let listener = std::net::TcpListener::bind(&args.listen)
        .map_err(|e| runtime(format!("cannot listen on {}: {e}", args.listen)))?;
    let addr = listener.local_addr().map_err(runtime)?;
    writeln!(stdout, "listening on {addr}").map_err(runtime)?;
    stdout.flush().ok();
    let out = serve::serve_session(&cfg, args.pace, listener).map_err(|e| match e {
        serve::ServeError::Config(c) => CliError::from(c),
        serve::ServeError::Io(m) => runtime(m),
    })?;
    let dir = args.out.clone().unwrap_or_else(|| default_out("serve"));
    write_run_artifacts(&dir, &out)?;
    writeln!(stdout, "{}", counts_line(&out, cfg.mission.burst_count)).map_err(runtime)?;
    writeln!(stdout, "artifacts: {}", dir.display()).map_err(runtime)?;
    Ok(())
}

fn cmd_analyze(args: &AnalyzeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.log)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", args.log.display())))?;
    let report = analyze_log_text(&text);
    let rendered = match args.format {
        ReportFormat::Text => report.to_text(),
        ReportFormat::Json => serde_json::to_string_pretty(&report).map_err(runtime)? + "\n",
    };
    stdout.write_all(rendered.as_bytes()).map_err(runtime)
}

fn cmd_validate(args: &ScenarioArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    load(args)?;
    writeln!(stdout, "ok: {}", args.scenario.display()).map_err(runtime)
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a, stdout),
        Command::Mc(a) => cmd_mc(a, stdout),
        Command::Serve(a) => cmd_serve(a, stdout),
        Command::Analyze(a) => cmd_analyze(a, stdout),
        Command::Validate(a) => cmd_validate(a, stdout),
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code. Errors go to stderr.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
