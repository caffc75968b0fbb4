//! `twinsim` command-line runner.
//!
//! On success each subcommand prints one JSON object to stdout. On failure
//! the last line on stderr is `{"error": <code>, "message": ...}` and the
//! process exits with the code listed below.
//!
//! | exit | code             | cause                                          |
//! |------|------------------|------------------------------------------------|
//! | 0    |                  | success                                        |
//! | 2    | `usage`          | bad command line                               |
//! | 3    | `config`         | unreadable or invalid scenario config          |
//! | 4    | `io`             | file could not be read or written              |
//! | 5    | `log_format`     | malformed run log                              |
//! | 6    | `hash_mismatch`  | run log recorded in a different world          |
//! | 7    | `diverged`       | simulation diverged; message names the tick    |
//! | 8    | `unknown_preset` | vehicle preset does not exist                  |
//! | 9    | `vehicle`        | invalid vehicle parameters                     |
//! | 10   | `sensor`         | invalid sensor configuration                   |
//! | 11   | `no_path`        | trajectory is empty                            |
//! | 12   | `navigation`     | other trajectory or tracker error              |
//! | 13   | `unknown_scene`  | scene id does not exist                        |
//! | 14   | `scene`          | map or heightmap file is invalid               |
//! | 15   | `server`         | telemetry endpoint could not be opened         |

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use twinsim::environment::{load_map, save_map, Cell};
use twinsim::harness::{load_log, replay_file, run_scenario, score, HarnessError, RunOutput, ScenarioConfig};
use twinsim::navigation::Trajectory;
use twinsim_telemetry::{ServerConfig, TelemetryServer};

/// Exit status for each machine-readable error code.
const EXIT_CODES: &[(&str, u8)] = &[
    ("usage", 2),
    ("config", 3),
    ("io", 4),
    ("log_format", 5),
    ("hash_mismatch", 6),
    ("diverged", 7),
    ("unknown_preset", 8),
    ("vehicle", 9),
    ("sensor", 10),
    ("no_path", 11),
    ("navigation", 12),
    ("unknown_scene", 13),
    ("scene", 14),
    ("server", 15),
];

#[derive(Parser)]
#[command(name = "twinsim", version, about = "Deterministic vehicle digital-twin simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a TOML config.
    Run(RunArgs),
    /// Re-run the commands of a run log in a fresh simulation.
    Replay(ReplayArgs),
    /// Score a run log against a trajectory.
    Score(ScoreArgs),
    /// Convert an occupancy map to the canonical PGM/YAML pair or to JSON.
    MapConvert(MapConvertArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (TOML). Relative paths inside it resolve against its directory.
    #[arg(short, long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's simulated-time limit, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Output directory for run.jsonl, metrics.json, maps and trajectories.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Serve telemetry on this address and pace the run to wall-clock time.
    #[arg(long, value_name = "ADDR", conflicts_with = "headless")]
    server: Option<SocketAddr>,
    /// Run as fast as possible even if the config asks for realtime pacing.
    #[arg(long)]
    headless: bool,
}

#[derive(Args)]
struct ReplayArgs {
    /// Run log (JSON lines) to replay.
    log: PathBuf,
    /// Refuse the log unless it was recorded in this config's world.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    log: PathBuf,
    /// Reference trajectory (CSV x,y,v).
    #[arg(short, long)]
    trajectory: PathBuf,
}

#[derive(Args)]
struct MapConvertArgs {
    /// Map YAML with its image next to it.
    input: PathBuf,
    /// `.yaml` writes a PGM/YAML pair, `.json` a cell array (0 free, 100 occupied, 255 unknown).
    output: PathBuf,
}

struct Failure {
    code: &'static str,
    message: String,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return fail(Failure {
                code: "usage",
                message: e.kind().to_string(),
            });
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Score(a) => cmd_score(a),
        Command::MapConvert(a) => cmd_map_convert(a),
    };
    match result {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(f) => fail(f),
    }
}

fn fail(f: Failure) -> ExitCode {
    eprintln!("{}", json!({"error": f.code, "message": f.message}));
    let status = EXIT_CODES.iter().find(|(c, _)| *c == f.code).map_or(1, |(_, s)| *s);
    ExitCode::from(status)
}

fn rebase(dir: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = dir.join(&*path);
        }
    }
}

/// Loads a config and makes its file references relative to its directory.
fn load_config(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let mut c = ScenarioConfig::from_file(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    rebase(dir, &mut c.commands);
    rebase(dir, &mut c.trajectory);
    rebase(dir, &mut c.output);
    if c.vehicle.ends_with(".toml") && Path::new(&c.vehicle).is_relative() {
        c.vehicle = dir.join(&c.vehicle).to_string_lossy().into_owned();
    }
    Ok(c)
}

fn summary(out: &RunOutput) -> Value {
    let dir = out.log_path.as_deref().and_then(Path::parent);
    let file = |present: bool, name: &str| dir.filter(|_| present).map(|d| d.join(name));
    json!({
        "metrics": out.metrics,
        "log": out.log_path,
        "map": file(out.map.is_some(), "map.yaml"),
        "trajectory": file(out.trajectory.is_some(), "trajectory.csv"),
    })
}

fn cmd_run(a: RunArgs) -> Result<Value, Failure> {
    let mut c = load_config(&a.config)?;
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(d) = a.duration {
        c.duration = d;
    }
    if let Some(o) = a.output {
        c.output = Some(o);
    }
    if c.output.is_none() {
        c.output = Some(PathBuf::from("out").join(format!("{:?}", c.mode).to_lowercase()));
    }
    if a.headless {
        c.realtime = false;
    }
    let out = match a.server {
        Some(addr) => {
            c.realtime = true;
            let server = TelemetryServer::bind(addr, ServerConfig::default()).map_err(|e| Failure {
                code: "server",
                message: format!("{addr}: {e}"),
            })?;
            let bound = server.local_addr().map_err(|e| Failure {
                code: "server",
                message: e.to_string(),
            })?;
            eprintln!("telemetry on ws://{bound}");
            server.run(&c)?
        }
        None => run_scenario(&c)?,
    };
    Ok(summary(&out))
}

fn cmd_replay(a: ReplayArgs) -> Result<Value, Failure> {
    let expected = a.config.as_deref().map(load_config).transpose()?;
    let out = replay_file(&a.log, expected.as_ref(), a.output)?;
    Ok(summary(&out))
}

fn cmd_score(a: ScoreArgs) -> Result<Value, Failure> {
    let log = load_log(&a.log)?;
    let traj = Trajectory::load(&a.trajectory).map_err(HarnessError::from)?;
    let report = score(&log, &traj);
    Ok(json!(report))
}

fn cmd_map_convert(a: MapConvertArgs) -> Result<Value, Failure> {
    let grid = load_map(&a.input).map_err(HarnessError::from)?;
    let ext = a.output.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "yaml" | "yml" => {
            save_map(&grid, &a.output).map_err(HarnessError::from)?;
        }
        "json" => {
            let cells: Vec<u8> = grid
                .cells
                .iter()
                .map(|c| match c {
                    Cell::Free => 0,
                    Cell::Occupied => 100,
                    Cell::Unknown => 255,
                })
                .collect();
            let doc = json!({
                "width": grid.width,
                "height": grid.height,
                "resolution": grid.resolution,
                "origin": [grid.origin.x, grid.origin.y, grid.origin.yaw],
                "cells": cells,
            });
            std::fs::write(&a.output, doc.to_string()).map_err(|e| Failure {
                code: "io",
                message: format!("{}: {e}", a.output.display()),
            })?;
        }
        _ => {
            return Err(Failure {
                code: "usage",
                message: format!("{}: output must end in .yaml, .yml or .json", a.output.display()),
            })
        }
    }
    Ok(json!({
        "output": a.output,
        "width": grid.width,
        "height": grid.height,
        "occupied": grid.count(Cell::Occupied),
        "free": grid.count(Cell::Free),
        "unknown": grid.count(Cell::Unknown),
    }))
}
