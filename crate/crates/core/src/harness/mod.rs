//! Scenario runner: builds a world from a [`ScenarioConfig`], drives it with
//! a command source, logs every run as JSON lines, replays logs and scores
//! them against trajectories.

mod config;
mod driver;
mod log;
mod runner;
mod score;

pub use config::{sha256_hex, DriverConfig, MappingConfig, Mode, PoseSource, RecordingConfig, ScenarioConfig};
pub use driver::{centerline_trajectory, CommandReplay, CommandSource, ControlInput, PathFollower, ZeroCommand};
pub use log::{
    body_pose_from_rear, load_log, read_log, rear_axle_pose, LogHeader, LogRecord, LogSummary, LogWriter, ParsedLog, SensorDigest,
    SharedBuffer, StateSnapshot, TickRecord, LOG_QUEUE_CAPACITY, LOG_VERSION,
};
pub use runner::{
    replay, replay_file, resolve_scene, run_scenario, run_scenario_with, Directive, RunHooks, RunObserver, RunOutput, TickView,
};
pub use score::{score, score_states, Progress, ScoreReport};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::environment::EnvironmentError;
use crate::math::Pose2;
use crate::navigation::NavigationError;
use crate::sensors::SensorError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("invalid config `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("run log: {0}")]
    Log(String),
    #[error("hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: String, found: String },
    #[error("run aborted at tick {tick}: {source}")]
    Diverged {
        tick: u64,
        #[source]
        source: DynamicsError,
    },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Navigation(#[from] NavigationError),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
}

impl HarnessError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        HarnessError::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// Stable machine-readable code, used by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            HarnessError::Config(_) | HarnessError::InvalidConfig { .. } => "config",
            HarnessError::Io { .. } => "io",
            HarnessError::Log(_) => "log_format",
            HarnessError::HashMismatch { .. } => "hash_mismatch",
            HarnessError::Diverged { .. } => "diverged",
            HarnessError::Dynamics(DynamicsError::UnknownPreset(_)) => "unknown_preset",
            HarnessError::Dynamics(_) => "vehicle",
            HarnessError::Sensor(_) => "sensor",
            HarnessError::Navigation(NavigationError::NoPath) => "no_path",
            HarnessError::Navigation(_) => "navigation",
            HarnessError::Environment(EnvironmentError::UnknownScenario(_)) => "unknown_scene",
            HarnessError::Environment(_) => "scene",
        }
    }
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Physics steps taken.
    pub ticks: u64,
    pub sim_time: f64,
    /// Ground distance travelled by the rear axle, m.
    pub distance: f64,
    /// Laps of the reference path, as arc length over path length.
    pub completion: f64,
    /// Sim time at which each full lap was completed, s.
    pub lap_times: Vec<f64>,
    /// Rear-axle distance to the reference path, m.
    pub max_cross_track: f64,
    pub mean_cross_track: f64,
    pub collision: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision_tick: Option<u64>,
    pub final_pose: Pose2,
    /// Fraction of true boundary cells the built map marks occupied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoints: Option<usize>,
}

impl RunMetrics {
    pub fn lap_time(&self) -> Option<f64> {
        self.lap_times.first().copied()
    }
}
