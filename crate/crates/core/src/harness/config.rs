use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::dynamics::{presets, VehicleParams};
use crate::navigation::{LogOddsParams, TrackerConfig};
use crate::sensors::SensorConfig;
use crate::PHYSICS_DT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Manual driving (external client or scripted driver), optionally mapping.
    Teleop,
    /// Teleop plus waypoint recording.
    Record,
    /// Autonomous tracking of a recorded trajectory.
    Track,
    /// Re-runs the commands of an earlier run log.
    Replay,
}

/// Where teleop and record modes get their commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriverConfig {
    /// Commands from an attached client; zero when none is attached.
    External,
    /// Follows the scene's centreline with ground truth, standing in for a
    /// human driver.
    Scripted { speed: f64 },
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig::External
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseSource {
    Truth,
    #[default]
    Odometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingConfig {
    pub enabled: bool,
    /// Integrate every n-th planar scan.
    pub every: u32,
    pub pose: PoseSource,
    pub log_odds: LogOddsParams,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            every: 4,
            // known-pose mapping; odometry smears walls by a cell in turns
            pose: PoseSource::Truth,
            log_odds: LogOddsParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecordingConfig {
    /// Minimum waypoint spacing, m.
    pub threshold: f64,
}

impl Default for RecordingConfig {
    fn default() -> Self {
        Self { threshold: 0.25 }
    }
}

fn default_duration() -> f64 {
    60.0
}
fn default_alpha() -> f64 {
    0.98
}
fn default_control_rate() -> f64 {
    50.0
}
fn default_log_interval() -> u64 {
    10
}

/// One scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Preset id or path to a vehicle TOML file.
    pub vehicle: String,
    pub scene: String,
    pub mode: Mode,
    /// Upper bound on simulated time, s.
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    /// Stop after this many laps of the reference path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laps: Option<f64>,
    #[serde(default)]
    pub sensors: SensorConfig,
    #[serde(default)]
    pub driver: DriverConfig,
    /// Run log whose commands drive replay mode, or teleop/record when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commands: Option<PathBuf>,
    /// Trajectory file tracked in track mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracker: Option<TrackerConfig>,
    /// Pose estimate used by recording and tracking.
    #[serde(default)]
    pub localization: PoseSource,
    #[serde(default)]
    pub mapping: MappingConfig,
    #[serde(default)]
    pub recording: RecordingConfig,
    #[serde(default = "default_alpha")]
    pub odometry_alpha: f64,
    /// Rate of the driver and tracker loops, Hz.
    #[serde(default = "default_control_rate")]
    pub control_rate: f64,
    /// State and sensor digests are logged every this many ticks.
    #[serde(default = "default_log_interval")]
    pub log_interval: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Pace the loop to wall-clock time (interactive teleop).
    #[serde(default)]
    pub realtime: bool,
}

impl ScenarioConfig {
    pub fn new(vehicle: &str, scene: &str, mode: Mode) -> Self {
        Self {
            vehicle: vehicle.into(),
            scene: scene.into(),
            mode,
            duration: default_duration(),
            seed: 0,
            laps: None,
            sensors: SensorConfig::default(),
            driver: DriverConfig::default(),
            commands: None,
            trajectory: None,
            tracker: None,
            localization: PoseSource::Odometry,
            mapping: MappingConfig::default(),
            recording: RecordingConfig::default(),
            odometry_alpha: default_alpha(),
            control_rate: default_control_rate(),
            log_interval: default_log_interval(),
            output: None,
            realtime: false,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(HarnessError::invalid("duration", "must be a finite non-negative time"));
        }
        if !(self.control_rate > 0.0) {
            return Err(HarnessError::invalid("control_rate", "must be positive"));
        }
        if self.log_interval == 0 {
            return Err(HarnessError::invalid("log_interval", "must be at least 1"));
        }
        if let Some(l) = self.laps {
            if !(l > 0.0) {
                return Err(HarnessError::invalid("laps", "must be positive"));
            }
        }
        if self.mapping.every == 0 {
            return Err(HarnessError::invalid("mapping.every", "must be at least 1"));
        }
        if let DriverConfig::Scripted { speed } = self.driver {
            if !(speed > 0.0) {
                return Err(HarnessError::invalid("driver.speed", "must be positive"));
            }
        }
        self.sensors.validate()?;
        if let Some(t) = &self.tracker {
            t.validate()?;
        }
        match self.mode {
            Mode::Track if self.trajectory.is_none() => Err(HarnessError::invalid("trajectory", "track mode needs a trajectory file")),
            Mode::Replay if self.commands.is_none() => Err(HarnessError::invalid("commands", "replay mode needs a run log")),
            _ => Ok(()),
        }
    }

    pub fn vehicle_params(&self) -> Result<VehicleParams, HarnessError> {
        Ok(presets::resolve(&self.vehicle)?)
    }

    /// Hash of the full configuration, as recorded in the log header.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serialises").as_bytes())
    }

    /// Hash of everything that determines the simulated world: vehicle
    /// parameters, scene, seed, sensors and timestep. Replays must match it.
    pub fn world_hash(&self) -> Result<String, HarnessError> {
        let params = self.vehicle_params()?;
        let identity = serde_json::json!({
            "vehicle": params.to_toml_string(),
            "scene": self.scene,
            "seed": self.seed,
            "sensors": self.sensors,
            "dt": PHYSICS_DT,
            "odometry_alpha": self.odometry_alpha,
        });
        Ok(sha256_hex(identity.to_string().as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
