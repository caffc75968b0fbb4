//! Sensor models as pure samplers over vehicle state and scene.
//!
//! Each sampler takes an explicit seed and tick, so the same inputs always
//! give the same reading. Noise is zero unless configured.

mod camera;
mod encoder;
mod feedback;
mod ins;
mod lidar;
pub mod noise;

pub use camera::{
    camera_features, camera_matrices, optical_from_body, project_points, projection_matrix, scene_landmarks, view_matrix,
    CameraFeatures, CameraParams, Frustum, Projection,
};
pub use encoder::{encoder_ticks, wheel_ticks, EncoderParams};
pub use feedback::{actuator_feedback, ActuatorFeedback};
pub use ins::{ins_sample, quaternion_of, rotation_from_euler, rotation_from_quaternion, InsNoise, InsSample, PoseSample};
pub use lidar::{
    lidar2d_scan, lidar2d_scan_with, lidar3d_direction, lidar3d_scan, lidar3d_scan_with, ranges_from_sentinel, ranges_to_sentinel,
    Channels, LidarParams, Mount, Parallelism, PointCloud, CLOUD_HEADER_LEN, CLOUD_MAGIC,
};

use std::collections::VecDeque;

use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::VehicleState;
use crate::environment::Scene;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("invalid sensor parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("decode error: {0}")]
    Decode(String),
}

impl SensorError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SensorError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// World pose of the vehicle body, `^wT_v`.
pub fn vehicle_pose(state: &VehicleState) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::from(state.position),
        UnitQuaternion::from_rotation_matrix(&state.rotation),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    #[serde(flatten)]
    pub params: CameraParams,
    pub mount: Mount,
    pub rate: f64,
}

fn default_ins_rate() -> f64 {
    100.0
}

/// Sensor fit of one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    #[serde(default)]
    pub encoder: EncoderParams,
    #[serde(default)]
    pub ins_noise: InsNoise,
    #[serde(default = "default_ins_rate")]
    pub ins_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lidar: Option<LidarParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lidar3d: Option<LidarParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraConfig>,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderParams::default(),
            ins_noise: InsNoise::default(),
            ins_rate: default_ins_rate(),
            lidar: Some(LidarParams::planar_default()),
            lidar3d: None,
            camera: None,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), SensorError> {
        self.encoder.validate()?;
        if !(self.ins_rate > 0.0) {
            return Err(SensorError::invalid("ins_rate", "must be positive"));
        }
        if let Some(l) = &self.lidar {
            l.validate()?;
        }
        if let Some(l) = &self.lidar3d {
            l.validate()?;
            if l.channels.is_none() {
                return Err(SensorError::invalid("lidar3d.channels", "spatial LIDAR needs a channel lattice"));
            }
        }
        if let Some(c) = &self.camera {
            c.params.validate()?;
            if !(c.rate > 0.0) {
                return Err(SensorError::invalid("camera.rate", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Serialises ranges with "no return" as `null`.
pub mod ranges_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref()
            .map(|r| r.iter().map(|x| x.is_finite().then_some(*x)).collect::<Vec<_>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        let raw: Option<Vec<Option<f64>>> = Option::deserialize(d)?;
        Ok(raw.map(|r| r.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect()))
    }
}

/// Everything the sensors produced on one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub tick: u64,
    pub time: f64,
    pub feedback: ActuatorFeedback,
    pub encoder_ticks: [i64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ins: Option<InsSample>,
    #[serde(default, with = "ranges_serde", skip_serializing_if = "Option::is_none")]
    pub scan: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud: Option<PointCloud>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraFeatures>,
}

/// Period in ticks of a sensor running at `rate` Hz.
pub fn period_ticks(rate: f64, dt: f64) -> u64 {
    ((1.0 / (rate * dt)).round() as u64).max(1)
}

/// Stateful front end that keeps the INS pose history and schedules each
/// sensor at its own rate. Readings depend only on the observed states,
/// the scene and the seed.
#[derive(Debug, Clone)]
pub struct SensorSuite {
    pub config: SensorConfig,
    pub seed: u64,
    dt: f64,
    history: VecDeque<PoseSample>,
}

impl SensorSuite {
    pub fn new(config: SensorConfig, seed: u64, dt: f64) -> Result<Self, SensorError> {
        config.validate()?;
        Ok(Self {
            config,
            seed,
            dt,
            history: VecDeque::with_capacity(3),
        })
    }

    fn due(&self, tick: u64, rate: f64) -> bool {
        tick % period_ticks(rate, self.dt) == 0
    }

    /// Records the state and returns the readings due on its tick.
    pub fn sample(&mut self, state: &VehicleState, scene: &Scene) -> SensorFrame {
        if self.history.len() == 3 {
            self.history.pop_front();
        }
        self.history.push_back(PoseSample::of(state));
        let tick = state.tick;
        let body = vehicle_pose(state);
        let cfg = &self.config;
        let ins = if self.due(tick, cfg.ins_rate) {
            let h: Vec<PoseSample> = self.history.iter().copied().collect();
            ins_sample(&h, &cfg.ins_noise, self.seed, tick)
        } else {
            None
        };
        let scan = cfg
            .lidar
            .as_ref()
            .filter(|l| self.due(tick, l.rate))
            .map(|l| lidar2d_scan(scene, &(body * l.mount.isometry()), l, self.seed, tick));
        let cloud = cfg
            .lidar3d
            .as_ref()
            .filter(|l| self.due(tick, l.rate))
            .map(|l| lidar3d_scan(scene, &(body * l.mount.isometry()), l, self.seed, tick));
        let camera = cfg
            .camera
            .as_ref()
            .filter(|c| self.due(tick, c.rate))
            .map(|c| camera_features(scene, &optical_from_body(&(body * c.mount.isometry())), &c.params));
        SensorFrame {
            tick,
            time: state.time,
            feedback: actuator_feedback(state),
            encoder_ticks: wheel_ticks(state, &cfg.encoder),
            ins,
            scan,
            cloud,
            camera,
        }
    }
}
