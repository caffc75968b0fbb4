use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::NavigationError;
use crate::math::{wrap_angle, Pose2};
use crate::sensors::{EncoderParams, InsSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometryConfig {
    /// Weight of the integrated yaw rate against the absolute IMU yaw.
    pub alpha: f64,
    pub wheel_radius: f64,
    pub encoder: EncoderParams,
    /// Wheels (FL, FR, RL, RR) whose ticks are averaged for speed.
    pub wheels: [bool; 4],
    /// Drift indicator growth per metre travelled.
    pub drift_per_metre: f64,
}

impl OdometryConfig {
    pub fn new(wheel_radius: f64, encoder: EncoderParams, wheels: [bool; 4]) -> Self {
        Self {
            alpha: 0.98,
            wheel_radius,
            encoder,
            wheels,
            drift_per_metre: 0.01,
        }
    }

    pub fn validate(&self) -> Result<(), NavigationError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(NavigationError::invalid("odometry.alpha", "must lie in [0, 1]"));
        }
        if !(self.wheel_radius > 0.0) {
            return Err(NavigationError::invalid("odometry.wheel_radius", "must be positive"));
        }
        if !self.wheels.iter().any(|w| *w) {
            return Err(NavigationError::invalid("odometry.wheels", "select at least one wheel"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometryEstimate {
    pub pose: Pose2,
    /// Grows with distance travelled; a proxy for accumulated uncertainty.
    pub drift: f64,
    pub speed: f64,
    pub timestamp: f64,
    pub ticks: [i64; 4],
}

impl OdometryEstimate {
    pub fn anchored(pose: Pose2, ticks: [i64; 4], timestamp: f64) -> Self {
        Self {
            pose: Pose2::new(pose.x, pose.y, wrap_angle(pose.yaw)),
            drift: 0.0,
            speed: 0.0,
            timestamp,
            ticks,
        }
    }
}

/// Dead-reckons one step from encoder tick deltas and the IMU.
///
/// Heading is a complementary blend `α·(ψ + ω_z·dt) + (1 − α)·ψ_imu`;
/// position advances along the mid-step heading.
pub fn fuse_odometry(ticks: [i64; 4], ins: &InsSample, prev: &OdometryEstimate, dt: f64, cfg: &OdometryConfig) -> OdometryEstimate {
    let per_tick = TAU * cfg.wheel_radius / cfg.encoder.ticks_per_rev();
    let (mut sum, mut n) = (0.0, 0.0);
    for i in 0..4 {
        if cfg.wheels[i] {
            sum += (ticks[i] - prev.ticks[i]) as f64;
            n += 1.0;
        }
    }
    let ds = sum / n * per_tick;
    let predicted = prev.pose.yaw + ins.angular_velocity[2] * dt;
    let yaw = wrap_angle(predicted + (1.0 - cfg.alpha) * wrap_angle(ins.euler[2] - predicted));
    let mid = prev.pose.yaw + wrap_angle(yaw - prev.pose.yaw) / 2.0;
    OdometryEstimate {
        pose: Pose2::new(prev.pose.x + ds * mid.cos(), prev.pose.y + ds * mid.sin(), yaw),
        drift: prev.drift + cfg.drift_per_metre * ds.abs(),
        speed: if dt > 0.0 { ds / dt } else { 0.0 },
        timestamp: ins.timestamp,
        ticks,
    }
}
