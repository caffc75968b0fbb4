use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::params::{MotorParams, VehicleParams};
use crate::math::Pose2;

/// Transmission selector request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GearRequest {
    Drive,
    Reverse,
    Neutral,
    Park,
}

/// Driver or controller input for one tick. Out-of-range values are clamped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorCommand {
    /// [−1, 1]
    pub throttle: f64,
    /// [−1, 1], scaled by the steering limit.
    pub steering: f64,
    /// [0, 1]
    pub brake: f64,
    #[serde(default)]
    pub handbrake: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gear: Option<GearRequest>,
}

impl ActuatorCommand {
    pub fn new(throttle: f64, steering: f64) -> Self {
        Self {
            throttle,
            steering,
            ..Default::default()
        }
    }

    pub fn clamped(&self) -> Self {
        let fix = |v: f64, lo: f64, hi: f64| if v.is_nan() { 0.0 } else { v.clamp(lo, hi) };
        Self {
            throttle: fix(self.throttle, -1.0, 1.0),
            steering: fix(self.steering, -1.0, 1.0),
            brake: fix(self.brake, 0.0, 1.0),
            handbrake: self.handbrake,
            gear: self.gear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowertrainState {
    pub engine_rpm: f64,
    /// −1 reverse, 0 neutral, ≥1 forward.
    pub gear: i32,
    pub park: bool,
    /// Average driven-wheel RPM, signed.
    pub avg_wheel_rpm: f64,
    pub handbrake_engaged: bool,
    /// Direction selected by the driver.
    pub selector: GearRequest,
    /// Selector request waiting for standstill.
    pub pending: Option<GearRequest>,
    /// Remaining clutch-open time of an in-progress shift, s.
    pub shift_remaining: f64,
    pub shift_target: i32,
}

impl PowertrainState {
    pub fn idle(idle_rpm: f64) -> Self {
        Self {
            engine_rpm: idle_rpm,
            gear: 0,
            park: false,
            avg_wheel_rpm: 0.0,
            handbrake_engaged: false,
            selector: GearRequest::Drive,
            pending: None,
            shift_remaining: 0.0,
            shift_target: 0,
        }
    }

    pub fn shifting(&self) -> bool {
        self.shift_remaining > 0.0
    }
}

/// Per-corner suspension state. Displacements are measured along the
/// suspension axis from the design position.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SuspensionCorner {
    /// Sprung displacement Z, m.
    pub sprung: f64,
    pub sprung_rate: f64,
    /// Unsprung (wheel) displacement z, m.
    pub unsprung: f64,
    pub unsprung_rate: f64,
    /// Travel ratio Zs (load-dependent compression over equilibrium travel).
    pub travel_ratio: f64,
    /// World height of the tire contact point, m.
    pub contact_height: f64,
    /// Tire normal load, N.
    pub load: f64,
    pub grounded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SuspensionState {
    pub corners: [SuspensionCorner; 4],
}

/// The single integrated state advanced each tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub tick: u64,
    pub time: f64,
    /// World position of the body-frame origin (COM projected to the ground).
    pub position: Vector3<f64>,
    /// World-from-body rotation.
    pub rotation: Rotation3<f64>,
    /// Body-frame linear velocity (x forward, y left, z up).
    pub velocity: Vector3<f64>,
    /// Body-frame angular velocity.
    pub angular_velocity: Vector3<f64>,
    pub wheel_speed: [f64; 4],
    /// Cumulative wheel rotation, rad.
    pub wheel_angle: [f64; 4],
    /// Road-wheel steering angle δ, rad.
    pub steering: f64,
    /// Throttle actually applied this tick.
    pub throttle: f64,
    /// Brake input actually applied this tick.
    pub brake: f64,
    pub powertrain: PowertrainState,
    pub suspension: SuspensionState,
}

impl VehicleState {
    /// Vehicle at rest at design ride height on flat ground at `pose`.
    pub fn at_rest(params: &VehicleParams, pose: Pose2, ground_height: f64) -> Self {
        let idle = match &params.powertrain.motor {
            MotorParams::Engine(e) => e.idle_rpm,
            MotorParams::Electric { .. } => 0.0,
        };
        let mut suspension = SuspensionState::default();
        for (i, c) in suspension.corners.iter_mut().enumerate() {
            let corner = &params.suspension.corners[i];
            c.grounded = true;
            c.load = corner.stiffness * corner.static_sag;
            c.contact_height = ground_height;
            c.travel_ratio = corner.static_sag / params.suspension.equilibrium;
        }
        Self {
            tick: 0,
            time: 0.0,
            position: Vector3::new(pose.x, pose.y, ground_height),
            rotation: Rotation3::from_axis_angle(&Vector3::z_axis(), pose.yaw),
            velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            wheel_speed: [0.0; 4],
            wheel_angle: [0.0; 4],
            steering: 0.0,
            throttle: 0.0,
            brake: 0.0,
            powertrain: PowertrainState::idle(idle),
            suspension,
        }
    }

    pub fn yaw(&self) -> f64 {
        let m = self.rotation.matrix();
        m[(1, 0)].atan2(m[(0, 0)])
    }

    pub fn pose2(&self) -> Pose2 {
        Pose2::new(self.position.x, self.position.y, self.yaw())
    }

    /// Signed longitudinal speed.
    pub fn speed(&self) -> f64 {
        self.velocity.x
    }

    /// Horizontal speed magnitude.
    pub fn planar_speed(&self) -> f64 {
        self.velocity.x.hypot(self.velocity.y)
    }

    /// Linear momentum, body frame.
    pub fn momentum(&self, params: &VehicleParams) -> Vector3<f64> {
        self.velocity * params.total_mass()
    }

    /// Name of the first non-finite field, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        let finite3 = |v: &Vector3<f64>| v.iter().all(|x| x.is_finite());
        if !finite3(&self.position) {
            return Some("position");
        }
        if !self.rotation.matrix().iter().all(|x| x.is_finite()) {
            return Some("rotation");
        }
        if !finite3(&self.velocity) {
            return Some("velocity");
        }
        if !finite3(&self.angular_velocity) {
            return Some("angular_velocity");
        }
        if !self.wheel_speed.iter().all(|x| x.is_finite()) {
            return Some("wheel_speed");
        }
        if !self.wheel_angle.iter().all(|x| x.is_finite()) {
            return Some("wheel_angle");
        }
        if !self.steering.is_finite() {
            return Some("steering");
        }
        if !self.powertrain.engine_rpm.is_finite() {
            return Some("engine_rpm");
        }
        for c in &self.suspension.corners {
            if !(c.sprung.is_finite() && c.unsprung.is_finite() && c.load.is_finite()) {
                return Some("suspension");
            }
        }
        None
    }
}
