//! Vehicle model and fixed-timestep integrator.
//!
//! Every sub-model is a pure function of explicit inputs; [`step_vehicle`]
//! wires them together into one deterministic tick.

mod aero;
mod body;
mod brake;
mod params;
mod powertrain;
pub mod presets;
mod state;
mod steering;
mod step;
mod suspension;
mod tire;

pub use aero::{aero_forces, AeroForces};
pub use body::{derive_body, MassProperties, SprungMass};
pub use brake::{brake_torque, disc_brake_torque};
pub use params::{
    AeroParams, BodyParams, BodySpec, BrakeParams, CornerSuspension, CurveAnchors, DriveConfig,
    EngineParams, MotorParams, PowertrainParams, ScaleClass, ShiftPoint, SteeringParams,
    SuspensionParams, SuspensionRate, SuspensionSpec, TireParams, TireSpec, VehicleParams,
    VehicleSpec, WheelParams,
};
pub use powertrain::{
    electric_drive_torque, engine_rpm_update, engine_target_rpm, engine_total_torque,
    shift_transmission, speed_to_engine_rpm, split_drive_torque, throttle_smoothing,
    IDLE_THROTTLE, RPM_TIME_CONSTANT, SHIFT_DWELL, SHIFT_HYSTERESIS, STANDSTILL_SPEED,
};
pub use state::{
    ActuatorCommand, GearRequest, PowertrainState, SuspensionCorner, SuspensionState,
    VehicleState,
};
pub use steering::{ackermann_angles, steering_step};
pub use step::{
    kinetic_energy, step_vehicle, step_vehicle_with_diagnostics, StepDiagnostics, WHEEL_LATCH_SPEED,
};
pub use suspension::{antiroll_forces, antiroll_state_forces, suspension_forces, SuspensionForce};
pub use tire::{tire_forces, tire_slip, FrictionSpline, SLIP_EPS};

use thiserror::Error;

/// Wheel ordering used throughout: front-left, front-right, rear-left, rear-right.
pub const FL: usize = 0;
pub const FR: usize = 1;
pub const RL: usize = 2;
pub const RR: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("invalid steering geometry: {0}")]
    InvalidGeometry(String),
    #[error("simulation diverged: `{field}` is not finite")]
    Diverged { field: String },
    #[error("failed to parse vehicle file: {0}")]
    Parse(String),
    #[error("unknown vehicle preset `{0}`")]
    UnknownPreset(String),
}

impl DynamicsError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        DynamicsError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
