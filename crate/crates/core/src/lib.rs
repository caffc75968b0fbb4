//! Deterministic, headless vehicle digital-twin simulation.
//!
//! The crate is split along the same lines as the simulated system:
//!
//! * [`dynamics`] – sprung-mass vehicle model (powertrain, brakes, steering,
//!   suspension, tires, aerodynamics) advanced by a fixed-timestep integrator.
//! * [`sensors`] – actuator feedback, incremental encoders, INS, planar and
//!   spatial LIDARs, and pinhole camera projection.
//! * [`environment`] – occupancy-grid / heightmap / box worlds with ray and
//!   ground queries, plus map file I/O.
//! * [`navigation`] – odometry fusion, log-odds mapping, waypoint recording,
//!   pure-pursuit and PID tracking.
//! * [`harness`] – scenario configuration, deterministic episode runner, run
//!   logs, replay and scoring.

pub mod dynamics;
pub mod environment;
pub mod harness;
pub mod math;
pub mod navigation;
pub mod sensors;

pub use dynamics::{ActuatorCommand, ScaleClass, VehicleParams, VehicleState};
pub use environment::Scene;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

/// Physics timestep used by the simulator, seconds.
pub const PHYSICS_DT: f64 = 1e-3;
