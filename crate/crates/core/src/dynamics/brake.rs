use super::params::{BrakeParams, VehicleParams};
use super::powertrain::IDLE_THROTTLE;
use super::state::ActuatorCommand;

/// Brake torque magnitude per wheel (FL, FR, RL, RR), N·m. The integrator
/// applies it against the wheel's rotation.
///
/// Small and mid-scale drives hold `τ_idle` when the throttle is idle or the
/// brake is pressed. Full-scale disc brakes follow `M_i·v²/(2·D_brake)·R_b`,
/// scaled by the pedal for the combi-brake and applied to the rear wheels
/// only for the handbrake.
pub fn brake_torque(command: &ActuatorCommand, speed: f64, params: &VehicleParams) -> [f64; 4] {
    match params.brakes {
        BrakeParams::IdleHold { hold_torque } => {
            let idle = command.throttle.abs() < IDLE_THROTTLE;
            let level = if idle || command.handbrake {
                1.0
            } else {
                command.brake
            };
            [hold_torque * level; 4]
        }
        BrakeParams::Disc {
            disk_radius,
            braking_distance_60mph,
        } => {
            let mut torques = [0.0; 4];
            for (i, t) in torques.iter_mut().enumerate() {
                let m = params.suspension.corners[i].sprung_mass;
                let full = m * speed * speed / (2.0 * braking_distance_60mph) * disk_radius;
                let rear = i >= 2;
                let pedal = command.brake.max(if command.handbrake && rear { 1.0 } else { 0.0 });
                *t = full * pedal;
            }
            torques
        }
    }
}

/// Disc-brake torque for one corner mass, exposed for direct evaluation.
pub fn disc_brake_torque(corner_mass: f64, speed: f64, disk_radius: f64, braking_distance: f64) -> f64 {
    corner_mass * speed * speed / (2.0 * braking_distance) * disk_radius
}
