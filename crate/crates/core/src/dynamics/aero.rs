use nalgebra::Vector3;

use super::params::AeroParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroForces {
    /// Body-frame drag force, N.
    pub drag: Vector3<f64>,
    /// Body-frame drag torque, N·m.
    pub torque: Vector3<f64>,
    /// Downforce magnitude acting along −z at the COM, N.
    pub downforce: f64,
    /// Scalar drag magnitude selected by the operating case, N.
    pub drag_magnitude: f64,
}

/// Aerodynamic loads.
///
/// Constant-coefficient bodies get `−F_d·v` and `−T_d·ω`. Cased bodies pick
/// the first matching case of: top speed, zero output torque, reversing,
/// otherwise. The cased magnitude acts against the planar velocity and fades
/// in over the standstill band so a parked car is not pushed around.
pub fn aero_forces(
    params: &AeroParams,
    velocity: &Vector3<f64>,
    angular_velocity: &Vector3<f64>,
    drive_torque_out: f64,
    gear: i32,
    avg_wheel_rpm: f64,
) -> AeroForces {
    match *params {
        AeroParams::Constant {
            linear_drag,
            angular_drag,
        } => AeroForces {
            drag: -velocity * linear_drag,
            torque: -angular_velocity * angular_drag,
            downforce: 0.0,
            drag_magnitude: linear_drag * velocity.norm(),
        },
        AeroParams::Cased {
            drag_max,
            drag_idle,
            drag_reverse,
            v_max,
            v_reverse,
            downforce_coeff,
        } => {
            let planar = Vector3::new(velocity.x, velocity.y, 0.0);
            let v = planar.norm();
            let magnitude = if v >= v_max {
                drag_max
            } else if drive_torque_out == 0.0 {
                drag_idle
            } else if v >= v_reverse && gear == -1 && avg_wheel_rpm < 0.0 {
                drag_reverse
            } else {
                drag_idle
            };
            let fade = (v / super::powertrain::STANDSTILL_SPEED).min(1.0);
            let drag = if v > 0.0 {
                -planar / v * magnitude * fade
            } else {
                Vector3::zeros()
            };
            AeroForces {
                drag,
                torque: Vector3::zeros(),
                downforce: downforce_coeff * v,
                drag_magnitude: magnitude,
            }
        }
    }
}
