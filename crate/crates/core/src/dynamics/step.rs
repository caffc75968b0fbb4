use nalgebra::{Rotation3, SMatrix, SVector, Vector2, Vector3};

use super::aero::aero_forces;
use super::brake::brake_torque;
use super::params::{BrakeParams, MotorParams, VehicleParams};
use super::powertrain::{
    electric_drive_torque, engine_rpm_update, engine_total_torque, shift_transmission,
    split_drive_torque, STANDSTILL_SPEED,
};
use super::state::{ActuatorCommand, SuspensionCorner, VehicleState};
use super::steering::{ackermann_angles, steering_step};
use super::suspension::antiroll_forces;
use super::tire::{tire_forces, tire_slip};
use super::DynamicsError;
use crate::environment::{GroundSample, Scene};
use crate::GRAVITY;

/// Below this wheel speed a braked wheel is latched at zero, rad/s.
pub const WHEEL_LATCH_SPEED: f64 = 0.05;
/// Width of the smooth sign used for brake torque, rad/s.
const BRAKE_SMOOTHING: f64 = 0.01;

const N: usize = 10;
type Vel = SVector<f64, N>;

/// Per-tick quantities that are not part of the integrated state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    /// Tire normal loads, N.
    pub normal_load: [f64; 4],
    /// (Sx, Sy) per wheel.
    pub slip: [(f64, f64); 4],
    /// Tire force in each wheel's frame (longitudinal, lateral), N.
    pub tire_force: [Vector2<f64>; 4],
    pub drive_torque: [f64; 4],
    pub brake_torque: [f64; 4],
    /// Wheels held at zero speed by a brake or park.
    pub locked: [bool; 4],
    pub drag: Vector3<f64>,
}

/// Everything held fixed while the velocities are solved.
struct Frozen<'a> {
    params: &'a VehicleParams,
    rotation: Rotation3<f64>,
    wheel_angle: [f64; 4],
    ground: [GroundSample; 4],
    /// Geometric compression beyond the static sag, m.
    compression: [f64; 4],
    grounded: [bool; 4],
    antiroll: [f64; 4],
    /// Engine torque per wheel, fixed over the tick. None for electric drive.
    engine_torque: Option<[f64; 4]>,
    throttle: f64,
    drop_factor: [f64; 4],
    brake: [f64; 4],
    locked: [bool; 4],
    gear: i32,
    avg_wheel_rpm: f64,
}

struct Eval {
    accel: Vel,
    diag: StepDiagnostics,
}

/// Advances the vehicle by one fixed tick.
///
/// Order: steering slew, gear logic, drive torque and differential split,
/// brake torque, then a linearly implicit solve of body and wheel velocities
/// under tire, suspension, anti-roll, aero and gravity loads, followed by the
/// pose update and rotation renormalization.
pub fn step_vehicle(
    params: &VehicleParams,
    state: &VehicleState,
    command: &ActuatorCommand,
    scene: &Scene,
    dt: f64,
) -> Result<VehicleState, DynamicsError> {
    step_vehicle_with_diagnostics(params, state, command, scene, dt).map(|(s, _)| s)
}

pub fn step_vehicle_with_diagnostics(
    params: &VehicleParams,
    state: &VehicleState,
    command: &ActuatorCommand,
    scene: &Scene,
    dt: f64,
) -> Result<(VehicleState, StepDiagnostics), DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::invalid("dt", format!("must be positive, got {dt}")));
    }
    if let Some(field) = state.first_non_finite() {
        return Err(DynamicsError::Diverged { field: field.into() });
    }
    let cmd = command.clamped();
    let speed = state.velocity.x;
    let standstill = speed.abs() < STANDSTILL_SPEED;
    let driven = params.powertrain.drive.driven();

    let delta = steering_step(state.steering, cmd.steering, speed, dt, &params.steering);
    let (dl, dr) = ackermann_angles(delta, params.body.wheelbase, params.body.track)?;
    let wheel_angle = [dl, dr, 0.0, 0.0];

    // Gear logic and drive torque.
    let mut powertrain = state.powertrain;
    let (throttle, pedal, engine_torque) = match &params.powertrain.motor {
        MotorParams::Engine(engine) => {
            // A negative throttle on an automatic acts as the brake pedal.
            let throttle = cmd.throttle.max(0.0);
            let pedal = cmd.brake.max(-cmd.throttle);
            let shift_cmd = ActuatorCommand { throttle, ..cmd };
            powertrain = shift_transmission(&powertrain, speed, &shift_cmd, engine, params.tire_radius(), dt);
            powertrain.engine_rpm = engine_rpm_update(
                powertrain.engine_rpm,
                powertrain.avg_wheel_rpm,
                engine.ratio(powertrain.gear),
                engine,
                dt,
            );
            let total = engine_total_torque(throttle, &powertrain, engine);
            let split = split_drive_torque(total, delta, params.powertrain.drive, params.powertrain.torque_drop);
            (throttle, pedal, Some(split))
        }
        MotorParams::Electric { .. } => {
            powertrain.handbrake_engaged = cmd.handbrake;
            powertrain.park = cmd.handbrake && standstill;
            powertrain.gear = if cmd.throttle > 0.0 {
                1
            } else if cmd.throttle < 0.0 {
                -1
            } else {
                0
            };
            (cmd.throttle, cmd.brake, None)
        }
    };
    let unit = params.powertrain.drive.driven_count() as f64;
    let drop_factor = split_drive_torque(unit, delta, params.powertrain.drive, params.powertrain.torque_drop);

    let brake_cmd = ActuatorCommand {
        throttle,
        brake: pedal,
        ..cmd
    };
    let brake = brake_torque(&brake_cmd, state.planar_speed(), params);

    // Ground contact geometry at the current pose.
    let rotation = state.rotation;
    let up = rotation * Vector3::z();
    let mut ground = [GroundSample::flat(); 4];
    let mut compression = [0.0; 4];
    let mut grounded = [false; 4];
    for i in 0..4 {
        let (g, s) = contact(params, state, i, scene);
        ground[i] = g;
        compression[i] = s;
        grounded[i] = params.suspension.corners[i].static_sag + s > 0.0 && up.z > 0.0;
    }
    let ext = |i: usize| -compression[i];
    let (fl, fr) = antiroll_forces(ext(0), ext(1), grounded[0] && grounded[1], params.suspension.antiroll_stiffness);
    let (rl, rr) = antiroll_forces(ext(2), ext(3), grounded[2] && grounded[3], params.suspension.antiroll_stiffness);

    let mut frozen = Frozen {
        params,
        rotation,
        wheel_angle,
        ground,
        compression,
        grounded,
        antiroll: [fl, fr, rl, rr],
        engine_torque,
        throttle,
        drop_factor,
        brake,
        locked: [false; 4],
        gear: powertrain.gear,
        avg_wheel_rpm: powertrain.avg_wheel_rpm,
    };

    let u0 = pack(state);

    // Stick test: a slow braked wheel stays latched while the brake can
    // absorb the torque acting on it.
    let probe = evaluate(&frozen, &u0);
    let r_w = params.wheels.radius;
    let parked = powertrain.park;
    for i in 0..4 {
        let hold_active = match params.brakes {
            BrakeParams::Disc { .. } => pedal > 0.0 || (cmd.handbrake && i >= 2),
            BrakeParams::IdleHold { .. } => brake[i] > 0.0,
        };
        let park_lock = parked && driven[i];
        if state.wheel_speed[i].abs() >= WHEEL_LATCH_SPEED {
            continue;
        }
        let load = probe.diag.drive_torque[i] - probe.diag.tire_force[i].x * r_w;
        let capacity = match params.brakes {
            BrakeParams::Disc { .. } => f64::INFINITY,
            BrakeParams::IdleHold { .. } => brake[i],
        };
        if park_lock || (hold_active && load.abs() <= capacity) {
            frozen.locked[i] = true;
        }
    }

    let eval0 = evaluate(&frozen, &u0);
    let jac = jacobian(&frozen, &u0, &eval0.accel);
    let lhs = SMatrix::<f64, N, N>::identity() - jac * dt;
    let rhs = eval0.accel * dt;
    let du = lhs
        .lu()
        .solve(&rhs)
        .ok_or(DynamicsError::Diverged { field: "velocity_solve".into() })?;
    let mut u1 = u0 + du;
    for i in 0..4 {
        let braked = brake[i] > 0.0 || frozen.locked[i];
        if frozen.locked[i] || (braked && u1[6 + i].abs() < WHEEL_LATCH_SPEED && u1[6 + i] * u0[6 + i] <= 0.0) {
            u1[6 + i] = 0.0;
        }
    }

    // Pose update from the new velocities.
    let mut next = state.clone();
    let velocity = Vector3::new(u1[0], u1[1], u1[2]);
    let angular = Vector3::new(u1[3], u1[4], u1[5]);
    next.position += rotation * velocity * dt;
    let mut r = rotation * Rotation3::new(angular * dt);
    r.renormalize();
    next.rotation = r;
    next.velocity = velocity;
    next.angular_velocity = angular;
    for i in 0..4 {
        next.wheel_speed[i] = u1[6 + i];
        next.wheel_angle[i] += u1[6 + i] * dt;
    }
    next.steering = delta;
    next.throttle = throttle;
    next.brake = pedal;
    next.tick = state.tick + 1;
    next.time = next.tick as f64 * dt;

    let driven_speeds: Vec<f64> = (0..4).filter(|&i| driven[i]).map(|i| next.wheel_speed[i]).collect();
    let avg = driven_speeds.iter().sum::<f64>() / driven_speeds.len() as f64;
    powertrain.avg_wheel_rpm = avg * 60.0 / (2.0 * std::f64::consts::PI);
    next.powertrain = powertrain;

    let final_eval = evaluate(&frozen, &u1);
    update_suspension(params, &mut next, scene, &final_eval.diag);

    if let Some(field) = next.first_non_finite() {
        return Err(DynamicsError::Diverged { field: field.into() });
    }
    let mut diag = final_eval.diag;
    diag.locked = frozen.locked;
    Ok((next, diag))
}

fn pack(state: &VehicleState) -> Vel {
    let mut u = Vel::zeros();
    u.fixed_rows_mut::<3>(0).copy_from(&state.velocity);
    u.fixed_rows_mut::<3>(3).copy_from(&state.angular_velocity);
    for i in 0..4 {
        u[6 + i] = state.wheel_speed[i];
    }
    u
}

/// Suspension attachment point relative to the COM, body frame.
fn attach_point(params: &VehicleParams, i: usize) -> Vector3<f64> {
    let p = params.body.wheel_positions[i];
    Vector3::new(p.x, p.y, params.wheels.mount_height() - params.body.com_height)
}

/// Tire force application point relative to the COM, body frame.
fn force_point(params: &VehicleParams, i: usize) -> Vector3<f64> {
    let p = params.body.wheel_positions[i];
    Vector3::new(p.x, p.y, -params.force_application_depth())
}

/// Ground sample under a wheel and the compression beyond static sag.
fn contact(params: &VehicleParams, state: &VehicleState, i: usize, scene: &Scene) -> (GroundSample, f64) {
    let p = params.body.wheel_positions[i];
    // the body origin sits on the ground below the COM
    let mount = state.position + state.rotation * Vector3::new(p.x, p.y, params.wheels.mount_height());
    let g = scene.ground_query(mount.x, mount.y);
    let axis_z = (state.rotation * Vector3::z()).z.max(1e-6);
    let s = (g.height + params.wheels.radius - mount.z) / axis_z;
    (g, s)
}

fn evaluate(f: &Frozen, u: &Vel) -> Eval {
    let params = f.params;
    let v = Vector3::new(u[0], u[1], u[2]);
    let w = Vector3::new(u[3], u[4], u[5]);
    let mass = params.total_mass();
    let inertia = params.body.mass.inertia;
    let r_w = params.wheels.radius;
    let i_w = params.wheels.inertia();
    let axis_z = (f.rotation * Vector3::z()).z.max(1e-6);

    let mut force = f.rotation.inverse() * Vector3::new(0.0, 0.0, -mass * GRAVITY);
    let mut torque = Vector3::zeros();
    let mut accel = Vel::zeros();
    let mut diag = StepDiagnostics {
        brake_torque: f.brake,
        ..Default::default()
    };

    let mut drive_out = 0.0;
    for i in 0..4 {
        let wheel_speed = if f.locked[i] { 0.0 } else { u[6 + i] };
        let drive = match (&f.engine_torque, &params.powertrain.motor) {
            (Some(t), _) => t[i],
            (
                None,
                MotorParams::Electric {
                    max_torque,
                    torque_segments,
                },
            ) => {
                if f.drop_factor[i] > 0.0 {
                    electric_drive_torque(f.throttle, wheel_speed, *max_torque, torque_segments) * f.drop_factor[i]
                } else {
                    0.0
                }
            }
            _ => 0.0,
        };
        drive_out += drive.abs();
        diag.drive_torque[i] = drive;

        let corner = &params.suspension.corners[i];
        let normal = if f.grounded[i] {
            let att = f.rotation * (v + w.cross(&attach_point(params, i)));
            let n = f.ground[i].normal;
            // ground rises under a moving contact at the slope rate
            let ground_rate = if n.z > 0.0 { -(n.x * att.x + n.y * att.y) / n.z } else { 0.0 };
            let rate = (ground_rate - att.z) / axis_z;
            let load = corner.stiffness * (corner.static_sag + f.compression[i]) + corner.damping * rate + f.antiroll[i];
            load.max(0.0)
        } else {
            0.0
        };
        diag.normal_load[i] = normal;

        let r = force_point(params, i);
        let vc = v + w.cross(&r);
        let (sd, cd) = f.wheel_angle[i].sin_cos();
        let vx = cd * vc.x + sd * vc.y;
        let vy = -sd * vc.x + cd * vc.y;
        let (sx, sy) = tire_slip(r_w, wheel_speed, vx, vy);
        let (mut fx, mut fy) = tire_forces(sx, sy, normal, i, &params.tires);
        let mu = f.ground[i].friction;
        fx *= mu;
        fy *= -mu;
        diag.slip[i] = (sx, sy);
        diag.tire_force[i] = Vector2::new(fx, fy);

        // contact forces act along the ground normal and in its tangent plane,
        // not along the pitched body axes
        let n_b = f.rotation.inverse() * f.ground[i].normal;
        let heading = Vector3::new(cd, sd, 0.0);
        let along = (heading - n_b * heading.dot(&n_b)).normalize();
        let side = n_b.cross(&along);
        let fb = along * fx + side * fy + n_b * normal;
        force += fb;
        torque += r.cross(&fb);

        if !f.locked[i] {
            let brake = f.brake[i] * (wheel_speed / BRAKE_SMOOTHING).tanh();
            accel[6 + i] = (drive - brake - fx * r_w) / i_w;
        }
    }

    let aero = aero_forces(&params.aero, &v, &w, drive_out, f.gear, f.avg_wheel_rpm);
    force += aero.drag + Vector3::new(0.0, 0.0, -aero.downforce);
    torque += aero.torque;
    diag.drag = aero.drag;

    let lin = force / mass - w.cross(&v);
    let iw = inertia.component_mul(&w);
    let ang = (torque - w.cross(&iw)).component_div(&inertia.map(|x| x.max(1e-9)));
    accel.fixed_rows_mut::<3>(0).copy_from(&lin);
    accel.fixed_rows_mut::<3>(3).copy_from(&ang);
    Eval { accel, diag }
}

fn jacobian(f: &Frozen, u: &Vel, f0: &Vel) -> SMatrix<f64, N, N> {
    let mut jac = SMatrix::<f64, N, N>::zeros();
    for k in 0..N {
        if k >= 6 && f.locked[k - 6] {
            continue;
        }
        let h = 1e-6 * (1.0 + u[k].abs());
        let mut up = *u;
        up[k] += h;
        let col = (evaluate(f, &up).accel - f0) / h;
        jac.set_column(k, &col);
    }
    jac
}

fn update_suspension(params: &VehicleParams, next: &mut VehicleState, scene: &Scene, diag: &StepDiagnostics) {
    for i in 0..4 {
        let (g, s) = contact(params, next, i, scene);
        let corner = &params.suspension.corners[i];
        let p = params.body.wheel_positions[i];
        let mount = next.position + next.rotation * Vector3::new(p.x, p.y, params.wheels.mount_height());
        let att = next.rotation * (next.velocity + next.angular_velocity.cross(&attach_point(params, i)));
        let grounded = corner.static_sag + s > 0.0;
        let sprung = mount.z - params.wheels.radius;
        // the unsprung mass rides on the ground while in contact and hangs
        // at full droop otherwise
        let (unsprung, unsprung_rate) = if grounded {
            let n = g.normal;
            (g.height, -(n.x * att.x + n.y * att.y) / n.z.max(1e-6))
        } else {
            (sprung - corner.static_sag, att.z)
        };
        next.suspension.corners[i] = SuspensionCorner {
            sprung,
            sprung_rate: att.z,
            unsprung,
            unsprung_rate,
            travel_ratio: corner.sprung_mass * GRAVITY / (params.suspension.equilibrium * corner.stiffness),
            contact_height: g.height,
            load: diag.normal_load[i],
            grounded,
        };
    }
}

/// Total kinetic energy of body translation, body rotation and wheel spin, J.
pub fn kinetic_energy(params: &VehicleParams, state: &VehicleState) -> f64 {
    let m = params.total_mass();
    let i = params.body.mass.inertia;
    let w = state.angular_velocity;
    let wheels: f64 = state.wheel_speed.iter().map(|s| 0.5 * params.wheels.inertia() * s * s).sum();
    0.5 * m * state.velocity.norm_squared() + 0.5 * (i.x * w.x * w.x + i.y * w.y * w.y + i.z * w.z * w.z) + wheels
}
