use std::f64::consts::PI;

use super::params::{DriveConfig, EngineParams};
use super::state::{ActuatorCommand, GearRequest, PowertrainState};
use crate::math::interp_linear;

/// Below this speed the vehicle counts as standing still, m/s.
pub const STANDSTILL_SPEED: f64 = 0.05;
/// Clutch-open time of a gear change, s.
pub const SHIFT_DWELL: f64 = 0.3;
/// Time constant of the engine-RPM lag, s.
pub const RPM_TIME_CONSTANT: f64 = 0.2;
/// Downshift hysteresis as a fraction of the upshift speed.
pub const SHIFT_HYSTERESIS: f64 = 0.1;
/// Throttle below this magnitude counts as idle.
pub const IDLE_THROTTLE: f64 = 0.05;

/// Per-wheel electric drive torque: `T · interp(segments, |ω|)`, capped at
/// `max_torque`.
pub fn electric_drive_torque(throttle: f64, wheel_speed: f64, max_torque: f64, segments: &[[f64; 2]]) -> f64 {
    let t = throttle.clamp(-1.0, 1.0);
    if t == 0.0 {
        return 0.0;
    }
    let available = interp_linear(segments, wheel_speed.abs()).clamp(0.0, max_torque);
    t * available
}

/// Engine RPM implied by a vehicle speed in the given gear. The unit
/// conversion to miles per hour and inches happens here only.
pub fn speed_to_engine_rpm(speed: f64, tire_radius: f64, final_drive: f64, gear_ratio: f64) -> f64 {
    const MPS_TO_MPH: f64 = 3600.0 / 1609.344;
    const M_TO_IN: f64 = 1.0 / 0.0254;
    let v_mph = speed.abs() * MPS_TO_MPH;
    let r_in = tire_radius * M_TO_IN;
    let wheel_rpm = v_mph * 5280.0 * 12.0 / (60.0 * 2.0 * PI * r_in);
    wheel_rpm * final_drive * gear_ratio.abs()
}

/// Idle-offset target RPM for the current wheel speed and ratio.
pub fn engine_target_rpm(avg_wheel_rpm: f64, gear_ratio: f64, engine: &EngineParams) -> f64 {
    engine.idle_rpm + avg_wheel_rpm.abs() * engine.final_drive * gear_ratio.abs()
}

/// First-order lag of the engine RPM toward its target; never below idle.
pub fn engine_rpm_update(
    current_rpm: f64,
    avg_wheel_rpm: f64,
    gear_ratio: f64,
    engine: &EngineParams,
    dt: f64,
) -> f64 {
    let target = engine_target_rpm(avg_wheel_rpm, gear_ratio, engine);
    let alpha = 1.0 - (-dt / RPM_TIME_CONSTANT).exp();
    let next = current_rpm + alpha * (target - current_rpm);
    next.max(engine.idle_rpm)
}

/// Throttle smoothing operator `1 + gain·T²`.
pub fn throttle_smoothing(throttle: f64, gain: f64) -> f64 {
    1.0 + gain * throttle * throttle
}

/// Total powertrain torque `τe(RPM)·GR·FDR·T·A(T)`; zero with the clutch open
/// (shift in progress), in neutral and in park.
pub fn engine_total_torque(throttle: f64, state: &PowertrainState, engine: &EngineParams) -> f64 {
    if state.shifting() || state.gear == 0 || state.park {
        return 0.0;
    }
    let rpm = state.engine_rpm;
    let engine_torque = if rpm > engine.max_rpm() {
        0.0
    } else {
        interp_linear(&engine.torque_curve, rpm)
    };
    engine_torque
        * engine.ratio(state.gear)
        * engine.final_drive
        * throttle
        * throttle_smoothing(throttle, engine.smoothing_gain)
}

/// Splits total torque over the driven wheels (FL, FR, RL, RR).
///
/// Each side of a driven axle gets `τ_out·(1 − clamp(drop·|δ±|, 0, 0.9))`
/// where the left wheel sees `δ⁻ = min(δ, 0)` and the right `δ⁺ = max(δ, 0)`.
pub fn split_drive_torque(total: f64, steering: f64, drive: DriveConfig, torque_drop: f64) -> [f64; 4] {
    let out = match drive {
        DriveConfig::Fwd | DriveConfig::Rwd => total / 2.0,
        DriveConfig::Awd => total / 4.0,
    };
    let factor = |d: f64| 1.0 - (torque_drop * d.abs()).clamp(0.0, 0.9);
    let left = out * factor(steering.min(0.0));
    let right = out * factor(steering.max(0.0));
    let driven = drive.driven();
    let per_side = [left, right, left, right];
    let mut torques = [0.0; 4];
    for i in 0..4 {
        if driven[i] {
            torques[i] = per_side[i];
        }
    }
    torques
}

/// Automatic transmission logic for one tick.
///
/// Standstill without throttle selects neutral, standstill with the handbrake
/// selects park. Drive↔reverse changes pass through neutral and are deferred
/// while the vehicle still moves. Every gear engagement opens the clutch for
/// [`SHIFT_DWELL`].
pub fn shift_transmission(
    state: &PowertrainState,
    speed: f64,
    command: &ActuatorCommand,
    engine: &EngineParams,
    tire_radius: f64,
    dt: f64,
) -> PowertrainState {
    let mut s = *state;
    s.handbrake_engaged = command.handbrake;
    if let Some(req) = command.gear {
        s.pending = Some(req);
    }
    if s.shifting() {
        s.shift_remaining -= dt;
        if s.shift_remaining <= 1e-12 {
            s.shift_remaining = 0.0;
            s.gear = s.shift_target;
        }
        return s;
    }

    let standstill = speed.abs() < STANDSTILL_SPEED;
    if let Some(req) = s.pending {
        let reversing_direction = matches!(
            (s.selector, req),
            (GearRequest::Drive, GearRequest::Reverse) | (GearRequest::Reverse, GearRequest::Drive)
        );
        let needs_standstill = reversing_direction || req == GearRequest::Park;
        if !needs_standstill || standstill {
            s.selector = req;
            s.pending = None;
        }
    }

    let throttle = command.throttle.max(0.0);
    // (gear, park)
    let desired: (i32, bool) = if standstill {
        if command.handbrake {
            (0, true)
        } else if throttle <= IDLE_THROTTLE {
            (0, s.selector == GearRequest::Park)
        } else {
            match s.selector {
                GearRequest::Drive => (s.gear.max(1), false),
                GearRequest::Reverse => (-1, false),
                GearRequest::Neutral => (0, false),
                GearRequest::Park => (0, true),
            }
        }
    } else {
        match s.selector {
            GearRequest::Drive if s.gear >= 1 => (scheduled_gear(s.gear, speed, engine, tire_radius), false),
            GearRequest::Drive if speed > 0.0 => (gear_for_speed(speed, engine), false),
            GearRequest::Reverse if speed < 0.0 || s.gear == -1 => (-1, false),
            // Rolling the wrong way for the selected direction: stay disengaged.
            _ => (0, false),
        }
    };

    let (gear, park) = desired;
    s.park = park;
    if gear == s.gear {
        return s;
    }
    if gear == 0 {
        s.gear = 0;
        return s;
    }
    // Drive and reverse never connect directly.
    let target = if s.gear != 0 && (gear < 0) != (s.gear < 0) { 0 } else { gear };
    if target == 0 {
        s.gear = 0;
    } else {
        s.shift_target = target;
        s.shift_remaining = SHIFT_DWELL;
    }
    s
}

fn gear_for_speed(speed: f64, engine: &EngineParams) -> i32 {
    engine
        .shift_map
        .iter()
        .filter(|p| speed >= p.speed)
        .map(|p| p.gear)
        .max()
        .unwrap_or(1)
}

fn scheduled_gear(current: i32, speed: f64, engine: &EngineParams, tire_radius: f64) -> i32 {
    let entry = |g: i32| engine.shift_map.iter().find(|p| p.gear == g).map(|p| p.speed);
    if let Some(up) = entry(current + 1) {
        if speed >= up {
            return current + 1;
        }
    }
    if current > 1 {
        if let Some(own) = entry(current) {
            let lower_rpm = speed_to_engine_rpm(speed, tire_radius, engine.final_drive, engine.ratio(current - 1));
            if speed < own * (1.0 - SHIFT_HYSTERESIS) && lower_rpm < engine.max_rpm() {
                return current - 1;
            }
        }
    }
    current
}
