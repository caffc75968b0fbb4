use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;

use twinsim::dynamics::{
    ackermann_angles, kinetic_energy, presets, split_drive_torque, step_vehicle, step_vehicle_with_diagnostics, tire_slip,
    CurveAnchors, DriveConfig, FrictionSpline,
};
use twinsim::math::Pose2;
use twinsim::sensors::{ins_sample, InsNoise, PoseSample};
use twinsim::{ActuatorCommand, Scene, VehicleState, GRAVITY, PHYSICS_DT};

fn at_rest(id: &str) -> (twinsim::VehicleParams, VehicleState) {
    let p = presets::load(id).unwrap();
    let s = VehicleState::at_rest(&p, Pose2::new(0.0, 0.0, 0.0), 0.0);
    (p, s)
}

#[test]
fn static_normal_loads_carry_the_weight() {
    let flat = Scene::flat();
    for id in presets::ids() {
        let (p, mut s) = at_rest(id);
        let mut loads = [0.0; 4];
        for _ in 0..1000 {
            let (next, d) = step_vehicle_with_diagnostics(&p, &s, &ActuatorCommand::default(), &flat, PHYSICS_DT).unwrap();
            s = next;
            loads = d.normal_load;
        }
        let sum: f64 = loads.iter().sum();
        let weight = p.total_mass() * GRAVITY;
        assert!((sum - weight).abs() / weight < 0.005, "{id}: Σ normal {sum} vs M·g {weight}");
    }
}

#[test]
fn coasting_never_gains_kinetic_energy() {
    let flat = Scene::flat();
    for id in presets::ids() {
        let (p, mut s) = at_rest(id);
        let v0 = 3.0;
        s.velocity.x = v0;
        s.wheel_speed = [v0 / p.wheels.radius; 4];
        let mut e = kinetic_energy(&p, &s);
        // once all wheels latch at standstill the body rocks back on its
        // springs, returning stored spring energy, so stop there
        for k in 0..20_000 {
            s = step_vehicle(&p, &s, &ActuatorCommand::default(), &flat, PHYSICS_DT).unwrap();
            if s.wheel_speed.iter().all(|w| *w == 0.0) {
                assert!(s.velocity.x.abs() < 0.2, "{id}: wheels latched at {} m/s", s.velocity.x);
                break;
            }
            let next = kinetic_energy(&p, &s);
            assert!(next <= e, "{id}: energy rose from {e} to {next} at tick {k}");
            e = next;
        }
    }
}

/// Integrates reported body rates into an orientation and compares it with
/// the true one after a minute of slalom.
#[test]
fn integrated_gyro_tracks_orientation() {
    let (p, mut s) = at_rest("scale10");
    let flat = Scene::flat();
    let mut history = vec![PoseSample::of(&s)];
    let mut estimate = UnitQuaternion::from_rotation_matrix(&s.rotation);
    let ticks = 60_000;
    for k in 0..ticks {
        let steer = (k as f64 * PHYSICS_DT * 0.8).sin() * 0.7;
        s = step_vehicle(&p, &s, &ActuatorCommand::new(0.15, steer), &flat, PHYSICS_DT).unwrap();
        history.push(PoseSample::of(&s));
        if history.len() > 3 {
            history.remove(0);
        }
        let ins = ins_sample(&history, &InsNoise::default(), 0, s.tick).unwrap();
        estimate *= UnitQuaternion::new(Vector3::from(ins.angular_velocity) * PHYSICS_DT);
    }
    let err = estimate.angle_to(&UnitQuaternion::from_rotation_matrix(&s.rotation)).to_degrees();
    let minutes = ticks as f64 * PHYSICS_DT / 60.0;
    assert!(err < 0.1 * minutes, "orientation drifted {err}° in {minutes} min");
    assert!(s.planar_speed() > 0.5, "the slalom never got going");
}

proptest! {
    #[test]
    fn ackermann_inner_wheel_turns_more(delta in 1e-4f64..0.6, l in 0.1f64..4.0, w_frac in 0.01f64..0.99) {
        // turning centre outside the inner wheel: w·tanδ < 2l
        let w = w_frac * 2.0 * l / delta.tan();
        let (left, right) = ackermann_angles(delta, l, w).unwrap();
        prop_assert!(right > delta && delta > left);
        let (nl, nr) = ackermann_angles(-delta, l, w).unwrap();
        prop_assert!((nl + right).abs() < 1e-12 && (nr + left).abs() < 1e-12);
    }

    #[test]
    fn ackermann_order_over_preset_steering_range(frac in 1e-3f64..=1.0) {
        for id in presets::ids() {
            let p = presets::load(id).unwrap();
            let delta = frac * p.steering.limit;
            let (left, right) = ackermann_angles(delta, p.body.wheelbase, p.body.track).unwrap();
            prop_assert!(right > delta && delta > left, "{}: {} {} {}", id, left, delta, right);
        }
    }

    #[test]
    fn spline_shape(se in 0.02f64..0.5, fe in 0.5f64..5000.0, gap in 0.05f64..1.0, drop in 0.0f64..0.9, k in 0.2f64..3.0) {
        let sa = se + gap;
        let fa = fe * (1.0 - drop).max(0.05);
        let sp = FrictionSpline::build(CurveAnchors { zero: [0.0, 0.0], extremum: [se, fe], asymptote: [sa, fa] }, k).unwrap();
        // continuous at both joins
        let h = 1e-9;
        prop_assert!((sp.eval(se - h) - sp.eval(se)).abs() < 1e-6 * fe);
        prop_assert!((sp.eval(sa - h) - sp.eval(sa)).abs() < 1e-6 * fe);
        prop_assert!(sp.eval(0.0).abs() < 1e-9 * fe);
        let n = 4000;
        let (mut best, mut at) = (f64::MIN, 0.0);
        for i in 0..=n {
            let s = sa * i as f64 / n as f64;
            let f = sp.eval(s);
            if f > best {
                best = f;
                at = s;
            }
        }
        prop_assert!((at - se).abs() <= sa / n as f64 + 1e-12, "max at {} not {}", at, se);
        prop_assert!(sp.slope(se - 1e-12).abs() < 1e-6 * fe / se);
        prop_assert!(sp.slope(se).abs() < 1e-6 * fe / se);
    }

    #[test]
    fn torque_split_conserves(total in 0.0f64..500.0, steer in -0.6f64..0.6, drop in 0.01f64..2.0, awd in any::<bool>()) {
        let drive = if awd { DriveConfig::Awd } else { DriveConfig::Rwd };
        let t = split_drive_torque(total, steer, drive, drop);
        let sum: f64 = t.iter().sum();
        prop_assert!(sum <= total + 1e-12);
        if steer == 0.0 || total == 0.0 {
            prop_assert!((sum - total).abs() < 1e-12);
        } else {
            prop_assert!(sum < total);
        }
    }

    #[test]
    fn slip_is_always_finite(r in 0.01f64..1.0, w in -500.0f64..500.0, vx in -50.0f64..50.0, vy in -50.0f64..50.0, stop in any::<bool>()) {
        let vx = if stop { 0.0 } else { vx };
        let (sx, sy) = tire_slip(r, w, vx, vy);
        prop_assert!(sx.is_finite() && sy.is_finite());
    }
}
