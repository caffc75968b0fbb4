use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::noise::{gaussian, rng_for, Stream};
use crate::dynamics::VehicleState;
use crate::GRAVITY;

/// Rigid-body transform of the vehicle at one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSample {
    pub time: f64,
    pub position: Vector3<f64>,
    pub rotation: Rotation3<f64>,
    /// Body-frame angular velocity, rad/s.
    pub angular_velocity: Vector3<f64>,
}

impl PoseSample {
    pub fn of(state: &VehicleState) -> Self {
        Self {
            time: state.time,
            position: state.position,
            rotation: state.rotation,
            angular_velocity: state.angular_velocity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct InsNoise {
    pub position_sigma: f64,
    pub accel_sigma: f64,
    pub gyro_sigma: f64,
    pub accel_bias: [f64; 3],
    pub gyro_bias: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsSample {
    pub timestamp: f64,
    pub position: [f64; 3],
    /// Roll φ_x, pitch θ_y, yaw ψ_z with `R = Rz(ψ)·Ry(θ)·Rx(φ)`.
    pub euler: [f64; 3],
    /// Scalar-first unit quaternion `(q0, q1, q2, q3)` with `q0 ≥ 0`.
    pub quaternion: [f64; 4],
    /// Specific force in the body frame, m/s² (reads +g on z at rest).
    pub linear_acceleration: [f64; 3],
    pub angular_velocity: [f64; 3],
}

pub fn quaternion_of(r: &Rotation3<f64>) -> [f64; 4] {
    let q = UnitQuaternion::from_rotation_matrix(r);
    let s = if q.w < 0.0 { -1.0 } else { 1.0 };
    [s * q.w, s * q.i, s * q.j, s * q.k]
}

pub fn rotation_from_quaternion(q: [f64; 4]) -> Rotation3<f64> {
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3])).to_rotation_matrix()
}

pub fn rotation_from_euler(e: [f64; 3]) -> Rotation3<f64> {
    Rotation3::from_euler_angles(e[0], e[1], e[2])
}

/// INS reading from the most recent pose samples (oldest first).
///
/// Acceleration is the central second difference of position over the last
/// three samples, so it lags the newest sample by one tick. With fewer than
/// three samples the acceleration reads zero.
pub fn ins_sample(history: &[PoseSample], noise: &InsNoise, seed: u64, tick: u64) -> Option<InsSample> {
    let last = history.last()?;
    let accel = match history {
        [.., a, b, c] => {
            let h = (c.time - a.time) / 2.0;
            let world = (c.position - 2.0 * b.position + a.position) / (h * h);
            b.rotation.inverse() * (world + Vector3::new(0.0, 0.0, GRAVITY))
        }
        _ => Vector3::zeros(),
    };
    let (roll, pitch, yaw) = last.rotation.euler_angles();
    let mut rng = rng_for(seed, Stream::Ins, tick, 0);
    let mut draw = |sigma: f64| gaussian(&mut rng, sigma);
    let position = last.position.map(|x| x + draw(noise.position_sigma));
    let a = Vector3::from(noise.accel_bias) + accel.map(|x| x + draw(noise.accel_sigma));
    let w = Vector3::from(noise.gyro_bias) + last.angular_velocity.map(|x| x + draw(noise.gyro_sigma));
    Some(InsSample {
        timestamp: last.time,
        position: position.into(),
        euler: [roll, pitch, yaw],
        quaternion: quaternion_of(&last.rotation),
        linear_acceleration: a.into(),
        angular_velocity: w.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DT: f64 = 1e-3;

    fn still(n: usize) -> Vec<PoseSample> {
        (0..n)
            .map(|k| PoseSample {
                time: k as f64 * DT,
                position: Vector3::new(1.0, 2.0, 0.0),
                rotation: Rotation3::identity(),
                angular_velocity: Vector3::zeros(),
            })
            .collect()
    }

    #[test]
    fn stationary_reads_gravity() {
        let s = ins_sample(&still(3), &InsNoise::default(), 0, 2).unwrap();
        assert_eq!(s.linear_acceleration, [0.0, 0.0, GRAVITY]);
        assert_eq!(s.angular_velocity, [0.0; 3]);
        assert_eq!(s.quaternion, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.euler, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn short_history_reports_zero_acceleration() {
        let s = ins_sample(&still(2), &InsNoise::default(), 0, 1).unwrap();
        assert_eq!(s.linear_acceleration, [0.0; 3]);
        assert!(ins_sample(&[], &InsNoise::default(), 0, 0).is_none());
    }

    #[test]
    fn centripetal_acceleration_on_a_circle() {
        let (r, v) = (1.5, 2.0);
        let w = v / r;
        let hist: Vec<PoseSample> = (0..3)
            .map(|k| {
                let t = 0.4 + k as f64 * DT;
                let a = w * t;
                PoseSample {
                    time: t,
                    position: Vector3::new(r * a.cos(), r * a.sin(), 0.0),
                    rotation: Rotation3::from_axis_angle(&Vector3::z_axis(), a + std::f64::consts::FRAC_PI_2),
                    angular_velocity: Vector3::new(0.0, 0.0, w),
                }
            })
            .collect();
        let s = ins_sample(&hist, &InsNoise::default(), 0, 2).unwrap();
        // analytic oracle: v²/R towards the centre, i.e. +y in a CCW body frame
        let lateral = s.linear_acceleration[1];
        assert!((lateral - v * v / r).abs() / (v * v / r) < 0.02, "{lateral}");
        assert!(s.linear_acceleration[0].abs() < 1e-6);
    }

    #[test]
    fn noise_is_seeded() {
        let n = InsNoise {
            accel_sigma: 0.1,
            gyro_sigma: 0.01,
            ..Default::default()
        };
        let a = ins_sample(&still(3), &n, 9, 2).unwrap();
        let b = ins_sample(&still(3), &n, 9, 2).unwrap();
        let c = ins_sample(&still(3), &n, 10, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn euler_and_quaternion_agree(roll in -3.1f64..3.1, pitch in -1.5f64..1.5, yaw in -3.1f64..3.1) {
            let r = rotation_from_euler([roll, pitch, yaw]);
            let hist = [PoseSample { time: 0.0, position: Vector3::zeros(), rotation: r, angular_velocity: Vector3::zeros() }];
            let s = ins_sample(&hist, &InsNoise::default(), 0, 0).unwrap();
            let q = s.quaternion;
            prop_assert!(((q[0]*q[0] + q[1]*q[1] + q[2]*q[2] + q[3]*q[3]).sqrt() - 1.0).abs() < 1e-9);
            let from_q = rotation_from_quaternion(q);
            let from_e = rotation_from_euler(s.euler);
            prop_assert!((from_q.matrix() - from_e.matrix()).norm() < 1e-9);
            prop_assert!((from_e.matrix() - r.matrix()).norm() < 1e-9);
            for (a, b) in s.euler.iter().zip([roll, pitch, yaw]) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
