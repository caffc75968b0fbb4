use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::noise::{gaussian, rng_for, Stream};
use super::SensorError;
use crate::environment::Scene;

/// Rigid mount of a sensor on the vehicle body, `^vT_l`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mount {
    pub xyz: [f64; 3],
    /// Roll, pitch, yaw, rad.
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl Mount {
    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::new(self.xyz[0], self.xyz[1], self.xyz[2]),
            UnitQuaternion::from_euler_angles(self.rpy[0], self.rpy[1], self.rpy[2]),
        )
    }
}

/// Vertical channel lattice of a spatial LIDAR. Positive φ points down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channels {
    pub phi_min: f64,
    pub phi_max: f64,
    pub phi_res: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarParams {
    pub mount: Mount,
    pub r_min: f64,
    pub r_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_res: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Channels>,
    /// Update rate, Hz.
    pub rate: f64,
    #[serde(default)]
    pub noise_sigma: f64,
}

/// Number of lattice points in `[lo : res : hi]`, tolerant to rounding
/// when the span is an exact multiple of the step.
fn lattice_len(lo: f64, hi: f64, res: f64) -> usize {
    ((hi - lo) / res + 1e-9).floor() as usize + 1
}

impl LidarParams {
    /// Planar 270° scanner with 0.25° steps (1081 beams).
    pub fn planar_default() -> Self {
        let fov = 135f64.to_radians();
        Self {
            mount: Mount {
                xyz: [0.1, 0.0, 0.12],
                rpy: [0.0; 3],
            },
            r_min: 0.06,
            r_max: 10.0,
            theta_min: -fov,
            theta_max: fov,
            theta_res: 0.25f64.to_radians(),
            channels: None,
            rate: 40.0,
            noise_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        if !(self.r_min >= 0.0 && self.r_min < self.r_max && self.r_max.is_finite()) {
            return Err(SensorError::invalid(
                "lidar.r_min",
                format!("need 0 ≤ r_min < r_max, got {} and {}", self.r_min, self.r_max),
            ));
        }
        if !(self.theta_res > 0.0) {
            return Err(SensorError::invalid("lidar.theta_res", "must be positive"));
        }
        if !(self.theta_max >= self.theta_min) {
            return Err(SensorError::invalid("lidar.theta_max", "must not be below theta_min"));
        }
        if let Some(c) = &self.channels {
            if !(c.phi_res > 0.0) {
                return Err(SensorError::invalid("lidar.channels.phi_res", "must be positive"));
            }
            if !(c.phi_max >= c.phi_min) {
                return Err(SensorError::invalid("lidar.channels.phi_max", "must not be below phi_min"));
            }
        }
        if !(self.rate > 0.0) {
            return Err(SensorError::invalid("lidar.rate", "must be positive"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(SensorError::invalid("lidar.noise_sigma", "must be non-negative"));
        }
        Ok(())
    }

    pub fn ray_count(&self) -> usize {
        lattice_len(self.theta_min, self.theta_max, self.theta_res)
    }

    pub fn channel_count(&self) -> usize {
        self.channels
            .map(|c| lattice_len(c.phi_min, c.phi_max, c.phi_res))
            .unwrap_or(1)
    }

    pub fn theta(&self, i: usize) -> f64 {
        self.theta_min + i as f64 * self.theta_res
    }

    pub fn phi(&self, j: usize) -> f64 {
        self.channels.map(|c| c.phi_min + j as f64 * c.phi_res).unwrap_or(0.0)
    }
}

/// Ray evaluation strategy inside one scan. Output order never depends on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Serial,
    #[default]
    Threads,
}

fn map_rays<T, F>(n: usize, mode: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == Parallelism::Threads {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Range of one ray after thresholding and noise; `None` is "no return".
fn cast(
    scene: &Scene,
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    params: &LidarParams,
    seed: u64,
    stream: Stream,
    tick: u64,
    index: usize,
) -> Option<f64> {
    let hit = scene.raycast(&origin.coords, dir, params.r_max)?;
    if hit.distance < params.r_min {
        return None;
    }
    if params.noise_sigma == 0.0 {
        return Some(hit.distance);
    }
    let n = gaussian(&mut rng_for(seed, stream, tick, index as u64), params.noise_sigma);
    Some((hit.distance + n).clamp(params.r_min, params.r_max))
}

/// Planar scan over `[θ_min : θ_res : θ_max]`. Misses and returns closer
/// than `r_min` read `f64::INFINITY`.
pub fn lidar2d_scan(scene: &Scene, world_from_lidar: &Isometry3<f64>, params: &LidarParams, seed: u64, tick: u64) -> Vec<f64> {
    lidar2d_scan_with(scene, world_from_lidar, params, seed, tick, Parallelism::default())
}

pub fn lidar2d_scan_with(
    scene: &Scene,
    world_from_lidar: &Isometry3<f64>,
    params: &LidarParams,
    seed: u64,
    tick: u64,
    mode: Parallelism,
) -> Vec<f64> {
    let origin = world_from_lidar * Point3::origin();
    map_rays(params.ray_count(), mode, |i| {
        let (s, c) = params.theta(i).sin_cos();
        let dir = world_from_lidar * Vector3::new(c, s, 0.0);
        cast(scene, &origin, &dir, params, seed, Stream::Lidar2d, tick, i).unwrap_or(f64::INFINITY)
    })
}

/// Returns in the LIDAR frame, lattice order φ-major then θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub frame_id: u32,
    pub points: Vec<[f64; 3]>,
}

pub const CLOUD_MAGIC: [u8; 4] = *b"TWPC";
pub const CLOUD_HEADER_LEN: usize = 12;

impl PointCloud {
    /// `magic, count: u32, frame_id: u32` then little-endian f32 triplets.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CLOUD_HEADER_LEN + 12 * self.points.len());
        out.extend_from_slice(&CLOUD_MAGIC);
        out.extend_from_slice(&(self.points.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.frame_id.to_le_bytes());
        for p in &self.points {
            for v in p {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<(u32, Vec<[f32; 3]>), SensorError> {
        if bytes.len() < CLOUD_HEADER_LEN || bytes[..4] != CLOUD_MAGIC {
            return Err(SensorError::Decode("missing point cloud header".into()));
        }
        let word = |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
        let count = word(4) as usize;
        let frame_id = word(8);
        if bytes.len() != CLOUD_HEADER_LEN + 12 * count {
            return Err(SensorError::Decode(format!(
                "point count {count} does not match {} payload bytes",
                bytes.len() - CLOUD_HEADER_LEN
            )));
        }
        let f = |o: usize| f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
        let points = (0..count)
            .map(|k| {
                let o = CLOUD_HEADER_LEN + 12 * k;
                [f(o), f(o + 4), f(o + 8)]
            })
            .collect();
        Ok((frame_id, points))
    }
}

/// Ray direction `[cosθ cosφ, sinθ cosφ, −sinφ]` in the LIDAR frame.
pub fn lidar3d_direction(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.cos() * phi.cos(), theta.sin() * phi.cos(), -phi.sin())
}

pub fn lidar3d_scan(scene: &Scene, world_from_lidar: &Isometry3<f64>, params: &LidarParams, seed: u64, tick: u64) -> PointCloud {
    lidar3d_scan_with(scene, world_from_lidar, params, seed, tick, Parallelism::default())
}

pub fn lidar3d_scan_with(
    scene: &Scene,
    world_from_lidar: &Isometry3<f64>,
    params: &LidarParams,
    seed: u64,
    tick: u64,
    mode: Parallelism,
) -> PointCloud {
    let origin = world_from_lidar * Point3::origin();
    let nt = params.ray_count();
    let n = nt * params.channel_count();
    let returns = map_rays(n, mode, |k| {
        let local = lidar3d_direction(params.theta(k % nt), params.phi(k / nt));
        let dir = world_from_lidar * local;
        cast(scene, &origin, &dir, params, seed, Stream::Lidar3d, tick, k).map(|r| (local * r).into())
    });
    PointCloud {
        frame_id: tick as u32,
        points: returns.into_iter().flatten().collect(),
    }
}

/// Replaces "no return" by the `r_max + 1` sentinel used in binary logs.
pub fn ranges_to_sentinel(ranges: &[f64], r_max: f64) -> Vec<f32> {
    ranges
        .iter()
        .map(|r| if r.is_finite() { *r as f32 } else { (r_max + 1.0) as f32 })
        .collect()
}

pub fn ranges_from_sentinel(values: &[f32], r_max: f64) -> Vec<f64> {
    values
        .iter()
        .map(|v| if (*v as f64) > r_max { f64::INFINITY } else { *v as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{Aabb, Cell, OccupancyGrid};
    use crate::math::Pose2;
    use std::f64::consts::PI;

    fn at(x: f64, y: f64, z: f64) -> Isometry3<f64> {
        Isometry3::translation(x, y, z)
    }

    fn wall_ahead(d: f64) -> Scene {
        Scene::new("w", None, None, vec![Aabb::standing(d + 0.5, 0.0, 1.0, 4.0, 1.0)], 1.0).unwrap()
    }

    fn params(r_min: f64, r_max: f64) -> LidarParams {
        LidarParams {
            mount: Mount::default(),
            r_min,
            r_max,
            theta_min: -PI / 2.0,
            theta_max: PI / 2.0,
            theta_res: PI / 180.0,
            channels: None,
            rate: 10.0,
            noise_sigma: 0.0,
        }
    }

    #[test]
    fn ray_count_rule() {
        assert_eq!(params(0.1, 10.0).ray_count(), 181);
        assert_eq!(LidarParams::planar_default().ray_count(), 1081);
        let mut p = params(0.1, 10.0);
        p.theta_max = p.theta_min + 2.5 * p.theta_res;
        assert_eq!(p.ray_count(), 3);
    }

    #[test]
    fn forward_ray_reads_wall_distance() {
        let p = params(0.15, 12.0);
        let r = lidar2d_scan(&wall_ahead(2.0), &at(0.0, 0.0, 0.5), &p, 0, 0);
        assert!((r[90] - 2.0).abs() < 1e-6, "{}", r[90]);
        for v in &r {
            assert!(v.is_infinite() || (*v >= p.r_min && *v <= p.r_max));
        }
    }

    #[test]
    fn below_r_min_is_no_return() {
        let p = params(0.15, 12.0);
        let r = lidar2d_scan(&wall_ahead(0.1), &at(0.0, 0.0, 0.5), &p, 0, 0);
        assert!(r[90].is_infinite());
        // exactly at the threshold counts as a return
        let p = params(0.5, 12.0);
        let r = lidar2d_scan(&wall_ahead(0.5), &at(0.0, 0.0, 0.5), &p, 0, 0);
        assert!((r[90] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_scene_is_all_misses() {
        let scene = Scene::new("far", None, None, vec![Aabb::standing(100.0, 100.0, 1.0, 1.0, 1.0)], 1.0).unwrap();
        let r = lidar2d_scan(&scene, &at(0.0, 0.0, 0.5), &params(0.1, 10.0), 0, 0);
        assert!(r.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn mount_rotation_turns_the_scan() {
        let mut p = params(0.1, 10.0);
        p.theta_min = 0.0;
        p.theta_max = 0.0;
        let scene = wall_ahead(2.0);
        let yawed = Isometry3::new(Vector3::new(0.0, 0.0, 0.5), Vector3::new(0.0, 0.0, PI / 2.0));
        assert!(lidar2d_scan(&scene, &yawed, &p, 0, 0)[0].is_infinite());
        assert!((lidar2d_scan(&scene, &at(0.0, 0.0, 0.5), &p, 0, 0)[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn downward_channel_hits_ground_at_twice_height() {
        let h = 0.4;
        let mut p = params(0.05, 10.0);
        p.theta_min = 0.0;
        p.theta_max = 0.0;
        p.channels = Some(Channels {
            phi_min: 0.0,
            phi_max: PI / 6.0,
            phi_res: PI / 6.0,
        });
        let scene = wall_ahead(50.0);
        assert_eq!(lidar3d_direction(0.0, 0.0), Vector3::new(1.0, 0.0, 0.0));
        let cloud = lidar3d_scan(&scene, &at(0.0, 0.0, h), &p, 0, 0);
        // φ = 0 misses (wall beyond range), φ = 30° meets the ground plane
        assert_eq!(cloud.points.len(), 1);
        let q = Vector3::from(cloud.points[0]);
        assert!((q.norm() - 2.0 * h).abs() < 1e-9);
        assert!((q.z + h).abs() < 1e-9);
    }

    #[test]
    fn serial_and_threaded_are_identical() {
        let mut g = OccupancyGrid::new(80, 80, 0.1, Pose2::new(-4.0, -4.0, 0.0), Cell::Free);
        for k in 0..80 {
            g.set(k, 0, Cell::Occupied);
            g.set(k, 79, Cell::Occupied);
            g.set(0, k, Cell::Occupied);
            g.set(79, k, Cell::Occupied);
        }
        let scene = Scene::new("box", Some(g), None, vec![], 0.8).unwrap();
        let mut p = params(0.05, 10.0);
        p.theta_min = -PI;
        p.theta_max = PI;
        p.noise_sigma = 0.01;
        p.channels = Some(Channels {
            phi_min: -0.2,
            phi_max: 0.3,
            phi_res: 0.05,
        });
        let pose = at(0.3, -0.2, 0.3);
        let a = lidar3d_scan_with(&scene, &pose, &p, 5, 17, Parallelism::Serial);
        let b = lidar3d_scan_with(&scene, &pose, &p, 5, 17, Parallelism::Threads);
        assert_eq!(a.encode(), b.encode());
        assert_eq!(a, b);
    }

    #[test]
    fn cloud_codec() {
        let c = PointCloud {
            frame_id: 42,
            points: vec![[1.0, 2.0, 3.0], [-0.5, 0.25, 0.0]],
        };
        let bytes = c.encode();
        assert_eq!(bytes.len(), CLOUD_HEADER_LEN + 24);
        let (id, pts) = PointCloud::decode(&bytes).unwrap();
        assert_eq!(id, 42);
        assert_eq!(pts, vec![[1.0, 2.0, 3.0], [-0.5, 0.25, 0.0]]);
        assert!(PointCloud::decode(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn sentinel_round_trip() {
        let r = [1.5, f64::INFINITY, 0.25];
        let s = ranges_to_sentinel(&r, 10.0);
        assert_eq!(s[1], 11.0);
        assert_eq!(ranges_from_sentinel(&s, 10.0), r.to_vec());
    }
}
