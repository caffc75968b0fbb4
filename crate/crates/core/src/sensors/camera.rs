use nalgebra::{Isometry3, Matrix3, Matrix4, Point3, Rotation3, UnitQuaternion, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::SensorError;
use crate::environment::Scene;

/// Pinhole camera. `focal` and sensor size share a length unit (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    pub focal: f64,
    pub sensor: [f64; 2],
    pub resolution: [u32; 2],
    pub near: f64,
    pub far: f64,
}

/// Near-plane window offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frustum {
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
    pub near: f64,
    pub far: f64,
}

impl Default for CameraParams {
    fn default() -> Self {
        Self {
            focal: 0.0036,
            sensor: [0.0048, 0.0036],
            resolution: [640, 480],
            near: 0.05,
            far: 100.0,
        }
    }
}

impl CameraParams {
    pub fn validate(&self) -> Result<(), SensorError> {
        if !(self.focal > 0.0) {
            return Err(SensorError::invalid("camera.focal", "must be positive"));
        }
        if !(self.sensor[0] > 0.0 && self.sensor[1] > 0.0) {
            return Err(SensorError::invalid("camera.sensor", "sizes must be positive"));
        }
        if self.resolution[0] == 0 || self.resolution[1] == 0 {
            return Err(SensorError::invalid("camera.resolution", "must be non-zero"));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(SensorError::invalid("camera.near", "need 0 < near < far"));
        }
        Ok(())
    }

    /// Aspect `a = s_y / s_x`.
    pub fn aspect(&self) -> f64 {
        self.sensor[1] / self.sensor[0]
    }

    /// Focal length normalised by the half sensor width, `2N/(R−L)`.
    pub fn normalized_focal(&self) -> f64 {
        2.0 * self.focal / self.sensor[0]
    }

    /// Symmetric window from similar triangles on the near plane.
    pub fn frustum(&self) -> Frustum {
        let r = self.near * self.sensor[0] / (2.0 * self.focal);
        let t = self.near * self.sensor[1] / (2.0 * self.focal);
        Frustum {
            left: -r,
            right: r,
            top: t,
            bottom: -t,
            near: self.near,
            far: self.far,
        }
    }
}

pub fn projection_matrix(f: &Frustum) -> Matrix4<f64> {
    let (l, r, t, b, n, fa) = (f.left, f.right, f.top, f.bottom, f.near, f.far);
    Matrix4::new(
        2.0 * n / (r - l), 0.0, (r + l) / (r - l), 0.0,
        0.0, 2.0 * n / (t - b), (t + b) / (t - b), 0.0,
        0.0, 0.0, -(fa + n) / (fa - n), -2.0 * fa * n / (fa - n),
        0.0, 0.0, -1.0, 0.0,
    )
}

/// View matrix: the inverse of the camera's world pose, as a 4×4 `[R|t]`.
/// The camera looks along its −z axis with +y up.
pub fn view_matrix(world_from_camera: &Isometry3<f64>) -> Matrix4<f64> {
    world_from_camera.inverse().to_homogeneous()
}

pub fn camera_matrices(params: &CameraParams, world_from_camera: &Isometry3<f64>) -> (Matrix4<f64>, Matrix4<f64>) {
    (view_matrix(world_from_camera), projection_matrix(&params.frustum()))
}

/// Converts a mount in the vehicle convention (x forward, z up) to the
/// optical convention used by the view matrix (−z forward, y up).
pub fn optical_from_body(world_from_mount: &Isometry3<f64>) -> Isometry3<f64> {
    let m = Matrix3::new(
        0.0, 0.0, -1.0,
        -1.0, 0.0, 0.0,
        0.0, 1.0, 0.0,
    );
    let r = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
    Isometry3::from_parts(world_from_mount.translation, world_from_mount.rotation * r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// Normalised device coordinates, absent when `w_c = 0`.
    pub ndc: Option<[f64; 3]>,
    /// Pixel coordinates, origin top-left, x right, y down.
    pub pixel: Option<[f64; 2]>,
    pub visible: bool,
}

/// `C = P·V·W`, perspective division, then the viewport scale-shift.
pub fn project_points(points: &[Point3<f64>], view: &Matrix4<f64>, proj: &Matrix4<f64>, resolution: [u32; 2]) -> Vec<Projection> {
    let pv = proj * view;
    let (w, h) = (resolution[0] as f64, resolution[1] as f64);
    points
        .iter()
        .map(|p| {
            let c: Vector4<f64> = pv * p.to_homogeneous();
            if c.w == 0.0 {
                return Projection {
                    ndc: None,
                    pixel: None,
                    visible: false,
                };
            }
            let ndc = Vector3::new(c.x / c.w, c.y / c.w, c.z / c.w);
            let inside = ndc.iter().all(|v| (-1.0..=1.0).contains(v));
            Projection {
                ndc: Some(ndc.into()),
                pixel: Some([(ndc.x + 1.0) * 0.5 * w, (1.0 - ndc.y) * 0.5 * h]),
                visible: c.w > 0.0 && inside,
            }
        })
        .collect()
}

/// Landmarks for the camera: the corners of every box obstacle.
pub fn scene_landmarks(scene: &Scene) -> Vec<Point3<f64>> {
    let mut out = Vec::with_capacity(scene.boxes.len() * 8);
    for b in &scene.boxes {
        for k in 0..8 {
            out.push(Point3::new(
                if k & 1 == 0 { b.min.x } else { b.max.x },
                if k & 2 == 0 { b.min.y } else { b.max.y },
                if k & 4 == 0 { b.min.z } else { b.max.z },
            ));
        }
    }
    out
}

/// Visible landmark pixels for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFeatures {
    /// `(landmark index, pixel)` for each visible landmark.
    pub features: Vec<(usize, [f64; 2])>,
}

pub fn camera_features(scene: &Scene, world_from_camera: &Isometry3<f64>, params: &CameraParams) -> CameraFeatures {
    let (v, p) = camera_matrices(params, world_from_camera);
    let pts = scene_landmarks(scene);
    let features = project_points(&pts, &v, &p, params.resolution)
        .into_iter()
        .enumerate()
        .filter(|(_, q)| q.visible)
        .filter_map(|(i, q)| q.pixel.map(|px| (i, px)))
        .collect();
    CameraFeatures { features }
}
