use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Wraps an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Piecewise-linear interpolation over `(x, y)` breakpoints sorted by `x`.
/// Values outside the covered range hold the nearest endpoint.
pub fn interp_linear(points: &[[f64; 2]], x: f64) -> f64 {
    match points {
        [] => 0.0,
        [only] => only[1],
        _ => {
            let first = points[0];
            let last = points[points.len() - 1];
            if x <= first[0] {
                return first[1];
            }
            if x >= last[0] {
                return last[1];
            }
            let idx = points.partition_point(|p| p[0] <= x);
            let (a, b) = (points[idx - 1], points[idx]);
            let t = (x - a[0]) / (b[0] - a[0]);
            a[1] + t * (b[1] - a[1])
        }
    }
}

/// Planar pose in a map frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw }
    }

    /// Expresses a world point in this pose's local frame.
    pub fn to_local(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.yaw.sin_cos();
        let dx = px - self.x;
        let dy = py - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Maps a local point into the world frame.
    pub fn to_world(&self, lx: f64, ly: f64) -> (f64, f64) {
        let (s, c) = self.yaw.sin_cos();
        (self.x + c * lx - s * ly, self.y + s * lx + c * ly)
    }

    pub fn distance(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}
