use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::scene::GroundSample;
use super::EnvironmentError;

/// Elevation samples on a regular lattice. Sample `(i, j)` lies at
/// `origin + (i, j)·resolution`; heights between samples are bilinear and
/// queries beyond the edge hold the border value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heightmap {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: [f64; 2],
    /// Row-major elevations, m.
    pub elevation: Vec<f64>,
    /// Row-major friction scale per sample, in (0, 2].
    pub friction: Vec<f64>,
}

impl Heightmap {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: [f64; 2],
        elevation: Vec<f64>,
        friction: Vec<f64>,
    ) -> Result<Self, EnvironmentError> {
        if width < 2 || height < 2 {
            return Err(EnvironmentError::format("size", "heightmap needs at least 2×2 samples"));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(EnvironmentError::format("resolution", format!("must be positive, got {resolution}")));
        }
        if elevation.len() != width * height || friction.len() != width * height {
            return Err(EnvironmentError::format("elevation", "sample count does not match size"));
        }
        if elevation.iter().any(|z| !z.is_finite()) {
            return Err(EnvironmentError::format("elevation", "elevations must be finite"));
        }
        if friction.iter().any(|f| !(*f > 0.0 && *f <= 2.0)) {
            return Err(EnvironmentError::format("friction", "friction scale must lie in (0, 2]"));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            elevation,
            friction,
        })
    }

    /// Builds a heightmap by sampling `f(x, y)` at every lattice node.
    pub fn from_fn(
        width: usize,
        height: usize,
        resolution: f64,
        origin: [f64; 2],
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self, EnvironmentError> {
        let mut elevation = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                elevation.push(f(
                    origin[0] + i as f64 * resolution,
                    origin[1] + j as f64 * resolution,
                ));
            }
        }
        Self::new(width, height, resolution, origin, elevation, vec![1.0; width * height])
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.elevation[j * self.width + i]
    }

    /// Cell index and fractional offsets for a world point, clamped to the lattice.
    fn locate(&self, x: f64, y: f64) -> (usize, usize, f64, f64) {
        let gx = ((x - self.origin[0]) / self.resolution).clamp(0.0, (self.width - 1) as f64);
        let gy = ((y - self.origin[1]) / self.resolution).clamp(0.0, (self.height - 1) as f64);
        let i = (gx.floor() as usize).min(self.width - 2);
        let j = (gy.floor() as usize).min(self.height - 2);
        (i, j, gx - i as f64, gy - j as f64)
    }

    pub fn elevation_at(&self, x: f64, y: f64) -> f64 {
        let (i, j, fx, fy) = self.locate(x, y);
        let z00 = self.at(i, j);
        let z10 = self.at(i + 1, j);
        let z01 = self.at(i, j + 1);
        let z11 = self.at(i + 1, j + 1);
        z00 * (1.0 - fx) * (1.0 - fy) + z10 * fx * (1.0 - fy) + z01 * (1.0 - fx) * fy + z11 * fx * fy
    }

    /// Elevation, upward surface normal and friction scale.
    pub fn sample(&self, x: f64, y: f64) -> GroundSample {
        let (i, j, fx, fy) = self.locate(x, y);
        let z00 = self.at(i, j);
        let z10 = self.at(i + 1, j);
        let z01 = self.at(i, j + 1);
        let z11 = self.at(i + 1, j + 1);
        let z = z00 * (1.0 - fx) * (1.0 - fy) + z10 * fx * (1.0 - fy) + z01 * (1.0 - fx) * fy + z11 * fx * fy;
        let dzdx = ((z10 - z00) * (1.0 - fy) + (z11 - z01) * fy) / self.resolution;
        let dzdy = ((z01 - z00) * (1.0 - fx) + (z11 - z10) * fx) / self.resolution;
        let normal = Vector3::new(-dzdx, -dzdy, 1.0).normalize();
        let ni = (i as f64 + fx).round() as usize;
        let nj = (j as f64 + fy).round() as usize;
        GroundSample {
            height: z,
            normal,
            friction: self.friction[nj.min(self.height - 1) * self.width + ni.min(self.width - 1)],
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.elevation
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(*z), hi.max(*z)))
    }
}
