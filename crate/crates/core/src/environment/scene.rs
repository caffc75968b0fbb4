use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::grid::OccupancyGrid;
use super::heightmap::Heightmap;
use super::raycast::{self, RayHit};
use super::EnvironmentError;
use crate::dynamics::ScaleClass;
use crate::math::Pose2;

/// Result of a ground query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundSample {
    pub height: f64,
    /// Unit upward surface normal.
    pub normal: Vector3<f64>,
    pub friction: f64,
}

impl GroundSample {
    pub fn flat() -> Self {
        Self {
            height: 0.0,
            normal: Vector3::z(),
            friction: 1.0,
        }
    }
}

/// Axis-aligned box obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    /// Box standing on the ground with centre `(x, y)`.
    pub fn standing(x: f64, y: f64, size_x: f64, size_y: f64, height: f64) -> Self {
        Self {
            min: Vector3::new(x - size_x / 2.0, y - size_y / 2.0, 0.0),
            max: Vector3::new(x + size_x / 2.0, y + size_y / 2.0, height),
        }
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.min.x && x <= self.max.x && y >= self.min.y && y <= self.max.y
    }
}

/// Thin vertical cylindrical wall, hit from inside or outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub center: [f64; 2],
    pub radius: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Cylinder {
    /// Wall standing on the ground.
    pub fn standing(x: f64, y: f64, radius: f64, height: f64) -> Self {
        Self {
            center: [x, y],
            radius,
            z_min: 0.0,
            z_max: height,
        }
    }
}

/// Immutable world geometry.
///
/// The occupancy grid's occupied cells are extruded from `z = 0` to
/// `wall_height`. Without a heightmap the ground is the plane `z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub scale: Option<ScaleClass>,
    pub grid: Option<OccupancyGrid>,
    pub heightmap: Option<Heightmap>,
    pub boxes: Vec<Aabb>,
    pub cylinders: Vec<Cylinder>,
    pub wall_height: f64,
}

impl Scene {
    pub fn new(
        name: impl Into<String>,
        grid: Option<OccupancyGrid>,
        heightmap: Option<Heightmap>,
        boxes: Vec<Aabb>,
        wall_height: f64,
    ) -> Result<Self, EnvironmentError> {
        if grid.is_none() && heightmap.is_none() && boxes.is_empty() {
            return Err(EnvironmentError::InvalidScene("at least one geometry source is required".into()));
        }
        if !(wall_height > 0.0) {
            return Err(EnvironmentError::InvalidScene(format!("wall height must be positive, got {wall_height}")));
        }
        for (i, b) in boxes.iter().enumerate() {
            if !(b.min.x < b.max.x && b.min.y < b.max.y && b.min.z < b.max.z) {
                return Err(EnvironmentError::InvalidScene(format!("box {i} has non-positive extent")));
            }
        }
        Ok(Self {
            name: name.into(),
            scale: None,
            grid,
            heightmap,
            boxes,
            cylinders: Vec::new(),
            wall_height,
        })
    }

    /// An unbounded flat plane; the only geometry is the ground itself.
    pub fn flat() -> Self {
        Self {
            name: "flat".into(),
            scale: None,
            grid: None,
            heightmap: None,
            boxes: Vec::new(),
            cylinders: Vec::new(),
            wall_height: 1.0,
        }
    }

    pub fn with_cylinders(mut self, cylinders: Vec<Cylinder>) -> Result<Self, EnvironmentError> {
        for (i, c) in cylinders.iter().enumerate() {
            if !(c.radius > 0.0 && c.z_min < c.z_max) {
                return Err(EnvironmentError::InvalidScene(format!("cylinder {i} has non-positive extent")));
            }
        }
        self.cylinders = cylinders;
        Ok(self)
    }

    pub fn with_scale(mut self, scale: ScaleClass) -> Self {
        self.scale = Some(scale);
        self
    }

    /// Elevation, surface normal and friction scale at a world point.
    pub fn ground_query(&self, x: f64, y: f64) -> GroundSample {
        match &self.heightmap {
            Some(hm) => hm.sample(x, y),
            None => GroundSample::flat(),
        }
    }

    /// Nearest intersection along a unit direction within `r_max`.
    pub fn raycast(&self, origin: &Vector3<f64>, direction: &Vector3<f64>, r_max: f64) -> Option<RayHit> {
        raycast::raycast(self, origin, direction, r_max)
    }

    /// Whether a vehicle footprint (length × width, centred on `pose`)
    /// overlaps an occupied cell or a box below `body_height`.
    pub fn footprint_collides(&self, pose: &Pose2, length: f64, width: f64, body_height: f64) -> bool {
        let step = self
            .grid
            .as_ref()
            .map(|g| g.resolution * 0.5)
            .unwrap_or(0.05)
            .min(length / 4.0)
            .min(width / 4.0);
        let nx = (length / step).ceil() as usize;
        let ny = (width / step).ceil() as usize;
        // per cylinder: nearest and farthest sampled distance from its axis
        let mut reach = vec![(f64::INFINITY, 0.0f64); self.cylinders.len()];
        for a in 0..=nx {
            for b in 0..=ny {
                let lx = -length / 2.0 + length * a as f64 / nx as f64;
                let ly = -width / 2.0 + width * b as f64 / ny as f64;
                let (x, y) = pose.to_world(lx, ly);
                if let Some(g) = &self.grid {
                    if g.occupied_at(x, y) {
                        return true;
                    }
                }
                let ground = self.ground_query(x, y).height;
                if self
                    .boxes
                    .iter()
                    .any(|bx| bx.contains_xy(x, y) && bx.min.z < ground + body_height && bx.max.z > ground)
                {
                    return true;
                }
                for (c, r) in self.cylinders.iter().zip(reach.iter_mut()) {
                    if c.z_min < ground + body_height && c.z_max > ground {
                        let d = (x - c.center[0]).hypot(y - c.center[1]);
                        *r = (r.0.min(d), r.1.max(d));
                    }
                }
            }
        }
        self.cylinders.iter().zip(&reach).any(|(c, r)| r.0 <= c.radius && c.radius <= r.1)
    }
}
