//! Shipped scenes.
//!
//! | id            | geometry                                              |
//! |---------------|-------------------------------------------------------|
//! | `parking_lot` | flat ground, rows of parked boxes, perimeter walls     |
//! | `oval`        | grid stadium: 6 m straights, 2 m turns, 1.2 m wide     |
//! | `eight`       | grid figure eight of two 2 m loops, 1.2 m wide         |
//! | `racetrack`   | shipped PGM map of a twisty closed circuit, 1 m wide   |
//! | `offroad`     | rolling heightmap with a low-friction patch and rocks  |
//!
//! Geometry is sized for the 1:10 class. Walls are extruded to twice the
//! vehicle height so planar and spatial LIDARs see the same obstacles.

use std::f64::consts::PI;

use super::grid::{Cell, OccupancyGrid};
use super::heightmap::Heightmap;
use super::mapio::load_map_from_memory;
use super::scene::{Aabb, Scene};
use super::EnvironmentError;
use crate::dynamics::ScaleClass;
use crate::math::Pose2;

const RACETRACK_YAML: &str = include_str!("../../scenes/racetrack.yaml");
const RACETRACK_PGM: &[u8] = include_bytes!("../../scenes/racetrack.pgm");
const RACETRACK_CENTERLINE: &str = include_str!("../../scenes/racetrack_centerline.csv");

/// Wall height used by every shipped scene, m.
pub const WALL_HEIGHT: f64 = 0.4;

pub const IDS: [&str; 5] = ["parking_lot", "oval", "eight", "racetrack", "offroad"];

/// Track width of the grid circuits, m.
pub const TRACK_WIDTH: f64 = 1.2;
const WALL_THICKNESS: f64 = 0.1;
const GRID_RESOLUTION: f64 = 0.05;

/// A scene plus a start pose and the ground-truth driving line.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub scene: Scene,
    pub start: Pose2,
    /// Driving line in the world frame, sampled every few centimetres.
    pub centerline: Vec<[f64; 2]>,
    pub closed: bool,
}

pub fn build(id: &str, wall_height: f64) -> Result<Scenario, EnvironmentError> {
    let s = match id {
        "parking_lot" => parking_lot(wall_height)?,
        "oval" => oval(wall_height)?,
        "eight" => eight(wall_height)?,
        "racetrack" => racetrack(wall_height)?,
        "offroad" => offroad()?,
        other => return Err(EnvironmentError::UnknownScenario(other.to_string())),
    };
    Ok(Scenario {
        scene: s.scene.with_scale(ScaleClass::Small),
        ..s
    })
}

/// Rasterizes a corridor of `TRACK_WIDTH` around a centreline distance
/// function: free inside, a wall band outside it, unknown beyond.
fn corridor_grid(width: usize, height: usize, origin: Pose2, distance: impl Fn(f64, f64) -> f64) -> OccupancyGrid {
    let mut g = OccupancyGrid::new(width, height, GRID_RESOLUTION, origin, Cell::Unknown);
    let half = TRACK_WIDTH / 2.0;
    for cy in 0..height {
        for cx in 0..width {
            let (x, y) = g.cell_center(cx, cy);
            let d = distance(x, y);
            let cell = if d <= half {
                Cell::Free
            } else if d <= half + WALL_THICKNESS {
                Cell::Occupied
            } else {
                Cell::Unknown
            };
            g.set(cx, cy, cell);
        }
    }
    g
}

const OVAL_STRAIGHT: f64 = 6.0;
const OVAL_RADIUS: f64 = 2.0;

/// Distance from a point to the oval's centreline.
pub fn oval_distance(x: f64, y: f64) -> f64 {
    let h = OVAL_STRAIGHT / 2.0;
    if x.abs() <= h {
        (y.abs() - OVAL_RADIUS).abs()
    } else {
        ((x.abs() - h).hypot(y) - OVAL_RADIUS).abs()
    }
}

/// Counter-clockwise oval centreline starting at the middle of the lower straight.
pub fn oval_centerline(spacing: f64) -> Vec<[f64; 2]> {
    let h = OVAL_STRAIGHT / 2.0;
    let r = OVAL_RADIUS;
    let total = 2.0 * OVAL_STRAIGHT + 2.0 * PI * r;
    let n = (total / spacing).round() as usize;
    (0..n)
        .map(|k| {
            // arc length from the start, then walk the four pieces
            let mut s = k as f64 * total / n as f64;
            if s < h {
                return [s, -r];
            }
            s -= h;
            if s < PI * r {
                let a = -PI / 2.0 + s / r;
                return [h + r * a.cos(), r * a.sin()];
            }
            s -= PI * r;
            if s < OVAL_STRAIGHT {
                return [h - s, r];
            }
            s -= OVAL_STRAIGHT;
            if s < PI * r {
                let a = PI / 2.0 + s / r;
                return [-h + r * a.cos(), r * a.sin()];
            }
            s -= PI * r;
            [-h + s, -r]
        })
        .collect()
}

fn oval(wall_height: f64) -> Result<Scenario, EnvironmentError> {
    let grid = corridor_grid(240, 140, Pose2::new(-6.0, -3.5, 0.0), oval_distance);
    Ok(Scenario {
        id: "oval".into(),
        scene: Scene::new("oval", Some(grid), None, vec![], wall_height)?,
        start: Pose2::new(0.0, -OVAL_RADIUS, 0.0),
        centerline: oval_centerline(0.05),
        closed: true,
    })
}

const EIGHT_RADIUS: f64 = 2.0;

fn eight_distance(x: f64, y: f64) -> f64 {
    let r = EIGHT_RADIUS;
    ((x + r).hypot(y) - r).abs().min(((x - r).hypot(y) - r).abs())
}

fn eight(wall_height: f64) -> Result<Scenario, EnvironmentError> {
    let grid = corridor_grid(200, 120, Pose2::new(-5.0, -3.0, 0.0), eight_distance);
    let r = EIGHT_RADIUS;
    let n = (2.0 * PI * r / 0.05).round() as usize;
    let mut line = Vec::with_capacity(2 * n);
    // left loop counter-clockwise from the crossing, then the right loop clockwise
    for k in 0..n {
        let a = 2.0 * PI * k as f64 / n as f64;
        line.push([-r + r * a.cos(), r * a.sin()]);
    }
    for k in 0..n {
        let a = PI - 2.0 * PI * k as f64 / n as f64;
        line.push([r + r * a.cos(), r * a.sin()]);
    }
    Ok(Scenario {
        id: "eight".into(),
        scene: Scene::new("eight", Some(grid), None, vec![], wall_height)?,
        start: Pose2::new(0.0, 0.0, PI / 2.0),
        centerline: line,
        closed: true,
    })
}

fn racetrack(wall_height: f64) -> Result<Scenario, EnvironmentError> {
    let grid = load_map_from_memory(RACETRACK_YAML, RACETRACK_PGM)?;
    let centerline: Vec<[f64; 2]> = RACETRACK_CENTERLINE
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split(',').map(|v| v.trim().parse::<f64>().unwrap_or(f64::NAN));
            [it.next().unwrap_or(f64::NAN), it.next().unwrap_or(f64::NAN)]
        })
        .collect();
    let [x0, y0] = centerline[0];
    let [x1, y1] = centerline[1];
    Ok(Scenario {
        id: "racetrack".into(),
        scene: Scene::new("racetrack", Some(grid), None, vec![], wall_height)?,
        start: Pose2::new(x0, y0, (y1 - y0).atan2(x1 - x0)),
        centerline,
        closed: true,
    })
}

fn parking_lot(wall_height: f64) -> Result<Scenario, EnvironmentError> {
    let mut boxes = Vec::new();
    // two rows of parked cars either side of a central island
    for k in 0..6 {
        let x = -2.5 + k as f64;
        boxes.push(Aabb::standing(x, 0.55, 0.25, 0.5, 0.15));
        boxes.push(Aabb::standing(x, -0.55, 0.25, 0.5, 0.15));
    }
    // perimeter
    let (hx, hy, t) = (5.0, 3.0, 0.1);
    boxes.push(Aabb::standing(0.0, hy, 2.0 * hx, t, wall_height));
    boxes.push(Aabb::standing(0.0, -hy, 2.0 * hx, t, wall_height));
    boxes.push(Aabb::standing(hx, 0.0, t, 2.0 * hy, wall_height));
    boxes.push(Aabb::standing(-hx, 0.0, t, 2.0 * hy, wall_height));
    // aisle loop around the car rows
    let (ax, ay, r) = (3.4, 1.9, 1.0);
    let mut line = Vec::new();
    let mut push_arc = |cx: f64, cy: f64, a0: f64| {
        for k in 0..32 {
            let a = a0 + PI / 2.0 * k as f64 / 32.0;
            line.push([cx + r * a.cos(), cy + r * a.sin()]);
        }
    };
    push_arc(ax - r, -ay + r, -PI / 2.0);
    push_arc(ax - r, ay - r, 0.0);
    push_arc(-ax + r, ay - r, PI / 2.0);
    push_arc(-ax + r, -ay + r, PI);
    let line = resample_closed(&line, 0.05);
    Ok(Scenario {
        id: "parking_lot".into(),
        scene: Scene::new("parking_lot", None, None, boxes, wall_height)?,
        start: Pose2::new(line[0][0], line[0][1], 0.0),
        centerline: line,
        closed: true,
    })
}

fn offroad() -> Result<Scenario, EnvironmentError> {
    let mut hm = Heightmap::from_fn(161, 161, 0.1, [-8.0, -8.0], |x, y| {
        0.12 * (0.6 * x).sin() * (0.45 * y).cos() + 0.05 * (1.3 * x + 0.7 * y).sin()
    })?;
    // muddy patch on the far side of the loop
    for j in 0..hm.height {
        for i in 0..hm.width {
            let x = hm.origin[0] + i as f64 * hm.resolution;
            let y = hm.origin[1] + j as f64 * hm.resolution;
            if (x + 4.0).hypot(y) < 1.5 {
                hm.friction[j * hm.width + i] = 0.6;
            }
        }
    }
    let rocks = vec![
        Aabb::standing(0.0, 0.0, 0.6, 0.6, 0.4),
        Aabb::standing(2.0, 2.5, 0.4, 0.3, 0.3),
        Aabb::standing(-1.5, -2.0, 0.3, 0.5, 0.3),
    ];
    let n = (2.0 * PI * 4.0 / 0.05).round() as usize;
    let line: Vec<[f64; 2]> = (0..n)
        .map(|k| {
            let a = -PI / 2.0 + 2.0 * PI * k as f64 / n as f64;
            [4.0 * a.cos(), 4.0 * a.sin()]
        })
        .collect();
    Ok(Scenario {
        id: "offroad".into(),
        scene: Scene::new("offroad", None, Some(hm), rocks, 1.0)?,
        start: Pose2::new(0.0, -4.0, 0.0),
        centerline: line,
        closed: true,
    })
}

/// Resamples a closed polyline at (approximately) uniform arc length.
pub fn resample_closed(points: &[[f64; 2]], spacing: f64) -> Vec<[f64; 2]> {
    let n = points.len();
    let mut cum = vec![0.0; n + 1];
    for i in 0..n {
        let [ax, ay] = points[i];
        let [bx, by] = points[(i + 1) % n];
        cum[i + 1] = cum[i] + (bx - ax).hypot(by - ay);
    }
    let total = cum[n];
    let m = (total / spacing).round().max(3.0) as usize;
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    for k in 0..m {
        let s = total * k as f64 / m as f64;
        while cum[seg + 1] < s {
            seg += 1;
        }
        let t = (s - cum[seg]) / (cum[seg + 1] - cum[seg]).max(1e-12);
        let [ax, ay] = points[seg];
        let [bx, by] = points[(seg + 1) % n];
        out.push([ax + t * (bx - ax), ay + t * (by - ay)]);
    }
    out
}
