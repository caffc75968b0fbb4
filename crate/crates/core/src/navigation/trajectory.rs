use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NavigationError;
use crate::math::Pose2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    /// Target speed, m/s.
    pub v: f64,
}

impl Waypoint {
    pub fn distance(&self, other: &Waypoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Ordered reference path in the map frame.
///
/// Consecutive waypoints are at least `spacing` apart. A closed trajectory
/// also joins the last waypoint back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
    pub spacing: f64,
    pub closed: bool,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Waypoint>, spacing: f64, closed: bool) -> Result<Self, NavigationError> {
        if !(spacing > 0.0) {
            return Err(NavigationError::invalid("spacing", format!("must be positive, got {spacing}")));
        }
        for (i, w) in waypoints.windows(2).enumerate() {
            let d = w[0].distance(&w[1]);
            // written files carry decimal text, so allow for its rounding
            if d < spacing * (1.0 - 1e-9) {
                return Err(NavigationError::invalid(
                    "waypoints",
                    format!("waypoints {i} and {} are {d} m apart, below spacing {spacing}", i + 1),
                ));
            }
        }
        Ok(Self {
            waypoints,
            spacing,
            closed,
        })
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Number of path segments (including the closing one of a loop).
    pub fn segment_count(&self) -> usize {
        match self.waypoints.len() {
            0 | 1 => 0,
            n if self.closed => n,
            n => n - 1,
        }
    }

    pub fn segment(&self, k: usize) -> (Waypoint, Waypoint) {
        let n = self.waypoints.len();
        (self.waypoints[k % n], self.waypoints[(k + 1) % n])
    }

    pub fn length(&self) -> f64 {
        (0..self.segment_count())
            .map(|k| {
                let (a, b) = self.segment(k);
                a.distance(&b)
            })
            .sum()
    }

    /// Nearest point on the path: `(segment, fraction, distance)`.
    pub fn project(&self, x: f64, y: f64) -> Option<(usize, f64, f64)> {
        (0..self.segment_count())
            .map(|k| {
                let (t, d) = project_on_segment(self.segment(k), x, y);
                (k, t, d)
            })
            .min_by(|a, b| a.2.total_cmp(&b.2))
    }

    /// Writes `x,y,v` lines after a `# spacing=… closed=…` comment.
    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "# spacing={:?} closed={}", self.spacing, self.closed)?;
        writeln!(w, "x,y,v")?;
        for p in &self.waypoints {
            writeln!(w, "{:?},{:?},{:?}", p.x, p.y, p.v)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NavigationError> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| NavigationError::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w).map_err(|e| NavigationError::io(path, e))
    }

    /// Reads a trajectory file. Without a spacing comment the spacing is
    /// taken as the smallest gap between consecutive waypoints.
    pub fn read(r: impl BufRead) -> Result<Self, NavigationError> {
        let mut spacing = None;
        let mut closed = false;
        let mut body = String::new();
        for line in r.lines() {
            let line = line.map_err(|e| NavigationError::Format(e.to_string()))?;
            if let Some(meta) = line.trim().strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("spacing", v)) => {
                            spacing = Some(v.parse::<f64>().map_err(|_| NavigationError::Format(format!("bad spacing `{v}`")))?)
                        }
                        Some(("closed", v)) => closed = v == "true",
                        _ => {}
                    }
                }
                continue;
            }
            body.push_str(&line);
            body.push('\n');
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
        let mut waypoints = Vec::new();
        for (i, rec) in reader.deserialize::<Waypoint>().enumerate() {
            waypoints.push(rec.map_err(|e| NavigationError::Format(format!("waypoint {i}: {e}")))?);
        }
        let spacing = match spacing {
            Some(s) => s,
            None => waypoints
                .windows(2)
                .map(|w| w[0].distance(&w[1]))
                .fold(f64::INFINITY, f64::min),
        };
        let spacing = if spacing.is_finite() { spacing } else { 1.0 };
        Self::new(waypoints, spacing, closed)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NavigationError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| NavigationError::io(path, e))?;
        Self::read(std::io::BufReader::new(file))
    }
}

/// Fraction along a segment of the nearest point, and the distance to it.
pub fn project_on_segment((a, b): (Waypoint, Waypoint), x: f64, y: f64) -> (f64, f64) {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((x - a.x) * dx + (y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (t, (a.x + t * dx - x).hypot(a.y + t * dy - y))
}

/// Appends poses to a trajectory whenever the vehicle has moved at least
/// `threshold` from the last waypoint.
#[derive(Debug, Clone)]
pub struct WaypointRecorder {
    threshold: f64,
    waypoints: Vec<Waypoint>,
}

impl WaypointRecorder {
    pub fn new(threshold: f64) -> Result<Self, NavigationError> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(NavigationError::invalid("threshold", format!("must be positive, got {threshold}")));
        }
        Ok(Self {
            threshold,
            waypoints: Vec::new(),
        })
    }

    /// Returns true when the pose was recorded.
    pub fn push(&mut self, pose: &Pose2, speed: f64) -> bool {
        let w = Waypoint {
            x: pose.x,
            y: pose.y,
            v: speed,
        };
        match self.waypoints.last() {
            Some(last) if last.distance(&w) < self.threshold => false,
            _ => {
                self.waypoints.push(w);
                true
            }
        }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn finish(self, closed: bool) -> Trajectory {
        Trajectory {
            waypoints: self.waypoints,
            spacing: self.threshold,
            closed,
        }
    }
}

pub fn record_waypoints(stream: impl IntoIterator<Item = (Pose2, f64)>, threshold: f64) -> Result<Trajectory, NavigationError> {
    let mut rec = WaypointRecorder::new(threshold)?;
    for (pose, v) in stream {
        rec.push(&pose, v);
    }
    Ok(rec.finish(false))
}

/// Outcome of the kinodynamic feasibility check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LintReport {
    pub max_curvature: f64,
    /// `tan(δ_lim)/l`.
    pub curvature_limit: f64,
    /// Waypoint where the maximum curvature occurs.
    pub worst_index: usize,
    pub feasible: bool,
}

/// Three-point (circumscribed circle) curvature at every interior
/// waypoint, compared against the tightest turn the vehicle can make.
pub fn lint_trajectory(traj: &Trajectory, steering_limit: f64, wheelbase: f64) -> LintReport {
    let n = traj.waypoints.len();
    let limit = steering_limit.tan() / wheelbase;
    let mut worst = (0.0, 0);
    let range: Box<dyn Iterator<Item = usize>> = if traj.closed && n >= 3 {
        Box::new(0..n)
    } else {
        Box::new(1..n.saturating_sub(1))
    };
    for i in range {
        let a = traj.waypoints[(i + n - 1) % n];
        let b = traj.waypoints[i];
        let c = traj.waypoints[(i + 1) % n];
        let k = menger_curvature(&a, &b, &c);
        if k > worst.0 {
            worst = (k, i);
        }
    }
    LintReport {
        max_curvature: worst.0,
        curvature_limit: limit,
        worst_index: worst.1,
        feasible: worst.0 <= limit,
    }
}

pub fn menger_curvature(a: &Waypoint, b: &Waypoint, c: &Waypoint) -> f64 {
    let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    let denom = a.distance(b) * b.distance(c) * c.distance(a);
    if denom == 0.0 {
        0.0
    } else {
        2.0 * cross.abs() / denom
    }
}
