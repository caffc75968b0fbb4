use serde::{Deserialize, Serialize};

use super::log::ParsedLog;
use crate::navigation::{project_on_segment, Trajectory};

/// Arc-length progress of a moving point along a reference path.
///
/// The nearest point is searched in a window around the previous one, so
/// self-crossing paths are followed branch by branch.
#[derive(Debug, Clone)]
pub struct Progress {
    path: Trajectory,
    cumulative: Vec<f64>,
    total: f64,
    segment: usize,
    station: f64,
    travelled: f64,
}

const WINDOW_BEHIND: usize = 3;
const WINDOW_AHEAD: usize = 30;

impl Progress {
    /// Starts at the globally nearest point to `(x, y)`. `None` for a path
    /// with no length.
    pub fn new(path: &Trajectory, x: f64, y: f64) -> Option<Self> {
        let n = path.segment_count();
        let mut cumulative = Vec::with_capacity(n + 1);
        cumulative.push(0.0);
        for k in 0..n {
            let (a, b) = path.segment(k);
            cumulative.push(cumulative[k] + a.distance(&b));
        }
        let total = cumulative[n];
        if !(total > 0.0) {
            return None;
        }
        let (segment, t, _) = path.project(x, y)?;
        let mut p = Self {
            path: path.clone(),
            cumulative,
            total,
            segment,
            station: 0.0,
            travelled: 0.0,
        };
        p.station = p.station_of(segment, t);
        Some(p)
    }

    fn station_of(&self, seg: usize, t: f64) -> f64 {
        let (a, b) = self.path.segment(seg);
        self.cumulative[seg] + t * a.distance(&b)
    }

    /// Advances to `(x, y)`; returns the distance to the path.
    pub fn update(&mut self, x: f64, y: f64) -> f64 {
        let n = self.path.segment_count();
        let candidates: Vec<usize> = if self.path.closed {
            (0..=WINDOW_BEHIND + WINDOW_AHEAD)
                .map(|k| (self.segment + 2 * n + k - WINDOW_BEHIND) % n)
                .collect()
        } else {
            (self.segment.saturating_sub(WINDOW_BEHIND)..(self.segment + WINDOW_AHEAD + 1).min(n)).collect()
        };
        let (seg, t, d) = candidates
            .into_iter()
            .map(|k| {
                let (t, d) = project_on_segment(self.path.segment(k), x, y);
                (k, t, d)
            })
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .expect("path has segments");
        let s = self.station_of(seg, t);
        let mut ds = s - self.station;
        if self.path.closed {
            if ds > self.total / 2.0 {
                ds -= self.total;
            } else if ds < -self.total / 2.0 {
                ds += self.total;
            }
        }
        self.travelled += ds;
        self.station = s;
        self.segment = seg;
        d
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn travelled(&self) -> f64 {
        self.travelled
    }

    /// Travelled arc length as a fraction of the path length.
    pub fn completion(&self) -> f64 {
        self.travelled / self.total
    }

    pub fn segment(&self) -> usize {
        self.segment
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreReport {
    pub samples: usize,
    pub max_cross_track: f64,
    pub mean_cross_track: f64,
    pub completion: f64,
    /// RMS of logged speed minus the trajectory's target speed.
    pub speed_rms: f64,
}

/// Scores the logged rear-axle track against a trajectory.
pub fn score(log: &ParsedLog, traj: &Trajectory) -> ScoreReport {
    score_states(&log.states().iter().map(|s| (s.reference.x, s.reference.y, s.velocity[0])).collect::<Vec<_>>(), traj)
}

/// Scores `(x, y, speed)` samples against a trajectory.
pub fn score_states(samples: &[(f64, f64, f64)], traj: &Trajectory) -> ScoreReport {
    let Some(&(x0, y0, _)) = samples.first() else {
        return ScoreReport::default();
    };
    let Some(mut progress) = Progress::new(traj, x0, y0) else {
        return ScoreReport::default();
    };
    let (mut max, mut sum, mut sq) = (0.0f64, 0.0, 0.0);
    for &(x, y, v) in samples {
        let d = progress.update(x, y);
        max = max.max(d);
        sum += d;
        let (a, b) = traj.segment(progress.segment());
        let (t, _) = project_on_segment((a, b), x, y);
        let target = a.v + t * (b.v - a.v);
        sq += (v - target).powi(2);
    }
    let n = samples.len() as f64;
    ScoreReport {
        samples: samples.len(),
        max_cross_track: max,
        mean_cross_track: sum / n,
        completion: progress.completion(),
        speed_rms: (sq / n).sqrt(),
    }
}
