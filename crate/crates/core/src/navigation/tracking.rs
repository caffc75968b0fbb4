use serde::{Deserialize, Serialize};

use super::trajectory::{project_on_segment, Trajectory};
use super::NavigationError;
use crate::dynamics::ScaleClass;
use crate::math::Pose2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on the accumulated integral term (anti-windup).
    pub integral_limit: f64,
}

impl Default for PidConfig {
    fn default() -> Self {
        Self {
            kp: 0.5,
            ki: 1.0,
            kd: 0.0,
            integral_limit: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerConfig {
    /// Lookahead `L_d = base + gain·|v|`.
    pub lookahead_base: f64,
    pub lookahead_gain: f64,
    /// Linear pure-pursuit gain.
    pub pursuit_gain: f64,
    pub pid: PidConfig,
    /// Cap on the target speed, m/s.
    pub v_max: f64,
    pub goal_tolerance: f64,
}

impl TrackerConfig {
    pub fn for_scale(scale: ScaleClass) -> Self {
        let (base, gain, v_max, tol) = match scale {
            ScaleClass::Small => (0.6, 0.3, 2.0, 0.2),
            ScaleClass::Mid => (1.2, 0.3, 3.0, 0.4),
            ScaleClass::Full => (4.0, 0.5, 15.0, 1.5),
        };
        Self {
            lookahead_base: base,
            lookahead_gain: gain,
            pursuit_gain: 1.0,
            pid: PidConfig::default(),
            v_max,
            goal_tolerance: tol,
        }
    }

    pub fn validate(&self) -> Result<(), NavigationError> {
        if !(self.lookahead_base > 0.0) {
            return Err(NavigationError::invalid("tracker.lookahead_base", "must be positive"));
        }
        for (f, v) in [
            ("tracker.lookahead_gain", self.lookahead_gain),
            ("tracker.pursuit_gain", self.pursuit_gain),
            ("tracker.pid.kp", self.pid.kp),
            ("tracker.pid.ki", self.pid.ki),
            ("tracker.pid.kd", self.pid.kd),
            ("tracker.pid.integral_limit", self.pid.integral_limit),
            ("tracker.v_max", self.v_max),
            ("tracker.goal_tolerance", self.goal_tolerance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(NavigationError::invalid(f, format!("must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn lookahead(&self, speed: f64) -> f64 {
        self.lookahead_base + self.lookahead_gain * speed.abs()
    }
}

/// Result of one pure-pursuit evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PursuitOutput {
    /// Road-wheel angle command, rad.
    pub delta: f64,
    pub goal: [f64; 2],
    /// Lateral offset of the goal in the vehicle frame.
    pub lateral: f64,
    pub lookahead: f64,
    /// Target speed interpolated at the goal point, capped at `v_max`.
    pub target_speed: f64,
    /// Segment holding the nearest path point.
    pub segment: usize,
    /// Open path only: the goal is the final waypoint and within tolerance.
    pub finished: bool,
}

/// Segments searched around a hint when tracking progress.
const SEARCH_BEHIND: usize = 2;
const SEARCH_AHEAD: usize = 20;

/// Linearised pure pursuit: `δ = k·2·l·e_y / L_d²`, clamped to `±δ_lim`.
///
/// `pose` is the rear-axle reference. With a `hint` the nearest point is
/// searched only a few segments around the previous one, which keeps
/// crossings (figure eights) unambiguous.
pub fn pure_pursuit_steer(
    pose: &Pose2,
    traj: &Trajectory,
    cfg: &TrackerConfig,
    wheelbase: f64,
    speed: f64,
    steering_limit: f64,
    hint: Option<usize>,
) -> Result<PursuitOutput, NavigationError> {
    let nseg = traj.segment_count();
    if nseg == 0 {
        return Err(NavigationError::NoPath);
    }
    let candidates: Vec<usize> = match hint {
        Some(h) if traj.closed => (0..=SEARCH_BEHIND + SEARCH_AHEAD)
            .map(|k| (h + nseg * 2 + k - SEARCH_BEHIND) % nseg)
            .collect(),
        Some(h) => (h.saturating_sub(SEARCH_BEHIND)..(h + SEARCH_AHEAD + 1).min(nseg)).collect(),
        None => (0..nseg).collect(),
    };
    let (seg, t, _) = candidates
        .into_iter()
        .map(|k| {
            let (t, d) = project_on_segment(traj.segment(k), pose.x, pose.y);
            (k, t, d)
        })
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .expect("non-empty candidate set");

    let ld = cfg.lookahead(speed);

    if traj.length() <= 0.0 {
        return Err(NavigationError::NoPath);
    }
    // walk L_d of arc length forward from the projection
    let mut remaining = ld;
    let mut k = seg;
    let mut frac = t;
    let mut at_end = false;
    let (goal, goal_speed) = loop {
        let (p, q) = traj.segment(k);
        let len = p.distance(&q);
        let left = len * (1.0 - frac);
        if remaining <= left && len > 0.0 {
            let s = frac + remaining / len;
            break ([p.x + s * (q.x - p.x), p.y + s * (q.y - p.y)], p.v + s * (q.v - p.v));
        }
        remaining -= left;
        frac = 0.0;
        k += 1;
        if k >= nseg {
            if traj.closed {
                k = 0;
            } else {
                at_end = true;
                break ([q.x, q.y], q.v);
            }
        }
    };
    let (_, lateral) = pose.to_local(goal[0], goal[1]);
    let delta = (cfg.pursuit_gain * 2.0 * wheelbase * lateral / (ld * ld)).clamp(-steering_limit, steering_limit);
    let last = traj.waypoints[traj.waypoints.len() - 1];
    let finished = !traj.closed && at_end && (pose.x - last.x).hypot(pose.y - last.y) <= cfg.goal_tolerance.max(1e-12);
    Ok(PursuitOutput {
        delta,
        goal,
        lateral,
        lookahead: ld,
        target_speed: goal_speed.min(cfg.v_max),
        segment: seg,
        finished,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

/// Longitudinal PID with a clamped integral. Positive output is throttle,
/// negative is brake; the result lies in [−1, 1].
pub fn pid_speed(target: f64, measured: f64, state: &mut PidState, dt: f64, cfg: &PidConfig) -> f64 {
    let e = target - measured;
    state.integral = (state.integral + e * dt).clamp(-cfg.integral_limit, cfg.integral_limit);
    let de = match state.prev_error {
        Some(p) if dt > 0.0 => (e - p) / dt,
        _ => 0.0,
    };
    state.prev_error = Some(e);
    (cfg.kp * e + cfg.ki * state.integral + cfg.kd * de).clamp(-1.0, 1.0)
}
