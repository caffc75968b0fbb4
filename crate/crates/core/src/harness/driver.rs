use super::config::PoseSource;
use super::HarnessError;
use crate::dynamics::{ActuatorCommand, VehicleState};
use crate::math::Pose2;
use crate::navigation::{pid_speed, pure_pursuit_steer, OdometryEstimate, PidState, TrackerConfig, Trajectory, Waypoint};

/// What a command source may look at on each tick.
#[derive(Debug, Clone, Copy)]
pub struct ControlInput<'a> {
    pub tick: u64,
    pub state: &'a VehicleState,
    /// True rear-axle pose.
    pub truth: Pose2,
    /// Odometry estimate of the rear-axle pose.
    pub estimate: &'a OdometryEstimate,
}

/// Produces the actuator command applied on each tick.
pub trait CommandSource: Send {
    fn command(&mut self, input: &ControlInput<'_>) -> Result<ActuatorCommand, HarnessError>;
}

/// Always commands zero (no client attached).
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroCommand;

impl CommandSource for ZeroCommand {
    fn command(&mut self, _: &ControlInput<'_>) -> Result<ActuatorCommand, HarnessError> {
        Ok(ActuatorCommand::default())
    }
}

/// Re-issues logged commands: on tick `k` the latest command logged at a
/// tick `≤ k`.
#[derive(Debug, Clone)]
pub struct CommandReplay {
    commands: Vec<(u64, ActuatorCommand)>,
    next: usize,
    current: ActuatorCommand,
}

impl CommandReplay {
    pub fn new(commands: Vec<(u64, ActuatorCommand)>) -> Self {
        Self {
            commands,
            next: 0,
            current: ActuatorCommand::default(),
        }
    }
}

impl CommandSource for CommandReplay {
    fn command(&mut self, input: &ControlInput<'_>) -> Result<ActuatorCommand, HarnessError> {
        while let Some((t, c)) = self.commands.get(self.next) {
            if *t > input.tick {
                break;
            }
            self.current = *c;
            self.next += 1;
        }
        Ok(self.current)
    }
}

/// Pure pursuit on steering and PID on speed, updated at the control rate
/// and held in between.
#[derive(Debug, Clone)]
pub struct PathFollower {
    pub trajectory: Trajectory,
    pub tracker: TrackerConfig,
    pub pose: PoseSource,
    wheelbase: f64,
    steering_limit: f64,
    period: u64,
    control_dt: f64,
    hint: Option<usize>,
    pid: PidState,
    current: ActuatorCommand,
}

impl PathFollower {
    pub fn new(
        trajectory: Trajectory,
        tracker: TrackerConfig,
        pose: PoseSource,
        wheelbase: f64,
        steering_limit: f64,
        period: u64,
        dt: f64,
    ) -> Result<Self, HarnessError> {
        tracker.validate()?;
        if trajectory.segment_count() == 0 || trajectory.length() <= 0.0 {
            return Err(crate::navigation::NavigationError::NoPath.into());
        }
        let period = period.max(1);
        Ok(Self {
            trajectory,
            tracker,
            pose,
            wheelbase,
            steering_limit,
            period,
            control_dt: period as f64 * dt,
            hint: None,
            pid: PidState::default(),
            current: ActuatorCommand::default(),
        })
    }
}

impl CommandSource for PathFollower {
    fn command(&mut self, input: &ControlInput<'_>) -> Result<ActuatorCommand, HarnessError> {
        if input.tick % self.period != 0 {
            return Ok(self.current);
        }
        let (pose, speed) = match self.pose {
            PoseSource::Truth => (input.truth, input.state.velocity.x),
            PoseSource::Odometry => (input.estimate.pose, input.estimate.speed),
        };
        let out = pure_pursuit_steer(
            &pose,
            &self.trajectory,
            &self.tracker,
            self.wheelbase,
            speed,
            self.steering_limit,
            self.hint,
        )?;
        self.hint = Some(out.segment);
        let steering = out.delta / self.steering_limit;
        self.current = if out.finished {
            ActuatorCommand {
                steering,
                brake: 1.0,
                ..Default::default()
            }
        } else {
            let u = pid_speed(out.target_speed, speed, &mut self.pid, self.control_dt, &self.tracker.pid);
            ActuatorCommand {
                throttle: u.max(0.0),
                steering,
                brake: (-u).max(0.0),
                ..Default::default()
            }
        };
        Ok(self.current)
    }
}

/// Turns a sampled driving line into a trajectory with a constant target
/// speed. `None` for fewer than two distinct points.
pub fn centerline_trajectory(points: &[[f64; 2]], closed: bool, speed: f64) -> Option<Trajectory> {
    let mut wps: Vec<Waypoint> = Vec::with_capacity(points.len());
    for p in points {
        let w = Waypoint { x: p[0], y: p[1], v: speed };
        if wps.last().map_or(true, |l| l.distance(&w) > 1e-6) {
            wps.push(w);
        }
    }
    if closed && wps.len() > 2 && wps[0].distance(&wps[wps.len() - 1]) <= 1e-6 {
        wps.pop();
    }
    if wps.len() < 2 {
        return None;
    }
    let spacing = wps.windows(2).map(|w| w[0].distance(&w[1])).fold(f64::INFINITY, f64::min);
    Trajectory::new(wps, spacing, closed).ok()
}
