use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use super::config::{DriverConfig, Mode, PoseSource, ScenarioConfig};
use super::driver::{centerline_trajectory, CommandReplay, CommandSource, ControlInput, PathFollower, ZeroCommand};
use super::log::{
    body_pose_from_rear, load_log, rear_axle_pose, LogHeader, LogRecord, LogSummary, LogWriter, ParsedLog, SensorDigest, SharedBuffer,
    StateSnapshot, TickRecord, LOG_QUEUE_CAPACITY, LOG_VERSION,
};
use super::score::Progress;
use super::{HarnessError, RunMetrics};
use crate::dynamics::{step_vehicle, ActuatorCommand, DynamicsError, VehicleParams, VehicleState};
use crate::environment::scenarios::{self, Scenario, WALL_HEIGHT};
use crate::environment::{save_map, Scene, DEFAULT_FREE_THRESH, DEFAULT_OCCUPIED_THRESH};
use crate::math::Pose2;
use crate::navigation::{
    boundary_recall, update_occupancy, LogOddsMap, NavigationError, OdometryConfig, OdometryEstimate, TrackerConfig, Trajectory,
    Waypoint, WaypointRecorder,
};
use crate::navigation::fuse_odometry;
use crate::sensors::{period_ticks, SensorFrame, SensorSuite};
use crate::PHYSICS_DT;

/// Requests an observer can make between ticks.
#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    SetMapping(bool),
    SetRecording(bool),
    SaveMap(PathBuf),
    SaveTrajectory(PathBuf),
    /// Switch to tracking the recorded (or configured) trajectory.
    EngageTracking,
    Stop,
}

/// Read-only view of the run after a tick.
pub struct TickView<'a> {
    pub state: &'a VehicleState,
    pub params: &'a VehicleParams,
    /// Readings taken before the step.
    pub frame: &'a SensorFrame,
    pub command: &'a ActuatorCommand,
    pub estimate: &'a OdometryEstimate,
    pub mapping: bool,
    pub recording: bool,
    pub tracking: bool,
    pub map: &'a LogOddsMap,
    pub waypoints: &'a [Waypoint],
    pub completion: f64,
}

/// Callbacks into a running scenario, used by the telemetry server.
pub trait RunObserver {
    fn on_tick(&mut self, view: &TickView<'_>) -> Vec<Directive>;

    /// Result of a directive: a message, usually a file path, or an error.
    fn on_directive(&mut self, _directive: &Directive, _result: Result<String, &HarnessError>) {}

    fn on_finish(&mut self, _metrics: &RunMetrics) {}
}

#[derive(Default)]
pub struct RunHooks<'a> {
    /// Replaces the zero command of an external driver.
    pub source: Option<Box<dyn CommandSource + 'a>>,
    pub observer: Option<&'a mut dyn RunObserver>,
}

pub struct RunOutput {
    pub metrics: RunMetrics,
    pub final_state: VehicleState,
    /// The log text when no output directory is configured.
    pub log: Vec<u8>,
    pub log_path: Option<PathBuf>,
    pub map: Option<LogOddsMap>,
    pub trajectory: Option<Trajectory>,
}

impl RunOutput {
    /// Reads the log back from memory or from disk.
    pub fn parsed_log(&self) -> Result<ParsedLog, HarnessError> {
        match &self.log_path {
            Some(p) => load_log(p),
            None => super::log::read_log(self.log.as_slice()),
        }
    }
}

/// Builds a shipped scenario, or `flat` for an empty plane.
pub fn resolve_scene(id: &str) -> Result<Scenario, HarnessError> {
    if id == "flat" {
        return Ok(Scenario {
            id: "flat".into(),
            scene: Scene::flat(),
            start: Pose2::default(),
            centerline: Vec::new(),
            closed: false,
        });
    }
    Ok(scenarios::build(id, WALL_HEIGHT)?)
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput, HarnessError> {
    run_scenario_with(config, RunHooks::default())
}

pub fn run_scenario_with(config: &ScenarioConfig, hooks: RunHooks<'_>) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let params = config.vehicle_params()?;
    let scenario = resolve_scene(&config.scene)?;
    let RunHooks { source, observer } = hooks;
    let tracker = config.tracker.unwrap_or_else(|| TrackerConfig::for_scale(params.scale));
    let period = period_ticks(config.control_rate, PHYSICS_DT);

    let logged_commands = |path: &Path| -> Result<(CommandReplay, u64), HarnessError> {
        let log = load_log(path)?;
        let expected = config.world_hash()?;
        if log.header.world_hash != expected {
            return Err(HarnessError::HashMismatch {
                expected,
                found: log.header.world_hash,
            });
        }
        Ok((CommandReplay::new(log.commands()), log.final_tick()))
    };

    let (plan, reference): (Plan<'_>, Option<Trajectory>) = match config.mode {
        Mode::Replay => {
            let (replay, limit) = logged_commands(config.commands.as_deref().expect("validated"))?;
            (Plan::replay(Box::new(replay), limit), None)
        }
        Mode::Teleop | Mode::Record => {
            let plan = match (&config.commands, config.driver) {
                (Some(path), _) => {
                    let (replay, limit) = logged_commands(path)?;
                    Plan {
                        source: Box::new(replay),
                        limit: Some(limit),
                        honour_stops: true,
                    }
                }
                (None, DriverConfig::External) => Plan::open(source.unwrap_or_else(|| Box::new(ZeroCommand))),
                (None, DriverConfig::Scripted { speed }) => {
                    let line = centerline_trajectory(&scenario.centerline, scenario.closed, speed).ok_or(NavigationError::NoPath)?;
                    let follower = PathFollower::new(
                        line,
                        tracker,
                        PoseSource::Truth,
                        params.body.wheelbase,
                        params.steering.limit,
                        period,
                        PHYSICS_DT,
                    )?;
                    Plan::open(Box::new(follower))
                }
            };
            (plan, None)
        }
        Mode::Track => {
            let path = config.trajectory.as_deref().expect("validated");
            let traj = Trajectory::load(path)?;
            if traj.segment_count() == 0 {
                return Err(NavigationError::NoPath.into());
            }
            let follower = PathFollower::new(
                traj.clone(),
                tracker,
                config.localization,
                params.body.wheelbase,
                params.steering.limit,
                period,
                PHYSICS_DT,
            )?;
            (Plan::open(Box::new(follower)), Some(traj))
        }
    };
    execute(config, &params, &scenario, plan, reference, tracker, observer)
}

/// Re-runs a parsed log's commands in a fresh world built from its header.
pub fn replay(log: &ParsedLog, output: Option<PathBuf>) -> Result<RunOutput, HarnessError> {
    let mut config = log.header.config.clone();
    config.mode = Mode::Replay;
    config.output = output;
    config.realtime = false;
    let params = config.vehicle_params()?;
    let found = config.world_hash()?;
    if found != log.header.world_hash {
        return Err(HarnessError::HashMismatch {
            expected: log.header.world_hash.clone(),
            found,
        });
    }
    let scenario = resolve_scene(&config.scene)?;
    let tracker = config.tracker.unwrap_or_else(|| TrackerConfig::for_scale(params.scale));
    let plan = Plan::replay(Box::new(CommandReplay::new(log.commands())), log.final_tick());
    execute(&config, &params, &scenario, plan, None, tracker, None)
}

/// Loads and replays a log file. With `expected`, the log must come from
/// the same world (vehicle, scene, seed, sensors).
pub fn replay_file(path: impl AsRef<Path>, expected: Option<&ScenarioConfig>, output: Option<PathBuf>) -> Result<RunOutput, HarnessError> {
    let path = path.as_ref();
    let log = load_log(path)?;
    if let Some(cfg) = expected {
        let want = cfg.world_hash()?;
        if want != log.header.world_hash {
            return Err(HarnessError::HashMismatch {
                expected: want,
                found: log.header.world_hash,
            });
        }
    }
    let mut log = log;
    log.header.config.commands = Some(path.to_path_buf());
    replay(&log, output)
}

struct Plan<'a> {
    source: Box<dyn CommandSource + 'a>,
    /// Ticks available from an input log.
    limit: Option<u64>,
    /// Whether laps, collisions and the duration end the run.
    honour_stops: bool,
}

impl<'a> Plan<'a> {
    fn open(source: Box<dyn CommandSource + 'a>) -> Self {
        Self {
            source,
            limit: None,
            honour_stops: true,
        }
    }

    fn replay(source: Box<dyn CommandSource + 'a>, limit: u64) -> Self {
        Self {
            source,
            limit: Some(limit),
            honour_stops: false,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::io(path, e)
}

fn execute(
    config: &ScenarioConfig,
    params: &VehicleParams,
    scenario: &Scenario,
    mut plan: Plan<'_>,
    track_reference: Option<Trajectory>,
    tracker: TrackerConfig,
    mut observer: Option<&mut dyn RunObserver>,
) -> Result<RunOutput, HarnessError> {
    let scene = &scenario.scene;
    let dt = PHYSICS_DT;

    let out_dir = config.output.clone();
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let buffer = SharedBuffer::default();
    let (writer, log_path) = match &out_dir {
        Some(dir) => {
            let p = dir.join("run.jsonl");
            let f = File::create(&p).map_err(io_err(&p))?;
            (LogWriter::spawn(f, LOG_QUEUE_CAPACITY), Some(p))
        }
        None => (LogWriter::spawn(buffer.clone(), LOG_QUEUE_CAPACITY), None),
    };
    writer.write(&LogRecord::Header(LogHeader {
        version: LOG_VERSION,
        config_hash: config.hash(),
        world_hash: config.world_hash()?,
        config: config.clone(),
    }))?;

    let ground = scene.ground_query(scenario.start.x, scenario.start.y).height;
    let mut state = VehicleState::at_rest(params, scenario.start, ground);
    let mut suite = SensorSuite::new(config.sensors.clone(), config.seed, dt)?;
    let r_max = config.sensors.lidar.as_ref().map(|l| l.r_max).unwrap_or(0.0);

    // rear encoders: their mean is the rear-axle speed even in turns
    let mut odo_cfg = OdometryConfig::new(params.wheels.radius, config.sensors.encoder, [false, false, true, true]);
    odo_cfg.alpha = config.odometry_alpha;
    odo_cfg.validate()?;
    let mut estimate = OdometryEstimate::anchored(
        rear_axle_pose(&state.pose2(), params),
        crate::sensors::wheel_ticks(&state, &config.sensors.encoder),
        state.time,
    );

    let mut map = match &scene.grid {
        Some(g) => LogOddsMap::like(g, config.mapping.log_odds),
        None => LogOddsMap::new(
            400,
            400,
            0.05,
            Pose2::new(scenario.start.x - 10.0, scenario.start.y - 10.0, 0.0),
            config.mapping.log_odds,
        ),
    };
    let mut mapping = config.mapping.enabled;
    let mut mapped_scans = 0usize;
    let mut scans = 0u64;

    let mut recorder = if config.mode == Mode::Record {
        Some(WaypointRecorder::new(config.recording.threshold)?)
    } else {
        None
    };
    let mut recorded_from_start = recorder.is_some();
    let mut lap_mark: Option<usize> = None;
    let mut finished_recording: Option<Trajectory> = None;
    let mut tracking = config.mode == Mode::Track;

    let reference = track_reference.or_else(|| centerline_trajectory(&scenario.centerline, scenario.closed, 0.0));
    let mut progress = reference.as_ref().and_then(|r| {
        let p = rear_axle_pose(&state.pose2(), params);
        Progress::new(r, p.x, p.y)
    });

    let duration_ticks = (config.duration / dt).round() as u64;
    let max_ticks = match plan.limit {
        Some(l) if plan.honour_stops => l.min(duration_ticks),
        Some(l) => l,
        None => duration_ticks,
    };
    let laps = if plan.honour_stops { config.laps } else { None };

    let mut metrics = RunMetrics {
        ticks: 0,
        sim_time: 0.0,
        distance: 0.0,
        completion: 0.0,
        lap_times: Vec::new(),
        max_cross_track: 0.0,
        mean_cross_track: 0.0,
        collision: false,
        collision_tick: None,
        final_pose: state.pose2(),
        map_recall: None,
        waypoints: None,
    };
    let mut cross_sum = 0.0;
    let mut last_command: Option<ActuatorCommand> = None;
    let clock = Instant::now();
    let mut stop = false;

    while state.tick < max_ticks && !stop {
        let tick = state.tick;
        let frame = suite.sample(&state, scene);
        let truth = rear_axle_pose(&state.pose2(), params);

        if let Some(ins) = &frame.ins {
            let step = ins.timestamp - estimate.timestamp;
            estimate = fuse_odometry(frame.encoder_ticks, ins, &estimate, step, &odo_cfg);
        }
        if let (Some(ranges), Some(lidar)) = (&frame.scan, &config.sensors.lidar) {
            scans += 1;
            if mapping && (scans - 1) % config.mapping.every as u64 == 0 {
                let body = match config.mapping.pose {
                    PoseSource::Truth => state.pose2(),
                    PoseSource::Odometry => body_pose_from_rear(&estimate.pose, params),
                };
                let (sx, sy) = body.to_world(lidar.mount.xyz[0], lidar.mount.xyz[1]);
                update_occupancy(&mut map, ranges, &Pose2::new(sx, sy, body.yaw + lidar.mount.rpy[2]), lidar);
                mapped_scans += 1;
            }
        }
        if let Some(rec) = recorder.as_mut() {
            let (pose, speed) = match config.localization {
                PoseSource::Truth => (truth, state.velocity.x),
                PoseSource::Odometry => (estimate.pose, estimate.speed),
            };
            rec.push(&pose, speed);
        }

        let input = ControlInput {
            tick,
            state: &state,
            truth,
            estimate: &estimate,
        };
        let command = plan.source.command(&input)?.clamped();

        let mut record = TickRecord {
            tick,
            command: (last_command != Some(command)).then_some(command),
            state: None,
            sensors: None,
        };
        last_command = Some(command);
        if tick % config.log_interval == 0 {
            record.state = Some(StateSnapshot::of(&state, params));
            record.sensors = Some(SensorDigest::of(&frame, r_max));
        }
        if let (Some(cloud), Some(dir)) = (&frame.cloud, &out_dir) {
            let rel = format!("clouds/{tick:08}.twpc");
            let p = dir.join(&rel);
            std::fs::create_dir_all(dir.join("clouds")).map_err(io_err(dir))?;
            std::fs::write(&p, cloud.encode()).map_err(io_err(&p))?;
            record.sensors.get_or_insert_with(|| SensorDigest::of(&frame, r_max)).cloud = Some(rel);
        }
        if record.command.is_some() || record.state.is_some() || record.sensors.is_some() {
            writer.write(&LogRecord::Tick(record))?;
        }

        state = step_vehicle(params, &state, &command, scene, dt).map_err(|e| match e {
            DynamicsError::Diverged { .. } => HarnessError::Diverged { tick, source: e },
            other => other.into(),
        })?;

        let rear = rear_axle_pose(&state.pose2(), params);
        metrics.distance += rear.distance(&truth);
        if let Some(p) = progress.as_mut() {
            let d = p.update(rear.x, rear.y);
            metrics.max_cross_track = metrics.max_cross_track.max(d);
            cross_sum += d;
            let done = p.completion();
            while done >= (metrics.lap_times.len() + 1) as f64 {
                metrics.lap_times.push(state.time);
            }
            if lap_mark.is_none() && recorded_from_start && done >= 1.0 {
                lap_mark = recorder.as_ref().map(|r| r.len());
            }
            if laps.is_some_and(|l| done >= l) {
                stop = true;
            }
        }
        if !metrics.collision && scene.footprint_collides(&state.pose2(), params.body.footprint[0], params.body.footprint[1], params.body.height) {
            metrics.collision = true;
            metrics.collision_tick = Some(state.tick);
            if plan.honour_stops {
                stop = true;
            }
        }

        if let Some(obs) = observer.as_deref_mut() {
            let empty: &[Waypoint] = &[];
            let view = TickView {
                state: &state,
                params,
                frame: &frame,
                command: &command,
                estimate: &estimate,
                mapping,
                recording: recorder.is_some(),
                tracking,
                map: &map,
                waypoints: recorder.as_ref().map_or(empty, |r| r.waypoints()),
                completion: progress.as_ref().map_or(0.0, |p| p.completion()),
            };
            for d in obs.on_tick(&view) {
                let result: Result<String, HarnessError> = match &d {
                    Directive::SetMapping(on) => {
                        mapping = *on;
                        Ok(format!("mapping {}", if *on { "on" } else { "off" }))
                    }
                    Directive::SetRecording(true) => {
                        if recorder.is_none() {
                            recorder = Some(WaypointRecorder::new(config.recording.threshold)?);
                            recorded_from_start = false;
                        }
                        Ok("recording on".into())
                    }
                    Directive::SetRecording(false) => {
                        if let Some(r) = recorder.take() {
                            finished_recording = Some(r.finish(false));
                        }
                        Ok("recording off".into())
                    }
                    Directive::SaveMap(path) => save_map(&map.to_grid(DEFAULT_OCCUPIED_THRESH, DEFAULT_FREE_THRESH), path)
                        .map(|_| path.display().to_string())
                        .map_err(HarnessError::from),
                    Directive::SaveTrajectory(path) => {
                        let t = recorder.as_ref().map(|r| r.clone().finish(false)).or_else(|| finished_recording.clone());
                        match t {
                            Some(t) => t.save(path).map(|_| path.display().to_string()).map_err(HarnessError::from),
                            None => Err(NavigationError::NoPath.into()),
                        }
                    }
                    Directive::EngageTracking => {
                        if let Some(r) = recorder.take() {
                            finished_recording = Some(r.finish(false));
                        }
                        let traj = match (&finished_recording, &config.trajectory) {
                            (Some(t), _) => Ok(t.clone()),
                            (None, Some(p)) => Trajectory::load(p).map_err(HarnessError::from),
                            (None, None) => Err(NavigationError::NoPath.into()),
                        };
                        traj.and_then(|t| {
                            PathFollower::new(
                                t,
                                tracker,
                                config.localization,
                                params.body.wheelbase,
                                params.steering.limit,
                                period_ticks(config.control_rate, dt),
                                dt,
                            )
                        })
                        .map(|f| {
                            plan.source = Box::new(f);
                            tracking = true;
                            "tracking engaged".to_string()
                        })
                    }
                    Directive::Stop => {
                        stop = true;
                        Ok("stopped".into())
                    }
                };
                obs.on_directive(&d, result.as_ref().map(|s| s.clone()).map_err(|e| e));
            }
        }

        if config.realtime {
            let due = Duration::from_secs_f64(state.time);
            let elapsed = clock.elapsed();
            if due > elapsed {
                std::thread::sleep(due - elapsed);
            }
        }
    }

    metrics.ticks = state.tick;
    metrics.sim_time = state.time;
    metrics.final_pose = state.pose2();
    metrics.completion = progress.as_ref().map_or(0.0, |p| p.completion());
    if metrics.ticks > 0 {
        metrics.mean_cross_track = cross_sum / metrics.ticks as f64;
    }
    if mapped_scans > 0 {
        if let Some(truth) = &scene.grid {
            metrics.map_recall = Some(boundary_recall(truth, &map.to_grid(DEFAULT_OCCUPIED_THRESH, DEFAULT_FREE_THRESH)));
        }
    }
    let trajectory = match recorder.take() {
        Some(r) => Some(close_recording(r.finish(false), lap_mark, config.recording.threshold)),
        None => finished_recording,
    };
    metrics.waypoints = trajectory.as_ref().map(|t| t.len());

    writer.write(&LogRecord::Summary(LogSummary {
        final_tick: state.tick,
        final_state: StateSnapshot::of(&state, params),
        metrics: metrics.clone(),
    }))?;
    writer.finish()?;

    if let Some(dir) = &out_dir {
        let p = dir.join("metrics.json");
        std::fs::write(&p, serde_json::to_string_pretty(&metrics).expect("metrics serialise")).map_err(io_err(&p))?;
        if mapped_scans > 0 {
            save_map(&map.to_grid(DEFAULT_OCCUPIED_THRESH, DEFAULT_FREE_THRESH), dir.join("map.yaml"))?;
        }
        if let Some(t) = &trajectory {
            t.save(dir.join("trajectory.csv"))?;
        }
    }
    if let Some(obs) = observer {
        obs.on_finish(&metrics);
    }

    Ok(RunOutput {
        metrics,
        final_state: state,
        log: buffer.take(),
        log_path,
        map: (mapped_scans > 0).then_some(map),
        trajectory,
    })
}

/// Cuts a recording at the point where it completed its first lap and
/// closes it, keeping the join at least one spacing long.
fn close_recording(mut t: Trajectory, lap_mark: Option<usize>, threshold: f64) -> Trajectory {
    let Some(mark) = lap_mark else {
        return t;
    };
    t.waypoints.truncate(mark.max(1));
    while t.waypoints.len() > 3 && t.waypoints[0].distance(&t.waypoints[t.waypoints.len() - 1]) < threshold {
        t.waypoints.pop();
    }
    t.closed = t.waypoints.len() > 3;
    t
}
