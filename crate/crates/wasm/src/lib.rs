//! Browser bindings for a small interactive twin: drive a vehicle around a
//! scene by hand or on autopilot, watch the planar LIDAR and build an
//! occupancy map from it.
//!
//! [`Twin`] is plain Rust so it can be tested natively; [`WasmTwin`] wraps
//! it for JavaScript.

use wasm_bindgen::prelude::*;

use twinsim::dynamics::{presets, step_vehicle};
use twinsim::environment::{Cell, OccupancyGrid, Scenario, DEFAULT_FREE_THRESH, DEFAULT_OCCUPIED_THRESH};
use twinsim::harness::{
    centerline_trajectory, rear_axle_pose, resolve_scene, CommandSource, ControlInput, HarnessError, PathFollower, PoseSource,
};
use twinsim::math::Pose2;
use twinsim::navigation::{boundary_recall, update_occupancy, LogOddsMap, LogOddsParams, OdometryEstimate, TrackerConfig};
use twinsim::sensors::{lidar2d_scan, period_ticks, vehicle_pose, LidarParams};
use twinsim::{ActuatorCommand, VehicleParams, VehicleState, PHYSICS_DT};

/// Autopilot cruise speed, m/s.
const AUTOPILOT_SPEED: f64 = 1.0;
/// Control loop rate of the autopilot, Hz.
const CONTROL_RATE: f64 = 50.0;
/// Longest stretch simulated per call, so a stalled tab cannot freeze the page.
pub const MAX_TICKS_PER_CALL: u32 = 250;

pub struct Twin {
    params: VehicleParams,
    scenario: Scenario,
    state: VehicleState,
    lidar: LidarParams,
    scan_period: u64,
    scan: Vec<f64>,
    scan_pose: Pose2,
    map: LogOddsMap,
    mapping: bool,
    autopilot: Option<PathFollower>,
    // the autopilot steers on ground truth; this only fills ControlInput
    estimate: OdometryEstimate,
    collided: bool,
}

impl Twin {
    pub fn new(vehicle: &str, scene: &str) -> Result<Self, HarnessError> {
        let params = presets::resolve(vehicle)?;
        let scenario = resolve_scene(scene)?;
        let ground = scenario.scene.ground_query(scenario.start.x, scenario.start.y).height;
        let state = VehicleState::at_rest(&params, scenario.start, ground);
        let lidar = LidarParams::planar_default();
        let map = match &scenario.scene.grid {
            Some(g) => LogOddsMap::like(g, LogOddsParams::default()),
            None => LogOddsMap::new(
                400,
                400,
                0.05,
                Pose2::new(scenario.start.x - 10.0, scenario.start.y - 10.0, 0.0),
                LogOddsParams::default(),
            ),
        };
        let estimate = OdometryEstimate::anchored(rear_axle_pose(&state.pose2(), &params), [0; 4], 0.0);
        let mut twin = Self {
            scan_period: period_ticks(lidar.rate, PHYSICS_DT),
            params,
            scenario,
            state,
            lidar,
            scan: Vec::new(),
            scan_pose: Pose2::default(),
            map,
            mapping: false,
            autopilot: None,
            estimate,
            collided: false,
        };
        twin.sense();
        Ok(twin)
    }

    fn sense(&mut self) {
        let iso = vehicle_pose(&self.state) * self.lidar.mount.isometry();
        self.scan = lidar2d_scan(&self.scenario.scene, &iso, &self.lidar, 0, self.state.tick);
        let body = self.state.pose2();
        let (sx, sy) = body.to_world(self.lidar.mount.xyz[0], self.lidar.mount.xyz[1]);
        self.scan_pose = Pose2::new(sx, sy, body.yaw + self.lidar.mount.rpy[2]);
        if self.mapping {
            update_occupancy(&mut self.map, &self.scan, &self.scan_pose, &self.lidar);
        }
    }

    /// Advances `ticks` physics steps under a manual command, or under the
    /// autopilot when it is engaged.
    pub fn step(&mut self, throttle: f64, steering: f64, brake: f64, ticks: u32) -> Result<(), HarnessError> {
        let manual = ActuatorCommand {
            brake,
            ..ActuatorCommand::new(throttle, steering)
        };
        for _ in 0..ticks.min(MAX_TICKS_PER_CALL) {
            let command = match self.autopilot.as_mut() {
                Some(pilot) => pilot.command(&ControlInput {
                    tick: self.state.tick,
                    state: &self.state,
                    truth: rear_axle_pose(&self.state.pose2(), &self.params),
                    estimate: &self.estimate,
                })?,
                None => manual,
            };
            self.state = step_vehicle(&self.params, &self.state, &command.clamped(), &self.scenario.scene, PHYSICS_DT)?;
            let b = &self.params.body;
            if self.scenario.scene.footprint_collides(&self.state.pose2(), b.footprint[0], b.footprint[1], b.height) {
                self.collided = true;
            }
            if self.state.tick % self.scan_period == 0 {
                self.sense();
            }
        }
        Ok(())
    }

    pub fn set_autopilot(&mut self, on: bool) -> Result<(), HarnessError> {
        self.autopilot = if on {
            let line = centerline_trajectory(&self.scenario.centerline, self.scenario.closed, AUTOPILOT_SPEED)
                .ok_or(twinsim::navigation::NavigationError::NoPath)?;
            Some(PathFollower::new(
                line,
                TrackerConfig::for_scale(self.params.scale),
                PoseSource::Truth,
                self.params.body.wheelbase,
                self.params.steering.limit,
                period_ticks(CONTROL_RATE, PHYSICS_DT),
                PHYSICS_DT,
            )?)
        } else {
            None
        };
        Ok(())
    }

    pub fn autopilot(&self) -> bool {
        self.autopilot.is_some()
    }

    pub fn set_mapping(&mut self, on: bool) {
        self.mapping = on;
    }

    pub fn mapping(&self) -> bool {
        self.mapping
    }

    pub fn clear_map(&mut self) {
        self.map = LogOddsMap::new(self.map.width, self.map.height, self.map.resolution, self.map.origin, self.map.params);
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn collided(&self) -> bool {
        self.collided
    }

    /// Latest scan ranges; `INFINITY` for beams without a return.
    pub fn scan(&self) -> &[f64] {
        &self.scan
    }

    /// World-frame hit points of the latest scan.
    pub fn scan_points(&self) -> Vec<[f64; 2]> {
        self.scan
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_finite())
            .map(|(i, r)| {
                let (s, c) = self.lidar.theta(i).sin_cos();
                let (x, y) = self.scan_pose.to_world(r * c, r * s);
                [x, y]
            })
            .collect()
    }

    pub fn map_grid(&self) -> OccupancyGrid {
        self.map.to_grid(DEFAULT_OCCUPIED_THRESH, DEFAULT_FREE_THRESH)
    }

    pub fn truth_grid(&self) -> Option<&OccupancyGrid> {
        self.scenario.scene.grid.as_ref()
    }

    /// Share of the scene's wall cells the map has found.
    pub fn recall(&self) -> Option<f64> {
        self.truth_grid().map(|t| boundary_recall(t, &self.map_grid()))
    }

    pub fn centerline(&self) -> &[[f64; 2]] {
        &self.scenario.centerline
    }
}

/// Cells as 0 free, 100 occupied, 255 unknown, row 0 at the lowest y.
pub fn cell_bytes(grid: &OccupancyGrid) -> Vec<u8> {
    grid.cells
        .iter()
        .map(|c| match c {
            Cell::Free => 0,
            Cell::Occupied => 100,
            Cell::Unknown => 255,
        })
        .collect()
}

fn js_err(e: HarnessError) -> JsError {
    JsError::new(&format!("{}: {e}", e.code()))
}

#[wasm_bindgen]
pub struct WasmTwin(Twin);

#[wasm_bindgen]
impl WasmTwin {
    #[wasm_bindgen(constructor)]
    pub fn new(vehicle: &str, scene: &str) -> Result<WasmTwin, JsError> {
        Twin::new(vehicle, scene).map(WasmTwin).map_err(js_err)
    }

    pub fn step(&mut self, throttle: f64, steering: f64, brake: f64, ticks: u32) -> Result<(), JsError> {
        self.0.step(throttle, steering, brake, ticks).map_err(js_err)
    }

    /// `[x, y, yaw, speed, steering, engine_rpm, time, collided]`.
    pub fn pose(&self) -> Vec<f64> {
        let s = self.0.state();
        let p = s.pose2();
        vec![
            p.x,
            p.y,
            p.yaw,
            s.velocity.x,
            s.steering,
            s.powertrain.engine_rpm,
            s.time,
            if self.0.collided() { 1.0 } else { 0.0 },
        ]
    }

    /// Flattened `x, y` world points of the latest scan.
    pub fn scan_points(&self) -> Vec<f32> {
        self.0.scan_points().iter().flat_map(|p| [p[0] as f32, p[1] as f32]).collect()
    }

    pub fn set_mapping(&mut self, on: bool) {
        self.0.set_mapping(on);
    }

    pub fn clear_map(&mut self) {
        self.0.clear_map();
    }

    pub fn set_autopilot(&mut self, on: bool) -> Result<(), JsError> {
        self.0.set_autopilot(on).map_err(js_err)
    }

    /// `[width, height, resolution, origin_x, origin_y]`.
    pub fn map_info(&self) -> Vec<f64> {
        let m = &self.0.map;
        vec![m.width as f64, m.height as f64, m.resolution, m.origin.x, m.origin.y]
    }

    pub fn map_cells(&self) -> Vec<u8> {
        cell_bytes(&self.0.map_grid())
    }

    /// Ground-truth cells on the same lattice, empty for open scenes.
    pub fn truth_cells(&self) -> Vec<u8> {
        self.0.truth_grid().map(cell_bytes).unwrap_or_default()
    }

    /// Boundary recall in [0, 1], or −1 when the scene has no grid.
    pub fn recall(&self) -> f64 {
        self.0.recall().unwrap_or(-1.0)
    }

    pub fn centerline(&self) -> Vec<f64> {
        self.0.centerline().iter().flat_map(|p| [p[0], p[1]]).collect()
    }
}
