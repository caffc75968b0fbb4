use std::io::{BufRead, Write};
use std::sync::mpsc::{sync_channel, SyncSender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::HarnessError;
use crate::dynamics::{ActuatorCommand, VehicleParams, VehicleState};
use crate::math::Pose2;
use crate::sensors::{quaternion_of, ranges_to_sentinel, InsSample, SensorFrame};

pub const LOG_VERSION: u32 = 1;

/// Compact vehicle state as logged and scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub tick: u64,
    pub time: f64,
    pub position: [f64; 3],
    pub quaternion: [f64; 4],
    pub velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
    pub steering: f64,
    pub throttle: f64,
    pub brake: f64,
    pub gear: i32,
    pub engine_rpm: f64,
    pub wheel_speed: [f64; 4],
    /// Rear-axle reference pose used by recording, tracking and scoring.
    pub reference: Pose2,
}

impl StateSnapshot {
    pub fn of(state: &VehicleState, params: &VehicleParams) -> Self {
        Self {
            tick: state.tick,
            time: state.time,
            position: state.position.into(),
            quaternion: quaternion_of(&state.rotation),
            velocity: state.velocity.into(),
            angular_velocity: state.angular_velocity.into(),
            steering: state.steering,
            throttle: state.throttle,
            brake: state.brake,
            gear: state.powertrain.gear,
            engine_rpm: state.powertrain.engine_rpm,
            wheel_speed: state.wheel_speed,
            reference: rear_axle_pose(&state.pose2(), params),
        }
    }
}

/// Rear-axle centre from a body-origin pose.
pub fn rear_axle_pose(body: &Pose2, params: &VehicleParams) -> Pose2 {
    let (x, y) = body.to_world(-params.body.rear_to_com, 0.0);
    Pose2::new(x, y, body.yaw)
}

/// Body-origin pose from a rear-axle pose.
pub fn body_pose_from_rear(rear: &Pose2, params: &VehicleParams) -> Pose2 {
    let (x, y) = rear.to_world(params.body.rear_to_com, 0.0);
    Pose2::new(x, y, rear.yaw)
}

/// Sensor readings reduced to what a log needs to prove determinism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorDigest {
    pub encoder_ticks: [i64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ins: Option<InsSample>,
    /// SHA-256 of the scan as little-endian f32 with the `r_max + 1` sentinel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_sha256: Option<String>,
    /// Sidecar file holding the encoded point cloud, relative to the log.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_features: Option<usize>,
}

impl SensorDigest {
    pub fn of(frame: &SensorFrame, r_max: f64) -> Self {
        Self {
            encoder_ticks: frame.encoder_ticks,
            ins: frame.ins,
            scan_sha256: frame.scan.as_ref().map(|s| {
                let bytes: Vec<u8> = ranges_to_sentinel(s, r_max).iter().flat_map(|v| v.to_le_bytes()).collect();
                super::config::sha256_hex(&bytes)
            }),
            cloud: None,
            camera_features: frame.camera.as_ref().map(|c| c.features.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    /// Present when the command differs from the previous tick's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<ActuatorCommand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSnapshot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensors: Option<SensorDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    pub config_hash: String,
    pub world_hash: String,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSummary {
    /// Number of physics steps taken.
    pub final_tick: u64,
    pub final_state: StateSnapshot,
    pub metrics: super::RunMetrics,
}

/// One line of a run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Header(LogHeader),
    Tick(TickRecord),
    Summary(LogSummary),
}

/// A run log read back from text.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub header: LogHeader,
    pub ticks: Vec<TickRecord>,
    pub summary: Option<LogSummary>,
    /// The final line was cut off and ignored.
    pub truncated: bool,
}

impl ParsedLog {
    /// Tick up to which commands are known.
    pub fn final_tick(&self) -> u64 {
        match &self.summary {
            Some(s) => s.final_tick,
            None => self.ticks.last().map(|t| t.tick + 1).unwrap_or(0),
        }
    }

    /// `(tick, command)` for every command change, in order.
    pub fn commands(&self) -> Vec<(u64, ActuatorCommand)> {
        self.ticks.iter().filter_map(|t| t.command.map(|c| (t.tick, c))).collect()
    }

    /// Logged state snapshots, including the final one.
    pub fn states(&self) -> Vec<StateSnapshot> {
        let mut out: Vec<StateSnapshot> = self.ticks.iter().filter_map(|t| t.state).collect();
        if let Some(s) = &self.summary {
            if out.last().map(|l| l.tick) != Some(s.final_state.tick) {
                out.push(s.final_state);
            }
        }
        out
    }
}

pub fn read_log(r: impl BufRead) -> Result<ParsedLog, HarnessError> {
    let mut lines: Vec<String> = Vec::new();
    let mut ends_with_newline = true;
    for line in r.split(b'\n') {
        let raw = line.map_err(|e| HarnessError::Log(e.to_string()))?;
        lines.push(String::from_utf8_lossy(&raw).into_owned());
    }
    // split() yields a trailing empty chunk only when the text ends in '\n'
    match lines.last().map(|l| l.is_empty()) {
        Some(true) => {
            lines.pop();
        }
        Some(false) => ends_with_newline = false,
        None => {}
    }
    let mut iter = lines.iter().enumerate().peekable();
    let header = match iter.next() {
        Some((_, l)) => match serde_json::from_str::<LogRecord>(l) {
            Ok(LogRecord::Header(h)) => h,
            _ => return Err(HarnessError::Log("first line is not a log header".into())),
        },
        None => return Err(HarnessError::Log("empty log".into())),
    };
    if header.version != LOG_VERSION {
        return Err(HarnessError::Log(format!("unsupported log version {}", header.version)));
    }
    if header.config.hash() != header.config_hash {
        return Err(HarnessError::HashMismatch {
            expected: header.config_hash.clone(),
            found: header.config.hash(),
        });
    }
    let mut ticks: Vec<TickRecord> = Vec::new();
    let mut summary = None;
    let mut truncated = false;
    while let Some((i, l)) = iter.next() {
        let last = iter.peek().is_none();
        match serde_json::from_str::<LogRecord>(l) {
            Ok(LogRecord::Tick(t)) => {
                if let Some(prev) = ticks.last() {
                    if t.tick <= prev.tick {
                        return Err(HarnessError::Log(format!("line {}: tick {} not after {}", i + 1, t.tick, prev.tick)));
                    }
                }
                ticks.push(t)
            }
            Ok(LogRecord::Summary(s)) => summary = Some(s),
            Ok(LogRecord::Header(_)) => return Err(HarnessError::Log(format!("line {}: second header", i + 1))),
            Err(_) if last && !ends_with_newline => truncated = true,
            Err(e) => return Err(HarnessError::Log(format!("line {}: {e}", i + 1))),
        }
    }
    Ok(ParsedLog {
        header,
        ticks,
        summary,
        truncated,
    })
}

pub fn load_log(path: impl AsRef<std::path::Path>) -> Result<ParsedLog, HarnessError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    read_log(std::io::BufReader::new(file))
}

/// In-memory log sink shared with the writer thread.
#[derive(Debug, Clone, Default)]
pub struct SharedBuffer(pub Arc<Mutex<Vec<u8>>>);

impl Write for SharedBuffer {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().expect("log buffer lock").extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

impl SharedBuffer {
    pub fn take(&self) -> Vec<u8> {
        std::mem::take(&mut *self.0.lock().expect("log buffer lock"))
    }
}

/// Serialises records on the tick thread and writes them on a separate
/// thread. The queue is bounded; a full queue blocks the caller.
pub struct LogWriter {
    tx: Option<SyncSender<String>>,
    handle: Option<JoinHandle<std::io::Result<()>>>,
}

pub const LOG_QUEUE_CAPACITY: usize = 1024;

impl LogWriter {
    pub fn spawn<W: Write + Send + 'static>(sink: W, capacity: usize) -> Self {
        let (tx, rx) = sync_channel::<String>(capacity);
        let handle = std::thread::spawn(move || {
            let mut w = std::io::BufWriter::new(sink);
            for line in rx {
                w.write_all(line.as_bytes())?;
                w.write_all(b"\n")?;
            }
            w.flush()
        });
        Self {
            tx: Some(tx),
            handle: Some(handle),
        }
    }

    pub fn write(&self, record: &LogRecord) -> Result<(), HarnessError> {
        let line = serde_json::to_string(record).map_err(|e| HarnessError::Log(e.to_string()))?;
        self.tx
            .as_ref()
            .expect("writer open")
            .send(line)
            .map_err(|_| HarnessError::Log("log writer stopped".into()))
    }

    /// Drains the queue and reports any write error.
    pub fn finish(mut self) -> Result<(), HarnessError> {
        self.close()
    }

    fn close(&mut self) -> Result<(), HarnessError> {
        drop(self.tx.take());
        match self.handle.take() {
            Some(h) => h
                .join()
                .map_err(|_| HarnessError::Log("log writer panicked".into()))?
                .map_err(|e| HarnessError::Log(e.to_string())),
            None => Ok(()),
        }
    }
}

impl Drop for LogWriter {
    fn drop(&mut self) {
        let _ = self.close();
    }
}
