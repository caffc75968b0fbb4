//! Message types and codecs. Text frames carry one JSON object each;
//! scans and maps also travel as binary frames with a 4-byte magic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use twinsim::dynamics::{ActuatorCommand, GearRequest, VehicleState};
use twinsim::math::Pose2;
use twinsim::sensors::{quaternion_of, ranges_to_sentinel};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Viewer,
    Driver,
}

/// Every text frame: protocol version, sim tick and a typed body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v: u32,
    /// Sim tick the message refers to; clients may leave it at 0.
    #[serde(default)]
    pub tick: u64,
    #[serde(flatten)]
    pub body: WireMessage,
}

impl Envelope {
    pub fn new(tick: u64, body: WireMessage) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            tick,
            body,
        }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialise")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    /// Client handshake.
    Hello { role: Role },
    /// Handshake accepted.
    Accept { session: u64, role: Role },
    /// Handshake or control claim refused. `holder` names the session
    /// holding control when that is the reason.
    Refuse {
        reason: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        holder: Option<u64>,
    },
    State(StateFrame),
    Scan(ScanFrame),
    MapMeta(MapMeta),
    Command(CommandMsg),
    Mode(ModeMsg),
    Ack(Ack),
    Error(ErrorMsg),
}

/// Vehicle state as streamed to clients. Velocities are in the body frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub time: f64,
    pub position: [f64; 3],
    /// `[w, x, y, z]`
    pub quaternion: [f64; 4],
    pub yaw: f64,
    pub velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
    /// Road-wheel angle, rad.
    pub steering: f64,
    pub throttle: f64,
    pub brake: f64,
    pub gear: i32,
    pub engine_rpm: f64,
    pub wheel_speed: [f64; 4],
    /// Command latched for this tick.
    pub command: CommandMsg,
    pub odometry: Pose2,
    pub mapping: bool,
    pub recording: bool,
    pub tracking: bool,
    pub completion: f64,
    pub waypoint_count: usize,
    /// Waypoints `[x, y, v]` from index `waypoint_offset` on that this
    /// client has not been sent yet.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub new_waypoints: Vec<[f64; 3]>,
    #[serde(default)]
    pub waypoint_offset: usize,
}

/// Everything except the per-client waypoint delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateExtras {
    pub command: ActuatorCommand,
    pub odometry: Pose2,
    pub mapping: bool,
    pub recording: bool,
    pub tracking: bool,
    pub completion: f64,
    pub waypoint_count: usize,
}

/// Builds the state payload. Non-finite numbers are replaced by 0 so a
/// frame always serialises.
pub fn encode_state_frame(state: &VehicleState, extras: &StateExtras) -> StateFrame {
    let f = |v: f64| if v.is_finite() { v } else { 0.0 };
    let f3 = |v: [f64; 3]| v.map(f);
    StateFrame {
        time: f(state.time),
        position: f3(state.position.into()),
        quaternion: quaternion_of(&state.rotation).map(f),
        yaw: f(state.yaw()),
        velocity: f3(state.velocity.into()),
        angular_velocity: f3(state.angular_velocity.into()),
        steering: f(state.steering),
        throttle: f(state.throttle),
        brake: f(state.brake),
        gear: state.powertrain.gear,
        engine_rpm: f(state.powertrain.engine_rpm),
        wheel_speed: state.wheel_speed.map(f),
        command: CommandMsg::from(extras.command),
        odometry: Pose2::new(f(extras.odometry.x), f(extras.odometry.y), f(extras.odometry.yaw)),
        mapping: extras.mapping,
        recording: extras.recording,
        tracking: extras.tracking,
        completion: f(extras.completion),
        waypoint_count: extras.waypoint_count,
        new_waypoints: Vec::new(),
        waypoint_offset: 0,
    }
}

/// Planar scan in JSON form; no-return beams are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFrame {
    pub theta_min: f64,
    pub theta_res: f64,
    pub r_max: f64,
    pub ranges: Vec<Option<f32>>,
}

impl ScanFrame {
    pub fn new(ranges: &[f64], theta_min: f64, theta_res: f64, r_max: f64) -> Self {
        Self {
            theta_min,
            theta_res,
            r_max,
            ranges: ranges.iter().map(|r| r.is_finite().then_some(*r as f32)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: [f64; 2],
    /// Set when the map was written to disk.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CommandMsg {
    pub throttle: f64,
    pub steering: f64,
    #[serde(default)]
    pub brake: f64,
    #[serde(default)]
    pub handbrake: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gear: Option<GearRequest>,
}

impl From<ActuatorCommand> for CommandMsg {
    fn from(c: ActuatorCommand) -> Self {
        Self {
            throttle: c.throttle,
            steering: c.steering,
            brake: c.brake,
            handbrake: c.handbrake,
            gear: c.gear,
        }
    }
}

impl From<CommandMsg> for ActuatorCommand {
    fn from(c: CommandMsg) -> Self {
        Self {
            throttle: c.throttle,
            steering: c.steering,
            brake: c.brake,
            handbrake: c.handbrake,
            gear: c.gear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ModeMsg {
    StartMapping,
    StopMapping,
    StartRecording,
    StopRecording,
    SaveMap { path: String },
    SaveTrajectory { path: String },
    EngageTracking,
    Stop,
}

impl ModeMsg {
    pub fn name(&self) -> &'static str {
        match self {
            ModeMsg::StartMapping => "start_mapping",
            ModeMsg::StopMapping => "stop_mapping",
            ModeMsg::StartRecording => "start_recording",
            ModeMsg::StopRecording => "stop_recording",
            ModeMsg::SaveMap { .. } => "save_map",
            ModeMsg::SaveTrajectory { .. } => "save_trajectory",
            ModeMsg::EngageTracking => "engage_tracking",
            ModeMsg::Stop => "stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    /// Session whose request this answers.
    pub session: u64,
    pub action: String,
    pub message: String,
}

/// Machine-readable error codes carried by `error` messages.
pub mod codes {
    pub const MALFORMED: &str = "malformed";
    pub const UNKNOWN_TYPE: &str = "unknown_type";
    pub const VERSION: &str = "version_mismatch";
    pub const NOT_CLIENT_MESSAGE: &str = "not_a_client_message";
    pub const HANDSHAKE_REQUIRED: &str = "handshake_required";
    pub const NO_AUTHORITY: &str = "no_authority";
    pub const AUTHORITY_LAPSED: &str = "authority_lapsed";
    pub const ACTION_FAILED: &str = "action_failed";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMsg {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<u64>,
}

impl ErrorMsg {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
            session: None,
        }
    }
}

pub const KNOWN_TYPES: [&str; 10] = ["hello", "accept", "refuse", "state", "scan", "map_meta", "command", "mode", "ack", "error"];

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("not a JSON object: {0}")]
    Malformed(String),
    #[error("missing protocol version")]
    MissingVersion,
    #[error("protocol version {found} not supported (server speaks {PROTOCOL_VERSION})")]
    Version { found: u64 },
    #[error("unknown message type `{0}`")]
    UnknownType(String),
    #[error("bad `{kind}` payload: {reason}")]
    Payload { kind: String, reason: String },
}

impl DecodeError {
    pub fn code(&self) -> &'static str {
        match self {
            DecodeError::Malformed(_) | DecodeError::Payload { .. } => codes::MALFORMED,
            DecodeError::MissingVersion | DecodeError::Version { .. } => codes::VERSION,
            DecodeError::UnknownType(_) => codes::UNKNOWN_TYPE,
        }
    }
}

/// Decodes a text frame, telling apart version, type and payload errors.
pub fn decode(text: &str) -> Result<Envelope, DecodeError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| DecodeError::Malformed(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| DecodeError::Malformed("expected an object".into()))?;
    let v = obj.get("v").and_then(|v| v.as_u64()).ok_or(DecodeError::MissingVersion)?;
    if v != PROTOCOL_VERSION as u64 {
        return Err(DecodeError::Version { found: v });
    }
    let kind = obj
        .get("type")
        .and_then(|t| t.as_str())
        .ok_or_else(|| DecodeError::Malformed("missing `type`".into()))?
        .to_string();
    if !KNOWN_TYPES.contains(&kind.as_str()) {
        return Err(DecodeError::UnknownType(kind));
    }
    serde_json::from_value(value).map_err(|e| DecodeError::Payload {
        kind,
        reason: e.to_string(),
    })
}

pub const SCAN_MAGIC: [u8; 4] = *b"TWSC";
/// Magic, u64 tick, f32 θ_min, f32 θ_res, f32 r_max, u32 count.
pub const SCAN_HEADER_LEN: usize = 28;

/// Binary scan frame: header then `count` little-endian f32 ranges with
/// no-return beams as `r_max + 1`.
pub fn encode_scan_binary(tick: u64, ranges: &[f64], theta_min: f64, theta_res: f64, r_max: f64) -> Vec<u8> {
    let body = ranges_to_sentinel(ranges, r_max);
    let mut out = Vec::with_capacity(SCAN_HEADER_LEN + 4 * body.len());
    out.extend_from_slice(&SCAN_MAGIC);
    out.extend_from_slice(&tick.to_le_bytes());
    out.extend_from_slice(&(theta_min as f32).to_le_bytes());
    out.extend_from_slice(&(theta_res as f32).to_le_bytes());
    out.extend_from_slice(&(r_max as f32).to_le_bytes());
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    for r in body {
        out.extend_from_slice(&r.to_le_bytes());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryScan {
    pub tick: u64,
    pub theta_min: f32,
    pub theta_res: f32,
    pub r_max: f32,
    pub ranges: Vec<f32>,
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn le_f32(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

pub fn decode_scan_binary(bytes: &[u8]) -> Result<BinaryScan, DecodeError> {
    if bytes.len() < SCAN_HEADER_LEN || bytes[..4] != SCAN_MAGIC {
        return Err(DecodeError::Malformed("missing scan header".into()));
    }
    let count = le_u32(bytes, 24) as usize;
    if bytes.len() != SCAN_HEADER_LEN + 4 * count {
        return Err(DecodeError::Malformed(format!("scan length {} does not match {count} beams", bytes.len())));
    }
    Ok(BinaryScan {
        tick: u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")),
        theta_min: le_f32(bytes, 12),
        theta_res: le_f32(bytes, 16),
        r_max: le_f32(bytes, 20),
        ranges: (0..count).map(|i| le_f32(bytes, SCAN_HEADER_LEN + 4 * i)).collect(),
    })
}

pub const MAP_MAGIC: [u8; 4] = *b"TWMP";
/// Magic, u64 tick, u32 width, u32 height, f32 resolution, f32 origin x, f32 origin y.
pub const MAP_HEADER_LEN: usize = 32;

/// Cell values in a binary map frame.
pub const MAP_FREE: u8 = 0;
pub const MAP_OCCUPIED: u8 = 100;
pub const MAP_UNKNOWN: u8 = 255;

/// Binary occupancy frame: header then one byte per cell, row-major from
/// the origin corner.
pub fn encode_map_binary(tick: u64, width: usize, height: usize, resolution: f64, origin: [f64; 2], cells: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(MAP_HEADER_LEN + cells.len());
    out.extend_from_slice(&MAP_MAGIC);
    out.extend_from_slice(&tick.to_le_bytes());
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    out.extend_from_slice(&(resolution as f32).to_le_bytes());
    out.extend_from_slice(&(origin[0] as f32).to_le_bytes());
    out.extend_from_slice(&(origin[1] as f32).to_le_bytes());
    out.extend_from_slice(cells);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMap {
    pub tick: u64,
    pub width: usize,
    pub height: usize,
    pub resolution: f32,
    pub origin: [f32; 2],
    pub cells: Vec<u8>,
}

pub fn decode_map_binary(bytes: &[u8]) -> Result<BinaryMap, DecodeError> {
    if bytes.len() < MAP_HEADER_LEN || bytes[..4] != MAP_MAGIC {
        return Err(DecodeError::Malformed("missing map header".into()));
    }
    let width = le_u32(bytes, 12) as usize;
    let height = le_u32(bytes, 16) as usize;
    if bytes.len() != MAP_HEADER_LEN + width * height {
        return Err(DecodeError::Malformed("map length does not match its size".into()));
    }
    Ok(BinaryMap {
        tick: u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")),
        width,
        height,
        resolution: le_f32(bytes, 20),
        origin: [le_f32(bytes, 24), le_f32(bytes, 28)],
        cells: bytes[MAP_HEADER_LEN..].to_vec(),
    })
}
