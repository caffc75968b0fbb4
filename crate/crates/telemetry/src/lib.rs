//! Telemetry and command server.
//!
//! Clients connect over WebSocket, say hello as a `viewer` or a `driver`
//! and then receive state frames, scans and maps. One driver at a time
//! holds control; its commands reach the sim through a single-slot
//! mailbox that the sim latches once per tick. See `PROTOCOL.md` for the
//! message schema.

pub mod mailbox;
pub mod protocol;
mod server;

pub use mailbox::{Mailbox, MailboxSource, Request};
pub use protocol::{
    decode, decode_map_binary, decode_scan_binary, encode_map_binary, encode_scan_binary, encode_state_frame, Ack, BinaryMap,
    BinaryScan, CommandMsg, DecodeError, Envelope, ErrorMsg, MapMeta, ModeMsg, Role, ScanFrame, StateExtras, StateFrame, WireMessage,
    PROTOCOL_VERSION, SCAN_HEADER_LEN,
};
pub use server::{Event, MapData, ScanData, ServerConfig, Snapshot, TelemetryServer};
