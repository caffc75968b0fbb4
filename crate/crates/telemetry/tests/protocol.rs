use proptest::prelude::*;
use twinsim::dynamics::{presets, ActuatorCommand, GearRequest, VehicleState};
use twinsim::math::Pose2;
use twinsim::sensors::LidarParams;
use twinsim_telemetry::protocol::{codes, MAP_HEADER_LEN};
use twinsim_telemetry::*;

fn at_rest_frame() -> StateFrame {
    let params = presets::load("scale10").unwrap();
    let state = VehicleState::at_rest(&params, Pose2::new(1.0, 2.0, 0.3), 0.0);
    encode_state_frame(
        &state,
        &StateExtras {
            command: ActuatorCommand::default(),
            odometry: Pose2::new(0.9, 2.0, 0.3),
            mapping: false,
            recording: true,
            tracking: false,
            completion: 0.0,
            waypoint_count: 0,
        },
    )
}

fn every_message() -> Vec<Envelope> {
    let mut state = at_rest_frame();
    state.new_waypoints = vec![[0.0, 0.0, 0.0], [0.25, 0.0, 0.8]];
    state.waypoint_count = 2;
    vec![
        Envelope::new(0, WireMessage::Hello { role: Role::Driver }),
        Envelope::new(3, WireMessage::Accept { session: 4, role: Role::Viewer }),
        Envelope::new(3, WireMessage::Refuse { reason: "control held by session 1".into(), holder: Some(1) }),
        Envelope::new(17, WireMessage::State(state)),
        Envelope::new(25, WireMessage::Scan(ScanFrame::new(&[1.5, f64::INFINITY, 0.25], -2.35, 0.0043, 10.0))),
        Envelope::new(
            40,
            WireMessage::MapMeta(MapMeta { width: 240, height: 140, resolution: 0.05, origin: [-6.0, -3.5], path: Some("/tmp/m.yaml".into()) }),
        ),
        Envelope::new(
            0,
            WireMessage::Command(CommandMsg { throttle: 0.5, steering: -0.25, brake: 0.0, handbrake: false, gear: Some(GearRequest::Reverse) }),
        ),
        Envelope::new(0, WireMessage::Mode(ModeMsg::SaveMap { path: "map.yaml".into() })),
        Envelope::new(0, WireMessage::Mode(ModeMsg::EngageTracking)),
        Envelope::new(9, WireMessage::Ack(Ack { session: 2, action: "start_mapping".into(), message: "mapping on".into() })),
        Envelope::new(9, WireMessage::Error(ErrorMsg::new(codes::NO_AUTHORITY, "nope"))),
    ]
}

#[test]
fn every_message_type_round_trips() {
    let msgs = every_message();
    let mut kinds = std::collections::BTreeSet::new();
    for m in &msgs {
        let text = m.to_text();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        kinds.insert(v["type"].as_str().unwrap().to_string());
        assert_eq!(v["v"], 1);
        assert_eq!(decode(&text).unwrap(), *m, "{text}");
    }
    for t in ["state", "scan", "map_meta", "command", "mode", "ack", "error"] {
        assert!(kinds.contains(t), "{t} not covered");
    }
}

#[test]
fn at_rest_velocities_are_exactly_zero() {
    let f = at_rest_frame();
    assert_eq!(f.velocity, [0.0; 3]);
    assert_eq!(f.angular_velocity, [0.0; 3]);
    assert_eq!(f.wheel_speed, [0.0; 4]);
}

#[test]
fn no_return_is_null_in_json() {
    let text = Envelope::new(1, WireMessage::Scan(ScanFrame::new(&[2.0, f64::INFINITY], 0.0, 0.1, 10.0))).to_text();
    assert!(text.contains("[2.0,null]"), "{text}");
}

#[test]
fn planar_scan_frame_size() {
    let l = LidarParams::planar_default();
    let n = l.ray_count();
    assert_eq!(n, 1081);
    let ranges: Vec<f64> = (0..n).map(|i| if i % 7 == 0 { f64::INFINITY } else { 1.0 + i as f64 * 1e-3 }).collect();
    let bin = encode_scan_binary(40, &ranges, l.theta_min, l.theta_res, l.r_max);
    // 1081 beams × 4 bytes of f32
    assert_eq!(bin.len() - SCAN_HEADER_LEN, 4324);
    let back = decode_scan_binary(&bin).unwrap();
    assert_eq!(back.tick, 40);
    assert_eq!(back.ranges.len(), n);
    assert_eq!(back.ranges[0], (l.r_max + 1.0) as f32);
    assert_eq!(back.ranges[1], ranges[1] as f32);
}

#[test]
fn map_frame_round_trip() {
    let cells: Vec<u8> = (0..12).map(|i| [0u8, 100, 255][i % 3]).collect();
    let bin = encode_map_binary(7, 4, 3, 0.05, [-1.0, 2.0], &cells);
    assert_eq!(bin.len(), MAP_HEADER_LEN + 12);
    let m = decode_map_binary(&bin).unwrap();
    assert_eq!((m.tick, m.width, m.height), (7, 4, 3));
    assert_eq!(m.origin, [-1.0, 2.0]);
    assert_eq!(m.cells, cells);
    assert!(decode_map_binary(&bin[..bin.len() - 1]).is_err());
}

#[test]
fn decode_errors_are_classified() {
    assert_eq!(decode("{").unwrap_err().code(), codes::MALFORMED);
    assert_eq!(decode(r#"{"type":"hello","role":"viewer"}"#).unwrap_err(), DecodeError::MissingVersion);
    assert_eq!(decode(r#"{"v":2,"type":"hello","role":"viewer"}"#).unwrap_err(), DecodeError::Version { found: 2 });
    assert_eq!(decode(r#"{"v":1,"type":"teleport"}"#).unwrap_err(), DecodeError::UnknownType("teleport".into()));
    assert_eq!(decode(r#"{"v":1,"type":"command","throttle":"fast"}"#).unwrap_err().code(), codes::MALFORMED);
    // tick is optional for clients
    assert!(decode(r#"{"v":1,"type":"hello","role":"viewer"}"#).is_ok());
}

#[test]
fn non_finite_state_is_sanitised() {
    let params = presets::load("scale10").unwrap();
    let mut state = VehicleState::at_rest(&params, Pose2::default(), 0.0);
    state.powertrain.engine_rpm = f64::NAN;
    let f = encode_state_frame(
        &state,
        &StateExtras {
            command: ActuatorCommand::default(),
            odometry: Pose2::default(),
            mapping: false,
            recording: false,
            tracking: false,
            completion: f64::INFINITY,
            waypoint_count: 0,
        },
    );
    assert_eq!(f.engine_rpm, 0.0);
    assert_eq!(f.completion, 0.0);
    assert!(serde_json::to_string(&f).is_ok());
}

proptest! {
    #[test]
    fn command_round_trip(t in -1.0f64..1.0, s in -1.0f64..1.0, b in 0.0f64..1.0, h: bool) {
        let m = Envelope::new(0, WireMessage::Command(CommandMsg { throttle: t, steering: s, brake: b, handbrake: h, gear: None }));
        prop_assert_eq!(decode(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn scan_binary_round_trip(r in proptest::collection::vec(0.06f64..10.0, 1..400)) {
        let bin = encode_scan_binary(3, &r, -1.0, 0.01, 10.0);
        let back = decode_scan_binary(&bin).unwrap();
        prop_assert_eq!(back.ranges, r.iter().map(|x| *x as f32).collect::<Vec<_>>());
    }
}
