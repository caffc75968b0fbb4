//! Live server tests with WebSocket clients on localhost.

use std::net::SocketAddr;
use std::thread::JoinHandle;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

use twinsim::harness::{HarnessError, Mode, RunOutput, ScenarioConfig};
use twinsim_telemetry::{decode_map_binary, decode_scan_binary, ServerConfig, TelemetryServer, SCAN_HEADER_LEN};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

fn start(scene: &str, duration: f64) -> (SocketAddr, JoinHandle<Result<RunOutput, HarnessError>>) {
    let mut c = ScenarioConfig::new("scale10", scene, Mode::Teleop);
    c.duration = duration;
    c.realtime = true;
    let server = TelemetryServer::bind("127.0.0.1:0".parse().unwrap(), ServerConfig::default()).unwrap();
    let addr = server.local_addr().unwrap();
    (addr, std::thread::spawn(move || server.run(&c)))
}

async fn connect(addr: SocketAddr) -> Ws {
    tokio_tungstenite::connect_async(format!("ws://{addr}")).await.unwrap().0
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string())).await.unwrap();
}

/// Next text message satisfying `pred`, skipping others, within `secs`.
async fn until(ws: &mut Ws, secs: f64, pred: impl Fn(&Value) -> bool) -> Value {
    wait(ws, secs, false, pred).await
}

/// Like `until`, but pings every 100 ms so a driver keeps control.
async fn until_alive(ws: &mut Ws, secs: f64, pred: impl Fn(&Value) -> bool) -> Value {
    wait(ws, secs, true, pred).await
}

async fn wait(ws: &mut Ws, secs: f64, keepalive: bool, pred: impl Fn(&Value) -> bool) -> Value {
    let mut seen = Vec::new();
    let mut ping = tokio::time::interval(Duration::from_millis(100));
    let found = tokio::time::timeout(Duration::from_secs_f64(secs), async {
        loop {
            let msg = tokio::select! {
                m = ws.next() => m,
                _ = ping.tick(), if keepalive => {
                    ws.send(Message::Ping(Vec::new())).await.unwrap();
                    continue;
                }
            };
            match msg {
                Some(Ok(Message::Text(t))) => {
                    let v: Value = serde_json::from_str(&t).unwrap();
                    if pred(&v) {
                        return v;
                    }
                    if v["type"] != "state" {
                        seen.push(t);
                    }
                }
                Some(Ok(_)) => {}
                other => panic!("connection ended: {other:?}"),
            }
        }
    })
    .await;
    match found {
        Ok(v) => v,
        Err(_) => panic!("timed out waiting for message; non-state traffic: {seen:?}"),
    }
}

fn is(kind: &'static str) -> impl Fn(&Value) -> bool {
    move |v| v["type"] == kind
}

async fn hello(ws: &mut Ws, role: &str) -> Value {
    send(ws, json!({"v": 1, "type": "hello", "role": role})).await;
    until(ws, 2.0, |v| v["type"] == "accept" || v["type"] == "refuse").await
}

fn rt() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap()
}

#[test]
fn throttle_command_is_echoed_in_state() {
    let (addr, sim) = start("flat", 3.0);
    rt().block_on(async {
        let mut ws = connect(addr).await;
        assert_eq!(hello(&mut ws, "driver").await["type"], "accept");
        let cmd = json!({"v": 1, "type": "command", "throttle": 0.5, "steering": 0.0});
        send(&mut ws, cmd.clone()).await;
        let f = until(&mut ws, 1.0, |v| v["type"] == "state" && v["command"]["throttle"] == 0.5).await;
        assert!(f["tick"].as_u64().unwrap() > 0);
        // applied throttle reaches the command once the slew settles
        let settled = tokio::time::timeout(Duration::from_secs(2), async {
            loop {
                send(&mut ws, cmd.clone()).await;
                let s = until(&mut ws, 1.0, is("state")).await;
                if (s["throttle"].as_f64().unwrap() - 0.5).abs() < 1e-12 {
                    return s;
                }
            }
        })
        .await
        .expect("applied throttle never reached 0.5");
        assert!(settled["velocity"][0].as_f64().unwrap() > 0.0);
        ws.close(None).await.ok();
    });
    let out = sim.join().unwrap().unwrap();
    assert!(out.metrics.distance > 0.0);
}

#[test]
fn second_driver_is_refused_naming_the_first() {
    let (addr, sim) = start("flat", 2.0);
    rt().block_on(async {
        let mut a = connect(addr).await;
        let acc = hello(&mut a, "driver").await;
        let first = acc["session"].as_u64().unwrap();
        let mut b = connect(addr).await;
        let r = hello(&mut b, "driver").await;
        assert_eq!(r["type"], "refuse");
        assert_eq!(r["holder"].as_u64().unwrap(), first);
        assert!(r["reason"].as_str().unwrap().contains(&first.to_string()));
        // still connected: join as a viewer and receive state
        assert_eq!(hello(&mut b, "viewer").await["type"], "accept");
        until(&mut b, 1.0, is("state")).await;
        // a viewer cannot drive
        send(&mut b, json!({"v": 1, "type": "command", "throttle": 1.0, "steering": 0.0})).await;
        let e = until(&mut b, 1.0, is("error")).await;
        assert_eq!(e["code"], "no_authority");
    });
    sim.join().unwrap().unwrap();
}

#[test]
fn unknown_type_and_garbage_keep_the_session() {
    let (addr, sim) = start("flat", 2.0);
    rt().block_on(async {
        let mut ws = connect(addr).await;
        send(&mut ws, json!({"v": 1, "type": "teleport", "x": 3})).await;
        assert_eq!(until(&mut ws, 1.0, is("error")).await["code"], "unknown_type");
        ws.send(Message::Text("not json".into())).await.unwrap();
        assert_eq!(until(&mut ws, 1.0, is("error")).await["code"], "malformed");
        assert_eq!(hello(&mut ws, "viewer").await["type"], "accept");
        send(&mut ws, json!({"v": 1, "type": "state"})).await;
        assert_eq!(until(&mut ws, 1.0, is("error")).await["code"], "malformed");
        until(&mut ws, 1.0, is("state")).await;
    });
    sim.join().unwrap().unwrap();
}

#[test]
fn version_mismatch_is_refused_at_handshake() {
    let (addr, sim) = start("flat", 1.5);
    rt().block_on(async {
        let mut ws = connect(addr).await;
        send(&mut ws, json!({"v": 2, "type": "hello", "role": "viewer"})).await;
        let r = until(&mut ws, 1.0, |v| v["type"] == "refuse").await;
        assert!(r["reason"].as_str().unwrap().contains("version"));
        // then the server closes
        let end = tokio::time::timeout(Duration::from_secs(1), async {
            loop {
                match ws.next().await {
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    _ => {}
                }
            }
        })
        .await;
        assert!(end.is_ok());
    });
    sim.join().unwrap().unwrap();
}

#[test]
fn silent_driver_loses_control_and_command_is_zeroed() {
    let (addr, sim) = start("flat", 3.0);
    rt().block_on(async {
        let mut ws = connect(addr).await;
        hello(&mut ws, "driver").await;
        send(&mut ws, json!({"v": 1, "type": "command", "throttle": 0.5, "steering": 0.3})).await;
        until(&mut ws, 1.0, |v| v["type"] == "state" && v["command"]["throttle"] == 0.5).await;
        let sent = std::time::Instant::now();
        let e = until(&mut ws, 2.0, |v| v["type"] == "error").await;
        assert_eq!(e["code"], "authority_lapsed");
        let waited = sent.elapsed();
        assert!(waited >= Duration::from_millis(450), "{waited:?}");
        // the first tick latched after the lapse runs with a zero command
        let lapsed_at = e["tick"].as_u64().unwrap();
        let s = until(&mut ws, 1.0, |v| v["type"] == "state" && v["tick"].as_u64().unwrap() > lapsed_at).await;
        assert_eq!(s["command"]["throttle"], 0.0);
        assert_eq!(s["command"]["steering"], 0.0);
        // commands are refused until control is claimed again
        send(&mut ws, json!({"v": 1, "type": "command", "throttle": 0.5, "steering": 0.0})).await;
        assert_eq!(until(&mut ws, 1.0, is("error")).await["code"], "no_authority");
        assert_eq!(hello(&mut ws, "driver").await["type"], "accept");
    });
    sim.join().unwrap().unwrap();
}

#[test]
fn scans_arrive_as_binary_frames() {
    let (addr, sim) = start("oval", 1.5);
    rt().block_on(async {
        let mut ws = connect(addr).await;
        hello(&mut ws, "viewer").await;
        let bin = tokio::time::timeout(Duration::from_secs(1), async {
            loop {
                if let Some(Ok(Message::Binary(b))) = ws.next().await {
                    return b;
                }
            }
        })
        .await
        .unwrap();
        assert_eq!(bin.len(), SCAN_HEADER_LEN + 4324);
        let scan = decode_scan_binary(&bin).unwrap();
        assert_eq!(scan.ranges.len(), 1081);
        // the oval walls are in range everywhere from the start pose
        assert!(scan.ranges.iter().all(|r| *r < scan.r_max));
    });
    sim.join().unwrap().unwrap();
}

#[test]
fn mode_requests_are_acknowledged() {
    let dir = tempfile::tempdir().unwrap();
    let map_path = dir.path().join("live.yaml");
    let (addr, sim) = start("oval", 3.0);
    rt().block_on(async {
        let mut ws = connect(addr).await;
        let me = hello(&mut ws, "driver").await["session"].as_u64().unwrap();
        send(&mut ws, json!({"v": 1, "type": "mode", "action": "engage_tracking"})).await;
        let e = until_alive(&mut ws, 1.0, is("error")).await;
        assert_eq!(e["code"], "action_failed");
        assert_eq!(e["session"].as_u64().unwrap(), me);
        assert!(e["message"].as_str().unwrap().contains("engage_tracking"));

        send(&mut ws, json!({"v": 1, "type": "mode", "action": "start_mapping"})).await;
        let a = until_alive(&mut ws, 1.0, is("ack")).await;
        assert_eq!(a["action"], "start_mapping");
        until_alive(&mut ws, 1.0, |v| v["type"] == "state" && v["mapping"] == true).await;
        // a map frame follows its metadata
        until_alive(&mut ws, 2.0, |v| v["type"] == "map_meta" && v.get("path").is_none()).await;
        let mut ping = tokio::time::interval(Duration::from_millis(100));
        let bin = tokio::time::timeout(Duration::from_secs(1), async {
            loop {
                tokio::select! {
                    m = ws.next() => if let Some(Ok(Message::Binary(b))) = m {
                        if b.starts_with(b"TWMP") {
                            return b;
                        }
                    },
                    _ = ping.tick() => ws.send(Message::Ping(Vec::new())).await.unwrap(),
                }
            }
        })
        .await
        .unwrap();
        let m = decode_map_binary(&bin).unwrap();
        assert_eq!((m.width, m.height), (240, 140));
        assert!(m.cells.iter().any(|c| *c == 100));

        send(&mut ws, json!({"v": 1, "type": "mode", "action": "save_map", "path": map_path.to_str().unwrap()})).await;
        let meta = until_alive(&mut ws, 1.0, |v| v["type"] == "map_meta" && v.get("path").is_some()).await;
        assert_eq!(meta["path"], map_path.to_str().unwrap());
        until_alive(&mut ws, 1.0, |v| v["type"] == "ack" && v["action"] == "save_map").await;
        send(&mut ws, json!({"v": 1, "type": "mode", "action": "stop"})).await;
        until_alive(&mut ws, 1.0, |v| v["type"] == "ack" && v["action"] == "stop").await;
    });
    let out = sim.join().unwrap().unwrap();
    assert!(out.metrics.sim_time < 2.9);
    assert!(map_path.exists());
    assert!(map_path.with_extension("pgm").exists());
}
