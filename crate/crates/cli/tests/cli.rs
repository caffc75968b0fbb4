use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn twinsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twinsim")).args(args).current_dir(cwd).output().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

/// Exit status plus the error code on the last stderr line.
fn failure(o: &Output) -> (i32, String) {
    let err = String::from_utf8_lossy(&o.stderr);
    let last = err.lines().last().unwrap_or_default();
    let v: Value = serde_json::from_str(last).unwrap_or_else(|_| panic!("last stderr line is not JSON: {err}"));
    assert!(v["message"].is_string());
    (o.status.code().unwrap(), v["error"].as_str().unwrap().to_string())
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const TELEOP: &str = r#"
vehicle = "scale10"
scene = "oval"
mode = "teleop"
duration = 3.0
seed = 4

[driver]
kind = "scripted"
speed = 1.0
"#;

#[test]
fn run_then_replay_and_score() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "teleop.toml", TELEOP);
    let run = stdout_json(&twinsim(&["run", "-c", "teleop.toml", "-o", "a", "--headless"], d));
    assert_eq!(run["metrics"]["ticks"], 3000);
    assert!(d.join("a/run.jsonl").exists());
    assert!(d.join("a/metrics.json").exists());

    let rep = stdout_json(&twinsim(&["replay", "a/run.jsonl", "-c", "teleop.toml", "-o", "b"], d));
    assert_eq!(rep["metrics"]["final_pose"], run["metrics"]["final_pose"]);
    assert_eq!(std::fs::read(d.join("a/run.jsonl")).unwrap().len() > 0, true);

    write(d, "line.csv", "x,y,v\n0,0,1\n100,0,1\n");
    let s = stdout_json(&twinsim(&["score", "a/run.jsonl", "-t", "line.csv"], d));
    assert!(s["samples"].as_u64().unwrap() > 0);
    assert!(s["max_cross_track"].as_f64().unwrap().is_finite());
}

#[test]
fn seed_override_changes_the_world() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "teleop.toml", &TELEOP.replace("duration = 3.0", "duration = 0.2"));
    stdout_json(&twinsim(&["run", "-c", "teleop.toml", "-o", "a"], d));
    stdout_json(&twinsim(&["run", "-c", "teleop.toml", "-o", "b", "--seed", "5"], d));
    let o = twinsim(&["replay", "b/run.jsonl", "-c", "teleop.toml"], d);
    assert_eq!(failure(&o), (6, "hash_mismatch".into()));
}

#[test]
fn every_failure_has_a_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    assert_eq!(failure(&twinsim(&["run", "-c", "missing.toml"], d)), (4, "io".into()));
    assert_eq!(failure(&twinsim(&["run"], d)), (2, "usage".into()));
    assert_eq!(failure(&twinsim(&["frobnicate"], d)), (2, "usage".into()));

    write(d, "bad.toml", "vehicle = \"scale10\"\nscene = \"oval\"\nmode = \"teleop\"\nbogus = 1\n");
    assert_eq!(failure(&twinsim(&["run", "-c", "bad.toml"], d)), (3, "config".into()));

    write(d, "preset.toml", &TELEOP.replace("scale10", "scale99"));
    assert_eq!(failure(&twinsim(&["run", "-c", "preset.toml"], d)), (8, "unknown_preset".into()));

    write(d, "scene.toml", &TELEOP.replace("\"oval\"", "\"moon\""));
    assert_eq!(failure(&twinsim(&["run", "-c", "scene.toml"], d)), (13, "unknown_scene".into()));

    write(d, "empty.csv", "x,y,v\n");
    write(d, "track.toml", "vehicle = \"scale10\"\nscene = \"oval\"\nmode = \"track\"\ntrajectory = \"empty.csv\"\n");
    assert_eq!(failure(&twinsim(&["run", "-c", "track.toml", "-o", "t"], d)), (11, "no_path".into()));

    write(d, "junk.jsonl", "{not json\n");
    assert_eq!(failure(&twinsim(&["replay", "junk.jsonl"], d)), (5, "log_format".into()));

    write(d, "map.yaml", "image: none.pgm\nresolution: -1\norigin: [0, 0, 0]\noccupied_thresh: 0.65\nfree_thresh: 0.2\n");
    assert_eq!(failure(&twinsim(&["map-convert", "map.yaml", "m.json"], d)), (14, "scene".into()));

    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = busy.local_addr().unwrap().to_string();
    write(d, "ok.toml", TELEOP);
    assert_eq!(failure(&twinsim(&["run", "-c", "ok.toml", "--server", &addr], d)), (15, "server".into()));
}

#[test]
fn map_convert_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // 3x2 map, negated so 255 is occupied; top image row is the high-y row
    write(d, "src.yaml", "image: src.pgm\nresolution: 0.5\norigin: [1.0, 2.0, 0.0]\nnegate: 1\noccupied_thresh: 0.65\nfree_thresh: 0.196\n");
    let mut pgm = b"P5\n3 2\n255\n".to_vec();
    pgm.extend_from_slice(&[255, 0, 128, 0, 0, 255]);
    std::fs::write(d.join("src.pgm"), pgm).unwrap();

    let info = stdout_json(&twinsim(&["map-convert", "src.yaml", "out.json"], d));
    assert_eq!((info["occupied"].as_u64(), info["free"].as_u64(), info["unknown"].as_u64()), (Some(2), Some(3), Some(1)));
    let j: Value = serde_json::from_slice(&std::fs::read(d.join("out.json")).unwrap()).unwrap();
    assert_eq!(j["origin"], serde_json::json!([1.0, 2.0, 0.0]));
    let cells: Vec<u64> = j["cells"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).collect();
    assert_eq!(cells, vec![0, 0, 100, 100, 0, 255]);

    stdout_json(&twinsim(&["map-convert", "src.yaml", "canon.yaml"], d));
    stdout_json(&twinsim(&["map-convert", "canon.yaml", "again.json"], d));
    let again: Value = serde_json::from_slice(&std::fs::read(d.join("again.json")).unwrap()).unwrap();
    assert_eq!(again, j);

    assert_eq!(failure(&twinsim(&["map-convert", "src.yaml", "out.png"], d)), (2, "usage".into()));
}
