use twinsim::environment::{Cell, OccupancyGrid, DEFAULT_FREE_THRESH, DEFAULT_OCCUPIED_THRESH};
use twinsim::harness::{resolve_scene, run_scenario, DriverConfig, Mode, ScenarioConfig};

/// Occupied cells with a free 4-neighbour, and how many `estimate` marks occupied.
fn boundary_hits(truth: &OccupancyGrid, estimate: &OccupancyGrid) -> (usize, usize) {
    let (mut total, mut found) = (0, 0);
    for cy in 0..truth.height as i64 {
        for cx in 0..truth.width as i64 {
            if truth.get(cx, cy) != Some(Cell::Occupied) {
                continue;
            }
            if [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(dx, dy)| truth.get(cx + dx, cy + dy) == Some(Cell::Free)) {
                total += 1;
                found += (estimate.get(cx, cy) == Some(Cell::Occupied)) as usize;
            }
        }
    }
    (total, found)
}

#[test]
fn noiseless_lap_maps_the_racetrack() {
    let mut c = ScenarioConfig::new("scale10", "racetrack", Mode::Teleop);
    c.driver = DriverConfig::Scripted { speed: 1.0 };
    c.duration = 120.0;
    c.laps = Some(1.0);
    c.mapping.enabled = true;
    let out = run_scenario(&c).unwrap();
    assert!(!out.metrics.collision, "scripted lap hit a wall at tick {:?}", out.metrics.collision_tick);
    assert!(out.metrics.completion >= 1.0, "lap incomplete: {}", out.metrics.completion);

    let truth = resolve_scene("racetrack").unwrap().scene.grid.unwrap();
    let map = out.map.unwrap().to_grid(DEFAULT_OCCUPIED_THRESH, DEFAULT_FREE_THRESH);
    let (total, found) = boundary_hits(&truth, &map);
    let recall = found as f64 / total as f64;
    assert!(recall >= 0.95, "recall {recall} ({found}/{total})");
    assert!((recall - out.metrics.map_recall.unwrap()).abs() < 1e-12);
}
