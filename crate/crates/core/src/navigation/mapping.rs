use serde::{Deserialize, Serialize};

use crate::environment::{Cell, OccupancyGrid};
use crate::math::Pose2;
use crate::sensors::LidarParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogOddsParams {
    pub p_hit: f64,
    pub p_miss: f64,
    pub clamp: f64,
}

impl Default for LogOddsParams {
    fn default() -> Self {
        Self {
            p_hit: 0.7,
            p_miss: 0.4,
            clamp: 5.0,
        }
    }
}

pub fn log_odds(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl LogOddsParams {
    pub fn l_occ(&self) -> f64 {
        log_odds(self.p_hit)
    }

    pub fn l_free(&self) -> f64 {
        log_odds(self.p_miss)
    }
}

/// Occupancy map under construction, stored as log-odds per cell on the
/// same lattice conventions as [`OccupancyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogOddsMap {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Pose2,
    pub params: LogOddsParams,
    pub cells: Vec<f64>,
}

impl LogOddsMap {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Pose2, params: LogOddsParams) -> Self {
        Self {
            width,
            height,
            resolution,
            origin,
            params,
            cells: vec![0.0; width * height],
        }
    }

    /// Empty map on the lattice of an existing grid.
    pub fn like(grid: &OccupancyGrid, params: LogOddsParams) -> Self {
        Self::new(grid.width, grid.height, grid.resolution, grid.origin, params)
    }

    pub fn get(&self, cx: usize, cy: usize) -> f64 {
        self.cells[cy * self.width + cx]
    }

    fn add(&mut self, cx: i64, cy: i64, dl: f64) {
        if cx < 0 || cy < 0 || cx >= self.width as i64 || cy >= self.height as i64 {
            return;
        }
        let c = &mut self.cells[cy as usize * self.width + cx as usize];
        *c = (*c + dl).clamp(-self.params.clamp, self.params.clamp);
    }

    fn to_grid_frame(&self, x: f64, y: f64) -> (f64, f64) {
        let (lx, ly) = self.origin.to_local(x, y);
        (lx / self.resolution, ly / self.resolution)
    }

    /// Integrates one beam from `from` to `to` (world). The end cell is
    /// marked occupied when `hit`, otherwise the whole segment is free.
    pub fn integrate_beam(&mut self, from: (f64, f64), to: (f64, f64), hit: bool) {
        let (l_free, l_occ) = (self.params.l_free(), self.params.l_occ());
        let a = self.to_grid_frame(from.0, from.1);
        let b = self.to_grid_frame(to.0, to.1);
        let end = (b.0.floor() as i64, b.1.floor() as i64);
        for (cx, cy) in traverse(a, b) {
            if hit && (cx, cy) == end {
                break;
            }
            self.add(cx, cy, l_free);
        }
        if hit {
            self.add(end.0, end.1, l_occ);
        }
    }

    /// Classifies each cell with the map-file thresholds.
    pub fn to_grid(&self, occupied_thresh: f64, free_thresh: f64) -> OccupancyGrid {
        let mut g = OccupancyGrid::new(self.width, self.height, self.resolution, self.origin, Cell::Unknown);
        for cy in 0..self.height {
            for cx in 0..self.width {
                let l = self.get(cx, cy);
                let p = 1.0 - 1.0 / (1.0 + l.exp());
                let c = if l == 0.0 {
                    Cell::Unknown
                } else if p > occupied_thresh {
                    Cell::Occupied
                } else if p < free_thresh {
                    Cell::Free
                } else {
                    Cell::Unknown
                };
                g.set(cx, cy, c);
            }
        }
        g
    }
}

/// Cells crossed by the segment `a → b` in grid units, in order.
fn traverse(a: (f64, f64), b: (f64, f64)) -> Vec<(i64, i64)> {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let mut c = (a.0.floor() as i64, a.1.floor() as i64);
    let end = (b.0.floor() as i64, b.1.floor() as i64);
    let step = (dx.signum() as i64, dy.signum() as i64);
    let t_delta = (
        if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY },
        if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY },
    );
    let first = |p: f64, d: f64, cell: i64| {
        if d > 0.0 {
            ((cell + 1) as f64 - p) / d
        } else if d < 0.0 {
            (cell as f64 - p) / d
        } else {
            f64::INFINITY
        }
    };
    let mut t_max = (first(a.0, dx, c.0), first(a.1, dy, c.1));
    let mut out = vec![c];
    let limit = ((end.0 - c.0).abs() + (end.1 - c.1).abs()) as usize;
    for _ in 0..limit {
        if t_max.0 < t_max.1 {
            c.0 += step.0;
            t_max.0 += t_delta.0;
        } else {
            c.1 += step.1;
            t_max.1 += t_delta.1;
        }
        out.push(c);
        if c == end {
            break;
        }
    }
    out
}

/// Integrates a planar scan taken from `sensor` (world pose of the LIDAR).
/// Beams are applied in index order; no-return beams clear space out to
/// `r_max`.
pub fn update_occupancy(map: &mut LogOddsMap, ranges: &[f64], sensor: &Pose2, params: &LidarParams) {
    for (i, r) in ranges.iter().enumerate() {
        let (hit, d) = if r.is_finite() { (true, *r) } else { (false, params.r_max) };
        let to = sensor.to_world(d * params.theta(i).cos(), d * params.theta(i).sin());
        map.integrate_beam((sensor.x, sensor.y), to, hit);
    }
}

/// Fraction of the true grid's boundary cells (occupied cells touching
/// free space) that `estimate` classifies as occupied. Both grids must
/// share a lattice.
pub fn boundary_recall(truth: &OccupancyGrid, estimate: &OccupancyGrid) -> f64 {
    let boundary = truth.boundary_cells(|cx, cy| truth.get(cx as i64, cy as i64) == Some(Cell::Free));
    if boundary.is_empty() {
        return 1.0;
    }
    let found = boundary
        .iter()
        .filter(|(cx, cy)| estimate.get(*cx as i64, *cy as i64) == Some(Cell::Occupied))
        .count();
    found as f64 / boundary.len() as f64
}
