use serde::{Deserialize, Serialize};

use crate::math::Pose2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Occupied,
    Unknown,
}

/// Row-major occupancy grid. Cell `(0, 0)` is the lower-left corner and
/// `origin` is its world pose; rows grow along the grid's +y axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub width: usize,
    pub height: usize,
    /// m/cell
    pub resolution: f64,
    pub origin: Pose2,
    pub cells: Vec<Cell>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Pose2, fill: Cell) -> Self {
        assert!(width >= 1 && height >= 1, "grid needs at least one cell");
        assert!(resolution > 0.0, "resolution must be positive");
        Self {
            width,
            height,
            resolution,
            origin,
            cells: vec![fill; width * height],
        }
    }

    pub fn index(&self, cx: usize, cy: usize) -> usize {
        cy * self.width + cx
    }

    pub fn get(&self, cx: i64, cy: i64) -> Option<Cell> {
        if cx < 0 || cy < 0 || cx >= self.width as i64 || cy >= self.height as i64 {
            None
        } else {
            Some(self.cells[self.index(cx as usize, cy as usize)])
        }
    }

    pub fn set(&mut self, cx: usize, cy: usize, cell: Cell) {
        let i = self.index(cx, cy);
        self.cells[i] = cell;
    }

    pub fn is_occupied(&self, cx: i64, cy: i64) -> bool {
        self.get(cx, cy) == Some(Cell::Occupied)
    }

    /// World point to continuous grid coordinates (cell units).
    pub fn world_to_grid(&self, x: f64, y: f64) -> (f64, f64) {
        let (lx, ly) = self.origin.to_local(x, y);
        (lx / self.resolution, ly / self.resolution)
    }

    pub fn world_to_cell(&self, x: f64, y: f64) -> (i64, i64) {
        let (gx, gy) = self.world_to_grid(x, y);
        (gx.floor() as i64, gy.floor() as i64)
    }

    /// World coordinates of a cell centre.
    pub fn cell_center(&self, cx: usize, cy: usize) -> (f64, f64) {
        self.origin.to_world(
            (cx as f64 + 0.5) * self.resolution,
            (cy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn occupied_at(&self, x: f64, y: f64) -> bool {
        let (cx, cy) = self.world_to_cell(x, y);
        self.is_occupied(cx, cy)
    }

    /// World size (x, y) in metres.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    pub fn count(&self, cell: Cell) -> usize {
        self.cells.iter().filter(|c| **c == cell).count()
    }

    /// Occupied cells that share an edge with a cell accepted by `open`.
    pub fn boundary_cells(&self, open: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for cy in 0..self.height {
            for cx in 0..self.width {
                if self.cells[self.index(cx, cy)] != Cell::Occupied {
                    continue;
                }
                let touches = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)].iter().any(|(dx, dy)| {
                    let nx = cx as i64 + dx;
                    let ny = cy as i64 + dy;
                    matches!(self.get(nx, ny), Some(c) if c != Cell::Occupied)
                        && open(nx as usize, ny as usize)
                });
                if touches {
                    out.push((cx, cy));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn world_cell_mapping() {
        let g = OccupancyGrid::new(10, 10, 0.05, Pose2::new(-0.25, -0.25, 0.0), Cell::Free);
        assert_eq!(g.extent(), (0.5, 0.5));
        assert_eq!(g.world_to_cell(0.0, 0.0), (5, 5));
        assert_eq!(g.world_to_cell(-0.26, 0.0).0, -1);
        let (x, y) = g.cell_center(0, 0);
        assert!((x + 0.225).abs() < 1e-12 && (y + 0.225).abs() < 1e-12);
    }

    #[test]
    fn rotated_origin() {
        let g = OccupancyGrid::new(4, 4, 1.0, Pose2::new(0.0, 0.0, std::f64::consts::FRAC_PI_2), Cell::Free);
        // +x in the grid is +y in the world
        assert_eq!(g.world_to_cell(-0.5, 2.5), (2, 0));
    }
}
