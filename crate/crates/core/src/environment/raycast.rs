use nalgebra::Vector3;

use super::grid::OccupancyGrid;
use super::heightmap::Heightmap;
use super::scene::{Aabb, Cylinder, Scene};

/// Bisection iterations refining a heightmap crossing.
pub const HEIGHTMAP_BISECTIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub point: Vector3<f64>,
    /// Unit surface normal facing the ray origin.
    pub normal: Vector3<f64>,
}

impl RayHit {
    fn at(origin: &Vector3<f64>, dir: &Vector3<f64>, t: f64, normal: Vector3<f64>) -> Self {
        Self {
            distance: t,
            point: origin + dir * t,
            normal,
        }
    }
}

pub(crate) fn raycast(scene: &Scene, origin: &Vector3<f64>, dir: &Vector3<f64>, r_max: f64) -> Option<RayHit> {
    debug_assert!((dir.norm() - 1.0).abs() < 1e-6, "direction must be unit length");
    let mut best: Option<RayHit> = None;
    let mut keep = |h: Option<RayHit>| {
        if let Some(h) = h {
            if best.map_or(true, |b| h.distance < b.distance) {
                best = Some(h);
            }
        }
    };
    if let Some(grid) = &scene.grid {
        keep(grid_ray(grid, scene.wall_height, origin, dir, r_max));
    }
    match &scene.heightmap {
        Some(hm) => keep(heightmap_ray(hm, origin, dir, r_max)),
        None => keep(ground_plane_ray(origin, dir, r_max)),
    }
    for b in &scene.boxes {
        keep(box_ray(b, origin, dir, r_max));
    }
    for c in &scene.cylinders {
        keep(cylinder_ray(c, origin, dir, r_max));
    }
    best
}

/// First crossing of the cylinder surface within its height band.
fn cylinder_ray(c: &Cylinder, o: &Vector3<f64>, d: &Vector3<f64>, r_max: f64) -> Option<RayHit> {
    let (px, py) = (o.x - c.center[0], o.y - c.center[1]);
    let a = d.x * d.x + d.y * d.y;
    if a == 0.0 {
        return None;
    }
    // |p + t·d|² = r² in the plane
    let b = px * d.x + py * d.y;
    let k = px * px + py * py - c.radius * c.radius;
    let disc = b * b - a * k;
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    // stable pair of roots
    let q = -(b + b.signum() * root);
    let (t1, t2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, k / q) };
    let (near, far) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
    [near, far].into_iter().filter(|t| *t >= 0.0 && *t <= r_max).find_map(|t| {
        let p = o + d * t;
        (p.z >= c.z_min && p.z <= c.z_max).then(|| {
            let radial = Vector3::new(p.x - c.center[0], p.y - c.center[1], 0.0) / c.radius;
            // face the origin
            let n = if radial.dot(d) > 0.0 { -radial } else { radial };
            RayHit::at(o, d, t, n)
        })
    })
}

fn ground_plane_ray(o: &Vector3<f64>, d: &Vector3<f64>, r_max: f64) -> Option<RayHit> {
    if d.z >= 0.0 || o.z < 0.0 {
        return None;
    }
    let t = -o.z / d.z;
    (t <= r_max).then(|| RayHit::at(o, d, t, Vector3::z()))
}

/// Slab test. A ray starting inside the box hits at distance zero.
fn box_ray(b: &Aabb, o: &Vector3<f64>, d: &Vector3<f64>, r_max: f64) -> Option<RayHit> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    let mut axis = 0;
    for k in 0..3 {
        if d[k] == 0.0 {
            if o[k] < b.min[k] || o[k] > b.max[k] {
                return None;
            }
            continue;
        }
        let t1 = (b.min[k] - o[k]) / d[k];
        let t2 = (b.max[k] - o[k]) / d[k];
        let (near, far) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        if near > t_enter {
            t_enter = near;
            axis = k;
        }
        t_exit = t_exit.min(far);
    }
    if t_enter > t_exit || t_exit <= 0.0 {
        return None;
    }
    let t = t_enter.max(0.0);
    if t > r_max {
        return None;
    }
    let mut n = Vector3::zeros();
    n[axis] = -d[axis].signum();
    if t_enter < 0.0 {
        n = -d;
    }
    Some(RayHit::at(o, d, t, n))
}

/// Amanatides–Woo traversal of the grid's occupied cells, extruded from
/// `z = 0` to `wall_height`.
fn grid_ray(grid: &OccupancyGrid, wall_height: f64, o: &Vector3<f64>, d: &Vector3<f64>, r_max: f64) -> Option<RayHit> {
    // Vertical extent of the walls along the ray.
    let (mut t_lo, mut t_hi) = (0.0f64, r_max);
    let mut lo_normal = None;
    if d.z == 0.0 {
        if o.z < 0.0 || o.z > wall_height {
            return None;
        }
    } else {
        let ta = (0.0 - o.z) / d.z;
        let tb = (wall_height - o.z) / d.z;
        let (near, far) = if ta < tb { (ta, tb) } else { (tb, ta) };
        if near > t_lo {
            t_lo = near;
            lo_normal = Some(Vector3::new(0.0, 0.0, -d.z.signum()));
        }
        t_hi = t_hi.min(far);
    }

    // Ray in grid coordinates (cells), parameterised by metres along the ray.
    let (s, c) = grid.origin.yaw.sin_cos();
    let inv = 1.0 / grid.resolution;
    let (gx, gy) = grid.world_to_grid(o.x, o.y);
    let dx = (c * d.x + s * d.y) * inv;
    let dy = (-s * d.x + c * d.y) * inv;
    let to_world = |nx: f64, ny: f64| Vector3::new(c * nx - s * ny, s * nx + c * ny, 0.0);

    // Clip to the grid rectangle.
    let (w, h) = (grid.width as f64, grid.height as f64);
    for (p, v, hi, k) in [(gx, dx, w, 0), (gy, dy, h, 1)] {
        if v == 0.0 {
            if p < 0.0 || p >= hi {
                return None;
            }
            continue;
        }
        let ta = (0.0 - p) / v;
        let tb = (hi - p) / v;
        let (near, far) = if ta < tb { (ta, tb) } else { (tb, ta) };
        if near > t_lo {
            t_lo = near;
            lo_normal = Some(if k == 0 { to_world(-v.signum(), 0.0) } else { to_world(0.0, -v.signum()) });
        }
        t_hi = t_hi.min(far);
    }
    if t_lo > t_hi {
        return None;
    }

    let clamp_cell = |v: f64, n: usize| (v.floor() as i64).clamp(0, n as i64 - 1);
    // Nudge into the entered cell so boundary entries pick the right one.
    let px = gx + dx * t_lo;
    let py = gy + dy * t_lo;
    let mut cx = clamp_cell(if dx < 0.0 && px.fract() == 0.0 { px - 0.5 } else { px }, grid.width);
    let mut cy = clamp_cell(if dy < 0.0 && py.fract() == 0.0 { py - 0.5 } else { py }, grid.height);
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    let next_x = |cx: i64| {
        if dx == 0.0 {
            f64::INFINITY
        } else {
            ((cx + (step_x > 0) as i64) as f64 - gx) / dx
        }
    };
    let next_y = |cy: i64| {
        if dy == 0.0 {
            f64::INFINITY
        } else {
            ((cy + (step_y > 0) as i64) as f64 - gy) / dy
        }
    };

    let mut t = t_lo;
    let mut normal = lo_normal.unwrap_or(-d);
    loop {
        if grid.is_occupied(cx, cy) {
            return Some(RayHit::at(o, d, t, normal));
        }
        let (tx, ty) = (next_x(cx), next_y(cy));
        if tx <= ty {
            t = tx;
            cx += step_x;
            normal = to_world(-(step_x as f64), 0.0);
        } else {
            t = ty;
            cy += step_y;
            normal = to_world(0.0, -(step_y as f64));
        }
        if t > t_hi || cx < 0 || cy < 0 || cx >= grid.width as i64 || cy >= grid.height as i64 {
            return None;
        }
    }
}

/// Ray-march at half the lattice spacing, then bisect the first crossing.
fn heightmap_ray(hm: &Heightmap, o: &Vector3<f64>, d: &Vector3<f64>, r_max: f64) -> Option<RayHit> {
    let above = |t: f64| {
        let p = o + d * t;
        p.z - hm.elevation_at(p.x, p.y)
    };
    if above(0.0) < 0.0 {
        return None;
    }
    let (z_lo, z_hi) = hm.min_max();
    // Skip straight to where a descending ray first reaches the top of the terrain.
    let mut t0 = if o.z > z_hi {
        if d.z >= 0.0 {
            return None;
        }
        (z_hi - o.z) / d.z
    } else {
        0.0
    };
    if t0 > r_max {
        return None;
    }
    let step = 0.5 * hm.resolution;
    let mut f0 = above(t0);
    loop {
        if f0 <= 0.0 {
            return Some(RayHit::at(o, d, t0, hm.sample(o.x + d.x * t0, o.y + d.y * t0).normal));
        }
        if t0 >= r_max || (d.z >= 0.0 && o.z + d.z * t0 > z_hi) || (d.z < 0.0 && o.z + d.z * t0 < z_lo - 1.0) {
            return None;
        }
        let t1 = (t0 + step).min(r_max);
        let f1 = above(t1);
        if f1 <= 0.0 {
            let (mut a, mut b) = (t0, t1);
            for _ in 0..HEIGHTMAP_BISECTIONS {
                let m = 0.5 * (a + b);
                if above(m) > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            let p = o + d * b;
            return Some(RayHit::at(o, d, b, hm.sample(p.x, p.y).normal));
        }
        t0 = t1;
        f0 = f1;
    }
}
