use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acoustics::RoomSpec;
use crate::error::{Error, Result};

/// Height of agent nodes (ear height) above the floor, in meters.
pub const EAR_HEIGHT: f64 = 1.5;

/// Interior wall segment on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

/// Everything needed to build a scene; this is what scene files store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    pub resolution: f64,
    pub walls: Vec<Wall>,
    /// Absorption of the six surfaces `[x=0, x=W, y=0, y=D, floor, ceiling]`.
    pub absorption: [f64; 6],
    pub max_order: u32,
    pub seed: u64,
}

impl SceneSpec {
    pub fn open(width: f64, depth: f64, height: f64, resolution: f64) -> Self {
        SceneSpec {
            width,
            depth,
            height,
            resolution,
            walls: Vec::new(),
            absorption: [0.5; 6],
            max_order: 8,
            seed: 0,
        }
    }

    /// Randomized room of the given footprint: per-surface absorption and,
    /// with probability one half, a partial interior wall between grid lines.
    pub fn random(seed: u64, width: f64, depth: f64, resolution: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5CE9_E000_0000);
        let mut absorption = [0.0; 6];
        for a in &mut absorption {
            *a = rng.random_range(0.3..0.8);
        }
        let mut walls = Vec::new();
        if rng.random_bool(0.5) {
            let along_x = rng.random_bool(0.5);
            let (span, across) = if along_x { (width, depth) } else { (depth, width) };
            let lines = (across / resolution).floor() as usize;
            if lines >= 3 {
                let k = rng.random_range(1..lines - 1);
                let offset = (k as f64 + 0.5) * resolution;
                let len = span * rng.random_range(0.3..0.7);
                let from_start = rng.random_bool(0.5);
                let (s0, s1) = if from_start { (0.0, len) } else { (span - len, span) };
                let wall = if along_x {
                    Wall { a: [s0, offset], b: [s1, offset] }
                } else {
                    Wall { a: [offset, s0], b: [offset, s1] }
                };
                walls.push(wall);
            }
        }
        SceneSpec {
            width,
            depth,
            height: 3.0,
            resolution,
            walls,
            absorption,
            max_order: 8,
            seed,
        }
    }

    /// Acoustic clearance between the outermost nodes and the room surfaces.
    pub fn clearance(&self) -> f64 {
        0.5 * self.resolution
    }

    pub fn room(&self) -> RoomSpec {
        let c = self.clearance();
        RoomSpec {
            width: self.width + 2.0 * c,
            depth: self.depth + 2.0 * c,
            height: self.height,
            absorption: self.absorption,
            speed_of_sound: 343.0,
            max_order: self.max_order,
            sample_rate: 16_000,
        }
    }
}

/// Navigability graph over a grid of nodes.
#[derive(Debug, Clone)]
pub struct NavScene {
    pub spec: SceneSpec,
    pub nodes: Vec<[f64; 3]>,
    pub edges: Vec<(usize, usize)>,
    /// Grid cell `(i, j)` of each node.
    pub cells: Vec<(usize, usize)>,
    /// Neighbor in direction `[+x, +y, -x, -y]`, if an edge exists.
    pub neighbors: Vec<[Option<usize>; 4]>,
    grid: Vec<Option<usize>>,
    nx: usize,
    ny: usize,
}

pub(crate) fn orient(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    const TOL: f64 = 1e-12;
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    let straddle = |a: f64, b: f64| (a > TOL && b < -TOL) || (a < -TOL && b > TOL);
    if straddle(d1, d2) && straddle(d3, d4) {
        return true;
    }
    let on = |p: [f64; 2], q: [f64; 2], r: [f64; 2], d: f64| {
        d.abs() <= TOL
            && r[0] >= p[0].min(q[0]) - TOL
            && r[0] <= p[0].max(q[0]) + TOL
            && r[1] >= p[1].min(q[1]) - TOL
            && r[1] <= p[1].max(q[1]) + TOL
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn point_on_segment(p: [f64; 2], w: &Wall) -> bool {
    segments_intersect(p, p, w.a, w.b)
}

/// Builds the navigability graph: grid nodes at `resolution` spacing, edges
/// between 4-neighbors whose connecting segment does not touch a wall, and
/// only the connected component containing the node closest to the centroid.
pub fn build_scene(spec: &SceneSpec) -> Result<NavScene> {
    let res = spec.resolution;
    if !(res > 0.0) || !res.is_finite() {
        return Err(Error::config("resolution must be > 0"));
    }
    if !(spec.width > 2.0 * res && spec.depth > 2.0 * res && spec.height > 0.0) {
        return Err(Error::config(format!(
            "degenerate room {}x{}x{} for resolution {res}",
            spec.width, spec.depth, spec.height
        )));
    }
    for w in &spec.walls {
        for p in [w.a, w.b] {
            if !(p[0] >= 0.0 && p[0] <= spec.width && p[1] >= 0.0 && p[1] <= spec.depth) {
                return Err(Error::config(format!("wall endpoint {p:?} outside room bounds")));
            }
        }
    }
    spec.room().validate()?;
    let nx = (spec.width / res + 1e-9).floor() as usize + 1;
    let ny = (spec.depth / res + 1e-9).floor() as usize + 1;
    let z = EAR_HEIGHT.min(0.5 * spec.height);
    let pos = |i: usize, j: usize| [i as f64 * res, j as f64 * res];

    let free: Vec<bool> = (0..nx * ny)
        .map(|c| {
            let p = pos(c % nx, c / nx);
            !spec.walls.iter().any(|w| point_on_segment(p, w))
        })
        .collect();
    let blocked = |a: [f64; 2], b: [f64; 2]| spec.walls.iter().any(|w| segments_intersect(a, b, w.a, w.b));
    const STEPS: [(isize, isize); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
    let cell_neighbor = |c: usize, d: usize| -> Option<usize> {
        let (i, j) = ((c % nx) as isize, (c / nx) as isize);
        let (ni, nj) = (i + STEPS[d].0, j + STEPS[d].1);
        if ni < 0 || nj < 0 || ni >= nx as isize || nj >= ny as isize {
            return None;
        }
        let n = nj as usize * nx + ni as usize;
        if !free[c] || !free[n] || blocked(pos(i as usize, j as usize), pos(ni as usize, nj as usize)) {
            return None;
        }
        Some(n)
    };

    // Start from the free cell nearest the room centroid.
    let centroid = [spec.width / 2.0, spec.depth / 2.0];
    let start = (0..nx * ny)
        .filter(|&c| free[c])
        .min_by(|&a, &b| {
            let da = dist2(pos(a % nx, a / nx), centroid);
            let db = dist2(pos(b % nx, b / nx), centroid);
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        })
        .ok_or_else(|| Error::config("room has no free grid node"))?;
    let mut keep = vec![false; nx * ny];
    keep[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for d in 0..4 {
            if let Some(n) = cell_neighbor(c, d) {
                if !keep[n] {
                    keep[n] = true;
                    queue.push_back(n);
                }
            }
        }
    }

    let mut grid = vec![None; nx * ny];
    let mut nodes = Vec::new();
    let mut cells = Vec::new();
    for c in 0..nx * ny {
        if keep[c] {
            grid[c] = Some(nodes.len());
            let p = pos(c % nx, c / nx);
            nodes.push([p[0], p[1], z]);
            cells.push((c % nx, c / nx));
        }
    }
    let mut neighbors = vec![[None; 4]; nodes.len()];
    let mut edges = Vec::new();
    for c in 0..nx * ny {
        let Some(id) = grid[c] else { continue };
        for d in 0..4 {
            if let Some(n) = cell_neighbor(c, d).and_then(|n| grid[n]) {
                neighbors[id][d] = Some(n);
                if id < n {
                    edges.push((id, n));
                }
            }
        }
    }
    Ok(NavScene {
        spec: spec.clone(),
        nodes,
        edges,
        cells,
        neighbors,
        grid,
        nx,
        ny,
    })
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

impl NavScene {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Node at grid cell `(i, j)`, if navigable. Out-of-grid indices yield `None`.
    pub fn node_at(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
            return None;
        }
        self.grid[j as usize * self.nx + i as usize]
    }

    pub fn position(&self, node: usize) -> [f64; 3] {
        self.nodes[node]
    }

    pub fn ground(&self, node: usize) -> [f64; 2] {
        [self.nodes[node][0], self.nodes[node][1]]
    }

    /// Node position in the acoustic room frame (shifted by the wall clearance).
    pub fn acoustic_position(&self, node: usize) -> [f64; 3] {
        let c = self.spec.clearance();
        let p = self.nodes[node];
        [p[0] + c, p[1] + c, p[2]]
    }

    /// True if the straight segment between two ground points touches a wall.
    pub fn occluded(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        self.spec.walls.iter().any(|w| segments_intersect(a, b, w.a, w.b))
    }

    /// Node nearest the room centroid.
    pub fn center_node(&self) -> usize {
        let c = [self.spec.width / 2.0, self.spec.depth / 2.0];
        (0..self.nodes.len())
            .min_by(|&a, &b| {
                dist2(self.ground(a), c)
                    .partial_cmp(&dist2(self.ground(b), c))
                    .unwrap()
                    .then(a.cmp(&b))
            })
            .unwrap_or(0)
    }
}
