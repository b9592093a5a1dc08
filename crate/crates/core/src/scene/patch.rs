use super::{AgentPose, NavScene};

/// Value of cells outside the field of view.
pub const MASKED: f64 = -1.0;

/// Egocentric occupancy grid, row-major, row 0 farthest ahead.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub size: usize,
    pub cells: Vec<f64>,
}

impl Patch {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.size + col]
    }

    /// Clockwise quarter rotation.
    pub fn rotated_cw(&self) -> Patch {
        let n = self.size;
        let mut cells = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                // new(r, c) = old(n-1-c, r)
                cells[r * n + c] = self.get(n - 1 - c, r);
            }
        }
        Patch { size: n, cells }
    }
}

/// Occupancy of visible navigable nodes around `pose`, heading pointing up.
///
/// A cell is 1 if it holds a navigable node whose line of sight from the
/// agent does not touch a wall, else 0. With `fov90` set, cells outside the
/// forward 90° cone are [`MASKED`].
pub fn egocentric_patch(scene: &NavScene, pose: AgentPose, radius: usize, fov90: bool) -> Patch {
    let size = 2 * radius + 1;
    let r = radius as isize;
    let (ci, cj) = scene.cells[pose.node];
    let (fi, fj) = pose.heading.step();
    // Right-hand direction is the heading rotated clockwise.
    let (ri, rj) = pose.heading.right().step();
    let origin = scene.ground(pose.node);
    let mut cells = vec![0.0; size * size];
    for row in 0..size {
        let forward = r - row as isize;
        for col in 0..size {
            let lateral = col as isize - r;
            let idx = row * size + col;
            if fov90 && (forward < 0 || lateral.abs() > forward) {
                cells[idx] = MASKED;
                continue;
            }
            let gi = ci as isize + forward * fi + lateral * ri;
            let gj = cj as isize + forward * fj + lateral * rj;
            if let Some(node) = scene.node_at(gi, gj) {
                if node == pose.node || !scene.occluded(origin, scene.ground(node)) {
                    cells[idx] = 1.0;
                }
            }
        }
    }
    Patch { size, cells }
}
