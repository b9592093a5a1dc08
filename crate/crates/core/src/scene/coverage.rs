use super::AgentPose;

/// Union of nodes visited by both agents during an episode.
#[derive(Debug, Clone)]
pub struct CoverageTracker {
    visited: Vec<bool>,
    count: usize,
}

impl CoverageTracker {
    pub fn new(node_count: usize) -> Self {
        CoverageTracker {
            visited: vec![false; node_count],
            count: 0,
        }
    }

    /// Marks both agents' nodes visited and returns `ζ = N_v / N_e`.
    pub fn update(&mut self, poses: &[AgentPose]) -> f64 {
        for p in poses {
            if !self.visited[p.node] {
                self.visited[p.node] = true;
                self.count += 1;
            }
        }
        self.ratio()
    }

    pub fn ratio(&self) -> f64 {
        if self.visited.is_empty() {
            0.0
        } else {
            self.count as f64 / self.visited.len() as f64
        }
    }

    pub fn visited_count(&self) -> usize {
        self.count
    }

    pub fn total(&self) -> usize {
        self.visited.len()
    }

    pub fn is_visited(&self, node: usize) -> bool {
        self.visited[node]
    }

    pub fn visited(&self) -> &[bool] {
        &self.visited
    }
}
