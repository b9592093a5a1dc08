//! Line-delimited episode traces: a header line, then one line per step.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rewards::{RewardBreakdown, RewardCoefs, StepLevels};
use crate::scene::{Action, AgentPose, CoverageTracker, NavScene, SceneSpec};

use super::env::footprint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub model: String,
    pub scene_index: usize,
    pub scene: SceneSpec,
    pub seed: u64,
    pub episode: usize,
    pub coefs: RewardCoefs,
}

/// State after step `t` (step 0 is the start, with no actions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub poses: [AgentPose; 2],
    /// Actions that led here; `None` at `t = 0`.
    pub actions: Option<[Action; 2]>,
    pub reward: RewardBreakdown,
    /// `(r^ω, r^ν)`.
    pub shares: (f64, f64),
    /// `Δ` of the forward prediction (PE at this step).
    pub pe: f64,
    pub zeta: f64,
    pub psi: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub meta: TraceMeta,
    pub steps: Vec<TraceStep>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Line {
    Episode(TraceMeta),
    Step(TraceStep),
}

impl EpisodeTrace {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &Line::Episode(self.meta.clone()))?;
        writeln!(w)?;
        for s in &self.steps {
            serde_json::to_writer(&mut w, &Line::Step(s.clone()))?;
            writeln!(w)?;
        }
        Ok(())
    }

    /// Visited nodes in order of the trace (with repeats).
    pub fn visited_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().flat_map(|s| [s.poses[0].node, s.poses[1].node])
    }

    /// Recomputes coverage, hull levels and rewards from the poses and
    /// logged `Δ`. Returns the first step whose logged values differ.
    pub fn replay_mismatch(&self, scene: &NavScene) -> Option<usize> {
        let mut cov = CoverageTracker::new(scene.node_count());
        let mut prev_levels: Option<StepLevels> = None;
        let mut prev_poses = self.steps.first()?.poses;
        for s in &self.steps {
            let zeta = cov.update(&s.poses);
            let hull = footprint(scene, s.poses, prev_poses);
            let levels = StepLevels::new(s.pe, zeta, hull);
            let reward = match &prev_levels {
                None => RewardBreakdown { previous: levels, ..Default::default() },
                Some(p) => crate::rewards::step_reward(&self.meta.coefs, &levels, p),
            };
            if zeta != s.zeta || hull.perimeter != s.psi || hull.area != s.phi || reward != s.reward {
                return Some(s.t);
            }
            prev_levels = Some(levels);
            prev_poses = s.poses;
        }
        None
    }
}

/// Reads every episode from a trace file (several episodes may be
/// concatenated).
pub fn read_traces<R: BufRead>(r: R) -> Result<Vec<EpisodeTrace>> {
    let mut out: Vec<EpisodeTrace> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Line>(&line) {
            Ok(Line::Episode(meta)) => out.push(EpisodeTrace { meta, steps: Vec::new() }),
            Ok(Line::Step(step)) => out
                .last_mut()
                .ok_or_else(|| Error::Format(format!("line {}: step before any episode header", i + 1)))?
                .steps
                .push(step),
            Err(e) => return Err(Error::Format(format!("line {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

pub fn write_traces(path: &Path, traces: &[EpisodeTrace]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    for t in traces {
        t.write_jsonl(&mut w)?;
    }
    w.flush().map_err(|e| Error::file(path, e))?;
    Ok(())
}

pub fn load_traces(path: &Path) -> Result<Vec<EpisodeTrace>> {
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_traces(std::io::BufReader::new(f))
}
