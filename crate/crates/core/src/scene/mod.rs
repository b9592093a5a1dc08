//! Navigability graphs over shoebox rooms, agent motion, coverage and the
//! footprint hull of two agents over consecutive steps.

mod coverage;
mod file;
mod graph;
mod hull;
mod patch;
mod pose;

pub use coverage::CoverageTracker;
pub use file::{parse_scene_spec, write_scene_spec};
pub use graph::{build_scene, segments_intersect, NavScene, SceneSpec, Wall, EAR_HEIGHT};
pub use hull::{convex_hull, hull_stats, HullStats, Point2};
pub use patch::{egocentric_patch, Patch, MASKED};
pub use pose::{step_action, Action, Agent, AgentPose, Heading};
