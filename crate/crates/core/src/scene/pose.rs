use serde::{Deserialize, Serialize};

use super::NavScene;

/// Heading in quarter turns counter-clockwise from `+x`: 0°, 90°, 180°, 270°.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Heading(u8);

impl Heading {
    pub const EAST: Heading = Heading(0);
    pub const NORTH: Heading = Heading(1);
    pub const WEST: Heading = Heading(2);
    pub const SOUTH: Heading = Heading(3);

    pub fn from_quarter_turns(q: i64) -> Self {
        Heading(q.rem_euclid(4) as u8)
    }

    pub fn from_degrees(deg: u32) -> Option<Self> {
        (deg % 90 == 0 && deg < 360).then(|| Heading((deg / 90) as u8))
    }

    pub fn quarter_turns(self) -> usize {
        self.0 as usize
    }

    pub fn degrees(self) -> u32 {
        self.0 as u32 * 90
    }

    pub fn radians(self) -> f64 {
        (self.degrees() as f64).to_radians()
    }

    pub fn left(self) -> Self {
        Heading((self.0 + 1) % 4)
    }

    pub fn right(self) -> Self {
        Heading((self.0 + 3) % 4)
    }

    /// Unit grid step `(di, dj)` of the facing direction.
    pub fn step(self) -> (isize, isize) {
        [(1, 0), (0, 1), (-1, 0), (0, -1)][self.0 as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentPose {
    pub node: usize,
    pub heading: Heading,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    MoveForward,
    TurnLeft,
    TurnRight,
    Stop,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::MoveForward, Action::TurnLeft, Action::TurnRight, Action::Stop];
    pub const MOVEMENT: [Action; 3] = [Action::MoveForward, Action::TurnLeft, Action::TurnRight];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }
}

/// Applies an action. A blocked `MoveForward` is a no-op; `Stop` leaves the
/// pose unchanged (freezing is tracked by [`Agent`]).
pub fn step_action(scene: &NavScene, pose: AgentPose, action: Action) -> (AgentPose, bool) {
    match action {
        Action::TurnLeft => (AgentPose { heading: pose.heading.left(), ..pose }, false),
        Action::TurnRight => (AgentPose { heading: pose.heading.right(), ..pose }, false),
        Action::Stop => (pose, false),
        Action::MoveForward => match scene.neighbors[pose.node][pose.heading.quarter_turns()] {
            Some(next) => (AgentPose { node: next, ..pose }, true),
            None => (pose, false),
        },
    }
}

/// An agent's pose plus whether it has stopped for the rest of the episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agent {
    pub pose: AgentPose,
    pub stopped: bool,
}

impl Agent {
    pub fn new(pose: AgentPose) -> Self {
        Agent { pose, stopped: false }
    }

    /// Returns whether the agent changed node.
    pub fn act(&mut self, scene: &NavScene, action: Action) -> bool {
        if self.stopped {
            return false;
        }
        if action == Action::Stop {
            self.stopped = true;
            return false;
        }
        let (pose, moved) = step_action(scene, self.pose, action);
        self.pose = pose;
        moved
    }
}
