//! Partially observable maze simulator.
//!
//! The agent sees a 5x5 egocentric window (agent at the bottom centre,
//! facing up) plus its heading. Seven actions exist; only turn-left,
//! turn-right and forward do anything. Reaching the goal after `T` steps
//! pays `1 - T / T_max`; running out of time pays nothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::level::{Cell, Direction, Level, Occupancy};

pub const VIEW_SIZE: usize = 5;
pub const VIEW_CELLS: usize = VIEW_SIZE * VIEW_SIZE;
pub const N_CLASSES: usize = 4;
pub const N_DIRECTIONS: usize = 4;
/// Length of the flattened observation: one-hot view followed by one-hot heading.
pub const OBS_DIM: usize = VIEW_CELLS * N_CLASSES + N_DIRECTIONS;
pub const N_ACTIONS: usize = 7;

pub const TURN_LEFT: usize = 0;
pub const TURN_RIGHT: usize = 1;
pub const FORWARD: usize = 2;

pub const DEFAULT_T_MAX: usize = 250;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellClass {
    Empty = 0,
    Wall = 1,
    Goal = 2,
    OutOfBounds = 3,
}

/// Egocentric local view plus heading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Observation {
    /// Row-major, row 0 farthest ahead; the agent sits at row 4, column 2.
    pub view: [CellClass; VIEW_CELLS],
    pub dir: Direction,
}

impl Observation {
    pub fn cell(&self, col: usize, row: usize) -> CellClass {
        self.view[row * VIEW_SIZE + col]
    }

    /// Writes the one-hot encoding into `out[..OBS_DIM]`.
    pub fn encode_into(&self, out: &mut [f64]) {
        out[..OBS_DIM].fill(0.0);
        for (i, c) in self.view.iter().enumerate() {
            out[i * N_CLASSES + *c as usize] = 1.0;
        }
        out[VIEW_CELLS * N_CLASSES + self.dir.index()] = 1.0;
    }

    pub fn encode(&self) -> Vec<f64> {
        let mut v = vec![0.0; OBS_DIM];
        self.encode_into(&mut v);
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnvState {
    pub pos: Cell,
    pub dir: Direction,
    pub t: usize,
    pub done: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub reached_goal: bool,
}

/// A level compiled for fast stepping.
#[derive(Clone, Debug)]
pub struct Maze {
    occupancy: Occupancy,
    start: crate::level::Pose,
    t_max: usize,
}

impl Maze {
    pub fn new(level: &Level, t_max: usize) -> Result<Self> {
        if t_max == 0 {
            return Err(Error::Config("t_max must be >= 1".into()));
        }
        Ok(Self {
            occupancy: level.occupancy(),
            start: level.agent(),
            t_max,
        })
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn reset(&self) -> (EnvState, Observation) {
        let s = EnvState {
            pos: self.start.cell,
            dir: self.start.dir,
            t: 0,
            done: false,
        };
        (s, self.observe(&s))
    }

    pub fn observe(&self, s: &EnvState) -> Observation {
        let (fx, fy) = s.dir.vector();
        let (rx, ry) = s.dir.turn_right().vector();
        let mut view = [CellClass::Empty; VIEW_CELLS];
        for row in 0..VIEW_SIZE {
            let ahead = (VIEW_SIZE - 1 - row) as i32;
            for col in 0..VIEW_SIZE {
                let lateral = col as i32 - (VIEW_SIZE / 2) as i32;
                let c = s.pos.offset(ahead * fx + lateral * rx, ahead * fy + lateral * ry);
                view[row * VIEW_SIZE + col] = if !self.occupancy.in_bounds(c) {
                    CellClass::OutOfBounds
                } else if self.occupancy.is_blocked(c) {
                    CellClass::Wall
                } else if c == self.occupancy.goal() {
                    CellClass::Goal
                } else {
                    CellClass::Empty
                };
            }
        }
        Observation { view, dir: s.dir }
    }

    pub fn step(&self, s: &mut EnvState, action: usize) -> Result<StepOutcome> {
        if s.done {
            return Err(Error::EpisodeDone);
        }
        if action >= N_ACTIONS {
            return Err(Error::InvalidAction(action));
        }
        match action {
            TURN_LEFT => s.dir = s.dir.turn_left(),
            TURN_RIGHT => s.dir = s.dir.turn_right(),
            FORWARD => {
                let (dx, dy) = s.dir.vector();
                let next = s.pos.offset(dx, dy);
                if !self.occupancy.is_blocked(next) {
                    s.pos = next;
                }
            }
            _ => {}
        }
        s.t += 1;
        let reached_goal = s.pos == self.occupancy.goal();
        let reward = if reached_goal {
            1.0 - s.t as f64 / self.t_max as f64
        } else {
            0.0
        };
        s.done = reached_goal || s.t >= self.t_max;
        Ok(StepOutcome {
            obs: self.observe(s),
            reward,
            done: s.done,
            reached_goal,
        })
    }
}

/// Convenience wrapper matching the functional reset contract.
pub fn reset(level: &Level, t_max: usize) -> Result<(Maze, EnvState, Observation)> {
    let maze = Maze::new(level, t_max)?;
    let (s, o) = maze.reset();
    Ok((maze, s, o))
}
