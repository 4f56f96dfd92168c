//! Maze level parameters, the random generator, the mutation editor and
//! structural complexity metrics.
//!
//! A level is a `width x height` grid whose outer ring is always wall. Only
//! interior walls are stored. The agent start pose and the goal occupy two
//! distinct free interior cells.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid coordinate; `x` grows to the east, `y` to the south.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    pub fn neighbours(self) -> [Cell; 4] {
        [
            self.offset(1, 0),
            self.offset(0, 1),
            self.offset(-1, 0),
            self.offset(0, -1),
        ]
    }
}

impl From<[i32; 2]> for Cell {
    fn from([x, y]: [i32; 2]) -> Self {
        Self::new(x, y)
    }
}

impl From<Cell> for [i32; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

/// Agent heading, using the MiniGrid encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    East = 0,
    South = 1,
    West = 2,
    North = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::East, Direction::South, Direction::West, Direction::North];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn vector(self) -> (i32, i32) {
        match self {
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
            Direction::North => (0, -1),
        }
    }

    pub fn turn_left(self) -> Self {
        Self::ALL[(self.index() + 3) % 4]
    }

    pub fn turn_right(self) -> Self {
        Self::ALL[(self.index() + 1) % 4]
    }
}

/// Agent start cell plus heading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i32; 3]", into = "[i32; 3]")]
pub struct Pose {
    pub cell: Cell,
    pub dir: Direction,
}

impl TryFrom<[i32; 3]> for Pose {
    type Error = Error;

    fn try_from([x, y, d]: [i32; 3]) -> Result<Self> {
        let dir = usize::try_from(d)
            .ok()
            .and_then(Direction::from_index)
            .ok_or_else(|| Error::InvalidLevel(format!("direction {d} outside 0..4")))?;
        Ok(Pose {
            cell: Cell::new(x, y),
            dir,
        })
    }
}

impl From<Pose> for [i32; 3] {
    fn from(p: Pose) -> Self {
        [p.cell.x, p.cell.y, p.dir.index() as i32]
    }
}

#[derive(Serialize, Deserialize)]
struct LevelRepr {
    width: usize,
    height: usize,
    walls: Vec<Cell>,
    agent: Pose,
    goal: Cell,
}

/// One concrete maze: dimensions, interior walls, agent start and goal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "LevelRepr", into = "LevelRepr")]
pub struct Level {
    width: usize,
    height: usize,
    walls: BTreeSet<Cell>,
    agent: Pose,
    goal: Cell,
}

impl TryFrom<LevelRepr> for Level {
    type Error = Error;

    fn try_from(r: LevelRepr) -> Result<Self> {
        let n = r.walls.len();
        let walls: BTreeSet<Cell> = r.walls.into_iter().collect();
        if walls.len() != n {
            return Err(Error::InvalidLevel("duplicate wall cells".into()));
        }
        Level::new(r.width, r.height, walls, r.agent, r.goal)
    }
}

impl From<Level> for LevelRepr {
    fn from(l: Level) -> Self {
        LevelRepr {
            width: l.width,
            height: l.height,
            walls: l.walls.into_iter().collect(),
            agent: l.agent,
            goal: l.goal,
        }
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    for (name, v) in [("width", width), ("height", height)] {
        if v < 5 || v % 2 == 0 {
            return Err(Error::Config(format!("{name} must be odd and >= 5, got {v}")));
        }
        if v > 255 {
            return Err(Error::Config(format!("{name} must be <= 255, got {v}")));
        }
    }
    Ok(())
}

impl Level {
    pub fn new(width: usize, height: usize, walls: BTreeSet<Cell>, agent: Pose, goal: Cell) -> Result<Self> {
        check_dims(width, height).map_err(|e| Error::InvalidLevel(e.to_string()))?;
        let level = Level {
            width,
            height,
            walls,
            agent,
            goal,
        };
        for &w in &level.walls {
            if !level.is_interior(w) {
                return Err(Error::InvalidLevel(format!(
                    "wall ({}, {}) is not strictly inside the border",
                    w.x, w.y
                )));
            }
        }
        for (name, c) in [("agent", agent.cell), ("goal", goal)] {
            if !level.is_interior(c) {
                return Err(Error::InvalidLevel(format!("{name} cell outside the interior")));
            }
            if level.walls.contains(&c) {
                return Err(Error::InvalidLevel(format!("{name} cell is a wall")));
            }
        }
        if agent.cell == goal {
            return Err(Error::InvalidLevel("agent start equals goal".into()));
        }
        Ok(level)
    }

    /// Parses an ASCII layout. `#` wall, `G` goal, `>v<^` agent, anything
    /// else free. The outer ring must be wall.
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut walls = BTreeSet::new();
        let mut agent = None;
        let mut goal = None;
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::InvalidLevel(format!("row {y} has ragged width")));
            }
            for (x, ch) in row.chars().enumerate() {
                let c = Cell::new(x as i32, y as i32);
                let border = x == 0 || y == 0 || x + 1 == width || y + 1 == height;
                if border {
                    if ch != '#' {
                        return Err(Error::InvalidLevel(format!("border cell ({x}, {y}) not wall")));
                    }
                    continue;
                }
                let dir = match ch {
                    '#' => {
                        walls.insert(c);
                        None
                    }
                    'G' => {
                        goal = Some(c);
                        None
                    }
                    '>' => Some(Direction::East),
                    'v' => Some(Direction::South),
                    '<' => Some(Direction::West),
                    '^' => Some(Direction::North),
                    _ => None,
                };
                if let Some(dir) = dir {
                    agent = Some(Pose { cell: c, dir });
                }
            }
        }
        let agent = agent.ok_or_else(|| Error::InvalidLevel("no agent marker".into()))?;
        let goal = goal.ok_or_else(|| Error::InvalidLevel("no goal marker".into()))?;
        Level::new(width, height, walls, agent, goal)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn walls(&self) -> &BTreeSet<Cell> {
        &self.walls
    }

    pub fn agent(&self) -> Pose {
        self.agent
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn num_blocks(&self) -> usize {
        self.walls.len()
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    pub fn is_interior(&self, c: Cell) -> bool {
        c.x >= 1 && c.y >= 1 && (c.x as usize) + 1 < self.width && (c.y as usize) + 1 < self.height
    }

    /// Border or interior wall.
    pub fn is_wall(&self, c: Cell) -> bool {
        self.in_bounds(c) && (!self.is_interior(c) || self.walls.contains(&c))
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.is_interior(c) && !self.walls.contains(&c)
    }

    fn interior_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let (w, h) = (self.width as i32, self.height as i32);
        (1..h - 1).flat_map(move |y| (1..w - 1).map(move |x| Cell::new(x, y)))
    }

    pub fn free_cells(&self) -> Vec<Cell> {
        self.interior_cells().filter(|c| !self.walls.contains(c)).collect()
    }

    /// Dense occupancy map used by the simulator.
    pub fn occupancy(&self) -> Occupancy {
        let mut blocked = vec![true; self.width * self.height];
        for c in self.free_cells() {
            blocked[c.y as usize * self.width + c.x as usize] = false;
        }
        Occupancy {
            width: self.width,
            height: self.height,
            blocked,
            goal: self.goal,
        }
    }

    pub fn metrics(&self) -> LevelMetrics {
        level_metrics(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("level serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidLevel(e.to_string()))
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in 0..self.height as i32 {
            for x in 0..self.width as i32 {
                let c = Cell::new(x, y);
                let ch = if c == self.agent.cell {
                    match self.agent.dir {
                        Direction::East => '>',
                        Direction::South => 'v',
                        Direction::West => '<',
                        Direction::North => '^',
                    }
                } else if c == self.goal {
                    'G'
                } else if self.is_wall(c) {
                    '#'
                } else {
                    '.'
                };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Flat blocked-cell map of a level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Occupancy {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
    goal: Cell,
}

impl Occupancy {
    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.blocked[c.y as usize * self.width + c.x as usize]
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }
}

/// Structural complexity of a level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelMetrics {
    /// Forward moves on a shortest path; `None` when the goal is unreachable.
    pub shortest_path_len: Option<usize>,
    pub num_blocks: usize,
    pub solvable: bool,
}

/// Breadth-first search over the 4-connected free cells. Turns are not
/// counted.
pub fn level_metrics(level: &Level) -> LevelMetrics {
    let w = level.width();
    let idx = |c: Cell| c.y as usize * w + c.x as usize;
    let mut dist = vec![usize::MAX; w * level.height()];
    let start = level.agent().cell;
    let mut queue = VecDeque::from([start]);
    dist[idx(start)] = 0;
    let mut found = None;
    while let Some(c) = queue.pop_front() {
        if c == level.goal() {
            found = Some(dist[idx(c)]);
            break;
        }
        for n in c.neighbours() {
            if level.is_free(n) && dist[idx(n)] == usize::MAX {
                dist[idx(n)] = dist[idx(c)] + 1;
                queue.push_back(n);
            }
        }
    }
    LevelMetrics {
        shortest_path_len: found,
        num_blocks: level.num_blocks(),
        solvable: found.is_some(),
    }
}

/// How many interior walls a freshly generated level receives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockCount {
    /// Uniform over `0..=max_blocks`.
    Uniform,
    Fixed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub width: usize,
    pub height: usize,
    pub max_blocks: usize,
    pub block_count: BlockCount,
}

impl GenerationConfig {
    /// 15x15 grid with up to 60 walls.
    pub fn minigrid() -> Self {
        Self {
            width: 15,
            height: 15,
            max_blocks: 60,
            block_count: BlockCount::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_dims(self.width, self.height)?;
        let interior = (self.width - 2) * (self.height - 2);
        if self.max_blocks + 2 > interior {
            return Err(Error::Config(format!(
                "max_blocks {} leaves no room for agent and goal in a {}x{} grid",
                self.max_blocks, self.width, self.height
            )));
        }
        if let BlockCount::Fixed(n) = self.block_count {
            if n > self.max_blocks {
                return Err(Error::Config(format!(
                    "fixed block count {n} exceeds max_blocks {}",
                    self.max_blocks
                )));
            }
        }
        Ok(())
    }
}

/// Samples walls, then agent start and goal uniformly among the remaining
/// free cells. The result may be unsolvable.
pub fn generate_random_level<R: Rng + ?Sized>(rng: &mut R, cfg: &GenerationConfig) -> Result<Level> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let iw = w - 2;
    let interior = iw * (h - 2);
    let n_blocks = match cfg.block_count {
        BlockCount::Uniform => rng.gen_range(0..=cfg.max_blocks),
        BlockCount::Fixed(n) => n,
    };
    let to_cell = |i: usize| Cell::new((i % iw + 1) as i32, (i / iw + 1) as i32);

    let picks = index::sample(rng, interior, n_blocks + 2).into_vec();
    let walls: BTreeSet<Cell> = picks[..n_blocks].iter().map(|&i| to_cell(i)).collect();
    let agent_cell = to_cell(picks[n_blocks]);
    let goal = to_cell(picks[n_blocks + 1]);
    let dir = Direction::ALL[rng.gen_range(0..4)];
    Level::new(w, h, walls, Pose { cell: agent_cell, dir }, goal)
}

/// One primitive editor operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edit {
    ToggleWall(Cell),
    MoveGoal(Cell),
    MoveAgent(Pose),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutationConfig {
    pub n_edits: usize,
    pub max_blocks: usize,
    /// Relative weights of wall toggle, goal move and agent move.
    pub edit_weights: [f64; 3],
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self {
            n_edits: 5,
            max_blocks: 60,
            edit_weights: [0.8, 0.1, 0.1],
        }
    }
}

fn sample_edit<R: Rng + ?Sized>(level: &Level, kind: usize, max_blocks: usize, rng: &mut R) -> Option<Edit> {
    let agent = level.agent.cell;
    match kind {
        0 => {
            let candidates: Vec<Cell> = level
                .interior_cells()
                .filter(|&c| c != agent && c != level.goal)
                .filter(|c| level.walls.contains(c) || level.walls.len() < max_blocks)
                .collect();
            if candidates.is_empty() {
                return None;
            }
            Some(Edit::ToggleWall(candidates[rng.gen_range(0..candidates.len())]))
        }
        1 => {
            let candidates: Vec<Cell> = level
                .free_cells()
                .into_iter()
                .filter(|&c| c != agent && c != level.goal)
                .collect();
            if candidates.is_empty() {
                return None;
            }
            Some(Edit::MoveGoal(candidates[rng.gen_range(0..candidates.len())]))
        }
        _ => {
            let candidates: Vec<Cell> = level
                .free_cells()
                .into_iter()
                .filter(|&c| c != agent && c != level.goal)
                .collect();
            if candidates.is_empty() {
                return None;
            }
            let cell = candidates[rng.gen_range(0..candidates.len())];
            let dir = Direction::ALL[rng.gen_range(0..4)];
            Some(Edit::MoveAgent(Pose { cell, dir }))
        }
    }
}

impl Level {
    /// Applies an edit in place. Callers must only pass edits produced for
    /// this level; the result keeps every level invariant.
    fn apply(&mut self, edit: Edit) {
        match edit {
            Edit::ToggleWall(c) => {
                if !self.walls.remove(&c) {
                    self.walls.insert(c);
                }
            }
            Edit::MoveGoal(c) => self.goal = c,
            Edit::MoveAgent(p) => self.agent = p,
        }
    }
}

/// Applies exactly `cfg.n_edits` primitive edits to a copy of `level`.
/// Edit kinds that are impossible on the current layout are resampled.
pub fn mutate_level<R: Rng + ?Sized>(level: &Level, cfg: &MutationConfig, rng: &mut R) -> Result<Level> {
    if cfg.n_edits == 0 {
        return Err(Error::Config("n_edits must be >= 1".into()));
    }
    let kinds = WeightedIndex::new(cfg.edit_weights).map_err(|e| Error::Config(format!("edit weights: {e}")))?;
    let mut out = level.clone();
    for _ in 0..cfg.n_edits {
        let mut edit = None;
        for _ in 0..64 {
            edit = sample_edit(&out, kinds.sample(rng), cfg.max_blocks, rng);
            if edit.is_some() {
                break;
            }
        }
        // Every level of size >= 5 admits at least a wall toggle or a move.
        let edit = edit
            .or_else(|| (0..3).find_map(|k| sample_edit(&out, k, cfg.max_blocks, rng)))
            .ok_or_else(|| Error::Config("level admits no edit".into()))?;
        out.apply(edit);
    }
    debug_assert!(Level::new(out.width, out.height, out.walls.clone(), out.agent, out.goal).is_ok());
    Ok(out)
}
