//! Deterministic Karel grid world.
//!
//! A [`WorldState`] is a plain value: a rectangular grid of cells (wall or
//! floor with a marker count), one agent with a heading, and a `crashed`
//! flag. Row 0 is the top row and positions are `(row, col)`.
//!
//! Moving into a wall does not translate the agent; it turns around in place
//! instead. Picking from an empty cell and stacking past [`Rules::marker_cap`]
//! crash the world, after which every action is ignored.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A grid coordinate, `(row, col)` with row 0 at the top.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Chebyshev (king-move) distance.
    pub fn chebyshev(self, other: Pos) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Self::North, Self::East, Self::South, Self::West];

    /// 90 degrees counter-clockwise.
    pub fn left(self) -> Self {
        match self {
            Self::North => Self::West,
            Self::West => Self::South,
            Self::South => Self::East,
            Self::East => Self::North,
        }
    }

    /// 90 degrees clockwise.
    pub fn right(self) -> Self {
        match self {
            Self::North => Self::East,
            Self::East => Self::South,
            Self::South => Self::West,
            Self::West => Self::North,
        }
    }

    pub fn reverse(self) -> Self {
        self.left().left()
    }

    /// `(d_row, d_col)` unit step.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Self::North => (-1, 0),
            Self::East => (0, 1),
            Self::South => (1, 0),
            Self::West => (0, -1),
        }
    }

    fn from_delta(d: (isize, isize)) -> Option<Self> {
        Self::ALL.into_iter().find(|dir| dir.delta() == d)
    }
}

/// One of the five agent actions of the Karel language.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Move,
    TurnLeft,
    TurnRight,
    PutMarker,
    PickMarker,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Self::Move,
        Self::TurnLeft,
        Self::TurnRight,
        Self::PutMarker,
        Self::PickMarker,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Move => "move",
            Self::TurnLeft => "turnLeft",
            Self::TurnRight => "turnRight",
            Self::PutMarker => "putMarker",
            Self::PickMarker => "pickMarker",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the five boolean perceptions of the Karel language.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Perception {
    FrontIsClear,
    LeftIsClear,
    RightIsClear,
    MarkersPresent,
    NoMarkersPresent,
}

impl Perception {
    pub const ALL: [Perception; 5] = [
        Self::FrontIsClear,
        Self::LeftIsClear,
        Self::RightIsClear,
        Self::MarkersPresent,
        Self::NoMarkersPresent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::FrontIsClear => "frontIsClear",
            Self::LeftIsClear => "leftIsClear",
            Self::RightIsClear => "rightIsClear",
            Self::MarkersPresent => "markersPresent",
            Self::NoMarkersPresent => "noMarkersPresent",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// The perception that is always the negation of this one, if the
    /// language has one.
    pub fn complement(self) -> Option<Self> {
        match self {
            Self::MarkersPresent => Some(Self::NoMarkersPresent),
            Self::NoMarkersPresent => Some(Self::MarkersPresent),
            _ => None,
        }
    }
}

impl fmt::Display for Perception {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub wall: bool,
    pub markers: u8,
}

/// What `pickMarker` does on a cell without markers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EmptyPick {
    #[default]
    Crash,
    NoOp,
}

/// Environment-level action semantics shared by every task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rules {
    pub marker_cap: u8,
    pub empty_pick: EmptyPick,
}

impl Default for Rules {
    fn default() -> Self {
        Self {
            marker_cap: 10,
            empty_pick: EmptyPick::Crash,
        }
    }
}

/// Observable result of applying one action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Effect {
    Moved { from: Pos },
    /// `move` hit a wall; the agent turned around without translating.
    Bumped,
    Turned,
    Put,
    Picked,
    /// The action was invalid (or the world had already crashed).
    Crashed,
    /// `pickMarker` on an empty cell under [`EmptyPick::NoOp`].
    Ignored,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WorldState {
    height: usize,
    width: usize,
    cells: Vec<Cell>,
    agent: Pos,
    facing: Direction,
    crashed: bool,
    rules: Rules,
}

impl WorldState {
    /// An empty `height x width` map whose border cells are walls, with the
    /// agent at `(1, 1)` facing east.
    pub fn bordered(height: usize, width: usize) -> Self {
        assert!(height >= 3 && width >= 3, "map must have an interior");
        let mut cells = vec![Cell::default(); height * width];
        for r in 0..height {
            for c in 0..width {
                if r == 0 || c == 0 || r == height - 1 || c == width - 1 {
                    cells[r * width + c].wall = true;
                }
            }
        }
        Self {
            height,
            width,
            cells,
            agent: Pos::new(1, 1),
            facing: Direction::East,
            crashed: false,
            rules: Rules::default(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn agent(&self) -> Pos {
        self.agent
    }

    pub fn facing(&self) -> Direction {
        self.facing
    }

    pub fn crashed(&self) -> bool {
        self.crashed
    }

    pub fn rules(&self) -> Rules {
        self.rules
    }

    pub fn set_rules(&mut self, rules: Rules) {
        self.rules = rules;
    }

    /// Places the agent. Panics if `pos` is a wall or outside the map.
    pub fn place_agent(&mut self, pos: Pos, facing: Direction) {
        assert!(!self.cell(pos).wall, "agent cannot stand on a wall at {pos}");
        self.agent = pos;
        self.facing = facing;
    }

    pub fn in_bounds(&self, pos: Pos) -> bool {
        pos.row < self.height && pos.col < self.width
    }

    #[inline]
    fn index(&self, pos: Pos) -> usize {
        debug_assert!(self.in_bounds(pos));
        pos.row * self.width + pos.col
    }

    #[inline]
    pub fn cell(&self, pos: Pos) -> Cell {
        self.cells[self.index(pos)]
    }

    #[inline]
    pub fn is_wall(&self, pos: Pos) -> bool {
        self.cells[self.index(pos)].wall
    }

    #[inline]
    pub fn markers(&self, pos: Pos) -> u8 {
        self.cells[self.index(pos)].markers
    }

    /// Turns a cell into a wall (dropping its markers) or back into floor.
    pub fn set_wall(&mut self, pos: Pos, wall: bool) {
        assert!(!(wall && pos == self.agent), "cannot wall in the agent");
        let i = self.index(pos);
        self.cells[i].wall = wall;
        if wall {
            self.cells[i].markers = 0;
        }
    }

    pub fn set_markers(&mut self, pos: Pos, count: u8) {
        let i = self.index(pos);
        assert!(!self.cells[i].wall || count == 0, "walls carry no markers");
        self.cells[i].markers = count;
    }

    pub fn total_markers(&self) -> u32 {
        self.cells.iter().map(|c| u32::from(c.markers)).sum()
    }

    pub fn positions(&self) -> impl Iterator<Item = Pos> + '_ {
        (0..self.height).flat_map(move |r| (0..self.width).map(move |c| Pos::new(r, c)))
    }

    /// Floor cells, in row-major order.
    pub fn open_cells(&self) -> Vec<Pos> {
        self.positions().filter(|&p| !self.is_wall(p)).collect()
    }

    /// The neighbouring coordinate in `dir`, if it lies on the map.
    pub fn neighbor(&self, pos: Pos, dir: Direction) -> Option<Pos> {
        let (dr, dc) = dir.delta();
        let r = pos.row.checked_add_signed(dr)?;
        let c = pos.col.checked_add_signed(dc)?;
        let p = Pos::new(r, c);
        self.in_bounds(p).then_some(p)
    }

    /// Whether the cell next to the agent in `dir` is floor.
    fn clear_towards(&self, dir: Direction) -> bool {
        self.neighbor(self.agent, dir)
            .is_some_and(|p| !self.is_wall(p))
    }

    pub fn perceive(&self, perception: Perception) -> bool {
        match perception {
            Perception::FrontIsClear => self.clear_towards(self.facing),
            Perception::LeftIsClear => self.clear_towards(self.facing.left()),
            Perception::RightIsClear => self.clear_towards(self.facing.right()),
            Perception::MarkersPresent => self.markers(self.agent) >= 1,
            Perception::NoMarkersPresent => self.markers(self.agent) == 0,
        }
    }

    /// Applies `action` in place.
    pub fn step(&mut self, action: Action) -> Effect {
        if self.crashed {
            return Effect::Crashed;
        }
        match action {
            Action::Move => {
                let from = self.agent;
                match self.neighbor(from, self.facing) {
                    Some(to) if !self.is_wall(to) => {
                        self.agent = to;
                        Effect::Moved { from }
                    }
                    _ => {
                        self.facing = self.facing.reverse();
                        Effect::Bumped
                    }
                }
            }
            Action::TurnLeft => {
                self.facing = self.facing.left();
                Effect::Turned
            }
            Action::TurnRight => {
                self.facing = self.facing.right();
                Effect::Turned
            }
            Action::PutMarker => {
                let i = self.index(self.agent);
                if self.cells[i].markers >= self.rules.marker_cap {
                    self.crashed = true;
                    Effect::Crashed
                } else {
                    self.cells[i].markers += 1;
                    Effect::Put
                }
            }
            Action::PickMarker => {
                let i = self.index(self.agent);
                if self.cells[i].markers == 0 {
                    match self.rules.empty_pick {
                        EmptyPick::Crash => {
                            self.crashed = true;
                            Effect::Crashed
                        }
                        EmptyPick::NoOp => Effect::Ignored,
                    }
                } else {
                    self.cells[i].markers -= 1;
                    Effect::Picked
                }
            }
        }
    }

    /// Pure counterpart of [`WorldState::step`].
    pub fn apply(&self, action: Action) -> WorldState {
        let mut next = self.clone();
        next.step(action);
        next
    }

    fn describe_cell(&self, pos: Pos, out: &mut String) {
        use std::fmt::Write;
        let (r, c) = (pos.row, pos.col);
        let cell = self.cell(pos);
        if pos == self.agent {
            let (dr, dc) = self.facing.delta();
            let _ = write!(out, "Agent({r}, {c}, direction=({dr}, {dc}))");
        } else if cell.wall {
            let _ = write!(out, "Wall({r}, {c})");
        } else if cell.markers > 0 {
            let _ = write!(out, "Marker({r}, {c}, quantity={})", cell.markers);
        } else {
            let _ = write!(out, "Empty({r}, {c})");
        }
        out.push_str(" ;");
    }

    fn dump_rows(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> String {
        let mut out = String::new();
        for r in rows {
            for c in cols.clone() {
                self.describe_cell(Pos::new(r, c), &mut out);
                out.push('\t');
            }
            out.push('\n');
        }
        out
    }

    /// Full textual state, one map row per line:
    /// `Wall(0, 0) ;\tEmpty(1, 1) ;\tMarker(1, 6, quantity=1) ;\tAgent(4, 2, direction=(0, 1)) ;`
    pub fn dump(&self) -> String {
        self.dump_rows(0..self.height, 0..self.width)
    }

    /// The square of `2 * radius + 1` cells centred on the agent, clipped to
    /// the map.
    pub fn dump_local(&self, radius: usize) -> String {
        let Pos { row, col } = self.agent;
        let rows = row.saturating_sub(radius)..(row + radius + 1).min(self.height);
        let cols = col.saturating_sub(radius)..(col + radius + 1).min(self.width);
        self.dump_rows(rows, cols)
    }

    /// Parses the output of [`WorldState::dump`]. Cells not mentioned are
    /// rejected; the grid must be fully specified.
    pub fn parse_dump(text: &str) -> Result<WorldState, DumpError> {
        let mut entries = Vec::new();
        for raw in text.split(';') {
            let entry = raw.trim();
            if entry.is_empty() {
                continue;
            }
            entries.push(parse_entry(entry)?);
        }
        let height = entries.iter().map(|e| e.pos.row + 1).max().ok_or(DumpError::Empty)?;
        let width = entries.iter().map(|e| e.pos.col + 1).max().ok_or(DumpError::Empty)?;
        let mut seen = vec![false; height * width];
        let mut world = WorldState {
            height,
            width,
            cells: vec![Cell::default(); height * width],
            agent: Pos::new(0, 0),
            facing: Direction::East,
            crashed: false,
            rules: Rules::default(),
        };
        let mut agent = None;
        for e in entries {
            let i = e.pos.row * width + e.pos.col;
            if std::mem::replace(&mut seen[i], true) {
                return Err(DumpError::Duplicate(e.pos));
            }
            match e.kind {
                EntryKind::Wall => world.cells[i].wall = true,
                EntryKind::Empty => {}
                EntryKind::Marker(q) => world.cells[i].markers = q,
                EntryKind::Agent(dir) => {
                    if agent.replace((e.pos, dir)).is_some() {
                        return Err(DumpError::MultipleAgents);
                    }
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(DumpError::Missing(Pos::new(i / width, i % width)));
        }
        let (pos, dir) = agent.ok_or(DumpError::NoAgent)?;
        world.agent = pos;
        world.facing = dir;
        Ok(world)
    }
}

impl fmt::Display for WorldState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DumpError {
    #[error("empty state dump")]
    Empty,
    #[error("malformed cell entry `{0}`")]
    Malformed(String),
    #[error("cell {0} described twice")]
    Duplicate(Pos),
    #[error("cell {0} not described")]
    Missing(Pos),
    #[error("no agent in state dump")]
    NoAgent,
    #[error("more than one agent in state dump")]
    MultipleAgents,
}

enum EntryKind {
    Wall,
    Empty,
    Marker(u8),
    Agent(Direction),
}

struct Entry {
    pos: Pos,
    kind: EntryKind,
}

fn parse_entry(entry: &str) -> Result<Entry, DumpError> {
    let bad = || DumpError::Malformed(entry.to_string());
    let open = entry.find('(').ok_or_else(bad)?;
    let name = &entry[..open];
    let inner = entry[open + 1..].strip_suffix(')').ok_or_else(bad)?;
    let mut parts = inner.splitn(3, ',').map(str::trim);
    let row = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let col = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let rest = parts.next();
    let kind = match (name, rest) {
        ("Wall", None) => EntryKind::Wall,
        ("Empty", None) => EntryKind::Empty,
        ("Marker", Some(q)) => {
            let q = q.strip_prefix("quantity=").ok_or_else(bad)?;
            EntryKind::Marker(q.trim().parse().map_err(|_| bad())?)
        }
        ("Agent", Some(d)) => {
            let d = d
                .strip_prefix("direction=(")
                .and_then(|d| d.strip_suffix(')'))
                .ok_or_else(bad)?;
            let (dr, dc) = d.split_once(',').ok_or_else(bad)?;
            let dr: isize = dr.trim().parse().map_err(|_| bad())?;
            let dc: isize = dc.trim().parse().map_err(|_| bad())?;
            EntryKind::Agent(Direction::from_delta((dr, dc)).ok_or_else(bad)?)
        }
        _ => return Err(bad()),
    };
    Ok(Entry {
        pos: Pos::new(row, col),
        kind,
    })
}
