//! Task registry: seeded variant generators, reward functions and task-side
//! world dynamics.
//!
//! [`TaskEnv`] reports the absolute return accumulated so far after every
//! action, so fractional scores stay exact instead of being summed from
//! deltas.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Action, Direction, Effect, Pos, WorldState};
use crate::interp::{Environment, Feedback};

/// Seeded random stream used everywhere randomness is needed.
pub type RngStream = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    StairClimber,
    Maze,
    FourCorners,
    TopOff,
    Harvester,
    CleanHouse,
    DoorKey,
    OneStroke,
    Seeder,
    Snake,
    PathFollow,
    WallAvoider,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown task `{0}`")]
pub struct UnknownTask(pub String);

impl TaskId {
    pub const ALL: [TaskId; 12] = [
        Self::StairClimber,
        Self::Maze,
        Self::FourCorners,
        Self::TopOff,
        Self::Harvester,
        Self::CleanHouse,
        Self::DoorKey,
        Self::OneStroke,
        Self::Seeder,
        Self::Snake,
        Self::PathFollow,
        Self::WallAvoider,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::StairClimber => "StairClimber",
            Self::Maze => "Maze",
            Self::FourCorners => "FourCorners",
            Self::TopOff => "TopOff",
            Self::Harvester => "Harvester",
            Self::CleanHouse => "CleanHouse",
            Self::DoorKey => "DoorKey",
            Self::OneStroke => "OneStroke",
            Self::Seeder => "Seeder",
            Self::Snake => "Snake",
            Self::PathFollow => "PathFollow",
            Self::WallAvoider => "WallAvoider",
        }
    }

    /// Case-insensitive lookup; the sparse-reward aliases
    /// `StairClimberSparse` and `MazeSparse` are accepted too.
    pub fn from_name(name: &str) -> Result<Self, UnknownTask> {
        let lower = name.trim().to_ascii_lowercase();
        let key = match lower.as_str() {
            "stairclimbersparse" => "stairclimber",
            "mazesparse" => "maze",
            other => other,
        };
        Self::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(key))
            .ok_or_else(|| UnknownTask(name.to_string()))
    }

    /// `(height, width)` including the border walls.
    pub fn dims(self) -> (usize, usize) {
        match self {
            Self::StairClimber | Self::FourCorners | Self::TopOff => (12, 12),
            Self::CleanHouse => (14, 22),
            Self::WallAvoider => (8, 5),
            _ => (8, 8),
        }
    }

    /// Closed interval every episodic return falls in.
    pub fn reward_range(self) -> (f64, f64) {
        match self {
            Self::StairClimber | Self::TopOff | Self::PathFollow | Self::WallAvoider => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }

    fn salt(self) -> u64 {
        Self::ALL.iter().position(|&t| t == self).unwrap() as u64 + 1
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskId {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_name(s)
    }
}

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeds for `count` variants derived from one experiment seed.
pub fn variant_seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64)
        .map(|i| mix64(mix64(base) ^ i.wrapping_mul(0xD6E8_FEB8_6659_FD93)))
        .collect()
}

/// Task-specific state that lives next to the world.
#[derive(Clone, Debug)]
pub enum TaskAux {
    StairClimber {
        goal: Pos,
    },
    Maze {
        goal: Pos,
    },
    FourCorners {
        corners: [Pos; 4],
    },
    TopOff {
        targets: Vec<Pos>,
        topped: u32,
    },
    /// Harvester and CleanHouse.
    Collect {
        initial: u32,
        remaining: u32,
    },
    DoorKey {
        key: Pos,
        goal: Pos,
        doors: [Pos; 2],
        key_picked: bool,
    },
    OneStroke {
        visited: u32,
        total: u32,
    },
    Seeder {
        single: u32,
        total: u32,
    },
    Snake {
        body: VecDeque<Pos>,
        body_len: usize,
        target: Pos,
        reached: u32,
        rng: Box<RngStream>,
    },
    PathFollow {
        path: Vec<Pos>,
        picked: u32,
    },
    WallAvoider {
        interior: Vec<Pos>,
        single: u32,
    },
}

/// One seeded initial state of a task.
#[derive(Clone, Debug)]
pub struct Variant {
    pub task: TaskId,
    pub seed: u64,
    pub world: WorldState,
    pub aux: TaskAux,
}

pub const SNAKE_TARGETS: u32 = 20;
pub const SNAKE_INITIAL_LEN: usize = 2;
pub const DOORKEY_DOORS: [Pos; 2] = [Pos::new(2, 4), Pos::new(3, 4)];

const CLEANHOUSE_MAP: &str = include_str!("../data/cleanhouse.txt");
pub const CLEANHOUSE_START: Pos = Pos::new(1, 1);
const CLEANHOUSE_MARKERS: usize = 10;

fn pick<T: Copy>(rng: &mut RngStream, items: &[T]) -> T {
    *items.choose(rng).expect("non-empty candidate set")
}

fn interior(w: &WorldState) -> Vec<Pos> {
    w.open_cells()
}

/// Whether `p` lies on the two-cell-wide band along the staircase.
pub fn on_stair_contour(p: Pos) -> bool {
    (1..=10).contains(&p.row) && (1..=10).contains(&p.col) && matches!(p.row + p.col, 10 | 11)
}

fn stair_climber(rng: &mut RngStream) -> (WorldState, TaskAux) {
    let mut w = WorldState::bordered(12, 12);
    for c in 1..=10usize {
        for r in (12 - c)..=10 {
            w.set_wall(Pos::new(r, c), true);
        }
    }
    let contour: Vec<Pos> = w.open_cells().into_iter().filter(|&p| on_stair_contour(p)).collect();
    let starts: Vec<Pos> = contour.iter().copied().filter(|p| p.row > 1).collect();
    let agent = pick(rng, &starts);
    let above: Vec<Pos> = contour.iter().copied().filter(|p| p.row < agent.row).collect();
    let goal = pick(rng, &above);
    w.place_agent(agent, Direction::East);
    w.set_markers(goal, 1);
    (w, TaskAux::StairClimber { goal })
}

fn maze(rng: &mut RngStream) -> (WorldState, TaskAux) {
    let mut w = WorldState::bordered(8, 8);
    // Depth-first carve over the lattice rows {2,4,6} x cols {1,3,5}.
    let start = Pos::new(6, 1);
    w.place_agent(start, Direction::East);
    for p in interior(&w) {
        if p != start {
            w.set_wall(p, true);
        }
    }
    let mut stack = vec![start];
    while let Some(&cur) = stack.last() {
        let mut next = Vec::new();
        for d in Direction::ALL {
            let (dr, dc) = d.delta();
            let r = cur.row as isize + 2 * dr;
            let c = cur.col as isize + 2 * dc;
            if (1..=6).contains(&r) && (1..=6).contains(&c) && r % 2 == 0 && c % 2 == 1 {
                let p = Pos::new(r as usize, c as usize);
                if w.is_wall(p) {
                    next.push((p, d));
                }
            }
        }
        if next.is_empty() {
            stack.pop();
            continue;
        }
        let (p, d) = pick(rng, &next);
        let between = w.neighbor(cur, d).unwrap();
        w.set_wall(between, false);
        w.set_wall(p, false);
        stack.push(p);
    }
    let open = w.open_cells();
    let agent = pick(rng, &open);
    let rest: Vec<Pos> = open.into_iter().filter(|&p| p != agent).collect();
    let goal = pick(rng, &rest);
    w.place_agent(agent, Direction::East);
    w.set_markers(goal, 1);
    (w, TaskAux::Maze { goal })
}

fn four_corners(rng: &mut RngStream) -> (WorldState, TaskAux) {
    let mut w = WorldState::bordered(12, 12);
    let col = rng.gen_range(1..=10);
    w.place_agent(Pos::new(10, col), Direction::East);
    let corners = [
        Pos::new(1, 1),
        Pos::new(1, 10),
        Pos::new(10, 1),
        Pos::new(10, 10),
    ];
    (w, TaskAux::FourCorners { corners })
}

fn top_off(rng: &mut RngStream) -> (WorldState, TaskAux) {
    let mut w = WorldState::bordered(12, 12);
    let targets = loop {
        let t: Vec<Pos> = (1..=10)
            .filter(|_| rng.gen_bool(0.5))
            .map(|c| Pos::new(10, c))
            .collect();
        if !t.is_empty() {
            break t;
        }
    };
    for &p in &targets {
        w.set_markers(p, 1);
    }
    w.place_agent(Pos::new(10, 1), Direction::East);
    (w, TaskAux::TopOff { targets, topped: 0 })
}

fn harvester(rng: &mut RngStream) -> (WorldState, TaskAux) {
    let mut w = WorldState::bordered(8, 8);
    for p in interior(&w) {
        w.set_markers(p, 1);
    }
    let col = rng.gen_range(1..=6);
    w.place_agent(Pos::new(6, col), Direction::East);
    let initial = w.total_markers();
    (
        w,
        TaskAux::Collect {
            initial,
            remaining: initial,
        },
    )
}

/// The fixed CleanHouse layout without markers.
pub fn cleanhouse_layout() -> WorldState {
    let mut w = WorldState::bordered(14, 22);
    for (r, line) in CLEANHOUSE_MAP.lines().enumerate() {
        for (c, ch) in line.chars().enumerate() {
            if ch == '#' {
                let p = Pos::new(r, c);
                if p != w.agent() {
                    w.set_wall(p, true);
                }
            }
        }
    }
    w.place_agent(CLEANHOUSE_START, Direction::South);
    w
}

fn clean_house(rng: &mut RngStream) -> (WorldState, TaskAux) {
    let mut w = cleanhouse_layout();
    let mut slots: Vec<Pos> = w
        .open_cells()
        .into_iter()
        .filter(|&p| p != CLEANHOUSE_START)
        .filter(|&p| {
            Direction::ALL
                .iter()
                .any(|&d| w.neighbor(p, d).is_some_and(|q| w.is_wall(q)))
        })
        .collect();
    slots.shuffle(rng);
    for &p in &slots[..CLEANHOUSE_MARKERS] {
        w.set_markers(p, 1);
    }
    let initial = CLEANHOUSE_MARKERS as u32;
    (
        w,
        TaskAux::Collect {
            initial,
            remaining: initial,
        },
    )
}

fn door_key(rng: &mut RngStream) -> (WorldState, TaskAux) {
    let mut w = WorldState::bordered(8, 8);
    for r in 1..=6 {
        w.set_wall(Pos::new(r, 4), true);
    }
    let left: Vec<Pos> = (1..=6)
        .flat_map(|r| (1..=3).map(move |c| Pos::new(r, c)))
        .collect();
    let right: Vec<Pos> = (1..=6)
        .flat_map(|r| (5..=6).map(move |c| Pos::new(r, c)))
        .collect();
    let key = pick(rng, &left);
    let goal = pick(rng, &right);
    let starts: Vec<Pos> = left.iter().copied().filter(|&p| p != key).collect();
    let agent = pick(rng, &starts);
    w.set_markers(key, 1);
    w.set_markers(goal, 1);
    w.place_agent(agent, Direction::East);
    (
        w,
        TaskAux::DoorKey {
            key,
            goal,
            doors: DOORKEY_DOORS,
            key_picked: false,
        },
    )
}

fn one_stroke(rng: &mut RngStream) -> (WorldState, TaskAux) {
    let mut w = WorldState::bordered(8, 8);
    let open = w.open_cells();
    w.place_agent(pick(rng, &open), Direction::East);
    (
        w,
        TaskAux::OneStroke {
            visited: 1,
            total: open.len() as u32,
        },
    )
}

fn seeder(rng: &mut RngStream) -> (WorldState, TaskAux) {
    let mut w = WorldState::bordered(8, 8);
    let open = w.open_cells();
    w.place_agent(pick(rng, &open), Direction::East);
    (
        w,
        TaskAux::Seeder {
            single: 0,
            total: open.len() as u32,
        },
    )
}

fn snake(rng: &mut RngStream) -> (WorldState, TaskAux) {
    let mut w = WorldState::bordered(8, 8);
    let open = w.open_cells();
    let agent = pick(rng, &open);
    let rest: Vec<Pos> = open.into_iter().filter(|&p| p != agent).collect();
    let target = pick(rng, &rest);
    w.place_agent(agent, Direction::East);
    w.set_markers(target, 1);
    let stream = RngStream::seed_from_u64(rng.gen());
    (
        w,
        TaskAux::Snake {
            body: VecDeque::from([agent]),
            body_len: SNAKE_INITIAL_LEN,
            target,
            reached: 0,
            rng: Box::new(stream),
        },
    )
}

fn path_follow(rng: &mut RngStream) -> (WorldState, TaskAux) {
    let mut w = WorldState::bordered(8, 8);
    let (start, end) = (Pos::new(6, 1), Pos::new(1, 6));
    let mut path = vec![start];
    let mut cur = start;
    while cur != end {
        let north = cur.row > end.row;
        let east = cur.col < end.col;
        cur = if north && (!east || rng.gen_bool(0.5)) {
            Pos::new(cur.row - 1, cur.col)
        } else {
            Pos::new(cur.row, cur.col + 1)
        };
        path.push(cur);
    }
    for &p in &path {
        w.set_markers(p, 1);
    }
    w.place_agent(start, Direction::North);
    (w, TaskAux::PathFollow { path, picked: 0 })
}

fn wall_avoider(rng: &mut RngStream) -> (WorldState, TaskAux) {
    let mut w = WorldState::bordered(8, 5);
    let open = w.open_cells();
    let interior: Vec<Pos> = open
        .iter()
        .copied()
        .filter(|&p| {
            Direction::ALL
                .iter()
                .all(|&d| w.neighbor(p, d).is_some_and(|q| !w.is_wall(q)))
        })
        .collect();
    let dir = pick(rng, &Direction::ALL);
    w.place_agent(pick(rng, &open), dir);
    (w, TaskAux::WallAvoider { interior, single: 0 })
}

/// Builds variant `seed` of `task`. Pure in `(task, seed)`.
pub fn generate_variant(task: TaskId, seed: u64) -> Variant {
    let mut rng = RngStream::seed_from_u64(mix64(seed ^ task.salt().wrapping_mul(0xA24B_AED4_963E_E407)));
    let (world, aux) = match task {
        TaskId::StairClimber => stair_climber(&mut rng),
        TaskId::Maze => maze(&mut rng),
        TaskId::FourCorners => four_corners(&mut rng),
        TaskId::TopOff => top_off(&mut rng),
        TaskId::Harvester => harvester(&mut rng),
        TaskId::CleanHouse => clean_house(&mut rng),
        TaskId::DoorKey => door_key(&mut rng),
        TaskId::OneStroke => one_stroke(&mut rng),
        TaskId::Seeder => seeder(&mut rng),
        TaskId::Snake => snake(&mut rng),
        TaskId::PathFollow => path_follow(&mut rng),
        TaskId::WallAvoider => wall_avoider(&mut rng),
    };
    Variant {
        task,
        seed,
        world,
        aux,
    }
}

/// `count` variants of `task` derived from `base`.
pub fn generate_variants(task: TaskId, base: u64, count: usize) -> Vec<Variant> {
    variant_seeds(base, count)
        .into_iter()
        .map(|s| generate_variant(task, s))
        .collect()
}

impl Variant {
    pub fn env(&self) -> TaskEnv {
        TaskEnv::new(self)
    }

    pub fn initial_return(&self) -> f64 {
        match &self.aux {
            TaskAux::OneStroke { visited, total } => *visited as f64 / *total as f64,
            _ => 0.0,
        }
    }
}

/// A running episode of one task variant.
#[derive(Clone, Debug)]
pub struct TaskEnv {
    world: WorldState,
    aux: TaskAux,
    ret: f64,
    initial: f64,
}

impl TaskEnv {
    pub fn new(variant: &Variant) -> Self {
        let initial = variant.initial_return();
        Self {
            world: variant.world.clone(),
            aux: variant.aux.clone(),
            ret: initial,
            initial,
        }
    }

    pub fn aux(&self) -> &TaskAux {
        &self.aux
    }

    pub fn total_return(&self) -> f64 {
        self.ret
    }

    /// Applies task-side world changes after `effect` and returns the new
    /// absolute return and whether the episode is over.
    fn dynamics(&mut self, effect: Effect) -> (f64, bool) {
        let w = &mut self.world;
        let here = w.agent();
        let ret = self.ret;
        match &mut self.aux {
            TaskAux::StairClimber { goal } => match effect {
                Effect::Moved { .. } if !on_stair_contour(here) => (-1.0, true),
                Effect::Moved { .. } if here == *goal => (1.0, true),
                _ => (ret, false),
            },
            TaskAux::Maze { goal } => {
                if here == *goal {
                    (1.0, true)
                } else {
                    (ret, false)
                }
            }
            TaskAux::FourCorners { corners } => {
                let n = corners.iter().filter(|&&p| w.markers(p) == 1).count();
                (n as f64 / 4.0, false)
            }
            TaskAux::TopOff { targets, topped } => match effect {
                Effect::Picked => (-1.0, true),
                Effect::Put if targets.contains(&here) => {
                    match w.markers(here) {
                        2 => *topped += 1,
                        3 => *topped -= 1,
                        _ => {}
                    }
                    (*topped as f64 / targets.len() as f64, false)
                }
                _ => (ret, false),
            },
            TaskAux::Collect { initial, remaining } => {
                match effect {
                    Effect::Picked => *remaining -= 1,
                    Effect::Put => *remaining += 1,
                    _ => return (ret, false),
                }
                let picked = initial.saturating_sub(*remaining);
                (picked as f64 / *initial as f64, false)
            }
            TaskAux::DoorKey {
                key,
                goal,
                doors,
                key_picked,
            } => match effect {
                Effect::Picked if here == *key && !*key_picked => {
                    *key_picked = true;
                    for d in *doors {
                        w.set_wall(d, false);
                    }
                    (0.5, false)
                }
                Effect::Put if *key_picked && here == *goal && w.markers(here) == 2 => (1.0, true),
                _ => (ret, false),
            },
            TaskAux::OneStroke { visited, total } => match effect {
                Effect::Moved { from } => {
                    w.set_wall(from, true);
                    *visited += 1;
                    (*visited as f64 / *total as f64, false)
                }
                Effect::Bumped => {
                    // The cell that blocked us; visited walls end the episode.
                    let hit = w.neighbor(here, w.facing().reverse());
                    let border = hit.is_none_or(|p| {
                        p.row == 0 || p.col == 0 || p.row + 1 == w.height() || p.col + 1 == w.width()
                    });
                    (ret, !border)
                }
                _ => (ret, false),
            },
            TaskAux::Seeder { single, total } => {
                adjust_single(w.markers(here), effect, single);
                (*single as f64 / *total as f64, false)
            }
            TaskAux::Snake {
                body,
                body_len,
                target,
                reached,
                rng,
            } => {
                let Effect::Moved { .. } = effect else {
                    return (ret, false);
                };
                let grow = here == *target;
                if grow {
                    *body_len += 1;
                }
                while body.len() >= *body_len {
                    body.pop_back();
                }
                if body.contains(&here) {
                    return (ret, true);
                }
                body.push_front(here);
                if !grow {
                    return (ret, false);
                }
                *reached += 1;
                w.set_markers(here, 0);
                let ret = *reached as f64 / SNAKE_TARGETS as f64;
                if *reached >= SNAKE_TARGETS {
                    return (ret, true);
                }
                let free: Vec<Pos> = w
                    .open_cells()
                    .into_iter()
                    .filter(|p| !body.contains(p))
                    .collect();
                if free.is_empty() {
                    return (ret, true);
                }
                *target = pick(rng, &free);
                w.set_markers(*target, 1);
                (ret, false)
            }
            TaskAux::PathFollow { path, picked } => match effect {
                Effect::Put => (-1.0, true),
                Effect::Picked => {
                    *picked += 1;
                    (*picked as f64 / path.len() as f64, false)
                }
                Effect::Moved { .. } => {
                    let near = path.iter().map(|&p| p.chebyshev(here)).min().unwrap_or(0);
                    if near >= 2 {
                        (-1.0, true)
                    } else {
                        (ret, false)
                    }
                }
                _ => (ret, false),
            },
            TaskAux::WallAvoider { interior, single } => match effect {
                Effect::Picked => (-1.0, true),
                Effect::Put if !interior.contains(&here) || w.markers(here) > 1 => (-1.0, true),
                Effect::Put => {
                    *single += 1;
                    (*single as f64 / interior.len() as f64, false)
                }
                _ => (ret, false),
            },
        }
    }
}

/// Keeps a running count of cells holding exactly one marker.
fn adjust_single(now: u8, effect: Effect, single: &mut u32) {
    match (effect, now) {
        (Effect::Put, 1) | (Effect::Picked, 1) => *single += 1,
        (Effect::Put, 2) | (Effect::Picked, 0) => *single -= 1,
        _ => {}
    }
}

impl Environment for TaskEnv {
    fn world(&self) -> &WorldState {
        &self.world
    }

    fn act(&mut self, action: Action) -> Feedback {
        let effect = self.world.step(action);
        if self.world.crashed() {
            return Feedback {
                total_return: self.ret,
                terminal: false,
            };
        }
        let (ret, terminal) = self.dynamics(effect);
        self.ret = ret;
        Feedback {
            total_return: ret,
            terminal,
        }
    }

    fn initial_return(&self) -> f64 {
        self.initial
    }
}
