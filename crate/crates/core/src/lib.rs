//! Karel grid world, DSL toolchain, task suite, grammar mutation and
//! hill-climbing search.
//!
//! The `parallel` feature (on by default) scores neighbour batches with
//! rayon; without it everything runs on the calling thread. Results are
//! identical either way.

pub mod dsl;
pub mod grid;
pub mod interp;
pub mod mutation;
pub mod pythonic;
pub mod search;
pub mod tasks;

pub use dsl::{parse, AstLimits, Condition, Program, Statement};
pub use grid::{Action, Direction, Perception, Pos, WorldState};
pub use interp::{episode_return, run_episode, EpisodeLimits, Termination, Trajectory};
pub use mutation::ProductionTable;
pub use search::{schedule_k, scheduled_hill_climb, SchedulerConfig, SearchState, TaskObjective};
pub use tasks::{generate_variant, generate_variants, RngStream, TaskId, Variant};
