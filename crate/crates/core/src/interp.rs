//! Operational semantics for [`Program`]s.
//!
//! Every action and every perception query is one primitive step. An
//! episode ends when the program finishes, the environment signals a
//! terminal reward, the world crashes, or a step budget runs out.

use serde::{Deserialize, Serialize};

use crate::dsl::{Condition, Program, Statement};
use crate::grid::{Action, Perception, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeLimits {
    /// Actions plus perception queries.
    pub max_primitive_steps: usize,
    pub max_actions: usize,
}

impl Default for EpisodeLimits {
    fn default() -> Self {
        Self {
            max_primitive_steps: 10_000,
            max_actions: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ProgramEnd,
    RewardTerminal,
    Crash,
    StepLimit,
}

/// What the environment reports after an action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feedback {
    /// Return accumulated since the start of the episode.
    pub total_return: f64,
    pub terminal: bool,
}

/// A world the interpreter can drive.
pub trait Environment {
    fn world(&self) -> &WorldState;

    /// Applies `action` and any task-side dynamics.
    fn act(&mut self, action: Action) -> Feedback;

    /// Return before any action was taken.
    fn initial_return(&self) -> f64 {
        0.0
    }
}

/// A bare world with no reward signal.
#[derive(Clone, Debug)]
pub struct PlainEnv(pub WorldState);

impl Environment for PlainEnv {
    fn world(&self) -> &WorldState {
        &self.0
    }

    fn act(&mut self, action: Action) -> Feedback {
        self.0.step(action);
        Feedback {
            total_return: 0.0,
            terminal: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Action(Action),
    Perception { perception: Perception, result: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    /// Pre-order index of the statement that issued this step; the root
    /// body's first statement is 0.
    pub node: usize,
    pub kind: StepKind,
    pub return_after: f64,
    /// World after the step, when snapshots were requested.
    pub snapshot: Option<WorldState>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub initial: WorldState,
    /// Return before the first step.
    pub initial_return: f64,
    pub steps: Vec<TraceStep>,
    pub total_return: f64,
    pub terminated_by: Termination,
    pub actions: usize,
}

impl Trajectory {
    pub fn primitive_steps(&self) -> usize {
        self.steps.len()
    }
}

/// Number of pre-order statement slots in `stmt`'s subtree.
pub fn subtree_size(stmt: &Statement) -> usize {
    1 + match stmt {
        Statement::Action(_) => 0,
        Statement::While { body, .. } | Statement::Repeat { body, .. } | Statement::If { body, .. } => {
            body.iter().map(subtree_size).sum()
        }
        Statement::IfElse {
            then, otherwise, ..
        } => then.iter().chain(otherwise).map(subtree_size).sum(),
    }
}

trait Observer {
    /// Whether node ids are needed.
    const TRACED: bool;

    fn record(&mut self, node: usize, kind: StepKind, ret: f64, world: &WorldState);
}

struct Silent;

impl Observer for Silent {
    const TRACED: bool = false;

    #[inline]
    fn record(&mut self, _: usize, _: StepKind, _: f64, _: &WorldState) {}
}

struct Recorder {
    steps: Vec<TraceStep>,
    snapshots: bool,
}

impl Observer for Recorder {
    const TRACED: bool = true;

    fn record(&mut self, node: usize, kind: StepKind, ret: f64, world: &WorldState) {
        self.steps.push(TraceStep {
            node,
            kind,
            return_after: ret,
            snapshot: self.snapshots.then(|| world.clone()),
        });
    }
}

struct Machine<'e, E, O> {
    env: &'e mut E,
    limits: EpisodeLimits,
    primitive: usize,
    actions: usize,
    ret: f64,
    obs: O,
}

type Flow = Result<(), Termination>;

impl<E: Environment, O: Observer> Machine<'_, E, O> {
    #[inline]
    fn test(&mut self, cond: Condition, node: usize) -> Result<bool, Termination> {
        if self.primitive >= self.limits.max_primitive_steps {
            return Err(Termination::StepLimit);
        }
        self.primitive += 1;
        let p = cond.perception();
        let result = self.env.world().perceive(p);
        if O::TRACED {
            self.obs.record(
                node,
                StepKind::Perception {
                    perception: p,
                    result,
                },
                self.ret,
                self.env.world(),
            );
        }
        Ok(match cond {
            Condition::Is(_) => result,
            Condition::Not(_) => !result,
        })
    }

    #[inline]
    fn act(&mut self, action: Action, node: usize) -> Flow {
        if self.primitive >= self.limits.max_primitive_steps
            || self.actions >= self.limits.max_actions
        {
            return Err(Termination::StepLimit);
        }
        self.primitive += 1;
        self.actions += 1;
        let fb = self.env.act(action);
        self.ret = fb.total_return;
        if O::TRACED {
            self.obs
                .record(node, StepKind::Action(action), self.ret, self.env.world());
        }
        if self.env.world().crashed() {
            Err(Termination::Crash)
        } else if fb.terminal {
            Err(Termination::RewardTerminal)
        } else {
            Ok(())
        }
    }

    fn block(&mut self, block: &[Statement], mut node: usize) -> Flow {
        for s in block {
            self.stmt(s, node)?;
            if O::TRACED {
                node += subtree_size(s);
            }
        }
        Ok(())
    }

    fn stmt(&mut self, stmt: &Statement, node: usize) -> Flow {
        let child = node + 1;
        match stmt {
            Statement::Action(a) => self.act(*a, node),
            Statement::While { cond, body } => {
                while self.test(*cond, node)? {
                    let before = self.actions;
                    self.block(body, child)?;
                    if !O::TRACED && self.actions == before {
                        // The world is unchanged, so this loop never exits.
                        return Err(Termination::StepLimit);
                    }
                }
                Ok(())
            }
            Statement::Repeat { count, body } => {
                for _ in 0..*count {
                    self.block(body, child)?;
                }
                Ok(())
            }
            Statement::If { cond, body } => {
                if self.test(*cond, node)? {
                    self.block(body, child)?;
                }
                Ok(())
            }
            Statement::IfElse {
                cond,
                then,
                otherwise,
            } => {
                if self.test(*cond, node)? {
                    self.block(then, child)
                } else {
                    let skip = if O::TRACED {
                        then.iter().map(subtree_size).sum()
                    } else {
                        0
                    };
                    self.block(otherwise, child + skip)
                }
            }
        }
    }
}

fn drive<E: Environment, O: Observer>(
    program: &Program,
    env: &mut E,
    limits: EpisodeLimits,
    obs: O,
) -> (f64, Termination, usize, O) {
    let ret = env.initial_return();
    let mut m = Machine {
        env,
        limits,
        primitive: 0,
        actions: 0,
        ret,
        obs,
    };
    let end = match m.block(&program.body, 0) {
        Ok(()) => Termination::ProgramEnd,
        Err(t) => t,
    };
    (m.ret, end, m.actions, m.obs)
}

/// Runs one episode and records every primitive step.
pub fn run_episode<E: Environment>(
    program: &Program,
    env: &mut E,
    limits: EpisodeLimits,
    snapshots: bool,
) -> Trajectory {
    let initial = env.world().clone();
    let initial_return = env.initial_return();
    let (total_return, terminated_by, actions, rec) = drive(
        program,
        env,
        limits,
        Recorder {
            steps: Vec::new(),
            snapshots,
        },
    );
    Trajectory {
        initial,
        initial_return,
        steps: rec.steps,
        total_return,
        terminated_by,
        actions,
    }
}

/// Runs one episode without recording it. Returns the same return and
/// termination reason as [`run_episode`], but may stop a provably
/// non-terminating loop early.
pub fn episode_return<E: Environment>(
    program: &Program,
    env: &mut E,
    limits: EpisodeLimits,
) -> (f64, Termination) {
    let (ret, end, _, _) = drive(program, env, limits, Silent);
    (ret, end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::grid::{Direction, Pos};

    fn env() -> PlainEnv {
        let mut w = WorldState::bordered(6, 6);
        w.place_agent(Pos::new(1, 1), Direction::East);
        PlainEnv(w)
    }

    #[test]
    fn while_checks_before_each_iteration() {
        let p = parse("DEF run m( WHILE c( frontIsClear c) w( move w) m)").unwrap();
        let mut e = env();
        let t = run_episode(&p, &mut e, EpisodeLimits::default(), false);
        assert_eq!(t.terminated_by, Termination::ProgramEnd);
        assert_eq!(e.0.agent(), Pos::new(1, 4));
        // 4 checks + 3 moves
        assert_eq!(t.primitive_steps(), 7);
    }

    #[test]
    fn repeat_runs_exactly_n_times() {
        let p = parse("DEF run m( REPEAT R=3 r( putMarker r) m)").unwrap();
        let mut e = env();
        run_episode(&p, &mut e, EpisodeLimits::default(), false);
        assert_eq!(e.0.markers(Pos::new(1, 1)), 3);
    }

    #[test]
    fn empty_effect_loop_hits_step_limit() {
        let p = parse("DEF run m( WHILE c( noMarkersPresent c) w( IF c( markersPresent c) i( move i) w) m)")
            .unwrap();
        let limits = EpisodeLimits::default();
        let t = run_episode(&p, &mut env(), limits, false);
        assert_eq!(t.terminated_by, Termination::StepLimit);
        assert_eq!(t.primitive_steps(), limits.max_primitive_steps);
        assert_eq!(
            episode_return(&p, &mut env(), limits),
            (0.0, Termination::StepLimit)
        );
    }

    #[test]
    fn action_limit() {
        let p = parse("DEF run m( WHILE c( noMarkersPresent c) w( turnLeft w) m)").unwrap();
        let t = run_episode(&p, &mut env(), EpisodeLimits::default(), false);
        assert_eq!(t.terminated_by, Termination::StepLimit);
        assert_eq!(t.actions, 200);
    }

    #[test]
    fn crash_stops_the_episode() {
        let p = parse("DEF run m( pickMarker move m)").unwrap();
        let t = run_episode(&p, &mut env(), EpisodeLimits::default(), false);
        assert_eq!(t.terminated_by, Termination::Crash);
        assert_eq!(t.steps.len(), 1);
    }

    #[test]
    fn node_ids_are_preorder() {
        let p = parse(
            "DEF run m( IFELSE c( frontIsClear c) i( turnLeft turnLeft i) ELSE e( move e) putMarker m)",
        )
        .unwrap();
        let t = run_episode(&p, &mut env(), EpisodeLimits::default(), false);
        let nodes: Vec<usize> = t.steps.iter().map(|s| s.node).collect();
        assert_eq!(nodes, vec![0, 1, 2, 4]);
        let mut e = env();
        e.0.place_agent(Pos::new(1, 4), Direction::East);
        let t = run_episode(&p, &mut e, EpisodeLimits::default(), false);
        let nodes: Vec<usize> = t.steps.iter().map(|s| s.node).collect();
        assert_eq!(nodes, vec![0, 3, 4]);
    }

    #[test]
    fn not_condition_records_raw_perception() {
        let p = parse("DEF run m( IF c( not c( frontIsClear c) c) i( move i) m)").unwrap();
        let t = run_episode(&p, &mut env(), EpisodeLimits::default(), true);
        assert_eq!(
            t.steps[0].kind,
            StepKind::Perception {
                perception: Perception::FrontIsClear,
                result: true
            }
        );
        assert_eq!(t.steps.len(), 1);
        assert!(t.steps[0].snapshot.is_some());
    }
}
