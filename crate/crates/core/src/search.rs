//! Hill climbing in programmatic space.
//!
//! Neighbours are generated sequentially in fixed-size chunks and each chunk
//! is scored with [`evaluate_all`], which fans out over rayon when the
//! `parallel` feature is on. The lowest-index improving neighbour of a chunk
//! is committed and only evaluations up to and including it are charged, so
//! a search produces the same history with or without the feature.

use std::f64::consts::PI;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::dsl::{AstLimits, Program};
use crate::interp::{episode_return, EpisodeLimits};
use crate::mutation::{neighbor, random_program, ProductionTable};
use crate::tasks::{RngStream, Variant};

/// Returns at or above this count as optimal.
pub const OPTIMAL_RETURN: f64 = 1.0 - 1e-12;

/// Neighbours generated and scored together.
pub const CHUNK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Logarithmic,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Sinusoidal,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ratio {
    Logarithmic,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub k_start: usize,
    pub k_end: usize,
    /// Total evaluation budget `N`.
    pub budget: u64,
    pub interpolation: Interpolation,
    pub schedule: Schedule,
    pub ratio: Ratio,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            k_start: 32,
            k_end: 2048,
            budget: 1_000_000,
            interpolation: Interpolation::Logarithmic,
            schedule: Schedule::Sinusoidal,
            ratio: Ratio::Logarithmic,
        }
    }
}

impl SchedulerConfig {
    /// All eight interpolation x schedule x ratio combinations.
    pub fn variants(base: SchedulerConfig) -> Vec<SchedulerConfig> {
        let mut out = Vec::with_capacity(8);
        for interpolation in [Interpolation::Logarithmic, Interpolation::Linear] {
            for schedule in [Schedule::Sinusoidal, Schedule::Linear] {
                for ratio in [Ratio::Logarithmic, Ratio::Linear] {
                    out.push(SchedulerConfig {
                        interpolation,
                        schedule,
                        ratio,
                        ..base
                    });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.k_start == 0 || self.k_start > self.k_end || self.k_end as u64 > self.budget {
            return Err(format!(
                "need 1 <= k_start ({}) <= k_end ({}) <= budget ({})",
                self.k_start, self.k_end, self.budget
            ));
        }
        Ok(())
    }
}

/// Neighbourhood size after `n` evaluations.
pub fn schedule_k(n: u64, cfg: &SchedulerConfig) -> usize {
    let big_n = cfg.budget.max(1) as f64;
    let n = (n.max(1) as f64).min(big_n);
    let ratio = if big_n <= 1.0 {
        1.0
    } else {
        match cfg.ratio {
            Ratio::Logarithmic => n.ln() / big_n.ln(),
            Ratio::Linear => n / big_n,
        }
    };
    let r = match cfg.schedule {
        Schedule::Sinusoidal => (((2.0 * ratio - 1.0) * PI / 2.0).sin() + 1.0) / 2.0,
        Schedule::Linear => ratio,
    };
    let (ks, ke) = (cfg.k_start as f64, cfg.k_end as f64);
    let k = match cfg.interpolation {
        Interpolation::Logarithmic => ((1.0 - r) * ks.log2() + r * ke.log2()).exp2(),
        Interpolation::Linear => (1.0 - r) * ks + r * ke,
    };
    (k.round() as usize).clamp(cfg.k_start, cfg.k_end)
}

/// Scores a program; higher is better.
pub trait Objective: Sync {
    fn evaluate(&self, program: &Program) -> f64;
}

impl<F: Fn(&Program) -> f64 + Sync> Objective for F {
    fn evaluate(&self, program: &Program) -> f64 {
        self(program)
    }
}

/// Mean episodic return over a fixed set of task variants.
#[derive(Clone, Debug)]
pub struct TaskObjective {
    pub variants: Vec<Variant>,
    pub limits: EpisodeLimits,
}

impl TaskObjective {
    pub fn new(variants: Vec<Variant>) -> Self {
        assert!(!variants.is_empty(), "need at least one variant");
        Self {
            variants,
            limits: EpisodeLimits::default(),
        }
    }

    /// Per-variant returns, in variant order.
    pub fn returns(&self, program: &Program) -> Vec<f64> {
        self.variants
            .iter()
            .map(|v| episode_return(program, &mut v.env(), self.limits).0)
            .collect()
    }
}

impl Objective for TaskObjective {
    fn evaluate(&self, program: &Program) -> f64 {
        let total: f64 = self
            .variants
            .iter()
            .map(|v| episode_return(program, &mut v.env(), self.limits).0)
            .sum();
        total / self.variants.len() as f64
    }
}

/// Scores a batch, one entry per program in input order.
#[cfg(feature = "parallel")]
pub fn evaluate_all<O: Objective + ?Sized>(objective: &O, programs: &[Program]) -> Vec<f64> {
    use rayon::prelude::*;
    programs.par_iter().map(|p| objective.evaluate(p)).collect()
}

/// Scores a batch, one entry per program in input order.
#[cfg(not(feature = "parallel"))]
pub fn evaluate_all<O: Objective + ?Sized>(objective: &O, programs: &[Program]) -> Vec<f64> {
    evaluate_all_sequential(objective, programs)
}

pub fn evaluate_all_sequential<O: Objective + ?Sized>(objective: &O, programs: &[Program]) -> Vec<f64> {
    programs.iter().map(|p| objective.evaluate(p)).collect()
}

/// Where neighbours and fresh starting points come from.
pub trait NeighborSource {
    fn neighbor(&mut self, program: &Program, rng: &mut RngStream) -> Program;
    fn fresh(&mut self, rng: &mut RngStream) -> Program;
}

/// Grammar-based mutation under AST limits.
#[derive(Clone, Debug, Default)]
pub struct GrammarMutator {
    pub table: ProductionTable,
    pub limits: AstLimits,
}

impl NeighborSource for GrammarMutator {
    fn neighbor(&mut self, program: &Program, rng: &mut RngStream) -> Program {
        neighbor(program, &self.table, rng, &self.limits)
    }

    fn fresh(&mut self, rng: &mut RngStream) -> Program {
        random_program(&self.table, rng, &self.limits)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub program: Program,
    pub mean_return: f64,
    /// Evaluation index (1-based) at which it was scored.
    pub evaluated_at: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub evaluations_used: u64,
    pub budget: u64,
    pub best: Option<CandidateRecord>,
    pub current: Option<CandidateRecord>,
    /// `(n, best_return)` at every improvement of the best return.
    pub history: Vec<(u64, f64)>,
    /// Hill-climbing runs started from a fresh random program.
    pub restarts: u32,
}

impl SearchState {
    fn new(budget: u64) -> Self {
        Self {
            evaluations_used: 0,
            budget,
            best: None,
            current: None,
            history: Vec::new(),
            restarts: 0,
        }
    }

    pub fn best_return(&self) -> f64 {
        self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.mean_return)
    }

    pub fn solved(&self) -> bool {
        self.best_return() >= OPTIMAL_RETURN
    }

    pub fn exhausted(&self) -> bool {
        self.evaluations_used >= self.budget
    }

    fn remaining(&self) -> u64 {
        self.budget.saturating_sub(self.evaluations_used)
    }

    fn record(&mut self, program: &Program, score: f64) -> CandidateRecord {
        self.evaluations_used += 1;
        let rec = CandidateRecord {
            program: program.clone(),
            mean_return: score,
            evaluated_at: self.evaluations_used,
        };
        if score > self.best_return() {
            self.best = Some(rec.clone());
            self.history.push((self.evaluations_used, score));
        }
        rec
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Halt {
    Optimal,
    Stuck,
    Exhausted,
}

struct Driver<'a, O: ?Sized, S> {
    objective: &'a O,
    source: &'a mut S,
    state: SearchState,
}

impl<O: Objective + ?Sized, S: NeighborSource> Driver<'_, O, S> {
    fn score(&mut self, program: &Program) -> Option<CandidateRecord> {
        if self.state.exhausted() {
            return None;
        }
        let s = self.objective.evaluate(program);
        Some(self.state.record(program, s))
    }

    /// Climbs from an already scored `current`.
    fn climb(&mut self, mut current: CandidateRecord, k_of: &dyn Fn(u64) -> usize, rng: &mut RngStream) -> Halt {
        loop {
            self.state.current = Some(current.clone());
            if current.mean_return >= OPTIMAL_RETURN {
                return Halt::Optimal;
            }
            let k = k_of(self.state.evaluations_used).max(1);
            let mut tried = 0;
            let mut moved = None;
            while tried < k && moved.is_none() {
                let room = self.state.remaining();
                if room == 0 {
                    return Halt::Exhausted;
                }
                let take = CHUNK.min(k - tried).min(room.min(usize::MAX as u64) as usize);
                let batch: Vec<Program> = (0..take)
                    .map(|_| self.source.neighbor(&current.program, rng))
                    .collect();
                let scores = evaluate_all(self.objective, &batch);
                for (p, s) in batch.iter().zip(scores) {
                    let rec = self.state.record(p, s);
                    tried += 1;
                    if s > current.mean_return {
                        moved = Some(rec);
                        break;
                    }
                }
            }
            match moved {
                Some(next) => current = next,
                None => return Halt::Stuck,
            }
        }
    }
}

/// Hill climbing from `init` with neighbourhood size `k_of(n)`.
pub fn hill_climb<O, S>(
    init: &Program,
    k_of: &dyn Fn(u64) -> usize,
    objective: &O,
    source: &mut S,
    budget: u64,
    rng: &mut RngStream,
) -> SearchState
where
    O: Objective + ?Sized,
    S: NeighborSource,
{
    let mut d = Driver {
        objective,
        source,
        state: SearchState::new(budget),
    };
    if let Some(start) = d.score(init) {
        d.climb(start, k_of, rng);
    }
    d.state
}

/// Fixed-k hill climbing from random programs, restarting from a fresh one
/// whenever a run gets stuck, until the budget is spent or a program is
/// optimal.
pub fn hill_climb_restarts<O, S>(
    k: usize,
    objective: &O,
    source: &mut S,
    budget: u64,
    rng: &mut RngStream,
) -> SearchState
where
    O: Objective + ?Sized,
    S: NeighborSource,
{
    let mut d = Driver {
        objective,
        source,
        state: SearchState::new(budget),
    };
    let fixed = move |_: u64| k;
    let mut first = true;
    while !d.state.exhausted() && !d.state.solved() {
        let init = d.source.fresh(rng);
        if !first {
            d.state.restarts += 1;
        }
        first = false;
        let Some(start) = d.score(&init) else { break };
        if d.climb(start, &fixed, rng) != Halt::Stuck {
            break;
        }
    }
    d.state
}

/// Scheduled hill climbing.
///
/// Every init is scored first and the list is sorted by return, best
/// first. Hill climbing then runs from each init in turn with
/// `k = schedule_k(n)` for the global evaluation count `n`, sharing one
/// budget. Once the list is used up, fresh random programs take over.
pub fn scheduled_hill_climb<O, S>(
    inits: &[Program],
    cfg: &SchedulerConfig,
    objective: &O,
    source: &mut S,
    rng: &mut RngStream,
) -> SearchState
where
    O: Objective + ?Sized,
    S: NeighborSource,
{
    let mut d = Driver {
        objective,
        source,
        state: SearchState::new(cfg.budget),
    };
    let mut scored = Vec::with_capacity(inits.len());
    for p in inits {
        let Some(rec) = d.score(p) else { break };
        let done = rec.mean_return >= OPTIMAL_RETURN;
        scored.push(rec);
        if done {
            d.state.current = scored.last().cloned();
            return d.state;
        }
    }
    // stable: ties keep their original order
    scored.sort_by(|a, b| b.mean_return.total_cmp(&a.mean_return));
    let k_of = |n: u64| schedule_k(n, cfg);
    let mut queue = scored.into_iter();
    loop {
        let start = match queue.next() {
            Some(rec) => rec,
            None => {
                let init = d.source.fresh(rng);
                let Some(rec) = d.score(&init) else { break };
                d.state.restarts += 1;
                rec
            }
        };
        if d.climb(start, &k_of, rng) != Halt::Stuck {
            break;
        }
    }
    d.state
}

/// Convenience: a deterministic stream for search run `seed`.
pub fn search_rng(seed: u64) -> RngStream {
    RngStream::seed_from_u64(crate::tasks::mix64(seed ^ 0x5EA2_C4ED))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    #[test]
    fn scheduler_anchors() {
        let cfg = SchedulerConfig::default();
        assert_eq!(schedule_k(0, &cfg), 32);
        assert_eq!(schedule_k(1, &cfg), 32);
        assert_eq!(schedule_k(1_000, &cfg), 256);
        assert_eq!(schedule_k(1_000_000, &cfg), 2048);
    }

    #[test]
    fn all_variants_hit_endpoints() {
        for cfg in SchedulerConfig::variants(SchedulerConfig::default()) {
            assert_eq!(schedule_k(1, &cfg), 32, "{cfg:?}");
            assert_eq!(schedule_k(1_000_000, &cfg), 2048, "{cfg:?}");
        }
    }

    #[test]
    fn linear_everything_is_affine_in_n() {
        let cfg = SchedulerConfig {
            interpolation: Interpolation::Linear,
            schedule: Schedule::Linear,
            ratio: Ratio::Linear,
            ..SchedulerConfig::default()
        };
        assert_eq!(schedule_k(500_000, &cfg), 1040);
    }

    /// Each program's score is looked up by its printed text.
    struct Table(Vec<(&'static str, f64)>);

    impl Objective for Table {
        fn evaluate(&self, p: &Program) -> f64 {
            let s = p.to_string();
            self.0
                .iter()
                .find(|(src, _)| parse(src).unwrap().to_string() == s)
                .map_or(0.0, |x| x.1)
        }
    }

    /// Hands out a fixed sequence of neighbours.
    struct Script(Vec<Program>, usize);

    impl NeighborSource for Script {
        fn neighbor(&mut self, _: &Program, _: &mut RngStream) -> Program {
            let p = self.0[self.1 % self.0.len()].clone();
            self.1 += 1;
            p
        }

        fn fresh(&mut self, rng: &mut RngStream) -> Program {
            self.neighbor(&parse("DEF run m( move m)").unwrap(), rng)
        }
    }

    fn prog(s: &str) -> Program {
        parse(s).unwrap()
    }

    #[test]
    fn optimal_init_uses_one_evaluation() {
        let obj = Table(vec![("DEF run m( move m)", 1.0)]);
        let mut src = Script(vec![prog("DEF run m( turnLeft m)")], 0);
        let st = hill_climb(&prog("DEF run m( move m)"), &|_| 10, &obj, &mut src, 100, &mut search_rng(0));
        assert_eq!(st.evaluations_used, 1);
        assert!(st.solved());
    }

    #[test]
    fn first_improvement_recentres() {
        let obj = Table(vec![
            ("DEF run m( move m)", 0.5),
            ("DEF run m( turnLeft m)", 0.2),
            ("DEF run m( putMarker m)", 0.7),
        ]);
        let mut src = Script(
            vec![
                prog("DEF run m( turnLeft m)"),
                prog("DEF run m( turnLeft m)"),
                prog("DEF run m( putMarker m)"),
                prog("DEF run m( turnLeft m)"),
            ],
            0,
        );
        let st = hill_climb(&prog("DEF run m( move m)"), &|_| 3, &obj, &mut src, 100, &mut search_rng(0));
        // init + 3 neighbours, then a full batch of 3 without improvement
        assert_eq!(st.history, vec![(1, 0.5), (4, 0.7)]);
        assert_eq!(st.evaluations_used, 7);
        assert_eq!(st.best.unwrap().program, prog("DEF run m( putMarker m)"));
    }

    #[test]
    fn ties_do_not_move() {
        let obj = Table(vec![("DEF run m( move m)", 0.5), ("DEF run m( turnLeft m)", 0.5)]);
        let mut src = Script(vec![prog("DEF run m( turnLeft m)")], 0);
        let st = hill_climb(&prog("DEF run m( move m)"), &|_| 4, &obj, &mut src, 100, &mut search_rng(0));
        assert_eq!(st.evaluations_used, 5);
        assert_eq!(st.current.unwrap().program, prog("DEF run m( move m)"));
    }

    #[test]
    fn budget_is_never_exceeded() {
        let obj = Table(vec![]);
        let mut src = Script(vec![prog("DEF run m( turnLeft m)")], 0);
        let st = hill_climb(&prog("DEF run m( move m)"), &|_| 1000, &obj, &mut src, 37, &mut search_rng(0));
        assert_eq!(st.evaluations_used, 37);
    }

    #[test]
    fn scheduled_returns_optimal_init() {
        let obj = Table(vec![("DEF run m( move m)", 0.2), ("DEF run m( putMarker m)", 1.0)]);
        let mut src = Script(vec![prog("DEF run m( turnLeft m)")], 0);
        let inits = [prog("DEF run m( move m)"), prog("DEF run m( putMarker m)")];
        let st = scheduled_hill_climb(
            &inits,
            &SchedulerConfig::default(),
            &obj,
            &mut src,
            &mut search_rng(0),
        );
        assert_eq!(st.evaluations_used, 2);
        assert_eq!(st.best_return(), 1.0);
    }

    #[test]
    fn scheduled_refills_with_fresh_programs() {
        let obj = Table(vec![("DEF run m( move m)", 0.1)]);
        let mut src = Script(vec![prog("DEF run m( turnLeft m)")], 0);
        let cfg = SchedulerConfig {
            k_start: 2,
            k_end: 4,
            budget: 50,
            ..SchedulerConfig::default()
        };
        let st = scheduled_hill_climb(&[prog("DEF run m( move m)")], &cfg, &obj, &mut src, &mut search_rng(0));
        assert_eq!(st.evaluations_used, 50);
        assert!(st.restarts > 0);
        assert_eq!(st.best_return(), 0.1);
    }
}
