//! Running one experiment: every seed, one method, one task.

use std::fs;
use std::path::{Path, PathBuf};

use karel_core::dsl::AstLimits;
use karel_core::pythonic::{extract_candidates, repair, Provenance};
use karel_core::search::{hill_climb_restarts, search_rng, GrammarMutator, NeighborSource};
use karel_core::{generate_variants, scheduled_hill_climb, Program, SearchState, TaskObjective};
use karel_llm::{build_prompts, task_fields, LlmClientConfig, LlmError, PromptError, PromptMode, ResponseSource, RevisionInput};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, Method};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("seed {seed}: {source}")]
    Llm { seed: u64, source: LlmError },
    #[error("init program {index} does not repair into a program: {reason}")]
    BadInit { index: usize, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: u64,
    pub best_return: f64,
}

/// How many responses produced a usable program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub responses: usize,
    pub accepted: usize,
    pub rate: f64,
    /// Best return among the accepted programs before any search step.
    pub best_initial_return: Option<f64>,
    pub provenance: Vec<Provenance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub evaluations_used: u64,
    pub best_return: f64,
    pub best_program: Option<String>,
    pub restarts: u32,
    /// Best-so-far at every improvement and at the log checkpoints.
    pub curve: Vec<CurvePoint>,
    pub acceptance: Option<AcceptanceStats>,
}

impl SeedRun {
    /// Best-so-far at `n` evaluations; the last value carries forward.
    pub fn value_at(&self, n: u64) -> Option<f64> {
        self.curve.iter().take_while(|p| p.n <= n).last().map(|p| p.best_return)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedRun>,
}

/// 1, 3, 10, 32, 100, 316, ... up to `limit`.
pub fn checkpoints(limit: u64) -> Vec<u64> {
    let mut out = Vec::new();
    for half_decade in 0.. {
        let n = 10f64.powf(half_decade as f64 / 2.0).round() as u64;
        if n > limit {
            break;
        }
        out.push(n);
    }
    out
}

/// Merges improvement history with the checkpoints up to the budget.
pub fn build_curve(history: &[(u64, f64)], budget: u64) -> Vec<CurvePoint> {
    let mut ns: Vec<u64> = history.iter().map(|h| h.0).chain(checkpoints(budget)).collect();
    ns.push(budget);
    ns.sort_unstable();
    ns.dedup();
    let mut out = Vec::with_capacity(ns.len());
    let mut h = history.iter().peekable();
    let mut best = None;
    for n in ns {
        while let Some(&&(at, r)) = h.peek() {
            if at > n {
                break;
            }
            best = Some(r);
            h.next();
        }
        if let Some(best_return) = best {
            out.push(CurvePoint { n, best_return });
        }
    }
    out
}

fn seed_llm_config(cfg: &LlmClientConfig, seed: u64) -> Result<LlmClientConfig, HarnessError> {
    let mut c = cfg.clone();
    if let Some(dir) = &cfg.fixture_dir {
        let per_seed = dir.join(format!("seed_{seed}"));
        if per_seed.is_dir() {
            c.fixture_dir = Some(per_seed);
        }
    }
    if let Some(dir) = &cfg.journal_dir {
        let per_seed = dir.join(format!("seed_{seed}"));
        fs::create_dir_all(&per_seed).map_err(io_err(&per_seed))?;
        c.journal_dir = Some(per_seed);
    }
    Ok(c)
}

/// Asks for `responses_per_seed` responses and keeps the first surviving
/// candidate of each.
fn llm_inits(cfg: &ExperimentConfig, seed: u64, limits: &AstLimits) -> Result<(Vec<Program>, AcceptanceStats), HarnessError> {
    let bundle = build_prompts(&task_fields(cfg.task), cfg.prompt_mode, &RevisionInput::None)?;
    let llm = seed_llm_config(&cfg.llm, seed)?;
    let llm_err = |source| HarnessError::Llm { seed, source };
    let mut source = ResponseSource::new(&llm).map_err(llm_err)?;
    let responses = source.request(&bundle, cfg.responses_per_seed).map_err(llm_err)?;
    let mut inits = Vec::new();
    let mut provenance = Vec::new();
    for (i, response) in responses.iter().enumerate() {
        let extraction = extract_candidates(&format!("seed{seed}-r{i}"), response, limits);
        provenance.extend(extraction.candidates.iter().map(|c| c.provenance.clone()));
        provenance.extend(extraction.rejected);
        if let Some(first) = extraction.candidates.into_iter().next() {
            inits.push(first.program);
        }
    }
    let stats = AcceptanceStats {
        responses: responses.len(),
        accepted: inits.len(),
        rate: if responses.is_empty() {
            0.0
        } else {
            inits.len() as f64 / responses.len() as f64
        },
        best_initial_return: None,
        provenance,
    };
    Ok((inits, stats))
}

fn config_inits(cfg: &ExperimentConfig) -> Result<Vec<Program>, HarnessError> {
    cfg.init_programs
        .iter()
        .enumerate()
        .map(|(index, text)| {
            repair(text).map(|r| r.program).map_err(|e| HarnessError::BadInit {
                index,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Best return among the first `inits` evaluations.
fn best_among_first(state: &SearchState, inits: usize) -> Option<f64> {
    state
        .history
        .iter()
        .take_while(|h| h.0 <= inits as u64)
        .last()
        .map(|h| h.1)
}

pub fn run_seed(cfg: &ExperimentConfig, objective: &TaskObjective, seed: u64) -> Result<SeedRun, HarnessError> {
    let mut source = GrammarMutator::default();
    let mut rng = search_rng(seed);
    let scheduler = cfg.scheduler_config();
    let (state, acceptance) = match cfg.method {
        Method::HcFixedK => (hill_climb_restarts(cfg.k, objective, &mut source, cfg.budget, &mut rng), None),
        Method::ShcRandomInit => {
            let init = source.fresh(&mut rng);
            (scheduled_hill_climb(&[init], &scheduler, objective, &mut source, &mut rng), None)
        }
        Method::ShcLlmInit => {
            let inits = config_inits(cfg)?;
            (scheduled_hill_climb(&inits, &scheduler, objective, &mut source, &mut rng), None)
        }
        Method::LlmGs => {
            let (inits, mut stats) = llm_inits(cfg, seed, &source.limits)?;
            let state = scheduled_hill_climb(&inits, &scheduler, objective, &mut source, &mut rng);
            if !inits.is_empty() {
                stats.best_initial_return = best_among_first(&state, inits.len());
            }
            (state, Some(stats))
        }
    };
    Ok(SeedRun {
        seed,
        evaluations_used: state.evaluations_used,
        best_return: state.best_return(),
        best_program: state.best.as_ref().map(|b| b.program.to_string()),
        restarts: state.restarts,
        curve: build_curve(&state.history, cfg.budget),
        acceptance,
    })
}

/// Runs every seed. With an output directory each finished seed is
/// written to `seeds/seed_<s>.json` straight away, so a later failure
/// keeps the earlier curves.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord, HarnessError> {
    cfg.validate()?;
    if cfg.method == Method::LlmGs && !matches!(cfg.prompt_mode, PromptMode::PythonicDsl | PromptMode::PythonOnly | PromptMode::DslOnly) {
        return Err(ConfigError::Invalid(format!("llm_gs needs a generation prompt mode, got {}", cfg.prompt_mode.name())).into());
    }
    let seed_dir = cfg.out_dir.as_ref().map(|d| d.join("seeds"));
    if let Some(dir) = &seed_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let objective = TaskObjective::new(generate_variants(cfg.task, cfg.variant_seed, cfg.variant_count));
    let mut seeds = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let run = run_seed(cfg, &objective, seed)?;
        if let Some(dir) = &seed_dir {
            let path = dir.join(format!("seed_{seed}.json"));
            fs::write(&path, serde_json::to_string_pretty(&run)?).map_err(io_err(&path))?;
        }
        seeds.push(run);
    }
    let record = RunRecord {
        config: cfg.clone(),
        seeds,
    };
    if let Some(dir) = &cfg.out_dir {
        let path = dir.join("run_record.json");
        fs::write(&path, serde_json::to_string_pretty(&record)?).map_err(io_err(&path))?;
    }
    Ok(record)
}
