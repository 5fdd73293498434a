//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use karel_core::dsl::{parse, AstLimits, Program};
use karel_core::mutation::{neighbor, random_program, ProductionTable, Symbol};
use karel_core::pythonic::{extract_candidates, repair, RepairRule};
use karel_core::search::{schedule_k, search_rng, Objective, SchedulerConfig};
use karel_core::*;
use karel_harness::{run_experiment, ExperimentConfig, Method, SeedRun};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const D4_PROGRAM: &str = "DEF run m( WHILE c( noMarkersPresent c) w( IFELSE c( frontIsClear c) i( move i) ELSE e( turnLeft e) w) pickMarker turnLeft WHILE c( noMarkersPresent c) w( IFELSE c( frontIsClear c) i( move i) ELSE e( turnLeft e) w) putMarker m)";

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/doorkey")
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn golden_transpilation() -> Outcome {
    let response = std::fs::read_to_string(fixture_dir().join("response_000.txt")).map_err(|e| e.to_string())?;
    let e = extract_candidates("doorkey", &response, &AstLimits::default());
    let got: Vec<&str> = e.candidates.iter().map(|c| c.text.as_str()).collect();
    check(got == [D4_PROGRAM], format!("got {got:?}"))?;
    Ok("exact match".into())
}

const TABLE_ROWS: [(Option<RepairRule>, &str, &str); 7] = [
    (Some(RepairRule::BracketsRemoval), "DEF run m( move() m)", "DEF run m( move m)"),
    (Some(RepairRule::BracketsSeparation), "DEF run m(move m)", "DEF run m( move m)"),
    (
        Some(RepairRule::BracketsAddition),
        "DEF run m( WHILE frontIsClear w( move w) )m",
        "DEF run m( WHILE c( frontIsClear c) w( move w) )m",
    ),
    (Some(RepairRule::BracketsRepairment), "DEF run m( move )", "DEF run m( move m)"),
    (
        Some(RepairRule::IfToIfElse),
        "DEF run m( IF c( frontIsClear c) i( move i) ELSE e( turnLeft e) )m",
        "DEF run m( IFELSE c( frontIsClear c) i( move i) ELSE e( turnLeft e) )m",
    ),
    (None, "DEF run m( move() m m)", "DEF run m( move m)"),
    (
        None,
        "DEF run m( WHILE c( True c) w( move w) )",
        "DEF run m( REPEAT r=19 r( move r) m)",
    ),
];

fn repair_table() -> Outcome {
    for (rule, before, after) in TABLE_ROWS {
        let got = match rule {
            Some(r) => r.apply_text(before),
            None => karel_core::pythonic::apply_rules(before).0,
        };
        check(got == after, format!("{before:?} gave {got:?}, want {after:?}"))?;
        let fixed = repair(before).map_err(|e| format!("{before:?}: {e}"))?;
        check(parse(&fixed.text).ok() == Some(fixed.program), format!("{before:?} not canonical"))?;
    }
    Ok("7/7 rows".into())
}

fn scheduler_anchors() -> Outcome {
    let cfg = SchedulerConfig::default();
    let anchors = [(1, 32), (1_000, 256), (1_000_000, 2048)];
    for (n, k) in anchors {
        check(schedule_k(n, &cfg) == k, format!("k({n}) = {}", schedule_k(n, &cfg)))?;
    }
    let variants = SchedulerConfig::variants(cfg);
    for v in &variants {
        let mut prev = 0;
        for i in 0..1000u64 {
            let n = 1 + i * 999_999 / 999;
            let k = schedule_k(n, v);
            check(k >= prev, format!("{v:?} decreases at n={n}"))?;
            prev = k;
        }
    }
    Ok(format!("anchors exact, {} variants monotone", variants.len()))
}

fn chi_square_p(observed: &[u64], probs: &[f64]) -> f64 {
    let n = observed.iter().sum::<u64>() as f64;
    let (mut stat, mut cells) = (0.0, 0);
    for (&o, &p) in observed.iter().zip(probs) {
        if p > 0.0 {
            stat += (o as f64 - n * p).powi(2) / (n * p);
            cells += 1;
        }
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

fn production_fit() -> Outcome {
    let table = ProductionTable::default();
    let mut worst = 1.0f64;
    for (i, sym) in [Symbol::Statement, Symbol::Condition, Symbol::Action, Symbol::Boolean, Symbol::Number]
        .into_iter()
        .enumerate()
    {
        let mut rng = search_rng(9000 + i as u64);
        let row = table.row(sym);
        let mut counts = vec![0u64; row.len()];
        for _ in 0..100_000 {
            counts[table.draw_index(sym, &mut rng)] += 1;
        }
        let p = chi_square_p(&counts, row);
        check(p > 0.01, format!("{sym:?}: p = {p:.4}"))?;
        if sym == Symbol::Action {
            let moves = counts[Action::ALL.iter().position(|&a| a == Action::Move).unwrap()] as f64 / 1e5;
            check((0.49..=0.51).contains(&moves), format!("move frequency {moves}"))?;
        }
        worst = worst.min(p);
    }
    Ok(format!("smallest p = {worst:.3}"))
}

const ORACLES: [(TaskId, &str); 4] = [
    (
        TaskId::Maze,
        "DEF run m( WHILE c( noMarkersPresent c) w( IFELSE c( rightIsClear c) i( turnRight move i) ELSE e( IFELSE c( frontIsClear c) i( move i) ELSE e( turnLeft e) e) w) m)",
    ),
    (
        TaskId::FourCorners,
        "DEF run m( REPEAT R=4 r( WHILE c( frontIsClear c) w( move w) putMarker turnLeft r) m)",
    ),
    (
        TaskId::Harvester,
        "DEF run m( turnLeft turnLeft WHILE c( frontIsClear c) w( move w) turnRight REPEAT R=6 r( WHILE c( frontIsClear c) w( pickMarker move w) pickMarker turnLeft turnLeft WHILE c( frontIsClear c) w( move w) turnLeft move turnLeft r) m)",
    ),
    (
        TaskId::TopOff,
        "DEF run m( WHILE c( frontIsClear c) w( IF c( markersPresent c) i( putMarker i) move w) IF c( markersPresent c) i( putMarker i) m)",
    ),
];

fn oracle_programs() -> Outcome {
    for (task, src) in ORACLES {
        let obj = TaskObjective::new(generate_variants(task, 0, 32));
        let program = parse(src).map_err(|e| e.to_string())?;
        let returns = obj.returns(&program);
        check(returns.iter().all(|&r| r == 1.0), format!("{task}: {returns:?}"))?;
    }
    Ok("Maze, FourCorners, Harvester, TopOff all 1.0".into())
}

fn doorkey_two_stage() -> Outcome {
    let obj = TaskObjective::new(generate_variants(TaskId::DoorKey, 0, 32));
    let mean = obj.evaluate(&parse(D4_PROGRAM).map_err(|e| e.to_string())?);
    check((mean - 0.5).abs() <= 0.05, format!("mean {mean}"))?;
    Ok(format!("mean {mean}"))
}

fn monotone(run: &SeedRun) -> bool {
    run.curve.windows(2).all(|w| w[0].best_return <= w[1].best_return)
}

fn hc_baseline() -> Outcome {
    let cfg = ExperimentConfig {
        task: TaskId::Maze,
        method: Method::HcFixedK,
        k: 250,
        seeds: (0..8).collect(),
        budget: 100_000,
        ..ExperimentConfig::default()
    };
    let rec = run_experiment(&cfg).map_err(|e| e.to_string())?;
    check(rec.seeds.iter().all(monotone), "non-monotone curve")?;
    let solved = rec.seeds.iter().filter(|s| s.best_return == 1.0).count();
    check(solved >= 6, format!("{solved}/8 seeds reached 1.0"))?;
    Ok(format!("{solved}/8 seeds reached 1.0"))
}

fn doorkey_llm(budget: u64, seeds: Vec<u64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        task: TaskId::DoorKey,
        method: Method::LlmGs,
        seeds,
        budget,
        responses_per_seed: 1,
        ..ExperimentConfig::default()
    };
    cfg.scheduler.k_end = cfg.scheduler.k_end.min(budget as usize);
    cfg.llm.fixture_dir = Some(fixture_dir());
    cfg
}

fn llm_gs_desk_scale() -> Outcome {
    let rec = run_experiment(&doorkey_llm(500_000, (0..8).collect())).map_err(|e| e.to_string())?;
    check(rec.seeds.iter().all(monotone), "non-monotone curve")?;
    for s in &rec.seeds {
        let start = s.curve.first().map_or(f64::NAN, |p| p.best_return);
        check(start >= 0.45, format!("seed {} starts at {start}", s.seed))?;
    }
    let high = rec.seeds.iter().filter(|s| s.best_return > 0.9).count();
    check(high >= 4, format!("{high}/8 seeds above 0.9"))?;
    let evals: Vec<u64> = rec.seeds.iter().map(|s| s.evaluations_used).collect();
    Ok(format!("{high}/8 seeds above 0.9, evaluations {evals:?}"))
}

/// Token damage of the kinds the repair rules undo.
fn damage(text: &str, mask: u64) -> String {
    let toks: Vec<&str> = text.split(' ').collect();
    let mut out = String::new();
    for (i, t) in toks.iter().enumerate() {
        let bit = (mask >> (i % 64)) & 1 == 1;
        out.push_str(t);
        if bit && Action::from_name(t).is_some() {
            out.push_str("()");
        }
        let fuse = bit && t.ends_with('(') && i + 1 < toks.len();
        if !fuse && i + 1 < toks.len() {
            out.push(' ');
        }
    }
    out
}

fn property_suites() -> Outcome {
    let table = ProductionTable::default();
    let limits = AstLimits::default();
    let mut rng = search_rng(424242);
    for _ in 0..1_000 {
        let p = random_program(&table, &mut rng, &limits);
        check(parse(&p.to_string()).ok().as_ref() == Some(&p), format!("round trip: {p}"))?;
    }
    let mut p = random_program(&table, &mut rng, &limits);
    for _ in 0..10_000 {
        p = neighbor(&p, &table, &mut rng, &limits);
        check(p.check_limits(&limits).is_ok(), format!("limits: {p}"))?;
        check(parse(&p.to_string()).ok().as_ref() == Some(&p), format!("grammar: {p}"))?;
    }
    for task in TaskId::ALL {
        let (lo, hi) = task.reward_range();
        for i in 0..10_000u64 {
            let prog = random_program(&table, &mut rng, &limits);
            let v = generate_variant(task, i);
            let r = episode_return(&prog, &mut v.env(), EpisodeLimits::default()).0;
            check((lo..=hi).contains(&r), format!("{task}: {r} outside [{lo}, {hi}] for {prog}"))?;
        }
    }
    let mut corpus: Vec<String> = TABLE_ROWS.iter().map(|r| r.1.to_string()).collect();
    corpus.push(D4_PROGRAM.into());
    for i in 0..1_000u64 {
        let prog: Program = random_program(&table, &mut rng, &limits);
        corpus.push(damage(&prog.to_string(), i.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
    }
    for text in &corpus {
        let once = repair(text).map_err(|e| format!("{text:?}: {e}"))?;
        let twice = repair(&once.text).map_err(|e| format!("{:?}: {e}", once.text))?;
        check(twice.text == once.text, format!("not idempotent on {text:?}"))?;
    }
    Ok(format!(
        "1000 round trips, 10000 mutations, 10000 programs x {} tasks, {} repair inputs",
        TaskId::ALL.len(),
        corpus.len()
    ))
}

fn determinism() -> Outcome {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = doorkey_llm(10_000, vec![0, 1]);
    cfg.out_dir = Some(out.path().into());
    let path = out.path().join("run_record.json");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let rec = run_experiment(&cfg).map_err(|e| e.to_string())?;
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        std::fs::remove_file(&path).map_err(|e| e.to_string())?;
        runs.push((rec, bytes));
    }
    check(runs[0].0 == runs[1].0, "records differ")?;
    check(runs[0].1 == runs[1].1, "files differ")?;
    Ok(format!("{} bytes identical", runs[0].1.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("golden transpilation", golden_transpilation),
        ("repair-rule table", repair_table),
        ("scheduler anchors", scheduler_anchors),
        ("production-rule fidelity", production_fit),
        ("oracle-optimal programs", oracle_programs),
        ("DoorKey two-stage reward", doorkey_two_stage),
        ("desk-scale HC baseline", hc_baseline),
        ("desk-scale LLM-GS", llm_gs_desk_scale),
        ("property suites", property_suites),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail}; {secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({why}; {secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
