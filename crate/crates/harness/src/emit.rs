//! CSV and JSON output for run records.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::experiment::{io_err, HarnessError, RunRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(format!("unknown format `{s}` (csv or json)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeedRow {
    pub seed: u64,
    pub n: u64,
    pub best_return: f64,
}

/// Mean over seeds with a normal-approximation 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub n: u64,
    pub seeds: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn seed_rows(record: &RunRecord) -> Vec<SeedRow> {
    record
        .seeds
        .iter()
        .flat_map(|s| {
            s.curve.iter().map(move |p| SeedRow {
                seed: s.seed,
                n: p.n,
                best_return: p.best_return,
            })
        })
        .collect()
}

/// One row per `n` logged by any seed. Seeds without a value yet at `n`
/// are left out of that row.
pub fn aggregate_rows(record: &RunRecord) -> Vec<AggregateRow> {
    let mut ns: Vec<u64> = record.seeds.iter().flat_map(|s| s.curve.iter().map(|p| p.n)).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let vals: Vec<f64> = record.seeds.iter().filter_map(|s| s.value_at(n)).collect();
            let k = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / k;
            let half = if vals.len() > 1 {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
                1.96 * (var / k).sqrt()
            } else {
                0.0
            };
            AggregateRow {
                n,
                seeds: vals.len(),
                mean,
                ci_low: mean - half,
                ci_high: mean + half,
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes the record in `format` under `dir`; returns the files written.
///
/// CSV gives `seed_<s>.csv` per seed (seed, n, best_return) and
/// `aggregate.csv`; JSON gives `run_record.json`.
pub fn emit_results(record: &RunRecord, format: OutputFormat, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    match format {
        OutputFormat::Csv => {
            let rows = seed_rows(record);
            let mut files = Vec::new();
            for s in &record.seeds {
                let path = dir.join(format!("seed_{}.csv", s.seed));
                let mine: Vec<SeedRow> = rows.iter().filter(|r| r.seed == s.seed).copied().collect();
                write_csv(&path, &mine)?;
                files.push(path);
            }
            let agg = dir.join("aggregate.csv");
            write_csv(&agg, &aggregate_rows(record))?;
            files.push(agg);
            Ok(files)
        }
        OutputFormat::Json => {
            let path = dir.join("run_record.json");
            fs::write(&path, serde_json::to_string_pretty(record)?).map_err(io_err(&path))?;
            Ok(vec![path])
        }
    }
}

pub fn load_record(path: &Path) -> Result<RunRecord, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}
