use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use karel_harness::{emit_results, load_record, run_experiment, ExperimentConfig, OutputFormat};

#[derive(Parser)]
#[command(name = "karel-gs", about = "Programmatic policy search on the Karel task suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write run_record.json to the output directory.
    Run(Box<RunArgs>),
    /// Convert a run record into CSV or JSON files.
    Emit {
        /// A run_record.json, or a directory holding one.
        #[arg(long, default_value = "results")]
        record: PathBuf,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
        /// Defaults to the record's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// key = value file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    /// llm_gs, hc_fixed_k, shc_random_init or shc_llm_init
    #[arg(long)]
    method: Option<String>,
    /// `0..31`, `0,4,9` or a single seed.
    #[arg(long)]
    seeds: Option<String>,
    /// Evaluation budget; `1e6` style accepted.
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    variants: Option<String>,
    #[arg(long)]
    responses: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    /// Replay responses from this directory.
    #[arg(long)]
    fixtures: Option<String>,
    /// Live chat-completions URL.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value = "results")]
    out: String,
    /// Also write the CSV files after the run.
    #[arg(long)]
    csv: bool,
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_file_text(&text).with_context(|| format!("in {}", path.display()))?;
    }
    let flags = [
        ("task", &args.task),
        ("method", &args.method),
        ("seeds", &args.seeds),
        ("budget", &args.budget),
        ("k", &args.k),
        ("variants", &args.variants),
        ("responses", &args.responses),
        ("mode", &args.mode),
        ("fixtures", &args.fixtures),
        ("endpoint", &args.endpoint),
        ("model", &args.model),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.set("out", &args.out)?;
    if cfg.llm.journal_dir.is_none() && cfg.llm.endpoint.is_some() {
        cfg.llm.journal_dir = Some(PathBuf::from(&args.out).join("journal"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let cfg = build_config(&args)?;
            let out = cfg.out_dir.clone().expect("set above");
            let record = run_experiment(&cfg)?;
            for s in &record.seeds {
                println!(
                    "seed {}: best {:.4} after {} evaluations, {} restarts",
                    s.seed, s.best_return, s.evaluations_used, s.restarts
                );
            }
            if args.csv {
                emit_results(&record, OutputFormat::Csv, &out)?;
            }
            println!("wrote {}", out.join("run_record.json").display());
        }
        Command::Emit { record, format, out } => {
            let path = if record.is_dir() { record.join("run_record.json") } else { record };
            if !path.exists() {
                bail!("no run record at {}", path.display());
            }
            let rec = load_record(&path)?;
            let dir = out.unwrap_or_else(|| path.parent().map(PathBuf::from).unwrap_or_default());
            for f in emit_results(&rec, format, &dir)? {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}
