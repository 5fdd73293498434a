//! Experiment configuration and its key=value file form.

use std::path::PathBuf;
use std::str::FromStr;

use karel_core::search::{Interpolation, Ratio, Schedule, SchedulerConfig};
use karel_core::TaskId;
use karel_llm::{LlmClientConfig, PromptMode};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Model-proposed programs, then scheduled hill climbing.
    LlmGs,
    /// Fixed-k hill climbing from random programs, restarting when stuck.
    HcFixedK,
    /// Scheduled hill climbing from random programs.
    ShcRandomInit,
    /// Scheduled hill climbing from programs given in the config.
    ShcLlmInit,
}

impl FromStr for Method {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm_gs" => Ok(Self::LlmGs),
            "hc_fixed_k" => Ok(Self::HcFixedK),
            "shc_random_init" => Ok(Self::ShcRandomInit),
            "shc_llm_init" => Ok(Self::ShcLlmInit),
            _ => Err(ConfigError::BadValue {
                key: "method".into(),
                value: s.into(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskId,
    pub method: Method,
    pub seeds: Vec<u64>,
    /// Task variants per evaluation (`C`).
    pub variant_count: usize,
    /// Base seed the variants are generated from.
    pub variant_seed: u64,
    /// Evaluation budget (`N`); also copied into `scheduler.budget`.
    pub budget: u64,
    /// Neighbourhood size for `hc_fixed_k`.
    pub k: usize,
    pub scheduler: SchedulerConfig,
    pub llm: LlmClientConfig,
    pub prompt_mode: PromptMode,
    /// Responses requested per seed for `llm_gs`.
    pub responses_per_seed: usize,
    /// Starting programs for `shc_llm_init`, as DSL text.
    pub init_programs: Vec<String>,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: TaskId::DoorKey,
            method: Method::LlmGs,
            seeds: (0..32).collect(),
            variant_count: 32,
            variant_seed: 0,
            budget: 1_000_000,
            k: 250,
            scheduler: SchedulerConfig::default(),
            llm: LlmClientConfig::default(),
            prompt_mode: PromptMode::PythonicDsl,
            responses_per_seed: 32,
            init_programs: Vec::new(),
            out_dir: None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

/// `0..31` (inclusive), `0,3,7`, or a single seed.
pub fn parse_seeds(s: &str) -> Option<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (a.trim().parse::<u64>().ok()?, b.trim().parse::<u64>().ok()?);
        return (a <= b).then(|| (a..=b).collect());
    }
    s.split(',').map(|x| x.trim().parse().ok()).collect()
}

fn enum_value<T: for<'de> Deserialize<'de>>(key: &str, value: &str) -> Result<T, ConfigError> {
    serde_json::from_value(serde_json::Value::String(value.into())).map_err(|_| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
    })
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
        };
        fn num<T: FromStr>(v: &str, bad: impl Fn() -> ConfigError) -> Result<T, ConfigError> {
            v.replace('_', "").parse().map_err(|_| bad())
        }
        match key {
            "task" => self.task = TaskId::from_name(value).map_err(|_| bad())?,
            "method" => self.method = value.parse()?,
            "seeds" => self.seeds = parse_seeds(value).ok_or_else(bad)?,
            "variants" | "variant_count" => self.variant_count = num(value, bad)?,
            "variant_seed" => self.variant_seed = num(value, bad)?,
            "budget" => {
                let n: f64 = num(value, bad)?;
                if n < 1.0 || n.fract() != 0.0 {
                    return Err(bad());
                }
                self.budget = n as u64;
            }
            "k" => self.k = num(value, bad)?,
            "k_start" => self.scheduler.k_start = num(value, bad)?,
            "k_end" => self.scheduler.k_end = num(value, bad)?,
            "interpolation" => self.scheduler.interpolation = enum_value::<Interpolation>(key, value)?,
            "schedule" => self.scheduler.schedule = enum_value::<Schedule>(key, value)?,
            "ratio" => self.scheduler.ratio = enum_value::<Ratio>(key, value)?,
            "mode" | "prompt_mode" => self.prompt_mode = enum_value(key, value)?,
            "responses" | "responses_per_seed" => self.responses_per_seed = num(value, bad)?,
            "init_program" => self.init_programs.push(value.into()),
            "fixtures" => self.llm.fixture_dir = Some(value.into()),
            "journal" => self.llm.journal_dir = Some(value.into()),
            "endpoint" => self.llm.endpoint = Some(value.into()),
            "model" => self.llm.model = value.into(),
            "temperature" => self.llm.temperature = num(value, bad)?,
            "top_p" => self.llm.top_p = num(value, bad)?,
            "api_key_env" => self.llm.api_key_env = value.into(),
            "parallelism" => self.llm.parallelism = num(value, bad)?,
            "out" | "out_dir" => self.out_dir = Some(value.into()),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies a key=value file. Blank lines and `#` comments are skipped.
    pub fn apply_file_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.seeds.is_empty() {
            return invalid("seeds must not be empty");
        }
        if self.variant_count == 0 {
            return invalid("variant count must be at least 1");
        }
        if self.budget == 0 {
            return invalid("budget must be at least 1");
        }
        if self.method == Method::HcFixedK && self.k == 0 {
            return invalid("k must be at least 1");
        }
        self.scheduler_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.method == Method::LlmGs {
            self.llm.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if self.method == Method::ShcLlmInit && self.init_programs.is_empty() {
            return invalid("shc_llm_init needs at least one init_program");
        }
        Ok(())
    }

    /// Scheduler settings with the experiment budget.
    pub fn scheduler_config(&self) -> SchedulerConfig {
        SchedulerConfig {
            budget: self.budget,
            ..self.scheduler
        }
    }
}
