//! Chat-completion transport: live OpenAI-compatible requests or replay of
//! response files from a fixture directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::prompt::PromptBundle;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmClientConfig {
    /// Full chat-completions URL, for live mode.
    pub endpoint: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    /// Directory of `.txt` responses, for replay mode.
    pub fixture_dir: Option<PathBuf>,
    /// Where every response is recorded with its request.
    pub journal_dir: Option<PathBuf>,
    pub max_attempts: u32,
    /// First retry delay; doubled after each failure.
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    /// Live requests in flight at once.
    pub parallelism: usize,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            model: "gpt-4-turbo".into(),
            temperature: 1.0,
            top_p: 1.0,
            api_key_env: "OPENAI_API_KEY".into(),
            fixture_dir: None,
            journal_dir: None,
            max_attempts: 3,
            backoff_ms: 1000,
            timeout_secs: 120,
            parallelism: 4,
        }
    }
}

impl LlmClientConfig {
    pub fn fixtures(dir: impl Into<PathBuf>) -> Self {
        Self {
            fixture_dir: Some(dir.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        match (&self.endpoint, &self.fixture_dir) {
            (Some(_), Some(_)) => Err(LlmError::Config("set either an endpoint or a fixture directory, not both".into())),
            (None, None) => Err(LlmError::Config("set an endpoint or a fixture directory".into())),
            _ if self.max_attempts == 0 => Err(LlmError::Config("max_attempts must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("bad client configuration: {0}")]
    Config(String),
    #[error("fixtures exhausted: wanted {requested} more, {available} left")]
    FixtureExhausted { requested: usize, available: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("request failed after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LlmError + '_ {
    move |source| LlmError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JournalEntry {
    pub index: usize,
    pub source: String,
    pub fixture_file: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub mode: String,
    pub system: String,
    pub user: String,
    pub response: String,
}

enum Backend {
    Fixture { files: Vec<PathBuf>, cursor: usize },
    Live { client: reqwest::blocking::Client, url: String },
}

/// A stateful response provider. Fixture mode hands out files in name
/// order across calls.
pub struct ResponseSource {
    cfg: LlmClientConfig,
    backend: Backend,
    journaled: usize,
}

impl ResponseSource {
    pub fn new(cfg: &LlmClientConfig) -> Result<Self, LlmError> {
        cfg.validate()?;
        let backend = if let Some(dir) = &cfg.fixture_dir {
            let mut files = Vec::new();
            for entry in fs::read_dir(dir).map_err(io_err(dir))? {
                let path = entry.map_err(io_err(dir))?.path();
                if path.extension().is_some_and(|e| e == "txt") {
                    files.push(path);
                }
            }
            files.sort();
            Backend::Fixture { files, cursor: 0 }
        } else {
            let client = reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(cfg.timeout_secs))
                .build()
                .map_err(|e| LlmError::Config(e.to_string()))?;
            Backend::Live {
                client,
                url: cfg.endpoint.clone().unwrap_or_default(),
            }
        };
        if let Some(dir) = &cfg.journal_dir {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        Ok(Self {
            cfg: cfg.clone(),
            backend,
            journaled: 0,
        })
    }

    /// Fixture files not yet handed out.
    pub fn remaining(&self) -> Option<usize> {
        match &self.backend {
            Backend::Fixture { files, cursor } => Some(files.len() - cursor),
            Backend::Live { .. } => None,
        }
    }

    /// `count` responses to `bundle`, in request order.
    pub fn request(&mut self, bundle: &PromptBundle, count: usize) -> Result<Vec<String>, LlmError> {
        let (texts, origins): (Vec<String>, Vec<Option<String>>) = match &mut self.backend {
            Backend::Fixture { files, cursor } => {
                let available = files.len() - *cursor;
                if count > available {
                    return Err(LlmError::FixtureExhausted {
                        requested: count,
                        available,
                    });
                }
                let mut out = Vec::with_capacity(count);
                for path in &files[*cursor..*cursor + count] {
                    let text = fs::read_to_string(path).map_err(io_err(path))?;
                    let name = path.file_name().map(|n| n.to_string_lossy().into_owned());
                    out.push((text, name));
                }
                *cursor += count;
                out.into_iter().unzip()
            }
            Backend::Live { client, url } => {
                let texts = live_batch(client, url, &self.cfg, bundle, count)?;
                let n = texts.len();
                (texts, vec![None; n])
            }
        };
        self.journal(bundle, &texts, &origins)?;
        Ok(texts)
    }

    fn journal(&mut self, bundle: &PromptBundle, texts: &[String], origins: &[Option<String>]) -> Result<(), LlmError> {
        let Some(dir) = self.cfg.journal_dir.clone() else {
            self.journaled += texts.len();
            return Ok(());
        };
        let source = match self.backend {
            Backend::Fixture { .. } => "fixture",
            Backend::Live { .. } => "live",
        };
        for (text, origin) in texts.iter().zip(origins) {
            let entry = JournalEntry {
                index: self.journaled,
                source: source.into(),
                fixture_file: origin.clone(),
                model: self.cfg.model.clone(),
                temperature: self.cfg.temperature,
                top_p: self.cfg.top_p,
                mode: bundle.mode.name().into(),
                system: bundle.system.clone(),
                user: bundle.user.clone(),
                response: text.clone(),
            };
            let path = dir.join(format!("{:05}.json", self.journaled));
            let body = serde_json::to_string_pretty(&entry).expect("journal entry serializes");
            fs::write(&path, body).map_err(io_err(&path))?;
            self.journaled += 1;
        }
        Ok(())
    }
}

/// One-shot convenience: a fresh source, `count` responses.
pub fn request_programs(bundle: &PromptBundle, count: usize, cfg: &LlmClientConfig) -> Result<Vec<String>, LlmError> {
    if count == 0 {
        cfg.validate()?;
        return Ok(Vec::new());
    }
    ResponseSource::new(cfg)?.request(bundle, count)
}

fn live_batch(
    client: &reqwest::blocking::Client,
    url: &str,
    cfg: &LlmClientConfig,
    bundle: &PromptBundle,
    count: usize,
) -> Result<Vec<String>, LlmError> {
    let key = std::env::var(&cfg.api_key_env).ok();
    let mut out = Vec::with_capacity(count);
    let indices: Vec<usize> = (0..count).collect();
    for chunk in indices.chunks(cfg.parallelism.max(1)) {
        let results: Vec<Result<String, LlmError>> = thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|_| s.spawn(|| with_retries(client, url, key.as_deref(), cfg, bundle)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("request thread panicked"))
                .collect()
        });
        for r in results {
            out.push(r?);
        }
    }
    Ok(out)
}

fn with_retries(
    client: &reqwest::blocking::Client,
    url: &str,
    key: Option<&str>,
    cfg: &LlmClientConfig,
    bundle: &PromptBundle,
) -> Result<String, LlmError> {
    let mut last = String::new();
    for attempt in 0..cfg.max_attempts {
        if attempt > 0 {
            thread::sleep(Duration::from_millis(cfg.backoff_ms << (attempt - 1)));
        }
        match chat_once(client, url, key, cfg, bundle) {
            Ok(text) => return Ok(text),
            Err(e) => last = e,
        }
    }
    Err(LlmError::Transport {
        attempts: cfg.max_attempts,
        last,
    })
}

fn chat_once(
    client: &reqwest::blocking::Client,
    url: &str,
    key: Option<&str>,
    cfg: &LlmClientConfig,
    bundle: &PromptBundle,
) -> Result<String, String> {
    let body = json!({
        "model": cfg.model,
        "temperature": cfg.temperature,
        "top_p": cfg.top_p,
        "messages": [
            {"role": "system", "content": bundle.system},
            {"role": "user", "content": bundle.user},
        ],
    });
    let mut req = client.post(url).json(&body);
    if let Some(k) = key {
        req = req.bearer_auth(k);
    }
    let resp = req.send().map_err(|e| e.to_string())?;
    let status = resp.status();
    if !status.is_success() {
        return Err(format!("HTTP {status}"));
    }
    let value: serde_json::Value = resp.json().map_err(|e| e.to_string())?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| "response has no choices[0].message.content".to_string())
}
