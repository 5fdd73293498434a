//! Prompt templates and rendering.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use karel_core::interp::Trajectory;
use karel_core::pythonic::render_python;
use karel_core::{Program, TaskId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{float_text, render_trajectory, state_text, TraceWindow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    PythonicDsl,
    PythonOnly,
    DslOnly,
    Regenerate,
    RegenerateWithReward,
    AgentTrace,
    AgentProgramTrace,
}

impl PromptMode {
    pub const ALL: [PromptMode; 7] = [
        Self::PythonicDsl,
        Self::PythonOnly,
        Self::DslOnly,
        Self::Regenerate,
        Self::RegenerateWithReward,
        Self::AgentTrace,
        Self::AgentProgramTrace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::PythonicDsl => "pythonic_dsl",
            Self::PythonOnly => "python_only",
            Self::DslOnly => "dsl_only",
            Self::Regenerate => "regenerate",
            Self::RegenerateWithReward => "regenerate_with_reward",
            Self::AgentTrace => "agent_trace",
            Self::AgentProgramTrace => "agent_program_trace",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn system_template(self) -> &'static str {
        match self {
            Self::PythonOnly => SYSTEM_PYTHON_ONLY,
            Self::DslOnly => SYSTEM_DSL_ONLY,
            _ => SYSTEM_PYTHONIC_DSL,
        }
    }

    pub fn user_template(self) -> &'static str {
        match self {
            Self::PythonicDsl => USER_PYTHONIC_DSL,
            Self::PythonOnly => USER_PYTHON_ONLY,
            Self::DslOnly => USER_DSL_ONLY,
            Self::Regenerate => REGENERATE,
            Self::RegenerateWithReward => REGENERATE_WITH_REWARD,
            Self::AgentTrace => AGENT_TRACE,
            Self::AgentProgramTrace => AGENT_PROGRAM_TRACE,
        }
    }
}

const SYSTEM_PYTHONIC_DSL: &str = include_str!("../templates/system_pythonic_dsl.txt");
const SYSTEM_PYTHON_ONLY: &str = include_str!("../templates/system_python_only.txt");
const SYSTEM_DSL_ONLY: &str = include_str!("../templates/system_dsl_only.txt");
const USER_PYTHONIC_DSL: &str = include_str!("../templates/user_pythonic_dsl.txt");
const USER_PYTHON_ONLY: &str = include_str!("../templates/user_python_only.txt");
const USER_DSL_ONLY: &str = include_str!("../templates/user_dsl_only.txt");
const REGENERATE: &str = include_str!("../templates/regenerate.txt");
const REGENERATE_WITH_REWARD: &str = include_str!("../templates/regenerate_with_reward.txt");
const AGENT_TRACE: &str = include_str!("../templates/agent_trace.txt");
const AGENT_PROGRAM_TRACE: &str = include_str!("../templates/agent_program_trace.txt");

/// The five task placeholders of every user prompt.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskFields {
    pub name: String,
    pub map_description: String,
    pub initial_position: String,
    pub task_goal: String,
    pub task_reward: String,
}

impl TaskFields {
    fn placeholders(&self) -> [(&'static str, &str); 5] {
        [
            ("<<Task Name>>", &self.name),
            ("<<Map Description>>", &self.map_description),
            ("<<Initial Position>>", &self.initial_position),
            ("<<Task Goal>>", &self.task_goal),
            ("<<Task Reward>>", &self.task_reward),
        ]
    }
}

const TASKS_TOML: &str = include_str!("../data/tasks.toml");

fn registry() -> &'static BTreeMap<TaskId, TaskFields> {
    static REG: OnceLock<BTreeMap<TaskId, TaskFields>> = OnceLock::new();
    REG.get_or_init(|| toml::from_str(TASKS_TOML).expect("bundled task descriptions parse"))
}

/// Bundled description of `task`.
pub fn task_fields(task: TaskId) -> TaskFields {
    registry()
        .get(&task)
        .cloned()
        .unwrap_or_else(|| panic!("no bundled description for {task}"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
    pub mode: PromptMode,
    pub task_fields: TaskFields,
}

/// How many programs of a long list appear in a regenerate prompt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ListWindow {
    pub head: usize,
    pub tail: usize,
}

impl Default for ListWindow {
    fn default() -> Self {
        Self { head: 1, tail: 1 }
    }
}

/// Material the revision modes embed.
#[derive(Clone, Debug, Default)]
pub enum RevisionInput {
    #[default]
    None,
    /// Earlier programs, for [`PromptMode::Regenerate`].
    Programs { programs: Vec<Program>, window: ListWindow },
    /// Earlier programs with their mean returns, for
    /// [`PromptMode::RegenerateWithReward`]; sorted best first on render.
    Scored {
        programs: Vec<(Program, f64)>,
        variant_count: usize,
        window: ListWindow,
    },
    /// An executed episode, for the two trace modes. The trajectory must
    /// carry snapshots.
    Trace {
        program: Program,
        average_return: f64,
        variant_count: usize,
        trajectory: Trajectory,
        window: TraceWindow,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("task field for {placeholder} is empty")]
    MissingField { placeholder: &'static str },
    #[error("mode {mode} needs {needs}")]
    MissingRevisionInput { mode: &'static str, needs: &'static str },
}

fn strip_newline(template: &str) -> &str {
    template.strip_suffix('\n').unwrap_or(template)
}

fn windowed(items: Vec<String>, window: ListWindow) -> String {
    let n = items.len();
    if n <= window.head + window.tail {
        return items.join("\n\n");
    }
    let mut parts: Vec<String> = items[..window.head].to_vec();
    parts.push(format!("###{} programs are truncated.###", n - window.head - window.tail));
    parts.extend_from_slice(&items[n - window.tail..]);
    parts.join("\n\n")
}

fn listing(p: &Program) -> String {
    let text = render_python(p).to_string();
    text.strip_suffix('\n').unwrap_or(&text).to_string()
}

/// Renders the system and user prompt for `mode`.
pub fn build_prompts(
    fields: &TaskFields,
    mode: PromptMode,
    revision: &RevisionInput,
) -> Result<PromptBundle, PromptError> {
    for (placeholder, value) in fields.placeholders() {
        if value.trim().is_empty() {
            return Err(PromptError::MissingField { placeholder });
        }
    }
    let mut pairs: Vec<(&str, String)> = fields
        .placeholders()
        .iter()
        .map(|(k, v)| (*k, v.to_string()))
        .collect();
    let missing = |needs| PromptError::MissingRevisionInput {
        mode: mode.name(),
        needs,
    };
    match (mode, revision) {
        (PromptMode::PythonicDsl | PromptMode::PythonOnly | PromptMode::DslOnly, _) => {}
        (PromptMode::Regenerate, RevisionInput::Programs { programs, window }) => {
            let items = programs
                .iter()
                .enumerate()
                .map(|(i, p)| format!("Program {}:\n{}", i + 1, listing(p)))
                .collect();
            pairs.push(("<<Programs>>", windowed(items, *window)));
        }
        (PromptMode::Regenerate, _) => return Err(missing("earlier programs")),
        (
            PromptMode::RegenerateWithReward,
            RevisionInput::Scored {
                programs,
                variant_count,
                window,
            },
        ) => {
            let mut sorted = programs.clone();
            sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
            let items = sorted
                .iter()
                .enumerate()
                .map(|(i, (p, r))| format!("Program {}:\n{}\n\nreward:\n{}", i + 1, listing(p), float_text(*r)))
                .collect();
            pairs.push(("<<Programs>>", windowed(items, *window)));
            pairs.push(("<<Variant Count>>", variant_count.to_string()));
        }
        (PromptMode::RegenerateWithReward, _) => return Err(missing("scored programs")),
        (
            PromptMode::AgentTrace | PromptMode::AgentProgramTrace,
            RevisionInput::Trace {
                program,
                average_return,
                variant_count,
                trajectory,
                window,
            },
        ) => {
            let py = render_python(program);
            let marked = (mode == PromptMode::AgentProgramTrace).then_some(&py);
            pairs.push(("<<Initial State>>", state_text(&trajectory.initial)));
            pairs.push(("<<Program>>", listing(program)));
            pairs.push(("<<Variant Count>>", variant_count.to_string()));
            pairs.push(("<<Average Reward>>", float_text(*average_return)));
            pairs.push(("<<Trajectory>>", render_trajectory(trajectory, marked, *window)));
            pairs.push(("<<Total Reward>>", float_text(trajectory.total_return)));
        }
        (PromptMode::AgentTrace | PromptMode::AgentProgramTrace, _) => return Err(missing("an episode trace")),
    }
    let borrowed: Vec<(&str, &str)> = pairs.iter().map(|(k, v)| (*k, v.as_str())).collect();
    Ok(PromptBundle {
        system: strip_newline(mode.system_template()).to_string(),
        user: fill_once(mode.user_template(), &borrowed),
        mode,
        task_fields: fields.clone(),
    })
}

/// Single left-to-right pass: replaced text is never scanned again.
fn fill_once(template: &str, pairs: &[(&str, &str)]) -> String {
    let t = strip_newline(template);
    let mut out = String::with_capacity(t.len() * 2);
    let mut rest = t;
    while let Some(at) = rest.find("<<") {
        out.push_str(&rest[..at]);
        let tail = &rest[at..];
        match pairs.iter().find(|(k, _)| tail.starts_with(k)) {
            Some((k, v)) => {
                out.push_str(v);
                rest = &tail[k.len()..];
            }
            None => {
                out.push_str("<<");
                rest = &tail[2..];
            }
        }
    }
    out.push_str(rest);
    out
}
