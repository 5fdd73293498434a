//! Prompt rendering for program generation and revision, plus a
//! chat-completion client that can replay checked-in responses.

pub mod client;
pub mod prompt;
pub mod trace;

pub use client::{request_programs, LlmClientConfig, LlmError, ResponseSource};
pub use prompt::{build_prompts, task_fields, PromptBundle, PromptError, PromptMode, RevisionInput, TaskFields};
pub use trace::{render_trajectory, TraceWindow};
