//! Pulling candidate programs out of raw model responses.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::py::{convert_py_to_dsl, parse_restricted_python};
use super::repair::{repair, RepairRule};
use crate::dsl::{AstLimits, Program};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    PythonBlock,
    DslBlock,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawCandidate {
    pub source_kind: SourceKind,
    pub text: String,
    /// Index of the block within the response.
    pub origin: usize,
}

/// Fenced code blocks in response order. A response without fences is
/// scanned for a bare `DEF run` line instead.
pub fn code_blocks(response: &str) -> Vec<RawCandidate> {
    let mut out = Vec::new();
    let mut open: Option<(String, Vec<&str>)> = None;
    for line in response.lines() {
        let trimmed = line.trim_start();
        if let Some(tag) = trimmed.strip_prefix("```") {
            match open.take() {
                None => open = Some((tag.trim().to_ascii_lowercase(), Vec::new())),
                Some((tag, body)) => {
                    let text = body.join("\n");
                    out.push(RawCandidate {
                        source_kind: classify(&tag, &text),
                        text,
                        origin: out.len(),
                    });
                }
            }
        } else if let Some((_, body)) = open.as_mut() {
            body.push(line);
        }
    }
    if out.is_empty() {
        for line in response.lines() {
            if let Some(at) = line.find("DEF run") {
                out.push(RawCandidate {
                    source_kind: SourceKind::DslBlock,
                    text: line[at..].to_string(),
                    origin: out.len(),
                });
            }
        }
    }
    out
}

fn classify(tag: &str, text: &str) -> SourceKind {
    match tag {
        "python" | "py" | "python3" => SourceKind::PythonBlock,
        _ if text.contains("DEF ") => SourceKind::DslBlock,
        _ if text.contains("def run") => SourceKind::PythonBlock,
        _ => SourceKind::DslBlock,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidatePath {
    /// parse, convert, repair
    Python,
    /// repair only
    DslBackup,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub response_id: String,
    pub block: usize,
    pub path: CandidatePath,
    pub rules_fired: Vec<RepairRule>,
    /// Canonical program text, or `None` for a rejected block.
    pub program: Option<String>,
    pub rejection: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub program: Program,
    pub text: String,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Extraction {
    pub candidates: Vec<Candidate>,
    /// Blocks that produced nothing, with the reason in `rejection`.
    pub rejected: Vec<Provenance>,
}

impl Extraction {
    pub fn programs(&self) -> Vec<Program> {
        self.candidates.iter().map(|c| c.program.clone()).collect()
    }

    /// Every block outcome, accepted first, as JSON lines.
    pub fn provenance_jsonl(&self) -> String {
        self.candidates
            .iter()
            .map(|c| &c.provenance)
            .chain(&self.rejected)
            .map(|p| serde_json::to_string(p).expect("provenance serializes") + "\n")
            .collect()
    }
}

fn process(block: &RawCandidate, limits: &AstLimits) -> Result<(Program, Vec<RepairRule>), String> {
    let dsl = match block.source_kind {
        SourceKind::PythonBlock => {
            let py = parse_restricted_python(&block.text).map_err(|e| e.to_string())?;
            convert_py_to_dsl(&py).map_err(|e| e.to_string())?
        }
        SourceKind::DslBlock => block.text.clone(),
    };
    let fixed = repair(&dsl).map_err(|e| e.to_string())?;
    fixed
        .program
        .check_limits(limits)
        .map_err(|e| format!("limit violation: {e}"))?;
    Ok((fixed.program, fixed.fired))
}

/// Candidates from one response. Python blocks are tried first; DSL blocks
/// are used only when no Python block yields a program. Duplicates (by
/// canonical text) are dropped.
pub fn extract_candidates(response_id: &str, response: &str, limits: &AstLimits) -> Extraction {
    let blocks = code_blocks(response);
    let mut result = Extraction::default();
    for (kind, path) in [
        (SourceKind::PythonBlock, CandidatePath::Python),
        (SourceKind::DslBlock, CandidatePath::DslBackup),
    ] {
        if !result.candidates.is_empty() {
            break;
        }
        let mut seen = HashSet::new();
        for block in blocks.iter().filter(|b| b.source_kind == kind) {
            let mut prov = Provenance {
                response_id: response_id.to_string(),
                block: block.origin,
                path,
                rules_fired: Vec::new(),
                program: None,
                rejection: None,
            };
            match process(block, limits) {
                Ok((program, fired)) => {
                    let text = program.to_string();
                    prov.rules_fired = fired;
                    if !seen.insert(text.clone()) {
                        prov.rejection = Some("duplicate".into());
                        result.rejected.push(prov);
                        continue;
                    }
                    prov.program = Some(text.clone());
                    result.candidates.push(Candidate {
                        program,
                        text,
                        provenance: prov,
                    });
                }
                Err(reason) => {
                    prov.rejection = Some(reason);
                    result.rejected.push(prov);
                }
            }
        }
    }
    result
}
