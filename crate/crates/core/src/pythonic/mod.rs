//! Python-first candidate generation: restricted Python, conversion to the
//! DSL, repair of common mistakes, and extraction from responses.

pub mod extract;
pub mod py;
pub mod render;
pub mod repair;

pub use extract::{
    code_blocks, extract_candidates, Candidate, CandidatePath, Extraction, Provenance, RawCandidate, SourceKind,
};
pub use py::{convert_py_to_dsl, parse_restricted_python, ConvertError, PyCond, PyError, PyProgram, PyStmt};
pub use render::{render_python, PyListing, EXECUTING_MARK};
pub use repair::{apply_rules, fold_negated_markers, repair, RepairError, RepairRule, Repaired};
