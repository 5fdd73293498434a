//! Karel DSL syntax tree, parser and canonical printer.
//!
//! ```text
//! program   := DEF run m( stmts m)
//! stmt      := WHILE c( cond c) w( stmts w)
//!            | REPEAT R=n r( stmts r)
//!            | IF c( cond c) i( stmts i)
//!            | IFELSE c( cond c) i( stmts i) ELSE e( stmts e)
//!            | action
//! cond      := perception | not c( perception c)
//! ```
//!
//! Concatenation is kept as a flat, non-empty `Vec<Statement>`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::grid::{Action, Perception};

/// Largest repetition count allowed by `REPEAT R=n`.
pub const MAX_REPEAT: u8 = 19;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    Is(Perception),
    Not(Perception),
}

impl Condition {
    pub fn perception(self) -> Perception {
        match self {
            Self::Is(p) | Self::Not(p) => p,
        }
    }

    pub fn token_len(self) -> usize {
        match self {
            Self::Is(_) => 1,
            Self::Not(_) => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statement {
    Action(Action),
    While {
        cond: Condition,
        body: Vec<Statement>,
    },
    Repeat {
        count: u8,
        body: Vec<Statement>,
    },
    If {
        cond: Condition,
        body: Vec<Statement>,
    },
    IfElse {
        cond: Condition,
        then: Vec<Statement>,
        otherwise: Vec<Statement>,
    },
}

impl Statement {
    pub fn token_len(&self) -> usize {
        match self {
            Self::Action(_) => 1,
            Self::While { cond, body } | Self::If { cond, body } => {
                5 + cond.token_len() + block_tokens(body)
            }
            Self::Repeat { body, .. } => 4 + block_tokens(body),
            Self::IfElse {
                cond,
                then,
                otherwise,
            } => 8 + cond.token_len() + block_tokens(then) + block_tokens(otherwise),
        }
    }

    /// Control-flow nesting below and including this statement.
    pub fn depth(&self) -> usize {
        match self {
            Self::Action(_) => 0,
            Self::While { body, .. } | Self::Repeat { body, .. } | Self::If { body, .. } => {
                1 + block_depth(body)
            }
            Self::IfElse {
                then, otherwise, ..
            } => 1 + block_depth(then).max(block_depth(otherwise)),
        }
    }

    pub fn is_control_flow(&self) -> bool {
        !matches!(self, Self::Action(_))
    }
}

pub fn block_tokens(block: &[Statement]) -> usize {
    block.iter().map(Statement::token_len).sum()
}

pub fn block_depth(block: &[Statement]) -> usize {
    block.iter().map(Statement::depth).max().unwrap_or(0)
}

/// A whole `DEF run m( ... m)` program.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Program {
    pub body: Vec<Statement>,
}

/// Size limits a program must respect to be part of the search space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstLimits {
    pub max_statements_at_root: usize,
    pub max_token_length: usize,
    pub max_depth: usize,
}

impl Default for AstLimits {
    fn default() -> Self {
        Self {
            max_statements_at_root: 6,
            max_token_length: 44,
            max_depth: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub token_length: usize,
    pub depth: usize,
    pub root_statements: usize,
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum LimitViolation {
    #[error("{0} root statements exceeds the limit of {1}")]
    RootStatements(usize, usize),
    #[error("{0} tokens exceeds the limit of {1}")]
    TokenLength(usize, usize),
    #[error("depth {0} exceeds the limit of {1}")]
    Depth(usize, usize),
}

impl Metrics {
    pub fn check(&self, limits: &AstLimits) -> Result<(), LimitViolation> {
        if self.root_statements > limits.max_statements_at_root {
            return Err(LimitViolation::RootStatements(
                self.root_statements,
                limits.max_statements_at_root,
            ));
        }
        if self.token_length > limits.max_token_length {
            return Err(LimitViolation::TokenLength(
                self.token_length,
                limits.max_token_length,
            ));
        }
        if self.depth > limits.max_depth {
            return Err(LimitViolation::Depth(self.depth, limits.max_depth));
        }
        Ok(())
    }
}

impl Program {
    pub fn new(body: Vec<Statement>) -> Self {
        assert!(!body.is_empty(), "a program needs at least one statement");
        Self { body }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            token_length: 4 + block_tokens(&self.body),
            depth: block_depth(&self.body),
            root_statements: self.body.len(),
        }
    }

    pub fn check_limits(&self, limits: &AstLimits) -> Result<(), LimitViolation> {
        self.metrics().check(limits)
    }

    pub fn to_tokens(&self) -> Vec<String> {
        let mut out = vec!["DEF".into(), "run".into(), "m(".into()];
        emit_block(&self.body, &mut out);
        out.push("m)".into());
        out
    }
}

fn emit_cond(cond: Condition, out: &mut Vec<String>) {
    match cond {
        Condition::Is(p) => out.push(p.name().into()),
        Condition::Not(p) => {
            out.extend(["not".into(), "c(".into(), p.name().into(), "c)".into()]);
        }
    }
}

fn emit_block(block: &[Statement], out: &mut Vec<String>) {
    for s in block {
        emit_stmt(s, out);
    }
}

fn emit_stmt(stmt: &Statement, out: &mut Vec<String>) {
    match stmt {
        Statement::Action(a) => out.push(a.name().into()),
        Statement::While { cond, body } => {
            out.extend(["WHILE".into(), "c(".into()]);
            emit_cond(*cond, out);
            out.extend(["c)".into(), "w(".into()]);
            emit_block(body, out);
            out.push("w)".into());
        }
        Statement::Repeat { count, body } => {
            out.extend(["REPEAT".into(), format!("R={count}"), "r(".into()]);
            emit_block(body, out);
            out.push("r)".into());
        }
        Statement::If { cond, body } => {
            out.extend(["IF".into(), "c(".into()]);
            emit_cond(*cond, out);
            out.extend(["c)".into(), "i(".into()]);
            emit_block(body, out);
            out.push("i)".into());
        }
        Statement::IfElse {
            cond,
            then,
            otherwise,
        } => {
            out.extend(["IFELSE".into(), "c(".into()]);
            emit_cond(*cond, out);
            out.extend(["c)".into(), "i(".into()]);
            emit_block(then, out);
            out.extend(["i)".into(), "ELSE".into(), "e(".into()]);
            emit_block(otherwise, out);
            out.push("e)".into());
        }
    }
}

/// Canonical single-space rendering.
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tokens().join(" "))
    }
}

impl std::str::FromStr for Program {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("syntax error at byte {offset}: {kind}")]
pub struct ParseError {
    /// Byte offset into the source text (the source length for a premature end).
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("expected {expected}, found end of input")]
    UnexpectedEnd { expected: String },
    #[error("expected {expected}, found `{found}`")]
    Unexpected { expected: String, found: String },
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("repeat count {0} outside 0..={MAX_REPEAT}")]
    RepeatOutOfRange(String),
    #[error("empty statement list")]
    EmptyBlock,
    #[error("unexpected trailing token `{0}`")]
    Trailing(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Token<'a> {
    text: &'a str,
    offset: usize,
}

/// Splits on Unicode whitespace, keeping byte offsets.
fn tokenize(src: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in src.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &src[s..i],
                    offset: s,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &src[s..],
            offset: s,
        });
    }
    out
}

const KEYWORDS: &[&str] = &[
    "DEF", "run", "m(", "m)", "WHILE", "c(", "c)", "w(", "w)", "REPEAT", "r(", "r)", "IF", "i(",
    "i)", "IFELSE", "ELSE", "e(", "e)", "not",
];

fn is_known(tok: &str) -> bool {
    KEYWORDS.contains(&tok)
        || tok.starts_with("R=")
        || Action::from_name(tok).is_some()
        || Perception::from_name(tok).is_some()
}

struct Parser<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<Token<'a>> {
        self.tokens.get(self.pos).copied()
    }

    fn err_here(&self, expected: &str) -> ParseError {
        match self.peek() {
            None => ParseError {
                offset: self.src_len,
                kind: ParseErrorKind::UnexpectedEnd {
                    expected: expected.into(),
                },
            },
            Some(t) if !is_known(t.text) => ParseError {
                offset: t.offset,
                kind: ParseErrorKind::UnknownToken(t.text.into()),
            },
            Some(t) => ParseError {
                offset: t.offset,
                kind: ParseErrorKind::Unexpected {
                    expected: expected.into(),
                    found: t.text.into(),
                },
            },
        }
    }

    fn expect(&mut self, want: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t.text == want => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err_here(&format!("`{want}`"))),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        self.expect("DEF")?;
        self.expect("run")?;
        self.expect("m(")?;
        let body = self.block("m)")?;
        if let Some(t) = self.peek() {
            return Err(ParseError {
                offset: t.offset,
                kind: ParseErrorKind::Trailing(t.text.into()),
            });
        }
        Ok(Program { body })
    }

    /// Statements up to and including `closer`.
    fn block(&mut self, closer: &str) -> Result<Vec<Statement>, ParseError> {
        let mut body = Vec::new();
        loop {
            match self.peek() {
                Some(t) if t.text == closer => {
                    if body.is_empty() {
                        return Err(ParseError {
                            offset: t.offset,
                            kind: ParseErrorKind::EmptyBlock,
                        });
                    }
                    self.pos += 1;
                    return Ok(body);
                }
                Some(_) => body.push(self.statement(closer)?),
                None => return Err(self.err_here(&format!("`{closer}`"))),
            }
        }
    }

    fn statement(&mut self, closer: &str) -> Result<Statement, ParseError> {
        let t = self.peek().expect("caller checked");
        if let Some(a) = Action::from_name(t.text) {
            self.pos += 1;
            return Ok(Statement::Action(a));
        }
        match t.text {
            "WHILE" => {
                self.pos += 1;
                let cond = self.condition()?;
                self.expect("w(")?;
                let body = self.block("w)")?;
                Ok(Statement::While { cond, body })
            }
            "REPEAT" => {
                self.pos += 1;
                let count = self.repeat_count()?;
                self.expect("r(")?;
                let body = self.block("r)")?;
                Ok(Statement::Repeat { count, body })
            }
            "IF" => {
                self.pos += 1;
                let cond = self.condition()?;
                self.expect("i(")?;
                let body = self.block("i)")?;
                Ok(Statement::If { cond, body })
            }
            "IFELSE" => {
                self.pos += 1;
                let cond = self.condition()?;
                self.expect("i(")?;
                let then = self.block("i)")?;
                self.expect("ELSE")?;
                self.expect("e(")?;
                let otherwise = self.block("e)")?;
                Ok(Statement::IfElse {
                    cond,
                    then,
                    otherwise,
                })
            }
            _ => Err(self.err_here(&format!("a statement or `{closer}`"))),
        }
    }

    fn repeat_count(&mut self) -> Result<u8, ParseError> {
        let Some(t) = self.peek() else {
            return Err(self.err_here("`R=n`"));
        };
        let Some(n) = t.text.strip_prefix("R=") else {
            return Err(self.err_here("`R=n`"));
        };
        match n.parse::<u8>() {
            Ok(v) if v <= MAX_REPEAT => {
                self.pos += 1;
                Ok(v)
            }
            _ => Err(ParseError {
                offset: t.offset,
                kind: ParseErrorKind::RepeatOutOfRange(n.into()),
            }),
        }
    }

    fn perception(&mut self) -> Result<Perception, ParseError> {
        match self.peek().and_then(|t| Perception::from_name(t.text)) {
            Some(p) => {
                self.pos += 1;
                Ok(p)
            }
            None => Err(self.err_here("a perception")),
        }
    }

    /// `c( cond c)`
    fn condition(&mut self) -> Result<Condition, ParseError> {
        self.expect("c(")?;
        let cond = if self.peek().is_some_and(|t| t.text == "not") {
            self.pos += 1;
            self.expect("c(")?;
            let p = self.perception()?;
            self.expect("c)")?;
            Condition::Not(p)
        } else {
            Condition::Is(self.perception()?)
        };
        self.expect("c)")?;
        Ok(cond)
    }
}

/// Parses a whitespace-separated token stream into a [`Program`].
pub fn parse(src: &str) -> Result<Program, ParseError> {
    Parser {
        tokens: tokenize(src),
        pos: 0,
        src_len: src.len(),
    }
    .program()
}
