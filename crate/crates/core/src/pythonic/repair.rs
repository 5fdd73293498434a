//! Token-level fixes for common mistakes in generated DSL text.
//!
//! The rules run in a fixed order: brackets removal, brackets separation,
//! brackets addition, brackets repairment, IF/IFELSE, redundant symbol
//! removal, illegal symbol transformation. [`repair`] then canonicalises the
//! result: `r=n` becomes `R=n`, the text is parsed, negated marker
//! perceptions are folded into their complements, and the program is
//! printed canonically.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse, Condition, ParseError, Program, Statement};
use crate::grid::{Action, Perception};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairRule {
    BracketsRemoval,
    BracketsSeparation,
    BracketsAddition,
    BracketsRepairment,
    IfToIfElse,
    RedundantRemoval,
    IllegalSymbols,
}

impl RepairRule {
    pub const ORDER: [RepairRule; 7] = [
        Self::BracketsRemoval,
        Self::BracketsSeparation,
        Self::BracketsAddition,
        Self::BracketsRepairment,
        Self::IfToIfElse,
        Self::RedundantRemoval,
        Self::IllegalSymbols,
    ];

    fn apply(self, toks: Vec<String>) -> Vec<String> {
        match self {
            Self::BracketsRemoval => removal(toks),
            Self::BracketsSeparation => separation(toks),
            Self::BracketsAddition => addition(toks),
            Self::BracketsRepairment => repairment(toks),
            Self::IfToIfElse => if_to_ifelse(toks),
            Self::RedundantRemoval => redundant(toks),
            Self::IllegalSymbols => illegal(toks),
        }
    }

    /// Applies this rule alone to whitespace-separated `text`.
    pub fn apply_text(self, text: &str) -> String {
        self.apply(tokens(text)).join(" ")
    }
}

impl fmt::Display for RepairRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::BracketsRemoval => "brackets_removal",
            Self::BracketsSeparation => "brackets_separation",
            Self::BracketsAddition => "brackets_addition",
            Self::BracketsRepairment => "brackets_repairment",
            Self::IfToIfElse => "if_to_ifelse",
            Self::RedundantRemoval => "redundant_removal",
            Self::IllegalSymbols => "illegal_symbols",
        };
        f.write_str(s)
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

const BRACKET_KINDS: [char; 6] = ['m', 'c', 'w', 'i', 'e', 'r'];

const WORDS: &[&str] = &[
    "DEF", "run", "m(", "m)", "WHILE", "c(", "c)", "w(", "w)", "REPEAT", "r(", "r)", "IF", "i(", "i)", "IFELSE",
    "ELSE", "e(", "e)", "not", "True", "False", ";", ",", ")", ")m", ")c", ")w", ")i", ")e", ")r",
];

fn is_count(tok: &str) -> bool {
    tok.strip_prefix("R=")
        .or_else(|| tok.strip_prefix("r="))
        .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

fn is_word(tok: &str) -> bool {
    WORDS.contains(&tok)
        || is_count(tok)
        || Action::from_name(tok).is_some()
        || Perception::from_name(tok).is_some()
}

fn is_condition_word(tok: &str) -> bool {
    Perception::from_name(tok).is_some() || tok == "True" || tok == "False"
}

fn opener(tok: &str) -> Option<char> {
    let mut it = tok.chars();
    let (k, p) = (it.next()?, it.next()?);
    (it.next().is_none() && p == '(' && BRACKET_KINDS.contains(&k)).then_some(k)
}

fn closer(tok: &str) -> Option<char> {
    let mut it = tok.chars();
    let (k, p) = (it.next()?, it.next()?);
    (it.next().is_none() && p == ')' && BRACKET_KINDS.contains(&k)).then_some(k)
}

/// `move()` -> `move`
fn removal(toks: Vec<String>) -> Vec<String> {
    toks.into_iter()
        .map(|t| t.replace("()", ""))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Splits a fused token into the fewest known words, if possible.
fn segment(tok: &str) -> Option<Vec<String>> {
    if !tok.is_ascii() {
        return None;
    }
    let n = tok.len();
    let mut best: Vec<Option<(usize, usize)>> = vec![None; n + 1];
    best[0] = Some((0, 0));
    for i in 0..n {
        let Some((cost, _)) = best[i] else { continue };
        let rest = &tok[i..];
        let mut ends: Vec<usize> = WORDS
            .iter()
            .chain(Action::ALL.iter().map(|a| a.name()).collect::<Vec<_>>().iter())
            .chain(Perception::ALL.iter().map(|p| p.name()).collect::<Vec<_>>().iter())
            .filter(|w| rest.starts_with(**w))
            .map(|w| i + w.len())
            .collect();
        if rest.starts_with("R=") || rest.starts_with("r=") {
            let digits = rest[2..].bytes().take_while(u8::is_ascii_digit).count();
            if digits > 0 {
                ends.push(i + 2 + digits);
            }
        }
        for e in ends {
            if best[e].is_none_or(|(c, _)| c > cost + 1) {
                best[e] = Some((cost + 1, i));
            }
        }
    }
    best[n]?;
    let mut parts = Vec::new();
    let mut end = n;
    while end > 0 {
        let (_, start) = best[end].unwrap();
        parts.push(tok[start..end].to_string());
        end = start;
    }
    parts.reverse();
    Some(parts)
}

/// `m(move` -> `m( move`
fn separation(toks: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(toks.len());
    for t in toks {
        if is_word(&t) {
            out.push(t);
        } else {
            match segment(&t) {
                Some(parts) => out.extend(parts),
                None => out.push(t),
            }
        }
    }
    out
}

fn wrap(out: &mut Vec<String>, negate: bool, h: String) {
    if negate {
        out.extend(["c(".into(), "not".into(), "c(".into(), h, "c)".into(), "c)".into()]);
    } else {
        out.extend(["c(".into(), h, "c)".into()]);
    }
}

/// `WHILE frontIsClear w(` -> `WHILE c( frontIsClear c) w(`, also for
/// `not h` and `not c( h c)` conditions.
fn addition(toks: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(toks.len() + 8);
    let mut i = 0;
    let at = |j: usize| toks.get(j).map(String::as_str);
    while i < toks.len() {
        let t = toks[i].as_str();
        out.push(toks[i].clone());
        i += 1;
        if !matches!(t, "WHILE" | "IF" | "IFELSE") {
            continue;
        }
        match (at(i), at(i + 1), at(i + 2), at(i + 3)) {
            (Some("c("), Some("not"), Some(h), Some("c)")) if is_condition_word(h) => {
                // c( not h c)
                out.push("c(".into());
                out.extend(["not".into(), "c(".into(), h.into(), "c)".into()]);
                out.push("c)".into());
                i += 4;
            }
            (Some("not"), Some("c("), Some(h), Some("c)")) if is_condition_word(h) => {
                wrap(&mut out, true, h.into());
                i += 4;
            }
            (Some("not"), Some(h), ..) if is_condition_word(h) => {
                wrap(&mut out, true, h.into());
                i += 2;
            }
            (Some(h), ..) if is_condition_word(h) => {
                wrap(&mut out, false, h.into());
                i += 1;
            }
            _ => {}
        }
    }
    out
}

/// Bare `)` closes the innermost open bracket; `)m` becomes `m)`.
fn repairment(toks: Vec<String>) -> Vec<String> {
    let mut stack: Vec<char> = Vec::new();
    let mut out = Vec::with_capacity(toks.len());
    for t in toks {
        if let Some(k) = opener(&t) {
            stack.push(k);
            out.push(t);
            continue;
        }
        let close = if t == ")" {
            stack.last().copied()
        } else if let Some(k) = t.strip_prefix(')').and_then(|r| {
            let mut c = r.chars();
            let k = c.next()?;
            (c.next().is_none() && BRACKET_KINDS.contains(&k)).then_some(k)
        }) {
            Some(k)
        } else {
            closer(&t)
        };
        match close {
            Some(k) => {
                if let Some(pos) = stack.iter().rposition(|&s| s == k) {
                    stack.truncate(pos);
                }
                out.push(format!("{k})"));
            }
            None => out.push(t),
        }
    }
    out
}

/// Index just past the bracket group opened at `open` (which must hold
/// `k(`), or `None` if it never closes.
fn group_end(toks: &[String], open: usize, k: char) -> Option<usize> {
    let mut depth = 0usize;
    for (j, t) in toks.iter().enumerate().skip(open) {
        if opener(t) == Some(k) {
            depth += 1;
        } else if closer(t) == Some(k) {
            depth -= 1;
            if depth == 0 {
                return Some(j + 1);
            }
        }
    }
    None
}

/// `(cond_end, body_end)` for a conditional starting at `i`.
fn conditional_shape(toks: &[String], i: usize) -> Option<(usize, usize)> {
    if toks.get(i + 1).map(String::as_str) != Some("c(") {
        return None;
    }
    let cond_end = group_end(toks, i + 1, 'c')?;
    if toks.get(cond_end).map(String::as_str) != Some("i(") {
        return None;
    }
    let body_end = group_end(toks, cond_end, 'i')?;
    Some((cond_end, body_end))
}

/// `IF ... i) ELSE` -> `IFELSE`, and `IFELSE` without `ELSE` -> `IF`.
fn if_to_ifelse(mut toks: Vec<String>) -> Vec<String> {
    for i in 0..toks.len() {
        if !matches!(toks[i].as_str(), "IF" | "IFELSE") {
            continue;
        }
        let Some((_, body_end)) = conditional_shape(&toks, i) else {
            continue;
        };
        let has_else = toks.get(body_end).map(String::as_str) == Some("ELSE");
        toks[i] = if has_else { "IFELSE" } else { "IF" }.into();
    }
    toks
}

/// Drops stray bracket letters and punctuation.
fn redundant(toks: Vec<String>) -> Vec<String> {
    toks.into_iter()
        .filter(|t| {
            let mut c = t.chars();
            let single = matches!((c.next(), c.next()), (Some(k), None) if BRACKET_KINDS.contains(&k));
            !single && !matches!(t.as_str(), ";" | "," | ":")
        })
        .collect()
}

fn literal(tok: Option<&String>) -> Option<bool> {
    match tok.map(String::as_str) {
        Some("True") => Some(true),
        Some("False") => Some(false),
        _ => None,
    }
}

/// One rewrite of a construct involving `True`/`False`; `None` when there
/// is nothing left to rewrite.
fn rewrite_literal(toks: &[String]) -> Option<Vec<String>> {
    for i in 0..toks.len() {
        // not c( True c) -> False
        if toks[i] == "not" && toks.get(i + 1).map(String::as_str) == Some("c(") {
            if let (Some(b), Some("c)")) = (literal(toks.get(i + 2)), toks.get(i + 3).map(String::as_str)) {
                let mut out = toks[..i].to_vec();
                out.push(if b { "False" } else { "True" }.into());
                out.extend_from_slice(&toks[i + 4..]);
                return Some(out);
            }
        }
        let head = toks[i].as_str();
        if !matches!(head, "WHILE" | "IF" | "IFELSE") {
            continue;
        }
        let [Some("c("), Some(_), Some("c)")] =
            [1, 2, 3].map(|d| toks.get(i + d).map(String::as_str))
        else {
            continue;
        };
        let Some(b) = literal(toks.get(i + 2)) else {
            continue;
        };
        let body_open = i + 4;
        let mut out = toks[..i].to_vec();
        match head {
            "WHILE" => {
                if toks.get(body_open).map(String::as_str) != Some("w(") {
                    continue;
                }
                let Some(end) = group_end(toks, body_open, 'w') else {
                    continue;
                };
                if b {
                    out.extend(["REPEAT".into(), "r=19".into(), "r(".into()]);
                    out.extend_from_slice(&toks[body_open + 1..end - 1]);
                    out.push("r)".into());
                }
                out.extend_from_slice(&toks[end..]);
            }
            "IF" => {
                if toks.get(body_open).map(String::as_str) != Some("i(") {
                    continue;
                }
                let Some(end) = group_end(toks, body_open, 'i') else {
                    continue;
                };
                if b {
                    out.extend_from_slice(&toks[body_open + 1..end - 1]);
                }
                out.extend_from_slice(&toks[end..]);
            }
            _ => {
                let Some((_, then_end)) = conditional_shape(toks, i) else {
                    continue;
                };
                if toks.get(then_end).map(String::as_str) != Some("ELSE")
                    || toks.get(then_end + 1).map(String::as_str) != Some("e(")
                {
                    continue;
                }
                let Some(else_end) = group_end(toks, then_end + 1, 'e') else {
                    continue;
                };
                if b {
                    out.extend_from_slice(&toks[body_open + 1..then_end - 1]);
                } else {
                    out.extend_from_slice(&toks[then_end + 2..else_end - 1]);
                }
                out.extend_from_slice(&toks[else_end..]);
            }
        }
        return Some(out);
    }
    None
}

/// Rewrites loops and branches on `True`/`False`;
/// `WHILE c( True c) w( s w)` becomes `REPEAT r=19 r( s r)`.
fn illegal(mut toks: Vec<String>) -> Vec<String> {
    while let Some(next) = rewrite_literal(&toks) {
        toks = next;
    }
    toks
}

/// Runs all seven rules in order, returning the text and the rules that
/// changed something.
pub fn apply_rules(text: &str) -> (String, Vec<RepairRule>) {
    let mut toks = tokens(text);
    let mut fired = Vec::new();
    for rule in RepairRule::ORDER {
        let next = rule.apply(toks.clone());
        if next != toks {
            fired.push(rule);
        }
        toks = next;
    }
    (toks.join(" "), fired)
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RepairError {
    #[error("still unparsable after repair (`{text}`): {error}")]
    ParseStillFailing { text: String, error: ParseError },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Repaired {
    pub program: Program,
    /// Canonical text of `program`.
    pub text: String,
    pub fired: Vec<RepairRule>,
}

fn fold_condition(c: &mut Condition) {
    if let Condition::Not(p) = *c {
        if let Some(q) = p.complement() {
            *c = Condition::Is(q);
        }
    }
}

fn fold_block(block: &mut [Statement]) {
    for s in block {
        match s {
            Statement::Action(_) => {}
            Statement::Repeat { body, .. } => fold_block(body),
            Statement::While { cond, body } | Statement::If { cond, body } => {
                fold_condition(cond);
                fold_block(body);
            }
            Statement::IfElse {
                cond,
                then,
                otherwise,
            } => {
                fold_condition(cond);
                fold_block(then);
                fold_block(otherwise);
            }
        }
    }
}

/// `not c( markersPresent c)` -> `noMarkersPresent` and vice versa.
pub fn fold_negated_markers(program: &mut Program) {
    fold_block(&mut program.body);
}

/// Repairs `text` into a canonical, parsable program.
pub fn repair(text: &str) -> Result<Repaired, RepairError> {
    let (fixed, fired) = apply_rules(text);
    let canonical: Vec<String> = fixed
        .split_whitespace()
        .map(|t| match t.strip_prefix("r=") {
            Some(n) if is_count(t) => format!("R={n}"),
            _ => t.to_string(),
        })
        .collect();
    let joined = canonical.join(" ");
    let mut program = parse(&joined).map_err(|error| RepairError::ParseStillFailing {
        text: joined.clone(),
        error,
    })?;
    fold_negated_markers(&mut program);
    Ok(Repaired {
        text: program.to_string(),
        program,
        fired,
    })
}
