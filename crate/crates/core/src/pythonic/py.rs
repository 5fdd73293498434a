//! Restricted Python: one `def run():` built from `while`, `if`/`else`,
//! `for _ in range(n)`, the ten Karel calls, `not`, and the literals
//! `True`/`False` (resolved later by repair).

use thiserror::Error;

use crate::grid::{Action, Perception};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PyCond {
    Call(Perception),
    Not(Box<PyCond>),
    Literal(bool),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PyStmt {
    Call(Action),
    While(PyCond, Vec<PyStmt>),
    If(PyCond, Vec<PyStmt>, Option<Vec<PyStmt>>),
    For(u64, Vec<PyStmt>),
}

/// Body of `def run():`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PyProgram {
    pub body: Vec<PyStmt>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum PyError {
    #[error("line {line}: {construct} is not allowed")]
    WhitelistViolation { line: usize, construct: String },
    #[error("line {line}: inconsistent indentation")]
    Indentation { line: usize },
    #[error("line {line}: cannot parse `{text}`")]
    Syntax { line: usize, text: String },
    #[error("no `def run():` found")]
    MissingRun,
}

#[derive(Debug)]
struct Line<'a> {
    no: usize,
    indent: usize,
    text: &'a str,
}

fn strip_comment(s: &str) -> &str {
    match s.find('#') {
        Some(i) => &s[..i],
        None => s,
    }
}

fn lines(src: &str) -> Result<Vec<Line<'_>>, PyError> {
    let mut out = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let text = strip_comment(raw).trim_end();
        if text.trim().is_empty() {
            continue;
        }
        let mut indent = 0;
        for ch in text.chars() {
            match ch {
                ' ' => indent += 1,
                '\t' => indent += 4,
                _ => break,
            }
        }
        out.push(Line {
            no: i + 1,
            indent,
            text: text.trim(),
        });
    }
    Ok(out)
}

/// Rejects constructs outside the subset before any structural parsing.
fn screen(line: &Line) -> Result<(), PyError> {
    let t = line.text;
    let violation = |what: &str| PyError::WhitelistViolation {
        line: line.no,
        construct: what.to_string(),
    };
    let words: Vec<&str> = t
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .collect();
    for (kw, what) in [
        ("break", "break"),
        ("continue", "continue"),
        ("return", "return"),
        ("elif", "elif"),
        ("or", "or"),
        ("and", "and"),
        ("pass", "pass"),
        ("import", "import"),
        ("lambda", "lambda"),
        ("class", "class definition"),
        ("global", "global"),
    ] {
        if words.contains(&kw) {
            return Err(violation(what));
        }
    }
    if t.contains("==") {
        return Err(violation("=="));
    }
    if t.contains("!=") {
        return Err(violation("!="));
    }
    let bare = t.replace("==", "").replace("!=", "").replace("<=", "").replace(">=", "");
    if bare.contains('=') {
        return Err(violation("variable definition"));
    }
    Ok(())
}

struct Parser<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn block(&mut self, indent: usize) -> Result<Vec<PyStmt>, PyError> {
        let mut out = Vec::new();
        while let Some(line) = self.lines.get(self.pos) {
            if line.indent < indent {
                break;
            }
            if line.indent > indent {
                return Err(PyError::Indentation { line: line.no });
            }
            out.push(self.statement(indent)?);
        }
        Ok(out)
    }

    /// Body after a `header:` line, either inline or indented below.
    fn suite(&mut self, indent: usize, inline: &'a str, no: usize) -> Result<Vec<PyStmt>, PyError> {
        let inline = inline.trim();
        if !inline.is_empty() {
            return Ok(vec![simple(inline, no)?]);
        }
        let Some(next) = self.lines.get(self.pos) else {
            return Err(PyError::Indentation { line: no });
        };
        if next.indent <= indent {
            return Err(PyError::Indentation { line: next.no });
        }
        let inner = next.indent;
        self.block(inner)
    }

    fn statement(&mut self, indent: usize) -> Result<PyStmt, PyError> {
        let line = &self.lines[self.pos];
        let (no, text) = (line.no, line.text);
        self.pos += 1;
        let syntax = || PyError::Syntax {
            line: no,
            text: text.to_string(),
        };
        if let Some(rest) = keyword(text, "while") {
            let (head, tail) = split_colon(rest).ok_or_else(syntax)?;
            let cond = condition(head, no)?;
            let body = self.suite(indent, tail, no)?;
            return Ok(PyStmt::While(cond, body));
        }
        if let Some(rest) = keyword(text, "if") {
            let (head, tail) = split_colon(rest).ok_or_else(syntax)?;
            let cond = condition(head, no)?;
            let body = self.suite(indent, tail, no)?;
            let mut orelse = None;
            if let Some(next) = self.lines.get(self.pos) {
                if next.indent == indent {
                    if let Some(rest) = keyword(next.text, "else") {
                        let else_no = next.no;
                        self.pos += 1;
                        let (head, tail) = split_colon(rest).ok_or(PyError::Syntax {
                            line: else_no,
                            text: "else".into(),
                        })?;
                        if !head.trim().is_empty() {
                            return Err(PyError::Syntax {
                                line: else_no,
                                text: head.to_string(),
                            });
                        }
                        orelse = Some(self.suite(indent, tail, else_no)?);
                    }
                }
            }
            return Ok(PyStmt::If(cond, body, orelse));
        }
        if let Some(rest) = keyword(text, "for") {
            let (head, tail) = split_colon(rest).ok_or_else(syntax)?;
            let n = range_count(head, no)?;
            let body = self.suite(indent, tail, no)?;
            return Ok(PyStmt::For(n, body));
        }
        if keyword(text, "else").is_some() {
            return Err(syntax());
        }
        if keyword(text, "def").is_some() {
            return Err(PyError::WhitelistViolation {
                line: no,
                construct: "function definition".into(),
            });
        }
        simple(text, no)
    }
}

/// `rest` if `text` starts with keyword `kw` followed by a non-identifier
/// character.
fn keyword<'t>(text: &'t str, kw: &str) -> Option<&'t str> {
    let rest = text.strip_prefix(kw)?;
    match rest.chars().next() {
        Some(c) if c.is_alphanumeric() || c == '_' => None,
        _ => Some(rest),
    }
}

fn split_colon(rest: &str) -> Option<(&str, &str)> {
    let i = rest.find(':')?;
    Some((&rest[..i], &rest[i + 1..]))
}

fn call_name(text: &str) -> Option<&str> {
    let t = text.trim().trim_end_matches(';').trim();
    let name = t.strip_suffix(')')?.trim_end().strip_suffix('(')?.trim_end();
    (!name.is_empty() && name.chars().all(|c| c.is_alphanumeric() || c == '_')).then_some(name)
}

fn simple(text: &str, no: usize) -> Result<PyStmt, PyError> {
    let Some(name) = call_name(text) else {
        return Err(PyError::Syntax {
            line: no,
            text: text.to_string(),
        });
    };
    match Action::from_name(name) {
        Some(a) => Ok(PyStmt::Call(a)),
        None => Err(PyError::WhitelistViolation {
            line: no,
            construct: format!("call to `{name}`"),
        }),
    }
}

fn condition(text: &str, no: usize) -> Result<PyCond, PyError> {
    let t = text.trim();
    if let Some(inner) = t.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
        if call_name(t).is_none() {
            return condition(inner, no);
        }
    }
    if let Some(rest) = keyword(t, "not") {
        return Ok(PyCond::Not(Box::new(condition(rest, no)?)));
    }
    match t {
        "True" => return Ok(PyCond::Literal(true)),
        "False" => return Ok(PyCond::Literal(false)),
        _ => {}
    }
    let Some(name) = call_name(t) else {
        return Err(PyError::Syntax {
            line: no,
            text: t.to_string(),
        });
    };
    match Perception::from_name(name) {
        Some(p) => Ok(PyCond::Call(p)),
        None => Err(PyError::WhitelistViolation {
            line: no,
            construct: format!("call to `{name}`"),
        }),
    }
}

/// `i in range(n)` -> `n`
fn range_count(head: &str, no: usize) -> Result<u64, PyError> {
    let syntax = || PyError::Syntax {
        line: no,
        text: head.trim().to_string(),
    };
    let (var, iter) = head.split_once(" in ").ok_or_else(syntax)?;
    let var = var.trim();
    if var.is_empty() || !var.chars().all(|c| c.is_alphanumeric() || c == '_') {
        return Err(syntax());
    }
    let arg = iter
        .trim()
        .strip_prefix("range")
        .map(str::trim_start)
        .and_then(|s| s.strip_prefix('('))
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(syntax)?;
    arg.trim().parse().map_err(|_| syntax())
}

/// Parses a restricted-Python program.
pub fn parse_restricted_python(src: &str) -> Result<PyProgram, PyError> {
    let lines = lines(src)?;
    for l in &lines {
        screen(l)?;
    }
    let Some(first) = lines.first() else {
        return Err(PyError::MissingRun);
    };
    let header = first.text.replace(' ', "");
    if header != "defrun():" {
        return Err(if first.text.starts_with("def") {
            PyError::WhitelistViolation {
                line: first.no,
                construct: "function definition".into(),
            }
        } else {
            PyError::MissingRun
        });
    }
    let top = first.indent;
    let mut p = Parser { lines, pos: 1 };
    let body = p.suite(top, "", p.lines[0].no)?;
    if let Some(extra) = p.lines.get(p.pos) {
        return Err(if extra.text.starts_with("def") {
            PyError::WhitelistViolation {
                line: extra.no,
                construct: "function definition".into(),
            }
        } else {
            PyError::Syntax {
                line: extra.no,
                text: extra.text.to_string(),
            }
        });
    }
    Ok(PyProgram { body })
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ConvertError {
    #[error("no conversion rule for {0}")]
    UnconvertibleNode(String),
}

fn emit_cond(c: &PyCond, out: &mut Vec<String>) -> Result<(), ConvertError> {
    match c {
        PyCond::Call(p) => out.push(p.name().into()),
        PyCond::Literal(b) => out.push(if *b { "True" } else { "False" }.into()),
        PyCond::Not(inner) => match inner.as_ref() {
            PyCond::Not(_) => {
                return Err(ConvertError::UnconvertibleNode("nested `not`".into()));
            }
            h => {
                out.extend(["not".into(), "c(".into()]);
                emit_cond(h, out)?;
                out.push("c)".into());
            }
        },
    }
    Ok(())
}

fn emit_block(body: &[PyStmt], out: &mut Vec<String>) -> Result<(), ConvertError> {
    for s in body {
        match s {
            PyStmt::Call(a) => out.push(a.name().into()),
            PyStmt::While(c, b) => {
                out.extend(["WHILE".into(), "c(".into()]);
                emit_cond(c, out)?;
                out.extend(["c)".into(), "w(".into()]);
                emit_block(b, out)?;
                out.push("w)".into());
            }
            PyStmt::If(c, b, None) => {
                out.extend(["IF".into(), "c(".into()]);
                emit_cond(c, out)?;
                out.extend(["c)".into(), "i(".into()]);
                emit_block(b, out)?;
                out.push("i)".into());
            }
            PyStmt::If(c, b, Some(e)) => {
                out.extend(["IFELSE".into(), "c(".into()]);
                emit_cond(c, out)?;
                out.extend(["c)".into(), "i(".into()]);
                emit_block(b, out)?;
                out.extend(["i)".into(), "ELSE".into(), "e(".into()]);
                emit_block(e, out)?;
                out.push("e)".into());
            }
            PyStmt::For(n, b) => {
                if *n > u64::from(crate::dsl::MAX_REPEAT) {
                    return Err(ConvertError::UnconvertibleNode(format!("range({n})")));
                }
                out.extend(["REPEAT".into(), format!("R={n}"), "r(".into()]);
                emit_block(b, out)?;
                out.push("r)".into());
            }
        }
    }
    Ok(())
}

/// Rule-based translation to DSL text. `True`/`False` literals are kept as
/// tokens for the repair stage.
pub fn convert_py_to_dsl(py: &PyProgram) -> Result<String, ConvertError> {
    let mut out = vec!["DEF".to_string(), "run".into(), "m(".into()];
    emit_block(&py.body, &mut out)?;
    out.push("m)".into());
    Ok(out.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_suites() {
        let p = parse_restricted_python("def run():\n    if frontIsClear(): move()\n    else: turnLeft()").unwrap();
        assert_eq!(
            convert_py_to_dsl(&p).unwrap(),
            "DEF run m( IFELSE c( frontIsClear c) i( move i) ELSE e( turnLeft e) m)"
        );
    }

    #[test]
    fn if_rule() {
        let p = parse_restricted_python("def run():\n    if leftIsClear():\n        turnLeft()\n").unwrap();
        assert_eq!(
            convert_py_to_dsl(&p).unwrap(),
            "DEF run m( IF c( leftIsClear c) i( turnLeft i) m)"
        );
    }

    #[test]
    fn for_rule() {
        let p = parse_restricted_python("def run():\n    for i in range(3):\n        move()").unwrap();
        assert_eq!(convert_py_to_dsl(&p).unwrap(), "DEF run m( REPEAT R=3 r( move r) m)");
        let p = parse_restricted_python("def run():\n    for _ in range(40):\n        move()").unwrap();
        assert!(matches!(convert_py_to_dsl(&p), Err(ConvertError::UnconvertibleNode(_))));
    }

    #[test]
    fn not_rule() {
        let p = parse_restricted_python("def run():\n    while not frontIsClear():\n        turnLeft()").unwrap();
        assert_eq!(
            convert_py_to_dsl(&p).unwrap(),
            "DEF run m( WHILE c( not c( frontIsClear c) c) w( turnLeft w) m)"
        );
        let p = parse_restricted_python("def run():\n    while not not frontIsClear():\n        turnLeft()").unwrap();
        assert!(convert_py_to_dsl(&p).is_err());
    }

    #[test]
    fn whitelist() {
        let cases = [
            ("def run():\n    x = 1", "variable definition"),
            ("def run():\n    while frontIsClear():\n        break", "break"),
            ("def run():\n    return", "return"),
            ("def run():\n    if frontIsClear() or leftIsClear():\n        move()", "or"),
            ("def run():\n    if frontIsClear() == True:\n        move()", "=="),
            ("def run():\n    jump()", "call to `jump`"),
            ("def run():\n    move()\ndef helper():\n    move()", "function definition"),
        ];
        for (src, what) in cases {
            match parse_restricted_python(src) {
                Err(PyError::WhitelistViolation { construct, .. }) => assert_eq!(construct, what, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn while_true_parses() {
        let p = parse_restricted_python("def run():\n    while True:\n        move()").unwrap();
        assert_eq!(p.body, vec![PyStmt::While(PyCond::Literal(true), vec![PyStmt::Call(Action::Move)])]);
        assert_eq!(convert_py_to_dsl(&p).unwrap(), "DEF run m( WHILE c( True c) w( move w) m)");
    }

    #[test]
    fn indentation_errors() {
        assert!(matches!(
            parse_restricted_python("def run():\nmove()"),
            Err(PyError::Indentation { .. })
        ));
        assert!(matches!(
            parse_restricted_python("def run():\n    move()\n        move()"),
            Err(PyError::Indentation { .. })
        ));
    }

    #[test]
    fn comments_and_blank_lines() {
        let p = parse_restricted_python("# start\ndef run():\n\n    move()  # go\n\n    turnLeft()\n").unwrap();
        assert_eq!(p.body.len(), 2);
    }
}
