//! DSL to Python rendering, used when showing a program back to a model.

use std::fmt;

use crate::dsl::{Condition, Program, Statement};

pub const EXECUTING_MARK: &str = "  # Currently executing this line";

/// A Python listing of a program; `node_lines[id]` is the line of the
/// statement with pre-order id `id`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PyListing {
    pub lines: Vec<String>,
    pub node_lines: Vec<usize>,
}

impl PyListing {
    /// The listing with the line of `node` marked.
    pub fn annotated(&self, node: usize) -> String {
        let mark = self.node_lines.get(node).copied();
        let mut out = String::new();
        for (i, line) in self.lines.iter().enumerate() {
            out.push_str(line);
            if Some(i) == mark {
                out.push_str(EXECUTING_MARK);
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for PyListing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

fn cond(c: Condition) -> String {
    match c {
        Condition::Is(p) => format!("{}()", p.name()),
        Condition::Not(p) => format!("not {}()", p.name()),
    }
}

fn block(out: &mut PyListing, body: &[Statement], indent: usize) {
    for s in body {
        let pad = "    ".repeat(indent);
        out.node_lines.push(out.lines.len());
        match s {
            Statement::Action(a) => out.lines.push(format!("{pad}{}()", a.name())),
            Statement::While { cond: c, body } => {
                out.lines.push(format!("{pad}while {}:", cond(*c)));
                block(out, body, indent + 1);
            }
            Statement::Repeat { count, body } => {
                out.lines.push(format!("{pad}for i in range({count}):"));
                block(out, body, indent + 1);
            }
            Statement::If { cond: c, body } => {
                out.lines.push(format!("{pad}if {}:", cond(*c)));
                block(out, body, indent + 1);
            }
            Statement::IfElse {
                cond: c,
                then,
                otherwise,
            } => {
                out.lines.push(format!("{pad}if {}:", cond(*c)));
                block(out, then, indent + 1);
                out.lines.push(format!("{pad}else:"));
                block(out, otherwise, indent + 1);
            }
        }
    }
}

pub fn render_python(program: &Program) -> PyListing {
    let mut out = PyListing {
        lines: vec!["def run():".into()],
        node_lines: Vec::new(),
    };
    block(&mut out, &program.body, 1);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    #[test]
    fn listing_and_marks() {
        let p = parse("DEF run m( WHILE c( noMarkersPresent c) w( IFELSE c( frontIsClear c) i( move i) ELSE e( turnLeft e) w) putMarker m)").unwrap();
        let l = render_python(&p);
        assert_eq!(
            l.to_string(),
            "def run():\n    while noMarkersPresent():\n        if frontIsClear():\n            move()\n        else:\n            turnLeft()\n    putMarker()\n"
        );
        assert_eq!(l.node_lines, vec![1, 2, 3, 5, 6]);
        assert!(l.annotated(2).contains("            move()  # Currently executing this line\n"));
    }
}
