//! Grammar-guided program sampling and single-node neighbourhood moves.
//!
//! Fragments are drawn from a [`ProductionTable`] under an explicit
//! [`Budget`]. Productions that cannot fit the remaining depth, token or
//! statement budget are masked out and the remaining mass renormalised, so
//! sampling always terminates inside the limits.

use rand::Rng;

use crate::dsl::{AstLimits, Condition, Program, Statement, MAX_REPEAT};
use crate::grid::{Action, Perception};
use crate::tasks::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symbol {
    Statement,
    Condition,
    Action,
    Boolean,
    Number,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StatementProduction {
    While,
    Repeat,
    Concat,
    If,
    IfElse,
    Action,
}

impl StatementProduction {
    pub const ALL: [StatementProduction; 6] = [
        Self::While,
        Self::Repeat,
        Self::Concat,
        Self::If,
        Self::IfElse,
        Self::Action,
    ];

    /// Fewest tokens any expansion of this production can print to.
    pub fn min_tokens(self) -> usize {
        match self {
            Self::Action => 1,
            Self::Concat => 2,
            Self::Repeat => 5,
            Self::While | Self::If => 7,
            Self::IfElse => 11,
        }
    }

    pub fn is_control_flow(self) -> bool {
        !matches!(self, Self::Action | Self::Concat)
    }

    /// Production that generated a statement list of this shape.
    pub fn of_block(block: &[Statement]) -> Self {
        match block {
            [Statement::Action(_)] => Self::Action,
            [Statement::While { .. }] => Self::While,
            [Statement::Repeat { .. }] => Self::Repeat,
            [Statement::If { .. }] => Self::If,
            [Statement::IfElse { .. }] => Self::IfElse,
            _ => Self::Concat,
        }
    }
}

/// Categorical distributions for every nonterminal.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductionTable {
    /// Indexed like [`StatementProduction::ALL`].
    pub statement: [f64; 6],
    /// `[plain, negated]`
    pub condition: [f64; 2],
    /// Indexed like [`Action::ALL`].
    pub action: [f64; 5],
    /// Indexed like [`Perception::ALL`].
    pub boolean: [f64; 5],
    /// Repetition counts `0..=19`.
    pub number: [f64; 20],
}

impl Default for ProductionTable {
    fn default() -> Self {
        Self {
            statement: [0.15, 0.03, 0.5, 0.08, 0.04, 0.2],
            condition: [0.9, 0.1],
            action: [0.5, 0.15, 0.15, 0.1, 0.1],
            boolean: [0.5, 0.15, 0.15, 0.1, 0.1],
            number: [0.05; 20],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{0:?} probabilities sum to {1}")]
pub struct BadTable(pub Symbol, pub String);

impl ProductionTable {
    pub fn validate(&self) -> Result<(), BadTable> {
        let rows: [(Symbol, &[f64]); 5] = [
            (Symbol::Statement, &self.statement),
            (Symbol::Condition, &self.condition),
            (Symbol::Action, &self.action),
            (Symbol::Boolean, &self.boolean),
            (Symbol::Number, &self.number),
        ];
        for (sym, p) in rows {
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > 1e-9 || p.iter().any(|&x| x < 0.0) {
                return Err(BadTable(sym, format!("{total}")));
            }
        }
        Ok(())
    }

    /// Probabilities of `sym`'s productions, in declaration order.
    pub fn row(&self, sym: Symbol) -> &[f64] {
        match sym {
            Symbol::Statement => &self.statement,
            Symbol::Condition => &self.condition,
            Symbol::Action => &self.action,
            Symbol::Boolean => &self.boolean,
            Symbol::Number => &self.number,
        }
    }

    /// Unconstrained draw of one production index for `sym`.
    pub fn draw_index(&self, sym: Symbol, rng: &mut RngStream) -> usize {
        draw(rng, self.row(sym), |_| true)
    }

    pub fn draw_action(&self, rng: &mut RngStream) -> Action {
        Action::ALL[draw(rng, &self.action, |_| true)]
    }

    pub fn draw_perception(&self, rng: &mut RngStream) -> Perception {
        Perception::ALL[draw(rng, &self.boolean, |_| true)]
    }

    pub fn draw_number(&self, rng: &mut RngStream) -> u8 {
        draw(rng, &self.number, |_| true) as u8
    }
}

/// Samples an index of `weights` restricted to `allowed`, renormalising.
fn draw(rng: &mut RngStream, weights: &[f64], allowed: impl Fn(usize) -> bool) -> usize {
    let total: f64 = weights
        .iter()
        .enumerate()
        .filter(|&(i, _)| allowed(i))
        .map(|(_, w)| w)
        .sum();
    let mut x = rng.gen::<f64>() * total;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if !allowed(i) || w <= 0.0 {
            continue;
        }
        if x < w {
            return i;
        }
        x -= w;
        last = Some(i);
    }
    last.expect("at least one production must stay unmasked")
}

/// Room left for a fragment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    /// Control-flow levels the fragment may add.
    pub depth: usize,
    /// Printed tokens the fragment may use.
    pub tokens: usize,
    /// Statements the fragment may contribute to its enclosing list.
    pub statements: usize,
}

impl Budget {
    /// Budget for a whole program body under `limits`.
    pub fn root(limits: &AstLimits) -> Self {
        Self {
            depth: limits.max_depth,
            tokens: limits.max_token_length.saturating_sub(4),
            statements: limits.max_statements_at_root,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Fragment {
    Statements(Vec<Statement>),
    Condition(Condition),
    Action(Action),
    Boolean(Perception),
    Number(u8),
}

pub fn sample_subtree(
    symbol: Symbol,
    table: &ProductionTable,
    rng: &mut RngStream,
    budget: Budget,
) -> Fragment {
    match symbol {
        Symbol::Statement => Fragment::Statements(sample_statements(table, rng, budget)),
        Symbol::Condition => Fragment::Condition(sample_condition(table, rng, budget.tokens)),
        Symbol::Action => Fragment::Action(table.draw_action(rng)),
        Symbol::Boolean => Fragment::Boolean(table.draw_perception(rng)),
        Symbol::Number => Fragment::Number(table.draw_number(rng)),
    }
}

fn sample_condition(table: &ProductionTable, rng: &mut RngStream, tokens: usize) -> Condition {
    let negate = draw(rng, &table.condition, |i| i == 0 || tokens >= 4) == 1;
    let p = table.draw_perception(rng);
    if negate {
        Condition::Not(p)
    } else {
        Condition::Is(p)
    }
}

/// Expands one `Statement` nonterminal; concatenations are flattened.
pub fn sample_statements(table: &ProductionTable, rng: &mut RngStream, budget: Budget) -> Vec<Statement> {
    let mut out = Vec::new();
    expand(table, rng, budget, &mut out);
    out
}

fn expand(table: &ProductionTable, rng: &mut RngStream, b: Budget, out: &mut Vec<Statement>) {
    let fits = |i: usize| {
        let p = StatementProduction::ALL[i];
        p.min_tokens() <= b.tokens
            && (!p.is_control_flow() || b.depth >= 1)
            && (p != StatementProduction::Concat || b.statements >= 2)
    };
    let prod = StatementProduction::ALL[draw(rng, &table.statement, fits)];
    let inner = |tokens: usize| Budget {
        depth: b.depth.saturating_sub(1),
        tokens,
        statements: usize::MAX,
    };
    let stmt = match prod {
        StatementProduction::Action => Statement::Action(table.draw_action(rng)),
        StatementProduction::Concat => {
            let start = out.len();
            let first = Budget {
                tokens: b.tokens - 1,
                statements: b.statements - 1,
                ..b
            };
            expand(table, rng, first, out);
            let used: usize = out[start..].iter().map(Statement::token_len).sum();
            let second = Budget {
                tokens: b.tokens - used,
                statements: b.statements - (out.len() - start),
                ..b
            };
            expand(table, rng, second, out);
            return;
        }
        StatementProduction::Repeat => {
            let count = table.draw_number(rng);
            Statement::Repeat {
                count,
                body: sample_statements(table, rng, inner(b.tokens - 4)),
            }
        }
        StatementProduction::While | StatementProduction::If => {
            let cond = sample_condition(table, rng, b.tokens - 6);
            let body = sample_statements(table, rng, inner(b.tokens - 5 - cond.token_len()));
            if prod == StatementProduction::While {
                Statement::While { cond, body }
            } else {
                Statement::If { cond, body }
            }
        }
        StatementProduction::IfElse => {
            let cond = sample_condition(table, rng, b.tokens - 10);
            let then = sample_statements(table, rng, inner(b.tokens - 9 - cond.token_len()));
            let used = 8 + cond.token_len() + then.iter().map(Statement::token_len).sum::<usize>();
            let otherwise = sample_statements(table, rng, inner(b.tokens - used));
            Statement::IfElse {
                cond,
                then,
                otherwise,
            }
        }
    };
    out.push(stmt);
}

/// A fresh program drawn from the `Statement` distribution at the root.
pub fn random_program(table: &ProductionTable, rng: &mut RngStream, limits: &AstLimits) -> Program {
    Program::new(sample_statements(table, rng, Budget::root(limits)))
}

/// Which child list of a statement: 0 for `body`/`then`, 1 for `otherwise`.
pub type ListStep = (usize, u8);

/// A mutable node of a program.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Site {
    /// The statement at `idx` of the list reached via `list`.
    Statement { list: Vec<ListStep>, idx: usize },
    /// The concatenation of `list[idx..]`, at least two statements long.
    Suffix { list: Vec<ListStep>, idx: usize },
    /// The condition of the statement at `idx`.
    Condition { list: Vec<ListStep>, idx: usize },
    /// The repetition count of the statement at `idx`.
    Count { list: Vec<ListStep>, idx: usize },
}

fn collect_sites(block: &[Statement], path: &mut Vec<ListStep>, out: &mut Vec<Site>) {
    for (idx, s) in block.iter().enumerate() {
        out.push(Site::Statement {
            list: path.clone(),
            idx,
        });
        if idx + 2 <= block.len() {
            out.push(Site::Suffix {
                list: path.clone(),
                idx,
            });
        }
        match s {
            Statement::Action(_) => {}
            Statement::While { body, .. } | Statement::If { body, .. } => {
                out.push(Site::Condition {
                    list: path.clone(),
                    idx,
                });
                path.push((idx, 0));
                collect_sites(body, path, out);
                path.pop();
            }
            Statement::Repeat { body, .. } => {
                out.push(Site::Count {
                    list: path.clone(),
                    idx,
                });
                path.push((idx, 0));
                collect_sites(body, path, out);
                path.pop();
            }
            Statement::IfElse {
                then, otherwise, ..
            } => {
                out.push(Site::Condition {
                    list: path.clone(),
                    idx,
                });
                path.push((idx, 0));
                collect_sites(then, path, out);
                path.pop();
                path.push((idx, 1));
                collect_sites(otherwise, path, out);
                path.pop();
            }
        }
    }
}

/// Every node a neighbour move may replace, in pre-order.
pub fn mutation_sites(program: &Program) -> Vec<Site> {
    let mut out = Vec::new();
    collect_sites(&program.body, &mut Vec::new(), &mut out);
    out
}

fn list_mut<'a>(body: &'a mut Vec<Statement>, path: &[ListStep]) -> &'a mut Vec<Statement> {
    let mut cur = body;
    for &(idx, which) in path {
        cur = match &mut cur[idx] {
            Statement::While { body, .. } | Statement::Repeat { body, .. } | Statement::If { body, .. } => body,
            Statement::IfElse {
                then, otherwise, ..
            } => {
                if which == 0 {
                    then
                } else {
                    otherwise
                }
            }
            Statement::Action(_) => unreachable!("sites only address control-flow lists"),
        };
    }
    cur
}

/// Replaces the node at `site` with a freshly sampled fragment whose size
/// fits exactly the room the rest of the program leaves.
pub fn replace_at(
    program: &Program,
    site: &Site,
    table: &ProductionTable,
    rng: &mut RngStream,
    limits: &AstLimits,
) -> Program {
    let total = program.metrics().token_length;
    let mut next = program.clone();
    match site {
        Site::Statement { list, idx } | Site::Suffix { list, idx } => {
            let end = match site {
                Site::Statement { .. } => idx + 1,
                _ => usize::MAX,
            };
            let block = list_mut(&mut next.body, list);
            let end = end.min(block.len());
            let removed: usize = block[*idx..end].iter().map(Statement::token_len).sum();
            let statements = if list.is_empty() {
                limits
                    .max_statements_at_root
                    .saturating_sub(block.len() - (end - idx))
                    .max(1)
            } else {
                usize::MAX
            };
            let budget = Budget {
                depth: limits.max_depth.saturating_sub(list.len()),
                tokens: limits.max_token_length.saturating_sub(total - removed).max(1),
                statements,
            };
            let fresh = sample_statements(table, rng, budget);
            block.splice(*idx..end, fresh);
        }
        Site::Condition { list, idx } => {
            let block = list_mut(&mut next.body, list);
            let cond = match &mut block[*idx] {
                Statement::While { cond, .. } | Statement::If { cond, .. } | Statement::IfElse { cond, .. } => cond,
                _ => unreachable!("condition site on a statement without a condition"),
            };
            let room = limits.max_token_length.saturating_sub(total - cond.token_len());
            *cond = sample_condition(table, rng, room);
        }
        Site::Count { list, idx } => {
            let block = list_mut(&mut next.body, list);
            if let Statement::Repeat { count, .. } = &mut block[*idx] {
                *count = table.draw_number(rng).min(MAX_REPEAT);
            }
        }
    }
    next
}

/// How many times an identical neighbour is redrawn before it is accepted.
pub const IDENTICAL_RETRIES: usize = 8;

/// A neighbour together with the index into [`mutation_sites`] of the node
/// that was replaced.
pub fn neighbor_with_site(
    program: &Program,
    table: &ProductionTable,
    rng: &mut RngStream,
    limits: &AstLimits,
) -> (Program, usize) {
    let sites = mutation_sites(program);
    let pick = rng.gen_range(0..sites.len());
    let site = &sites[pick];
    let mut next = replace_at(program, site, table, rng, limits);
    for _ in 0..IDENTICAL_RETRIES {
        if next != *program {
            break;
        }
        next = replace_at(program, site, table, rng, limits);
    }
    if next.check_limits(limits).is_err() {
        next = fallback(program, site, table, rng);
    }
    (next, pick)
}

/// Replaces the site with the smallest fragment of its kind.
fn fallback(program: &Program, site: &Site, table: &ProductionTable, rng: &mut RngStream) -> Program {
    let mut next = program.clone();
    match site {
        Site::Statement { list, idx } | Site::Suffix { list, idx } => {
            let block = list_mut(&mut next.body, list);
            let end = if matches!(site, Site::Statement { .. }) {
                idx + 1
            } else {
                block.len()
            };
            block.splice(*idx..end, [Statement::Action(table.draw_action(rng))]);
        }
        Site::Condition { list, idx } => {
            if let Statement::While { cond, .. } | Statement::If { cond, .. } | Statement::IfElse { cond, .. } =
                &mut list_mut(&mut next.body, list)[*idx]
            {
                *cond = Condition::Is(table.draw_perception(rng));
            }
        }
        Site::Count { .. } => {}
    }
    next
}

/// One neighbour of `program` in programmatic space.
pub fn neighbor(program: &Program, table: &ProductionTable, rng: &mut RngStream, limits: &AstLimits) -> Program {
    neighbor_with_site(program, table, rng, limits).0
}
