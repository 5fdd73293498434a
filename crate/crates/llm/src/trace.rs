//! Text rendering of an executed episode for revision prompts.

use karel_core::interp::{StepKind, Trajectory};
use karel_core::pythonic::PyListing;

/// Which steps of a long trajectory are written out.
///
/// The first `head` steps are shown in full, the steps after them up to
/// `cutoff` are collapsed into a count, step `cutoff` itself is shown, and
/// anything after it is only counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceWindow {
    pub head: usize,
    pub cutoff: usize,
}

impl Default for TraceWindow {
    fn default() -> Self {
        Self { head: 3, cutoff: 49 }
    }
}

/// Python-style float text: `0.0`, `0.5`, `-1.0`.
pub fn float_text(x: f64) -> String {
    format!("{x:?}")
}

/// Dump without the trailing tab on each row.
pub fn state_text(world: &karel_core::WorldState) -> String {
    world
        .dump()
        .lines()
        .map(str::trim_end)
        .collect::<Vec<_>>()
        .join("\n")
}

fn step_text(t: &Trajectory, i: usize, listing: Option<&PyListing>) -> String {
    let step = &t.steps[i];
    let mut s = format!("Step {}:\n", i + 1);
    if let Some(l) = listing {
        s.push_str("Program:\n");
        s.push_str(&l.annotated(step.node));
        s.push('\n');
    }
    match step.kind {
        StepKind::Action(a) => s.push_str(&format!("Agent performs an action: {a}.\n")),
        StepKind::Perception { perception, result } => s.push_str(&format!(
            "Agent performs a perception: {}. The result is {}.\n",
            perception.name(),
            if result { "True" } else { "False" }
        )),
    }
    let before = if i == 0 {
        t.initial_return
    } else {
        t.steps[i - 1].return_after
    };
    let delta = step.return_after - before;
    if delta != 0.0 {
        s.push_str(&format!("The agent receives a reward of {}.\n", float_text(delta)));
    }
    s.push_str("Partial state:\n");
    let snap = step
        .snapshot
        .as_ref()
        .expect("trajectory must be recorded with snapshots");
    s.push_str(&snap.dump_local(1));
    s
}

/// The step listing of `t`, ending with the step-count line. With
/// `listing`, each step also shows the program with the active line marked.
pub fn render_trajectory(t: &Trajectory, listing: Option<&PyListing>, window: TraceWindow) -> String {
    let total = t.steps.len();
    let last = total.min(window.cutoff.max(1));
    let mut shown: Vec<Option<usize>> = Vec::new();
    if last > window.head + 1 {
        shown.extend((0..window.head).map(Some));
        shown.push(None);
        shown.push(Some(last - 1));
    } else {
        shown.extend((0..last).map(Some));
    }
    let mut out = String::new();
    for (j, item) in shown.iter().enumerate() {
        match item {
            Some(i) => {
                out.push_str(&step_text(t, *i, listing));
                out.push('\n');
                if !matches!(shown.get(j + 1), Some(None)) {
                    out.push('\n');
                }
            }
            None => {
                let hidden = last - 1 - window.head;
                out.push_str(&format!("###{hidden} steps are truncated.###\n\n"));
            }
        }
    }
    if total > last {
        out.push_str(&format!("The total step number is {total}, the latter ones are truncated."));
    } else {
        out.push_str(&format!("The total step number is {total}."));
    }
    out
}
