use std::collections::HashMap;
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::hl::{StepError, Violation};
use crate::ll::{apply_with, ll_enabled, policy_step, sending_on, ConfigLL, LlFault, LlRule};
use crate::protocol::Dir;
use crate::refinement::{self, check_step};

use super::{check_invariants, ExploreError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Every enabled rule instance.
    Free,
    /// Every interleaving of the processes' deterministic choices.
    Policy,
}

#[derive(Clone, Debug)]
pub struct SystemBounds {
    pub depth: usize,
    /// Width of timestamp choices.
    pub k: u64,
    pub mode: Mode,
    pub max_states: usize,
    pub fault: Option<LlFault>,
    /// Expand each BFS level on the rayon pool.
    pub parallel: bool,
}

impl SystemBounds {
    pub fn new(depth: usize, k: u64) -> Self {
        Self { depth, k, mode: Mode::Free, max_states: 2_000_000, fault: None, parallel: cfg!(feature = "parallel") }
    }
}

#[derive(Clone, Debug)]
pub enum SystemViolation {
    Invariant { trace: Vec<LlRule>, violations: Vec<Violation> },
    Refinement { trace: Vec<LlRule>, violation: Box<refinement::Violation> },
    /// A rule fired but broke one of its proof obligations.
    Obligation { trace: Vec<LlRule>, error: StepError },
    /// With the token back and a retraction outstanding, the sender's view
    /// does not decide between completing and retracting.
    SyncInference { trace: Vec<LlRule>, chan: crate::calculus::Name },
}

#[derive(Clone, Debug, Default)]
pub struct SystemReport {
    pub states: usize,
    pub edges: usize,
    /// Deepest level reached.
    pub depth: usize,
    /// Some state at the depth bound still had successors.
    pub truncated: bool,
    pub terminated: usize,
    pub violations: Vec<SystemViolation>,
    pub deadlocks: Vec<Vec<LlRule>>,
    /// One representative path into each closed cycle that never terminates.
    pub livelocks: Vec<Vec<LlRule>>,
    pub sync_checks: usize,
}

impl SystemReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn write_trace(f: &mut fmt::Formatter<'_>, trace: &[LlRule]) -> fmt::Result {
    for r in trace {
        writeln!(f, "  {r}")?;
    }
    Ok(())
}

impl fmt::Display for SystemReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "states {}", self.states)?;
        writeln!(f, "edges {}", self.edges)?;
        writeln!(f, "depth {}{}", self.depth, if self.truncated { " (truncated)" } else { "" })?;
        writeln!(f, "terminated {}", self.terminated)?;
        writeln!(f, "sync-inference checks {}", self.sync_checks)?;
        writeln!(f, "violations {}", self.violations.len())?;
        for v in &self.violations {
            match v {
                SystemViolation::Invariant { trace, violations } => {
                    let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
                    writeln!(f, "invariant: {}", list.join("; "))?;
                    write_trace(f, trace)?;
                }
                SystemViolation::Refinement { trace, violation } => {
                    write!(f, "{violation}")?;
                    writeln!(f, "trace:")?;
                    write_trace(f, trace)?;
                }
                SystemViolation::Obligation { trace, error } => {
                    writeln!(f, "obligation: {error}")?;
                    write_trace(f, trace)?;
                }
                SystemViolation::SyncInference { trace, chan } => {
                    writeln!(f, "sync inference on {chan}")?;
                    write_trace(f, trace)?;
                }
            }
        }
        writeln!(f, "deadlocks {}", self.deadlocks.len())?;
        for d in &self.deadlocks {
            write_trace(f, d)?;
        }
        writeln!(f, "livelocks {}", self.livelocks.len())?;
        for l in &self.livelocks {
            write_trace(f, l)?;
        }
        Ok(())
    }
}

/// What expanding one state produced. Computed independently per state so
/// that a level can be expanded in parallel and merged in order.
struct Expansion {
    succ: Vec<(LlRule, ConfigLL)>,
    refinement: Vec<(LlRule, refinement::Violation)>,
    obligations: Vec<(LlRule, StepError)>,
    sync_failures: Vec<crate::calculus::Name>,
    sync_checks: usize,
}

fn candidates(c: &ConfigLL, b: &SystemBounds) -> Vec<LlRule> {
    match b.mode {
        Mode::Free => ll_enabled(c, b.k),
        Mode::Policy => c.procs.iter().filter_map(|p| policy_step(c, &p.id)).collect(),
    }
}

/// With the token back at a sender whose retraction is outstanding, exactly
/// one of completion and retraction must be enabled, and it must be the one
/// the hidden `sync` bit calls for.
fn sync_inference(c: &ConfigLL, b: &SystemBounds) -> (usize, Vec<crate::calculus::Name>) {
    let mut checks = 0;
    let mut bad = Vec::new();
    for (name, ch) in &c.channels {
        let Ok(p) = c.proc(&ch.s.n) else { continue };
        let in_send = sending_on(p).is_some_and(|(on, _)| &on == name);
        if !(ch.sender_has_token() && ch.s.d == Dir::I && in_send) {
            continue;
        }
        checks += 1;
        let proc = p.id.clone();
        let complete = apply_with(c, &LlRule::SendComplete { proc: proc.clone(), chan: name.clone() }, b.fault).is_ok();
        let retract = apply_with(c, &LlRule::RetractComplete { proc, chan: name.clone() }, b.fault).is_ok();
        let inferred = ch.sender_infers_sync().ok();
        if complete == retract || complete != ch.sync || inferred != Some(ch.sync) {
            bad.push(name.clone());
        }
    }
    (checks, bad)
}

fn expand(c: &ConfigLL, b: &SystemBounds) -> Expansion {
    let mut e = Expansion { succ: Vec::new(), refinement: Vec::new(), obligations: Vec::new(), sync_failures: Vec::new(), sync_checks: 0 };
    (e.sync_checks, e.sync_failures) = sync_inference(c, b);
    for rule in candidates(c, b) {
        match apply_with(c, &rule, b.fault) {
            Ok((next, event)) => {
                if let Err(v) = check_step(c, &rule, &next, event.as_ref()) {
                    e.refinement.push((rule.clone(), v));
                }
                e.succ.push((rule, next));
            }
            Err(err @ StepError::Obligation { .. }) => e.obligations.push((rule, err)),
            Err(_) => {}
        }
    }
    e
}

fn expand_level(level: &[usize], states: &[ConfigLL], b: &SystemBounds) -> Vec<Expansion> {
    #[cfg(feature = "parallel")]
    if b.parallel {
        use rayon::prelude::*;
        return level.par_iter().map(|&i| expand(&states[i], b)).collect();
    }
    level.iter().map(|&i| expand(&states[i], b)).collect()
}

/// Breadth-first enumeration of low-level interleavings up to `depth` steps,
/// checking invariants on every state and refinement on every edge.
pub fn explore_system(start: &ConfigLL, b: &SystemBounds) -> Result<SystemReport, ExploreError> {
    let mut states = vec![start.clone()];
    let mut parent: Vec<Option<(usize, LlRule)>> = vec![None];
    let mut index = HashMap::from([(start.clone(), 0usize)]);
    let mut expanded = vec![false];
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut report = SystemReport::default();

    let trace_to = |parent: &[Option<(usize, LlRule)>], mut i: usize| {
        let mut out = Vec::new();
        while let Some((p, r)) = &parent[i] {
            out.push(r.clone());
            i = *p;
        }
        out.reverse();
        out
    };
    let extend = |mut t: Vec<LlRule>, r: &LlRule| {
        t.push(r.clone());
        t
    };

    let first = check_invariants(start);
    if !first.is_empty() {
        report.violations.push(SystemViolation::Invariant { trace: Vec::new(), violations: first });
    }
    let mut level = vec![0usize];
    let mut depth = 0;
    while !level.is_empty() {
        if depth == b.depth {
            report.truncated = level.iter().any(|&i| !candidates(&states[i], b).is_empty());
            break;
        }
        let expansions = expand_level(&level, &states, b);
        let mut next_level = Vec::new();
        for (&i, e) in level.iter().zip(expansions) {
            expanded[i] = true;
            report.sync_checks += e.sync_checks;
            for chan in e.sync_failures {
                report.violations.push(SystemViolation::SyncInference { trace: trace_to(&parent, i), chan });
            }
            for (rule, v) in e.refinement {
                let trace = extend(trace_to(&parent, i), &rule);
                report.violations.push(SystemViolation::Refinement { trace, violation: Box::new(v) });
            }
            for (rule, error) in e.obligations {
                let trace = extend(trace_to(&parent, i), &rule);
                report.violations.push(SystemViolation::Obligation { trace, error });
            }
            if e.succ.is_empty() && !states[i].is_terminated() {
                report.deadlocks.push(trace_to(&parent, i));
            }
            for (rule, next) in e.succ {
                report.edges += 1;
                let j = match index.get(&next) {
                    Some(&j) => j,
                    None => {
                        if states.len() >= b.max_states {
                            return Err(ExploreError::BoundsTooLarge { cap: b.max_states });
                        }
                        let j = states.len();
                        let found = check_invariants(&next);
                        if !found.is_empty() {
                            let trace = extend(trace_to(&parent, i), &rule);
                            report.violations.push(SystemViolation::Invariant { trace, violations: found });
                        }
                        index.insert(next.clone(), j);
                        states.push(next);
                        parent.push(Some((i, rule)));
                        expanded.push(false);
                        next_level.push(j);
                        j
                    }
                };
                edges.push((i, j));
            }
        }
        level = next_level;
        depth += 1;
    }
    report.depth = depth;
    report.states = states.len();
    report.terminated = states.iter().filter(|c| c.is_terminated()).count();
    report.livelocks = livelocks(&states, &expanded, &edges).into_iter().map(|i| trace_to(&parent, i)).collect();
    Ok(report)
}

/// Closed strongly connected components with a cycle, fully expanded and
/// containing no terminated state. Returns the first-discovered state of
/// each.
fn livelocks(states: &[ConfigLL], expanded: &[bool], edges: &[(usize, usize)]) -> Vec<usize> {
    let mut g: DiGraph<(), ()> = DiGraph::new();
    let nodes: Vec<NodeIndex> = (0..states.len()).map(|_| g.add_node(())).collect();
    for &(a, b) in edges {
        g.add_edge(nodes[a], nodes[b], ());
    }
    let sccs = tarjan_scc(&g);
    let mut comp = vec![0usize; states.len()];
    for (k, scc) in sccs.iter().enumerate() {
        for n in scc {
            comp[n.index()] = k;
        }
    }
    let mut closed = vec![true; sccs.len()];
    let mut cyclic: Vec<bool> = sccs.iter().map(|scc| scc.len() > 1).collect();
    for &(a, b) in edges {
        if comp[a] != comp[b] {
            closed[comp[a]] = false;
        } else if a == b {
            cyclic[comp[a]] = true;
        }
    }
    let mut out: Vec<usize> = sccs
        .iter()
        .enumerate()
        .filter(|&(k, scc)| {
            closed[k] && cyclic[k] && scc.iter().all(|n| expanded[n.index()] && !states[n.index()].is_terminated())
        })
        .map(|(_, scc)| scc.iter().map(|n| n.index()).min().expect("non-empty"))
        .collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::parse_program;

    fn load(src: &str) -> ConfigLL {
        ConfigLL::initial(&parse_program(src).unwrap())
    }

    #[test]
    fn empty_system_terminates_immediately() {
        let r = explore_system(&load("(system)"), &SystemBounds::new(5, 1)).unwrap();
        assert_eq!((r.states, r.terminated, r.edges), (1, 1, 0));
        assert!(r.passed() && r.deadlocks.is_empty() && r.livelocks.is_empty());
    }

    #[test]
    fn self_backtracking_loop_is_a_livelock() {
        let src = include_str!("../../programs/loop.rcsp");
        let r = explore_system(&load(src), &SystemBounds::new(50, 1)).unwrap();
        assert!(r.passed(), "{r}");
        assert!(!r.truncated);
        assert_eq!(r.terminated, 0);
        assert_eq!(r.livelocks.len(), 1, "{r}");
    }

    #[test]
    fn fig1_small_depth_in_both_modes() {
        let start = load(include_str!("../../programs/fig1.rcsp"));
        for mode in [Mode::Free, Mode::Policy] {
            let r = explore_system(&start, &SystemBounds { mode, ..SystemBounds::new(14, 1) }).unwrap();
            assert!(r.passed(), "{mode:?}\n{r}");
            assert!(r.deadlocks.is_empty(), "{mode:?}\n{r}");
        }
    }

    #[test]
    fn policy_interleavings_of_fig1_all_terminate() {
        let start = load(include_str!("../../programs/fig1.rcsp"));
        let r = explore_system(&start, &SystemBounds { mode: Mode::Policy, ..SystemBounds::new(200, 1) }).unwrap();
        assert!(r.passed(), "{r}");
        assert!(!r.truncated && r.deadlocks.is_empty() && r.livelocks.is_empty(), "{r}");
        assert!(r.terminated >= 1);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let start = load(include_str!("../../programs/fig1.rcsp"));
        let seq = explore_system(&start, &SystemBounds { parallel: false, ..SystemBounds::new(16, 1) }).unwrap();
        let par = explore_system(&start, &SystemBounds { parallel: true, ..SystemBounds::new(16, 1) }).unwrap();
        assert_eq!(seq.to_string(), par.to_string());
    }

    #[test]
    fn mismatched_program_deadlocks_under_the_policy() {
        let start = load(include_str!("../../programs/mismatch.rcsp"));
        let r = explore_system(&start, &SystemBounds { mode: Mode::Policy, ..SystemBounds::new(100, 1) }).unwrap();
        assert!(!r.deadlocks.is_empty(), "{r}");
    }

    #[test]
    fn state_cap() {
        let start = load(include_str!("../../programs/fig1.rcsp"));
        let b = SystemBounds { max_states: 5, ..SystemBounds::new(30, 1) };
        assert_eq!(explore_system(&start, &b).unwrap_err(), ExploreError::BoundsTooLarge { cap: 5 });
    }
}
