//! Deterministic scheduling policy for the high-level semantics.
//!
//! Priority: local steps of each process (in declaration order), then
//! communications, then channel rewinds, then backtracking forced on a
//! blocked process by a neighbour that needs a shared channel rewound.
//! Fresh times are the smallest admissible ones.

use crate::calculus::RedexKind;

use super::{apply, local_step, pop_frame, resume_forward, ConfigHL, Event, HlRule, ProcState, Time};

/// The time `p` needs `chan` rewound to, if its top frame is behind it.
fn rewind_requirement(p: &ProcState, chan: &crate::calculus::Name, now: Time) -> Option<Time> {
    if !p.is_backtracking() {
        return None;
    }
    p.top_saved(chan).filter(|&saved| saved < now)
}

fn local_rule(c: &ConfigHL, p: &ProcState) -> Option<HlRule> {
    let proc = p.id.clone();
    match p.redex_kind()? {
        RedexKind::Beta | RedexKind::Prim => local_step(p).is_ok().then_some(HlRule::Local { proc }),
        RedexKind::EnterStable => Some(HlRule::EnterStable { proc, time: p.time + 1 }),
        RedexKind::ExitStable => (!p.stack.is_empty() && !p.is_done()).then_some(HlRule::ExitStable { proc }),
        RedexKind::Backtrack => {
            if pop_frame(p, c).is_ok() {
                Some(HlRule::PopFrame { proc })
            } else if resume_forward(p, c).is_ok() {
                Some(HlRule::Resume { proc })
            } else {
                None
            }
        }
        RedexKind::Send | RedexKind::Recv | RedexKind::Sending => None,
    }
}

fn is_blocked(p: &ProcState) -> bool {
    p.is_done() || matches!(p.redex_kind(), Some(RedexKind::Send | RedexKind::Recv))
}

pub fn deterministic_step(c: &ConfigHL) -> Option<HlRule> {
    if let Some(rule) = c.procs.iter().find_map(|p| local_rule(c, p)) {
        return Some(rule);
    }
    for (name, ch) in &c.channels {
        let (Ok(s), Ok(r)) = (c.proc(&ch.sender), c.proc(&ch.receiver)) else { continue };
        let time = s.time.max(r.time).max(ch.time) + 1;
        if super::h2_sync_comm(c, name, time).is_ok() {
            return Some(HlRule::Comm { chan: name.clone(), time });
        }
    }
    for (name, ch) in &c.channels {
        let (Ok(s), Ok(r)) = (c.proc(&ch.sender), c.proc(&ch.receiver)) else { continue };
        if !(s.is_backtracking() && r.is_backtracking()) {
            continue;
        }
        let target = [s, r].iter().filter_map(|p| rewind_requirement(p, name, ch.time)).min();
        if let Some(time) = target {
            return Some(HlRule::Rewind { chan: name.clone(), time });
        }
    }
    for p in &c.procs {
        if p.stack.is_empty() || p.is_backtracking() || !is_blocked(p) {
            continue;
        }
        let forced = c.channels.iter().any(|(name, ch)| {
            let partner = if ch.sender == p.id {
                &ch.receiver
            } else if ch.receiver == p.id {
                &ch.sender
            } else {
                return false;
            };
            c.proc(partner).ok().and_then(|m| rewind_requirement(m, name, ch.time)).is_some()
        });
        if forced {
            return Some(HlRule::Backtrack { proc: p.id.clone() });
        }
    }
    None
}

#[derive(Clone, Debug)]
pub struct HlRun {
    pub steps: Vec<(HlRule, Option<Event>)>,
    pub config: ConfigHL,
    /// No rule was enabled at the end (as opposed to hitting the step cap).
    pub quiescent: bool,
}

impl HlRun {
    pub fn events(&self) -> Vec<Event> {
        self.steps.iter().filter_map(|(_, e)| e.clone()).collect()
    }
}

pub fn run_deterministic(start: &ConfigHL, max_steps: usize) -> HlRun {
    let mut config = start.clone();
    let mut steps = Vec::new();
    while steps.len() < max_steps {
        let Some(rule) = deterministic_step(&config) else {
            return HlRun { steps, config, quiescent: true };
        };
        let (next, event) = apply(&config, &rule).expect("scheduler picks enabled rules");
        steps.push((rule, event));
        config = next;
    }
    HlRun { steps, config, quiescent: false }
}
