//! The deterministic per-process policy.
//!
//! Each process decides from its own state and the halves of its channels
//! alone, so the same function drives both the single-threaded stepper and
//! the threaded runtime.

use crate::calculus::{Name, RedexKind};
use crate::hl::{local_step, pop_frame, Event, ProcState, Time};
use crate::protocol::{ChannelLL, Dir};

use super::rules::resume_allowed;
use super::{apply, sending_on, ConfigLL, LlRule};

/// The partner on `ch` is asking `p` to go backwards.
fn signalled(ch: &ChannelLL, p: &Name) -> bool {
    if &ch.s.n == p {
        ch.sender_has_token() && ch.r.d == Dir::B
    } else {
        !ch.sender_has_token() && ch.s.d == Dir::B
    }
}

/// `p`'s top frame wants `chan` earlier than it is now.
fn needs_rewind(p: &ProcState, chan: &Name, ch: &ChannelLL) -> bool {
    p.top_saved(chan).is_some_and(|saved| saved < ch.r.t)
}

fn my_channels<'a>(c: &'a ConfigLL, p: &'a ProcState) -> impl Iterator<Item = (&'a Name, &'a ChannelLL)> + 'a {
    c.channels.iter().filter(move |(_, ch)| ch.s.n == p.id || ch.r.n == p.id)
}

pub fn policy_step(c: &ConfigLL, proc: &Name) -> Option<LlRule> {
    let p = c.proc(proc).ok()?;
    if p.is_backtracking() {
        backward(c, p)
    } else {
        forward(c, p)
    }
}

fn forward(c: &ConfigLL, p: &ProcState) -> Option<LlRule> {
    let proc = p.id.clone();
    let redex = p.redex().ok()??;
    match redex.kind {
        RedexKind::Beta | RedexKind::Prim => {
            return local_step(p).is_ok().then_some(LlRule::Local { proc });
        }
        RedexKind::EnterStable => return Some(LlRule::EnterStable { proc, time: p.time + 1 }),
        RedexKind::ExitStable if !p.is_done() => return Some(LlRule::ExitStable { proc }),
        _ => {}
    }

    if let Some((chan, _)) = sending_on(p) {
        let ch = c.channel(&chan).ok()?;
        if ch.sender_has_token() {
            let rule = if ch.s.t <= ch.r.t {
                LlRule::SendComplete { proc, chan }
            } else if ch.s.d == Dir::I {
                LlRule::RetractComplete { proc, chan }
            } else {
                LlRule::RefusedComplete { proc, chan }
            };
            return Some(rule);
        }
        let elsewhere = my_channels(c, p).any(|(other, och)| other != &chan && signalled(och, &p.id));
        if elsewhere && ch.s.d == Dir::F {
            return Some(LlRule::RetractRequest { proc, chan });
        }
        return retract_duties(c, p, false);
    }

    if !p.stack.is_empty() && my_channels(c, p).any(|(_, ch)| signalled(ch, &p.id)) {
        return Some(LlRule::Backtrack { proc });
    }

    match &redex.expr {
        crate::calculus::Expr::Send(chan, _) => {
            let ch = c.channel(chan).ok()?;
            if ch.sender_has_token() && ch.r.d == Dir::F {
                let time = ch.r.t.max(p.time) + 1;
                return Some(LlRule::SendInit { proc, chan: chan.clone(), time });
            }
        }
        crate::calculus::Expr::Recv(_, chan, _) => {
            let ch = c.channel(chan).ok()?;
            if !ch.sender_has_token() && matches!(ch.s.d, Dir::F | Dir::I) && ch.r.d == Dir::F {
                let time = ch.s.t.max(p.time + 1);
                return Some(LlRule::RecvAck { proc, chan: chan.clone(), time });
            }
        }
        _ => {}
    }
    retract_duties(c, p, false)
}

/// A sender on one of `p`'s incoming channels wants its request back.
fn retract_duties(c: &ConfigLL, p: &ProcState, backtracking: bool) -> Option<LlRule> {
    my_channels(c, p).find_map(|(chan, ch)| {
        (ch.r.n == p.id && !ch.sender_has_token() && ch.s.d == Dir::I).then(|| LlRule::RetractAllow {
            proc: p.id.clone(),
            chan: chan.clone(),
            also_back: backtracking && needs_rewind(p, chan, ch),
        })
    })
}

/// The latest time `p` has saved for `chan` that is before `now`, or 0.
fn rewind_target(p: &ProcState, chan: &Name, now: Time) -> Time {
    p.stack.iter().rev().filter_map(|f| f.saved.get(chan).copied()).find(|&t| t < now).unwrap_or(0)
}

fn backward(c: &ConfigLL, p: &ProcState) -> Option<LlRule> {
    let proc = p.id.clone();
    if pop_frame(p, c).is_ok() {
        return Some(LlRule::PopFrame { proc });
    }
    for (chan, ch) in my_channels(c, p) {
        let chan = chan.clone();
        let behind = needs_rewind(p, &chan, ch);
        if ch.s.n == p.id {
            if ch.sender_has_token() && (behind || ch.r.d == Dir::B) && ch.r.t > 0 {
                let time = rewind_target(p, &chan, ch.r.t);
                return Some(LlRule::BackInit { proc, chan, time });
            }
            continue;
        }
        if !ch.sender_has_token() {
            match ch.s.d {
                Dir::B => {
                    let resume_forward = p.top_saved(&chan).is_some_and(|saved| ch.s.t <= saved);
                    return Some(LlRule::BackAck { proc, chan, resume_forward });
                }
                Dir::F if behind => return Some(LlRule::FwdRefuse { proc, chan }),
                Dir::I => return Some(LlRule::RetractAllow { proc, chan, also_back: behind }),
                Dir::F => {}
            }
        } else if behind && ch.r.d == Dir::F && ch.r.t > 0 {
            return Some(LlRule::RcvSignal { proc, chan });
        }
    }
    resume_allowed(c, p).then_some(LlRule::Resume { proc })
}

#[derive(Clone, Debug)]
pub struct LlRun {
    pub steps: Vec<(LlRule, Option<Event>)>,
    pub config: ConfigLL,
    /// No process had anything to do at the end.
    pub quiescent: bool,
}

impl LlRun {
    pub fn events(&self) -> Vec<Event> {
        self.steps.iter().filter_map(|(_, e)| e.clone()).collect()
    }
}

/// Steps the first process (in declaration order) that has something to do.
pub fn run_policy(start: &ConfigLL, max_steps: usize) -> LlRun {
    let mut config = start.clone();
    let mut steps = Vec::new();
    while steps.len() < max_steps {
        let Some(rule) = config.procs.iter().find_map(|p| policy_step(&config, &p.id)) else {
            return LlRun { steps, config, quiescent: true };
        };
        let (next, event) = apply(&config, &rule).expect("policy picks enabled rules");
        steps.push((rule, event));
        config = next;
    }
    LlRun { steps, config, quiescent: false }
}
