//! High-level semantics: communication and channel rewinding are atomic
//! steps over a global channel map.
//!
//! This model is the oracle the low-level semantics is checked against, so it
//! favours directness over speed. Each rule is a pure function from a
//! configuration to a successor configuration and an optional visible event.

mod invariants;
mod process;

use std::collections::BTreeMap;
use std::fmt;

use crate::calculus::{Expr, Name, Program, RedexKind};

pub use invariants::{check_invariants, Violation};
pub use process::{
    enter_stable, exit_stable, local_step, pop_frame, resume_forward, spontaneous_backtrack,
    top_frame_consistent, ChannelTimes, Frame, ProcState, StepError, Time,
};
pub(crate) use process::not_enabled;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelHL {
    pub sender: Name,
    pub time: Time,
    pub receiver: Name,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConfigHL {
    pub channels: BTreeMap<Name, ChannelHL>,
    /// In declaration order.
    pub procs: Vec<ProcState>,
}

/// Visible events. Silent steps produce no event.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    /// `ℓ@t[v]`
    Comm { chan: Name, time: Time, value: Expr },
    /// `ℓ̄@t`: every communication on `chan` after `time` is retracted.
    Rewind { chan: Name, time: Time },
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Comm { chan, time, value } => write!(f, "comm {chan}@{time} {value}"),
            Event::Rewind { chan, time } => write!(f, "rewind {chan}@{time}"),
        }
    }
}

/// Drops communications retracted by later rewinds, leaving the events that
/// stand at the end of the trace.
pub fn committed_events(events: &[Event]) -> Vec<Event> {
    let mut out: Vec<Event> = Vec::new();
    for e in events {
        match e {
            Event::Comm { .. } => out.push(e.clone()),
            Event::Rewind { chan, time } => out.retain(|kept| match kept {
                Event::Comm { chan: c, time: t, .. } => !(c == chan && t > time),
                Event::Rewind { .. } => true,
            }),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum HlRule {
    Local { proc: Name },
    Comm { chan: Name, time: Time },
    EnterStable { proc: Name, time: Time },
    ExitStable { proc: Name },
    Backtrack { proc: Name },
    Rewind { chan: Name, time: Time },
    PopFrame { proc: Name },
    Resume { proc: Name },
}

impl HlRule {
    pub fn tag(&self) -> &'static str {
        match self {
            HlRule::Local { .. } => "H1",
            HlRule::Comm { .. } => "H2",
            HlRule::EnterStable { .. } => "H3",
            HlRule::ExitStable { .. } => "H4",
            HlRule::Backtrack { .. } => "H5",
            HlRule::Rewind { .. } => "H6",
            HlRule::PopFrame { .. } => "H7",
            HlRule::Resume { .. } => "H8",
        }
    }
}

impl fmt::Display for HlRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HlRule::Local { proc }
            | HlRule::ExitStable { proc }
            | HlRule::Backtrack { proc }
            | HlRule::PopFrame { proc }
            | HlRule::Resume { proc } => write!(f, "{} {proc}", self.tag()),
            HlRule::EnterStable { proc, time } => write!(f, "{} {proc} t={time}", self.tag()),
            HlRule::Comm { chan, time } | HlRule::Rewind { chan, time } => {
                write!(f, "{} {chan} t={time}", self.tag())
            }
        }
    }
}

impl ChannelTimes for ConfigHL {
    fn channel_time(&self, chan: &Name) -> Option<Time> {
        self.channels.get(chan).map(|c| c.time)
    }

    fn channels_of(&self, n: &Name) -> Vec<Name> {
        self.channels
            .iter()
            .filter(|(_, c)| &c.sender == n || &c.receiver == n)
            .map(|(name, _)| name.clone())
            .collect()
    }
}

impl ConfigHL {
    /// All channels at time 0, every process entering its implicit region.
    pub fn initial(program: &Program) -> Self {
        Self {
            channels: program
                .channels
                .iter()
                .map(|d| {
                    (d.name.clone(), ChannelHL { sender: d.sender.clone(), time: 0, receiver: d.receiver.clone() })
                })
                .collect(),
            procs: program.processes.iter().map(|p| ProcState::initial(p.name.clone(), p.body.clone())).collect(),
        }
    }

    pub fn proc(&self, n: &str) -> Result<&ProcState, StepError> {
        self.procs.iter().find(|p| &*p.id == n).ok_or_else(|| StepError::UnknownProcess(crate::calculus::name(n)))
    }

    fn proc_index(&self, n: &Name) -> Result<usize, StepError> {
        self.procs.iter().position(|p| &p.id == n).ok_or_else(|| StepError::UnknownProcess(n.clone()))
    }

    pub fn channel(&self, c: &Name) -> Result<&ChannelHL, StepError> {
        self.channels.get(c).ok_or_else(|| StepError::UnknownChannel(c.clone()))
    }

    fn with_proc(&self, p: ProcState) -> Result<ConfigHL, StepError> {
        let i = self.proc_index(&p.id)?;
        let mut out = self.clone();
        out.procs[i] = p;
        Ok(out)
    }

    /// Every process is finished.
    pub fn is_terminated(&self) -> bool {
        self.procs.iter().all(ProcState::is_done)
    }

    /// Canonical text form.
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ConfigHL {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, c) in &self.channels {
            writeln!(f, "chan {name} ({},{},{})", c.sender, c.time, c.receiver)?;
        }
        for p in &self.procs {
            writeln!(f, "{p}")?;
        }
        Ok(())
    }
}

fn apply_proc(
    c: &ConfigHL,
    proc: &Name,
    step: impl FnOnce(&ProcState) -> Result<ProcState, StepError>,
) -> Result<ConfigHL, StepError> {
    let i = c.proc_index(proc)?;
    let next = step(&c.procs[i])?;
    c.with_proc(next)
}

pub fn h1_local(c: &ConfigHL, n: &Name) -> Result<ConfigHL, StepError> {
    apply_proc(c, n, local_step)
}

/// H2: synchronous communication on `chan` at a time later than both
/// endpoints.
pub fn h2_sync_comm(c: &ConfigHL, chan: &Name, t_new: Time) -> Result<(ConfigHL, Event), StepError> {
    let ch = c.channel(chan)?;
    let si = c.proc_index(&ch.sender)?;
    let ri = c.proc_index(&ch.receiver)?;
    let (s, r) = (&c.procs[si], &c.procs[ri]);
    let sr = s.redex()?.filter(|r| r.kind == RedexKind::Send);
    let rr = r.redex()?.filter(|r| r.kind == RedexKind::Recv);
    let (Some(sr), Some(rr)) = (sr, rr) else {
        return Err(not_enabled("H2", format!("`{chan}` endpoints are not at send/recv")));
    };
    let Expr::Send(sc, v) = &sr.expr else { unreachable!() };
    let Expr::Recv(x, rc, body) = &rr.expr else { unreachable!() };
    if sc != chan || rc != chan {
        return Err(not_enabled("H2", format!("endpoints are communicating on other channels than `{chan}`")));
    }
    let bound = s.time.max(r.time);
    if t_new <= bound {
        return Err(StepError::BadTime { rule: "H2", time: t_new, constraint: format!("> {bound}") });
    }
    if t_new <= ch.time {
        return Err(StepError::BadTime { rule: "H2", time: t_new, constraint: format!("> channel time {}", ch.time) });
    }
    let mut out = c.clone();
    out.procs[si] = ProcState { time: t_new, expr: sr.ctx.plug(Expr::Unit), ..s.clone() };
    out.procs[ri] = ProcState { time: t_new, expr: rr.ctx.plug(crate::calculus::subst(body, v, x)), ..r.clone() };
    out.channels.get_mut(chan).expect("checked").time = t_new;
    Ok((out, Event::Comm { chan: chan.clone(), time: t_new, value: (**v).clone() }))
}

pub fn h3_enter_stable(c: &ConfigHL, n: &Name, t_new: Time) -> Result<ConfigHL, StepError> {
    apply_proc(c, n, |p| enter_stable(p, t_new, c))
}

pub fn h4_exit_stable(c: &ConfigHL, n: &Name) -> Result<ConfigHL, StepError> {
    apply_proc(c, n, exit_stable)
}

pub fn h5_spontaneous_backtrack(c: &ConfigHL, n: &Name) -> Result<ConfigHL, StepError> {
    apply_proc(c, n, spontaneous_backtrack)
}

/// H6: both endpoints of `chan` are backtracking; move the channel back to
/// an earlier time.
pub fn h6_channel_rewind(c: &ConfigHL, chan: &Name, t_back: Time) -> Result<(ConfigHL, Event), StepError> {
    let ch = c.channel(chan)?;
    for end in [&ch.sender, &ch.receiver] {
        if !c.proc(end)?.is_backtracking() {
            return Err(not_enabled("H6", format!("`{end}` is not backtracking")));
        }
    }
    if t_back >= ch.time {
        return Err(StepError::BadTime { rule: "H6", time: t_back, constraint: format!("< {}", ch.time) });
    }
    let mut out = c.clone();
    out.channels.get_mut(chan).expect("checked").time = t_back;
    Ok((out, Event::Rewind { chan: chan.clone(), time: t_back }))
}

pub fn h7_pop_frame(c: &ConfigHL, n: &Name) -> Result<ConfigHL, StepError> {
    apply_proc(c, n, |p| pop_frame(p, c))
}

pub fn h8_resume_forward(c: &ConfigHL, n: &Name) -> Result<ConfigHL, StepError> {
    apply_proc(c, n, |p| resume_forward(p, c))
}

pub fn apply(c: &ConfigHL, rule: &HlRule) -> Result<(ConfigHL, Option<Event>), StepError> {
    Ok(match rule {
        HlRule::Local { proc } => (h1_local(c, proc)?, None),
        HlRule::Comm { chan, time } => {
            let (c, e) = h2_sync_comm(c, chan, *time)?;
            (c, Some(e))
        }
        HlRule::EnterStable { proc, time } => (h3_enter_stable(c, proc, *time)?, None),
        HlRule::ExitStable { proc } => (h4_exit_stable(c, proc)?, None),
        HlRule::Backtrack { proc } => (h5_spontaneous_backtrack(c, proc)?, None),
        HlRule::Rewind { chan, time } => {
            let (c, e) = h6_channel_rewind(c, chan, *time)?;
            (c, Some(e))
        }
        HlRule::PopFrame { proc } => (h7_pop_frame(c, proc)?, None),
        HlRule::Resume { proc } => (h8_resume_forward(c, proc)?, None),
    })
}

/// Admissible timestamps for a parameterised rule: `lo..=hi`, unbounded
/// above when `hi` is `None`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeRange {
    pub lo: Time,
    pub hi: Option<Time>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Proc(Name),
    Chan(Name),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enabled {
    pub rule: &'static str,
    pub target: Target,
    pub times: Option<TimeRange>,
}

/// Every enabled H1–H8 instance. H5 is listed once per process even though
/// it is always enabled on a non-empty stack.
pub fn hl_enabled(c: &ConfigHL) -> Vec<Enabled> {
    let mut out = Vec::new();
    for p in &c.procs {
        let proc = || Target::Proc(p.id.clone());
        match p.redex_kind() {
            Some(RedexKind::Beta | RedexKind::Prim) if local_step(p).is_ok() => {
                out.push(Enabled { rule: "H1", target: proc(), times: None })
            }
            Some(RedexKind::EnterStable) => out.push(Enabled {
                rule: "H3",
                target: proc(),
                times: Some(TimeRange { lo: p.time + 1, hi: None }),
            }),
            Some(RedexKind::ExitStable) if !p.stack.is_empty() => {
                out.push(Enabled { rule: "H4", target: proc(), times: None })
            }
            Some(RedexKind::Backtrack) => {
                if pop_frame(p, c).is_ok() {
                    out.push(Enabled { rule: "H7", target: proc(), times: None });
                }
                if resume_forward(p, c).is_ok() {
                    out.push(Enabled { rule: "H8", target: proc(), times: None });
                }
            }
            _ => {}
        }
        if !p.stack.is_empty() {
            out.push(Enabled { rule: "H5", target: proc(), times: None });
        }
    }
    for (name, ch) in &c.channels {
        let (Ok(s), Ok(r)) = (c.proc(&ch.sender), c.proc(&ch.receiver)) else { continue };
        let lo = s.time.max(r.time).max(ch.time) + 1;
        if h2_sync_comm(c, name, lo).is_ok() {
            out.push(Enabled { rule: "H2", target: Target::Chan(name.clone()), times: Some(TimeRange { lo, hi: None }) });
        }
        if ch.time > 0 && s.is_backtracking() && r.is_backtracking() {
            out.push(Enabled {
                rule: "H6",
                target: Target::Chan(name.clone()),
                times: Some(TimeRange { lo: 0, hi: Some(ch.time - 1) }),
            });
        }
    }
    out
}

pub mod sched;
pub use sched::{deterministic_step, run_deterministic, HlRun};
