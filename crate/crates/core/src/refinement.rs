//! The abstraction map from low-level to high-level configurations, and a
//! checker that every low-level step is either a high-level step or leaves
//! the abstraction unchanged.

use std::fmt;

use thiserror::Error;

use crate::calculus::{Expr, Name};
use crate::hl::{self, ChannelHL, ConfigHL, Event, HlRule, ProcState, StepError};
use crate::ll::{self, ConfigLL, LlFault, LlRule};
use crate::protocol::Dir;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RefinementError {
    #[error("`{proc}` is sending on `{chan}` while a backward request is outstanding")]
    Unmappable { proc: Name, chan: Name },
}

/// Drops the protocol state. A channel's time is the receiver's; a sender
/// in `send̲` has either not communicated yet or has, depending on whether
/// its request has come back acknowledged.
pub fn map_config(c: &ConfigLL) -> Result<ConfigHL, RefinementError> {
    let channels = c
        .channels
        .iter()
        .map(|(name, ch)| (name.clone(), ChannelHL { sender: ch.s.n.clone(), time: ch.r.t, receiver: ch.r.n.clone() }))
        .collect();
    let procs = c.procs.iter().map(|p| map_proc(c, p)).collect::<Result<_, _>>()?;
    Ok(ConfigHL { channels, procs })
}

fn map_proc(c: &ConfigLL, p: &ProcState) -> Result<ProcState, RefinementError> {
    let Ok(Some(r)) = p.redex() else { return Ok(p.clone()) };
    let Expr::Sending(chan, v) = r.expr else { return Ok(p.clone()) };
    let Some(ch) = c.channels.get(&chan) else { return Ok(p.clone()) };
    if ch.s.d == Dir::B {
        return Err(RefinementError::Unmappable { proc: p.id.clone(), chan });
    }
    if !ch.sender_has_token() || ch.s.t > ch.r.t {
        Ok(ProcState { expr: r.ctx.plug(Expr::Send(chan, v)), ..p.clone() })
    } else {
        Ok(ProcState { expr: r.ctx.plug(Expr::Unit), time: ch.r.t, ..p.clone() })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepClass {
    Stutter,
    Hl(HlRule),
}

impl fmt::Display for StepClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepClass::Stutter => f.write_str("stutter"),
            StepClass::Hl(r) => write!(f, "{r}"),
        }
    }
}

/// The high-level counterpart of a low-level rule fired in `before`.
pub fn classify(before: &ConfigLL, rule: &LlRule) -> StepClass {
    let proc = rule.proc().clone();
    let hl = match rule {
        LlRule::Local { .. } => HlRule::Local { proc },
        LlRule::EnterStable { time, .. } => HlRule::EnterStable { proc, time: *time },
        LlRule::ExitStable { .. } => HlRule::ExitStable { proc },
        LlRule::Backtrack { .. } => HlRule::Backtrack { proc },
        LlRule::PopFrame { .. } => HlRule::PopFrame { proc },
        LlRule::Resume { .. } => HlRule::Resume { proc },
        LlRule::RecvAck { chan, time, .. } => HlRule::Comm { chan: chan.clone(), time: *time },
        LlRule::BackAck { chan, .. } => {
            let time = before.channels.get(chan).map_or(0, |ch| ch.s.t);
            HlRule::Rewind { chan: chan.clone(), time }
        }
        _ => return StepClass::Stutter,
    };
    StepClass::Hl(hl)
}

#[derive(Clone, Debug)]
pub struct Violation {
    pub rule: LlRule,
    pub class: StepClass,
    pub reason: String,
    pub before: ConfigLL,
    pub after: Option<ConfigLL>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "refinement violation at `{}` => {}: {}", self.rule, self.class, self.reason)?;
        writeln!(f, "-- before (low level)\n{}", self.before)?;
        if let Ok(image) = map_config(&self.before) {
            write!(f, "-- before (image)\n{image}")?;
        }
        if let Some(after) = &self.after {
            writeln!(f, "-- after (low level)\n{after}")?;
            if let Ok(image) = map_config(after) {
                write!(f, "-- after (image)\n{image}")?;
            }
        }
        Ok(())
    }
}

/// Checks one low-level step against the high-level semantics.
#[allow(clippy::result_large_err)]
pub fn check_step(before: &ConfigLL, rule: &LlRule, after: &ConfigLL, event: Option<&Event>) -> Result<StepClass, Violation> {
    let class = classify(before, rule);
    let fail = |reason: String| Violation {
        rule: rule.clone(),
        class: class.clone(),
        reason,
        before: before.clone(),
        after: Some(after.clone()),
    };
    let image = map_config(before).map_err(|e| fail(e.to_string()))?;
    let image_after = map_config(after).map_err(|e| fail(e.to_string()))?;
    match &class {
        StepClass::Stutter => {
            if image != image_after {
                return Err(fail("silent step changes the abstract state".into()));
            }
            if let Some(e) = event {
                return Err(fail(format!("silent step emitted `{e}`")));
            }
        }
        StepClass::Hl(hl_rule) => {
            let (expected, hl_event) = hl::apply(&image, hl_rule).map_err(|e| fail(format!("not a high-level step: {e}")))?;
            if expected != image_after {
                return Err(fail("abstract successor differs from the high-level one".into()));
            }
            if hl_event.as_ref() != event {
                return Err(fail(format!("event {event:?} but high level gives {hl_event:?}")));
            }
        }
    }
    Ok(class)
}

#[derive(Clone, Debug, Default)]
pub struct TraceReport {
    pub steps: Vec<(LlRule, StepClass)>,
}

impl TraceReport {
    pub fn stutters(&self) -> usize {
        self.steps.iter().filter(|(_, c)| *c == StepClass::Stutter).count()
    }

    pub fn real(&self) -> usize {
        self.steps.len() - self.stutters()
    }
}

/// `<ll-rule> => <hl-rule|stutter>`, one step per line.
impl fmt::Display for TraceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (rule, class) in &self.steps {
            writeln!(f, "{rule} => {class}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum TraceFailure {
    /// A scheduled rule was not enabled.
    Disabled { index: usize, rule: LlRule, error: StepError },
    Refinement { index: usize, violation: Box<Violation>, minimized: Vec<LlRule> },
}

impl fmt::Display for TraceFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceFailure::Disabled { index, rule, error } => write!(f, "step {index} `{rule}` not enabled: {error}"),
            TraceFailure::Refinement { index, violation, minimized } => {
                writeln!(f, "step {index}: {violation}")?;
                writeln!(f, "-- minimized schedule ({} steps)", minimized.len())?;
                for r in minimized {
                    writeln!(f, "{r}")?;
                }
                Ok(())
            }
        }
    }
}

fn first_violation(start: &ConfigLL, schedule: &[LlRule], fault: Option<LlFault>) -> Result<Result<TraceReport, (usize, Violation)>, (usize, StepError)> {
    let mut c = start.clone();
    let mut report = TraceReport::default();
    for (i, rule) in schedule.iter().enumerate() {
        let (next, event) = ll::apply_with(&c, rule, fault).map_err(|e| (i, e))?;
        match check_step(&c, rule, &next, event.as_ref()) {
            Ok(class) => report.steps.push((rule.clone(), class)),
            Err(v) => return Ok(Err((i, v))),
        }
        c = next;
    }
    Ok(Ok(report))
}

/// Replays `schedule` from `start`, checking every step. On a violation the
/// schedule prefix is shrunk by greedily dropping silent steps that are not
/// needed to reproduce it.
#[allow(clippy::result_large_err)]
pub fn check_trace(start: &ConfigLL, schedule: &[LlRule], fault: Option<LlFault>) -> Result<TraceReport, TraceFailure> {
    match first_violation(start, schedule, fault) {
        Err((index, error)) => Err(TraceFailure::Disabled { index, rule: schedule[index].clone(), error }),
        Ok(Ok(report)) => Ok(report),
        Ok(Err((index, violation))) => {
            let minimized = minimize(start, &schedule[..=index], fault);
            Err(TraceFailure::Refinement { index, violation: Box::new(violation), minimized })
        }
    }
}

fn minimize(start: &ConfigLL, failing: &[LlRule], fault: Option<LlFault>) -> Vec<LlRule> {
    let mut current = failing.to_vec();
    let mut i = current.len().saturating_sub(1);
    while i > 0 {
        i -= 1;
        if !is_silent(&current[i]) {
            continue;
        }
        let mut candidate = current.clone();
        candidate.remove(i);
        if matches!(first_violation(start, &candidate, fault), Ok(Err(_))) {
            current = candidate;
        }
    }
    current
}

fn is_silent(rule: &LlRule) -> bool {
    matches!(classify(&ConfigLL { channels: Default::default(), procs: Vec::new() }, rule), StepClass::Stutter)
}
