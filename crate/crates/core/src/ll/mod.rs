//! Low-level semantics: every step touches one process and only the channel
//! halves it owns.
//!
//! Communication goes through the [`ChannelLL`] handshake (rules L1–L10);
//! local evaluation, stable regions and frame popping are shared with the
//! high-level model, except that a channel's time is read from its receiver
//! half.

use std::collections::BTreeMap;
use std::fmt;

use crate::calculus::{Expr, Name, Program};
use crate::hl::{ChannelTimes, ProcState, StepError, Time};
use crate::protocol::ChannelLL;

mod enabled;
mod policy;
mod rules;

pub use enabled::ll_enabled;
pub use policy::{policy_step, run_policy, LlRun};
pub use rules::{apply, apply_with, LlFault};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConfigLL {
    pub channels: BTreeMap<Name, ChannelLL>,
    /// Declaration order.
    pub procs: Vec<ProcState>,
}

impl ConfigLL {
    pub fn initial(program: &Program) -> Self {
        Self {
            channels: program
                .channels
                .iter()
                .map(|c| (c.name.clone(), ChannelLL::new(c.sender.clone(), c.receiver.clone())))
                .collect(),
            procs: program.processes.iter().map(|p| ProcState::initial(p.name.clone(), p.body.clone())).collect(),
        }
    }

    pub fn proc(&self, n: &str) -> Result<&ProcState, StepError> {
        self.procs.iter().find(|p| &*p.id == n).ok_or_else(|| StepError::UnknownProcess(crate::calculus::name(n)))
    }

    pub(crate) fn proc_index(&self, n: &Name) -> Result<usize, StepError> {
        self.procs.iter().position(|p| &p.id == n).ok_or_else(|| StepError::UnknownProcess(n.clone()))
    }

    pub fn channel(&self, c: &Name) -> Result<&ChannelLL, StepError> {
        self.channels.get(c).ok_or_else(|| StepError::UnknownChannel(c.clone()))
    }

    /// Every process is finished.
    pub fn is_terminated(&self) -> bool {
        self.procs.iter().all(ProcState::is_done)
    }
}

impl ChannelTimes for ConfigLL {
    fn channel_time(&self, chan: &Name) -> Option<Time> {
        self.channels.get(chan).map(|c| c.r.t)
    }

    fn channels_of(&self, n: &Name) -> Vec<Name> {
        self.channels.iter().filter(|(_, c)| &c.s.n == n || &c.r.n == n).map(|(k, _)| k.clone()).collect()
    }
}

impl fmt::Display for ConfigLL {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, ch) in &self.channels {
            writeln!(f, "chan {name} {ch}")?;
        }
        for (i, p) in self.procs.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LlRule {
    Local { proc: Name },
    EnterStable { proc: Name, time: Time },
    ExitStable { proc: Name },
    Backtrack { proc: Name },
    PopFrame { proc: Name },
    Resume { proc: Name },
    SendInit { proc: Name, chan: Name, time: Time },
    RecvAck { proc: Name, chan: Name, time: Time },
    SendComplete { proc: Name, chan: Name },
    FwdRefuse { proc: Name, chan: Name },
    BackInit { proc: Name, chan: Name, time: Time },
    BackAck { proc: Name, chan: Name, resume_forward: bool },
    RcvSignal { proc: Name, chan: Name },
    RetractRequest { proc: Name, chan: Name },
    RetractAllow { proc: Name, chan: Name, also_back: bool },
    RetractComplete { proc: Name, chan: Name },
    /// A refused request returns the sender to `send` so it can notice the
    /// receiver's backtrack signal.
    RefusedComplete { proc: Name, chan: Name },
}

impl LlRule {
    pub fn tag(&self) -> &'static str {
        match self {
            LlRule::Local { .. } => "H1",
            LlRule::EnterStable { .. } => "H3",
            LlRule::ExitStable { .. } => "H4",
            LlRule::Backtrack { .. } => "H5",
            LlRule::PopFrame { .. } => "H7",
            LlRule::Resume { .. } => "H8",
            LlRule::SendInit { .. } => "L1",
            LlRule::RecvAck { .. } => "L2",
            LlRule::SendComplete { .. } => "L3",
            LlRule::FwdRefuse { .. } => "L4",
            LlRule::BackInit { .. } => "L5",
            LlRule::BackAck { .. } => "L6",
            LlRule::RcvSignal { .. } => "L7",
            LlRule::RetractRequest { .. } => "L8",
            LlRule::RetractAllow { .. } => "L9",
            LlRule::RetractComplete { .. } => "L10",
            LlRule::RefusedComplete { .. } => "L10r",
        }
    }

    pub fn proc(&self) -> &Name {
        match self {
            LlRule::Local { proc }
            | LlRule::EnterStable { proc, .. }
            | LlRule::ExitStable { proc }
            | LlRule::Backtrack { proc }
            | LlRule::PopFrame { proc }
            | LlRule::Resume { proc }
            | LlRule::SendInit { proc, .. }
            | LlRule::RecvAck { proc, .. }
            | LlRule::SendComplete { proc, .. }
            | LlRule::FwdRefuse { proc, .. }
            | LlRule::BackInit { proc, .. }
            | LlRule::BackAck { proc, .. }
            | LlRule::RcvSignal { proc, .. }
            | LlRule::RetractRequest { proc, .. }
            | LlRule::RetractAllow { proc, .. }
            | LlRule::RetractComplete { proc, .. }
            | LlRule::RefusedComplete { proc, .. } => proc,
        }
    }

    pub fn chan(&self) -> Option<&Name> {
        match self {
            LlRule::SendInit { chan, .. }
            | LlRule::RecvAck { chan, .. }
            | LlRule::SendComplete { chan, .. }
            | LlRule::FwdRefuse { chan, .. }
            | LlRule::BackInit { chan, .. }
            | LlRule::BackAck { chan, .. }
            | LlRule::RcvSignal { chan, .. }
            | LlRule::RetractRequest { chan, .. }
            | LlRule::RetractAllow { chan, .. }
            | LlRule::RetractComplete { chan, .. }
            | LlRule::RefusedComplete { chan, .. } => Some(chan),
            _ => None,
        }
    }
}

/// `<tag> <proc> [<chan>] [<arg>]`
impl fmt::Display for LlRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.tag(), self.proc())?;
        if let Some(c) = self.chan() {
            write!(f, " {c}")?;
        }
        match self {
            LlRule::EnterStable { time, .. }
            | LlRule::SendInit { time, .. }
            | LlRule::RecvAck { time, .. }
            | LlRule::BackInit { time, .. } => write!(f, " {time}"),
            LlRule::BackAck { resume_forward: b, .. } | LlRule::RetractAllow { also_back: b, .. } => {
                write!(f, " {}", u8::from(*b))
            }
            _ => Ok(()),
        }
    }
}

/// The expression a process is blocked in, if it is `E[send̲ ℓ v]`.
pub(crate) fn sending_on(p: &ProcState) -> Option<(Name, Expr)> {
    let r = p.redex().ok().flatten()?;
    match r.expr {
        Expr::Sending(c, v) => Some((c, *v)),
        _ => None,
    }
}

#[cfg(test)]
mod tests;
