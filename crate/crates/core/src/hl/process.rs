//! Process state and the rules that touch a single process.
//!
//! These are shared by both semantics: the high-level model reads channel
//! times from its global map, the low-level model from the receiver half of
//! each channel cell. [`ChannelTimes`] abstracts over the two.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::calculus::{apply_prim, redex_of, subst, CtxFrame, EvalContext, Expr, Name, Redex, RedexKind, Stuck};

pub type Time = u64;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("{rule} not enabled: {why}")]
    NotEnabled { rule: &'static str, why: String },
    #[error("{rule}: time {time} violates {constraint}")]
    BadTime { rule: &'static str, time: Time, constraint: String },
    #[error("{rule}: empty context stack")]
    EmptyStack { rule: &'static str },
    #[error("unknown process `{0}`")]
    UnknownProcess(Name),
    #[error("unknown channel `{0}`")]
    UnknownChannel(Name),
    #[error("{rule}: process `{process}` is not the {role} of `{chan}`")]
    WrongEndpoint { rule: &'static str, process: Name, chan: Name, role: &'static str },
    #[error("{rule}: proof obligation failed: {why}")]
    Obligation { rule: &'static str, why: String },
    #[error("stuck: {0}")]
    Stuck(#[from] Stuck),
}

pub(crate) fn not_enabled(rule: &'static str, why: impl Into<String>) -> StepError {
    StepError::NotEnabled { rule, why: why.into() }
}

/// A checkpoint pushed on entry to a stable region.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frame {
    /// Where to resume: `E[(stable (λx.e)) □]`.
    pub cont: EvalContext,
    /// The value the region was entered with.
    pub resume: Expr,
    /// Process time before entering.
    pub time: Time,
    /// Channel times of this process's channels at entry.
    pub saved: BTreeMap<Name, Time>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProcState {
    pub id: Name,
    pub time: Time,
    /// Bottom first.
    pub stack: Vec<Frame>,
    pub expr: Expr,
}

/// Read access to the channel times a process can observe.
pub trait ChannelTimes {
    fn channel_time(&self, chan: &Name) -> Option<Time>;
    /// Channels that have `n` as an endpoint, in name order.
    fn channels_of(&self, n: &Name) -> Vec<Name>;
}

impl ProcState {
    /// `⟨n@0: •, (stable (λ_.e)) ()⟩`
    pub fn initial(id: Name, body: Expr) -> Self {
        Self {
            id,
            time: 0,
            stack: Vec::new(),
            expr: Expr::app(Expr::stable(Expr::lam("_", body)), Expr::Unit),
        }
    }

    pub fn redex(&self) -> Result<Option<Redex>, Stuck> {
        redex_of(&self.expr)
    }

    pub fn redex_kind(&self) -> Option<RedexKind> {
        self.redex().ok().flatten().map(|r| r.kind)
    }

    /// Backtracking mode: the current redex is `backtrack v`.
    pub fn is_backtracking(&self) -> bool {
        self.redex_kind() == Some(RedexKind::Backtrack)
    }

    /// Finished: either a value with nothing on the stack, or the body of
    /// the implicit outermost region has produced its value.
    pub fn is_done(&self) -> bool {
        match &self.expr {
            e if e.is_value() => self.stack.is_empty(),
            Expr::Active(v) => v.is_value() && self.stack.len() == 1,
            _ => false,
        }
    }

    /// The final value of a finished process.
    pub fn result(&self) -> Option<&Expr> {
        if !self.is_done() {
            return None;
        }
        match &self.expr {
            Expr::Active(v) => Some(v),
            v => Some(v),
        }
    }

    pub fn top(&self) -> Option<&Frame> {
        self.stack.last()
    }

    /// Saved time for `chan` in the top frame.
    pub fn top_saved(&self, chan: &Name) -> Option<Time> {
        self.top().and_then(|f| f.saved.get(chan).copied())
    }

    fn expect_redex(&self, rule: &'static str, kinds: &[RedexKind]) -> Result<Redex, StepError> {
        match self.redex()? {
            Some(r) if kinds.contains(&r.kind) => Ok(r),
            Some(r) => Err(not_enabled(rule, format!("`{}` has redex `{}`", self.id, r.expr))),
            None => Err(not_enabled(rule, format!("`{}` is a value", self.id))),
        }
    }
}

/// H1: β-reduction or primitive application.
pub fn local_step(p: &ProcState) -> Result<ProcState, StepError> {
    let r = p.expect_redex("H1", &[RedexKind::Beta, RedexKind::Prim])?;
    let Expr::App(f, a) = &r.expr else { unreachable!("application redex") };
    let reduced = match &**f {
        Expr::Lam(x, body) => subst(body, a, x),
        prim => apply_prim(prim, a)?,
    };
    Ok(ProcState { expr: r.ctx.plug(reduced), ..p.clone() })
}

/// H3: enter a stable region at a fresh time.
pub fn enter_stable(p: &ProcState, t_new: Time, chans: &impl ChannelTimes) -> Result<ProcState, StepError> {
    let r = p.expect_redex("H3", &[RedexKind::EnterStable])?;
    if t_new <= p.time {
        return Err(StepError::BadTime { rule: "H3", time: t_new, constraint: format!("> {}", p.time) });
    }
    let Expr::App(f, v) = &r.expr else { unreachable!("application redex") };
    let Expr::Stable(lam) = &**f else { unreachable!("stable redex") };
    let Expr::Lam(x, body) = &**lam else { unreachable!("stable value wraps a lambda") };
    let saved = chans
        .channels_of(&p.id)
        .into_iter()
        .map(|c| {
            let t = chans.channel_time(&c).expect("listed channel");
            (c, t)
        })
        .collect();
    let mut out = p.clone();
    out.stack.push(Frame {
        cont: r.ctx.clone().with(CtxFrame::AppArg((**f).clone())),
        resume: (**v).clone(),
        time: p.time,
        saved,
    });
    out.expr = r.ctx.plug(Expr::active(subst(body, v, x)));
    out.time = t_new;
    Ok(out)
}

/// H4: leave an active region normally.
pub fn exit_stable(p: &ProcState) -> Result<ProcState, StepError> {
    let r = p.expect_redex("H4", &[RedexKind::ExitStable])?;
    if p.stack.is_empty() {
        return Err(StepError::EmptyStack { rule: "H4" });
    }
    let Expr::Active(v) = r.expr else { unreachable!("active redex") };
    let mut out = p.clone();
    out.stack.pop();
    out.expr = r.ctx.plug(*v);
    Ok(out)
}

/// H5: abandon the current computation and backtrack with the top frame's
/// saved value.
pub fn spontaneous_backtrack(p: &ProcState) -> Result<ProcState, StepError> {
    let top = p.top().ok_or(StepError::EmptyStack { rule: "H5" })?;
    Ok(ProcState { expr: Expr::backtrack(top.resume.clone()), ..p.clone() })
}

/// Channels whose saved time in the top frame is later than the current one.
fn stale_channels(p: &ProcState, chans: &impl ChannelTimes) -> Vec<Name> {
    p.top()
        .map(|f| {
            f.saved
                .iter()
                .filter(|(c, &saved)| chans.channel_time(c).is_some_and(|now| now < saved))
                .map(|(c, _)| c.clone())
                .collect()
        })
        .unwrap_or_default()
}

/// H7: drop a frame pushed after the current time of one of its channels.
pub fn pop_frame(p: &ProcState, chans: &impl ChannelTimes) -> Result<ProcState, StepError> {
    p.expect_redex("H7", &[RedexKind::Backtrack])?;
    if p.stack.is_empty() {
        return Err(not_enabled("H7", "empty stack"));
    }
    if stale_channels(p, chans).is_empty() {
        return Err(not_enabled("H7", "top frame is not ahead of any channel"));
    }
    let mut out = p.clone();
    out.stack.pop();
    Ok(out)
}

/// Every channel in the top frame has exactly its saved time.
pub fn top_frame_consistent(p: &ProcState, chans: &impl ChannelTimes) -> bool {
    p.top().is_some_and(|f| f.saved.iter().all(|(c, &saved)| chans.channel_time(c) == Some(saved)))
}

/// H8: resume forward execution at the top frame's continuation with the
/// backtrack argument.
pub fn resume_forward(p: &ProcState, chans: &impl ChannelTimes) -> Result<ProcState, StepError> {
    let r = p.expect_redex("H8", &[RedexKind::Backtrack])?;
    let Some(_) = p.top() else {
        return Err(not_enabled("H8", "empty stack"));
    };
    if !top_frame_consistent(p, chans) {
        return Err(not_enabled("H8", "saved channel times differ from current ones"));
    }
    let Expr::Backtrack(v) = r.expr else { unreachable!("backtrack redex") };
    let mut out = p.clone();
    let frame = out.stack.pop().expect("checked");
    out.expr = frame.cont.plug(*v);
    out.time = frame.time;
    Ok(out)
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {{", self.cont, self.resume, self.time)?;
        for (i, (c, t)) in self.saved.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}->{t}")?;
        }
        write!(f, "}})")
    }
}

impl fmt::Display for ProcState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "proc {}@{}", self.id, self.time)?;
        for frame in &self.stack {
            writeln!(f, "  frame {frame}")?;
        }
        write!(f, "  expr {}", self.expr)
    }
}
