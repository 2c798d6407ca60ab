//! The two-phase channel cell.
//!
//! A channel is a pair of single-writer registers plus a shadow bit `sync`
//! that no endpoint can read. The sender holds the token when the two token
//! bits agree, the receiver when they differ; every transition is guarded by
//! who holds it, and all but `t6`/`t8` hand it over.

use std::fmt;

use crate::calculus::{Expr, Name};
use crate::hl::{StepError, Time};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dir {
    /// Forward.
    F,
    /// Backward.
    B,
    /// Retraction requested (sender only).
    I,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SenderHalf {
    pub n: Name,
    pub t: Time,
    pub b: bool,
    pub d: Dir,
    pub v: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReceiverHalf {
    pub n: Name,
    pub t: Time,
    pub b: bool,
    pub d: Dir,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelLL {
    pub s: SenderHalf,
    pub r: ReceiverHalf,
    /// Shadow variable: did the last transaction synchronise?
    pub sync: bool,
}

/// Which endpoint performs a transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Sender,
    Receiver,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transition {
    FwdRequest { time: Time, value: Expr },
    FwdAck { time: Time },
    FwdRefuse,
    BackRequest { time: Time },
    BackAck { resume_forward: bool },
    RetractRequest,
    RetractAllow { also_back: bool },
    RcvSignalBack,
}

impl Transition {
    pub fn tag(&self) -> &'static str {
        match self {
            Transition::FwdRequest { .. } => "t1",
            Transition::FwdAck { .. } => "t2",
            Transition::FwdRefuse => "t3",
            Transition::BackRequest { .. } => "t4",
            Transition::BackAck { .. } => "t5",
            Transition::RetractRequest => "t6",
            Transition::RetractAllow { .. } => "t7",
            Transition::RcvSignalBack => "t8",
        }
    }

    pub fn side(&self) -> Side {
        match self {
            Transition::FwdRequest { .. } | Transition::BackRequest { .. } | Transition::RetractRequest => Side::Sender,
            _ => Side::Receiver,
        }
    }

    /// Everything except the two flag raises passes the token.
    pub fn moves_token(&self) -> bool {
        !matches!(self, Transition::RetractRequest | Transition::RcvSignalBack)
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::FwdRequest { time, value } => write!(f, "t1({time},{value})"),
            Transition::FwdAck { time } => write!(f, "t2({time})"),
            Transition::BackRequest { time } => write!(f, "t4({time})"),
            Transition::BackAck { resume_forward } => write!(f, "t5({})", u8::from(*resume_forward)),
            Transition::RetractAllow { also_back } => write!(f, "t7({})", u8::from(*also_back)),
            other => f.write_str(other.tag()),
        }
    }
}

/// Deliberately broken variants, used to check that the checkers notice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolFault {
    /// `t2` leaves `sync` alone.
    T2NoSync,
    /// `t5` leaves `sync` alone.
    T5NoSync,
    /// `t7` leaves `sync` alone.
    T7NoSync,
}

fn guard(rule: &'static str, ok: bool, why: &str) -> Result<(), StepError> {
    if ok {
        Ok(())
    } else {
        Err(crate::hl::not_enabled(rule, why))
    }
}

impl ChannelLL {
    /// A fresh channel: times 0, sender holds the token, both forward.
    pub fn new(sender: Name, receiver: Name) -> Self {
        Self {
            s: SenderHalf { n: sender, t: 0, b: false, d: Dir::F, v: Expr::Unit },
            r: ReceiverHalf { n: receiver, t: 0, b: false, d: Dir::F },
            sync: true,
        }
    }

    pub fn sender_has_token(&self) -> bool {
        self.s.b == self.r.b
    }

    /// `(s.b = r.b) ⇒ ((s.t ≤ r.t) ⇔ sync)`
    pub fn key_invariant(&self) -> bool {
        !self.sender_has_token() || ((self.s.t <= self.r.t) == self.sync)
    }

    /// What the sender can conclude from its own view: did its last request
    /// go through?
    pub fn sender_infers_sync(&self) -> Result<bool, StepError> {
        guard("infer", self.sender_has_token(), "sender lacks the token")?;
        Ok(self.s.t <= self.r.t)
    }

    pub fn apply(&self, tr: &Transition, fault: Option<ProtocolFault>) -> Result<ChannelLL, StepError> {
        let mut out = match tr {
            Transition::FwdRequest { time, value } => t1_fwd_request(self, *time, value.clone()),
            Transition::FwdAck { time } => t2_fwd_ack(self, *time),
            Transition::FwdRefuse => t3_fwd_refuse(self),
            Transition::BackRequest { time } => t4_back_request(self, *time),
            Transition::BackAck { resume_forward } => t5_back_ack(self, *resume_forward),
            Transition::RetractRequest => t6_retract_request(self),
            Transition::RetractAllow { also_back } => t7_retract_allow(self, *also_back),
            Transition::RcvSignalBack => t8_rcv_signal_back(self),
        }?;
        let skip_sync = matches!(
            (tr, fault),
            (Transition::FwdAck { .. }, Some(ProtocolFault::T2NoSync))
                | (Transition::BackAck { .. }, Some(ProtocolFault::T5NoSync))
                | (Transition::RetractAllow { .. }, Some(ProtocolFault::T7NoSync))
        );
        if skip_sync {
            out.sync = self.sync;
        }
        Ok(out)
    }
}

pub fn t1_fwd_request(ch: &ChannelLL, t_new: Time, v: Expr) -> Result<ChannelLL, StepError> {
    guard("t1", ch.sender_has_token(), "receiver holds the token")?;
    guard("t1", ch.r.d == Dir::F, "receiver is not accepting forward")?;
    guard("t1", t_new > ch.r.t, "request time not after receiver time")?;
    let mut out = ch.clone();
    out.s.t = t_new;
    out.s.b = !ch.s.b;
    out.s.d = Dir::F;
    out.s.v = v;
    Ok(out)
}

pub fn t2_fwd_ack(ch: &ChannelLL, t_new: Time) -> Result<ChannelLL, StepError> {
    guard("t2", !ch.sender_has_token(), "sender holds the token")?;
    guard("t2", matches!(ch.s.d, Dir::F | Dir::I), "no forward request pending")?;
    guard("t2", ch.r.d == Dir::F, "receiver is not forward")?;
    guard("t2", t_new >= ch.s.t, "ack time before request time")?;
    let mut out = ch.clone();
    out.r.t = t_new;
    out.r.b = !ch.r.b;
    out.sync = true;
    Ok(out)
}

pub fn t3_fwd_refuse(ch: &ChannelLL) -> Result<ChannelLL, StepError> {
    guard("t3", !ch.sender_has_token(), "sender holds the token")?;
    guard("t3", ch.s.d == Dir::F, "no forward request pending")?;
    let mut out = ch.clone();
    out.r.b = !ch.r.b;
    out.r.d = Dir::B;
    out.sync = false;
    Ok(out)
}

pub fn t4_back_request(ch: &ChannelLL, t_new: Time) -> Result<ChannelLL, StepError> {
    guard("t4", ch.sender_has_token(), "receiver holds the token")?;
    guard("t4", t_new < ch.r.t, "backward time not before receiver time")?;
    let mut out = ch.clone();
    out.s.t = t_new;
    out.s.b = !ch.s.b;
    out.s.d = Dir::B;
    Ok(out)
}

pub fn t5_back_ack(ch: &ChannelLL, resume_forward: bool) -> Result<ChannelLL, StepError> {
    guard("t5", !ch.sender_has_token(), "sender holds the token")?;
    guard("t5", ch.s.d == Dir::B, "no backward request pending")?;
    let mut out = ch.clone();
    out.r.t = ch.s.t;
    out.r.b = !ch.r.b;
    out.r.d = if resume_forward { Dir::F } else { Dir::B };
    out.sync = true;
    Ok(out)
}

pub fn t6_retract_request(ch: &ChannelLL) -> Result<ChannelLL, StepError> {
    guard("t6", !ch.sender_has_token(), "sender holds the token")?;
    guard("t6", ch.s.d == Dir::F, "no forward request pending")?;
    let mut out = ch.clone();
    out.s.d = Dir::I;
    Ok(out)
}

pub fn t7_retract_allow(ch: &ChannelLL, also_back: bool) -> Result<ChannelLL, StepError> {
    guard("t7", !ch.sender_has_token(), "sender holds the token")?;
    guard("t7", ch.s.d == Dir::I, "no retraction pending")?;
    let mut out = ch.clone();
    out.r.b = !ch.r.b;
    if also_back {
        out.r.d = Dir::B;
    }
    out.sync = false;
    Ok(out)
}

pub fn t8_rcv_signal_back(ch: &ChannelLL) -> Result<ChannelLL, StepError> {
    guard("t8", ch.sender_has_token(), "receiver holds the token")?;
    guard("t8", ch.r.t > 0, "nothing to unwind")?;
    let mut out = ch.clone();
    out.r.d = Dir::B;
    Ok(out)
}

impl fmt::Display for Dir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dir::F => "F",
            Dir::B => "B",
            Dir::I => "I",
        })
    }
}

/// `s=(n,t,b,d,v) r=(n,t,b,d) sync=<0|1>`
impl fmt::Display for ChannelLL {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (s, r) = (&self.s, &self.r);
        write!(
            f,
            "s=({},{},{},{},{}) r=({},{},{},{}) sync={}",
            s.n,
            s.t,
            u8::from(s.b),
            s.d,
            s.v,
            r.n,
            r.t,
            u8::from(r.b),
            r.d,
            u8::from(self.sync)
        )
    }
}
