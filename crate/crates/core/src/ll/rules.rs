use crate::calculus::{subst, Expr, Name, Redex, RedexKind};
use crate::hl::{
    enter_stable, exit_stable, local_step, not_enabled, pop_frame, resume_forward, spontaneous_backtrack, Event,
    ProcState, StepError,
};
use crate::protocol::{self, ChannelLL, Dir};

use super::{ConfigLL, LlRule};

/// Deliberately broken rule variants for checking the checkers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LlFault {
    /// L3 completes a send without checking `s.t ≤ r.t`, so a retracted
    /// request is mistaken for a delivered one.
    L3IgnoresTime,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Sender,
    Receiver,
}

fn endpoint<'a>(c: &'a ConfigLL, rule: &'static str, p: &Name, chan: &Name, role: Role) -> Result<&'a ChannelLL, StepError> {
    let ch = c.channel(chan)?;
    let (owner, role_name) = match role {
        Role::Sender => (&ch.s.n, "sender"),
        Role::Receiver => (&ch.r.n, "receiver"),
    };
    if owner != p {
        return Err(StepError::WrongEndpoint { rule, process: p.clone(), chan: chan.clone(), role: role_name });
    }
    Ok(ch)
}

fn redex(p: &ProcState, rule: &'static str, kind: RedexKind) -> Result<Redex, StepError> {
    match p.redex()? {
        Some(r) if r.kind == kind => Ok(r),
        Some(r) => Err(not_enabled(rule, format!("`{}` has redex `{}`", p.id, r.expr))),
        None => Err(not_enabled(rule, format!("`{}` is a value", p.id))),
    }
}

/// The value of `send ℓ v` / `send̲ ℓ v`, checking the channel matches.
fn send_arg(r: &Redex, rule: &'static str, chan: &Name) -> Result<Expr, StepError> {
    match &r.expr {
        Expr::Send(c, v) | Expr::Sending(c, v) if c == chan => Ok((**v).clone()),
        other => Err(not_enabled(rule, format!("`{other}` is not on `{chan}`"))),
    }
}

pub fn apply(c: &ConfigLL, rule: &LlRule) -> Result<(ConfigLL, Option<Event>), StepError> {
    apply_with(c, rule, None)
}

pub fn apply_with(c: &ConfigLL, rule: &LlRule, fault: Option<LlFault>) -> Result<(ConfigLL, Option<Event>), StepError> {
    let idx = c.proc_index(rule.proc())?;
    let p = &c.procs[idx];
    let mut out = c.clone();
    let mut event = None;
    let set_chan = |out: &mut ConfigLL, chan: &Name, ch: ChannelLL| {
        out.channels.insert(chan.clone(), ch);
    };
    let new_proc: ProcState = match rule {
        LlRule::Local { .. } => local_step(p)?,
        LlRule::EnterStable { time, .. } => enter_stable(p, *time, c)?,
        LlRule::ExitStable { .. } => exit_stable(p)?,
        LlRule::PopFrame { .. } => pop_frame(p, c)?,
        LlRule::Backtrack { .. } => {
            if p.redex_kind() == Some(RedexKind::Sending) {
                return Err(not_enabled("H5", "send in progress"));
            }
            spontaneous_backtrack(p)?
        }
        LlRule::Resume { .. } => {
            quiescent(c, p)?;
            resume_forward(p, c)?
        }
        LlRule::SendInit { chan, time, .. } => {
            let ch = endpoint(c, "L1", &p.id, chan, Role::Sender)?;
            let r = redex(p, "L1", RedexKind::Send)?;
            let v = send_arg(&r, "L1", chan)?;
            if *time <= p.time {
                return Err(StepError::BadTime { rule: "L1", time: *time, constraint: format!("> {}", p.time) });
            }
            set_chan(&mut out, chan, protocol::t1_fwd_request(ch, *time, v.clone())?);
            ProcState { expr: r.ctx.plug(Expr::Sending(chan.clone(), Box::new(v))), ..p.clone() }
        }
        LlRule::RecvAck { chan, time, .. } => {
            let ch = endpoint(c, "L2", &p.id, chan, Role::Receiver)?;
            let r = redex(p, "L2", RedexKind::Recv)?;
            let Expr::Recv(x, on, body) = &r.expr else { unreachable!("recv redex") };
            if on != chan {
                return Err(not_enabled("L2", format!("`{}` receives on `{on}`", p.id)));
            }
            if *time <= p.time {
                return Err(StepError::BadTime { rule: "L2", time: *time, constraint: format!("> {}", p.time) });
            }
            let next = protocol::t2_fwd_ack(ch, *time)?;
            let v = ch.s.v.clone();
            set_chan(&mut out, chan, next);
            event = Some(Event::Comm { chan: chan.clone(), time: *time, value: v.clone() });
            ProcState { time: *time, expr: r.ctx.plug(subst(body, &v, x)), ..p.clone() }
        }
        LlRule::SendComplete { chan, .. } => {
            let ch = endpoint(c, "L3", &p.id, chan, Role::Sender)?;
            let r = redex(p, "L3", RedexKind::Sending)?;
            send_arg(&r, "L3", chan)?;
            if !ch.sender_has_token() {
                return Err(not_enabled("L3", "receiver holds the token"));
            }
            if ch.s.d == Dir::B {
                return Err(not_enabled("L3", "backward request outstanding"));
            }
            if ch.s.t > ch.r.t && fault != Some(LlFault::L3IgnoresTime) {
                return Err(not_enabled("L3", "request was not acknowledged"));
            }
            ProcState { time: ch.r.t, expr: r.ctx.plug(Expr::Unit), ..p.clone() }
        }
        LlRule::FwdRefuse { chan, .. } => {
            let ch = endpoint(c, "L4", &p.id, chan, Role::Receiver)?;
            redex(p, "L4", RedexKind::Backtrack)?;
            if ch.r.t == 0 {
                return Err(not_enabled("L4", "channel time is 0"));
            }
            set_chan(&mut out, chan, protocol::t3_fwd_refuse(ch)?);
            p.clone()
        }
        LlRule::BackInit { chan, time, .. } => {
            let ch = endpoint(c, "L5", &p.id, chan, Role::Sender)?;
            redex(p, "L5", RedexKind::Backtrack)?;
            set_chan(&mut out, chan, protocol::t4_back_request(ch, *time)?);
            p.clone()
        }
        LlRule::BackAck { chan, resume_forward, .. } => {
            let ch = endpoint(c, "L6", &p.id, chan, Role::Receiver)?;
            redex(p, "L6", RedexKind::Backtrack)?;
            let next = protocol::t5_back_ack(ch, *resume_forward)?;
            if !resume_forward && ch.s.t == 0 {
                return Err(not_enabled("L6", "nothing left to unwind below 0"));
            }
            if ch.s.t >= ch.r.t {
                return Err(StepError::Obligation { rule: "L6", why: format!("rewind to {} from {}", ch.s.t, ch.r.t) });
            }
            set_chan(&mut out, chan, next);
            event = Some(Event::Rewind { chan: chan.clone(), time: ch.s.t });
            p.clone()
        }
        LlRule::RcvSignal { chan, .. } => {
            let ch = endpoint(c, "L7", &p.id, chan, Role::Receiver)?;
            redex(p, "L7", RedexKind::Backtrack)?;
            set_chan(&mut out, chan, protocol::t8_rcv_signal_back(ch)?);
            p.clone()
        }
        LlRule::RetractRequest { chan, .. } => {
            let ch = endpoint(c, "L8", &p.id, chan, Role::Sender)?;
            let r = redex(p, "L8", RedexKind::Sending)?;
            send_arg(&r, "L8", chan)?;
            set_chan(&mut out, chan, protocol::t6_retract_request(ch)?);
            p.clone()
        }
        LlRule::RetractAllow { chan, also_back, .. } => {
            let ch = endpoint(c, "L9", &p.id, chan, Role::Receiver)?;
            let next = protocol::t7_retract_allow(ch, *also_back)?;
            if *also_back && ch.r.t == 0 {
                return Err(not_enabled("L9", "nothing to unwind at time 0"));
            }
            // The sender may be absent when stepping a partial view.
            if let Ok(sender) = c.proc(&ch.s.n) {
                let in_send = super::sending_on(sender).is_some_and(|(on, _)| &on == chan);
                if !in_send || ch.s.t <= ch.r.t {
                    return Err(StepError::Obligation {
                        rule: "L9",
                        why: format!("sender in send: {in_send}, s.t={} r.t={}", ch.s.t, ch.r.t),
                    });
                }
            }
            set_chan(&mut out, chan, next);
            p.clone()
        }
        LlRule::RetractComplete { chan, .. } => back_to_send(c, p, chan, "L10", Dir::I)?,
        LlRule::RefusedComplete { chan, .. } => back_to_send(c, p, chan, "L10r", Dir::F)?,
    };
    out.procs[idx] = new_proc;
    Ok((out, event))
}

/// L10 and its refused-request twin: the request did not go through, so the
/// sender returns to the unstarted `send`.
fn back_to_send(c: &ConfigLL, p: &ProcState, chan: &Name, rule: &'static str, d: Dir) -> Result<ProcState, StepError> {
    let ch = endpoint(c, rule, &p.id, chan, Role::Sender)?;
    let r = redex(p, rule, RedexKind::Sending)?;
    let v = send_arg(&r, rule, chan)?;
    if !ch.sender_has_token() {
        return Err(not_enabled(rule, "receiver holds the token"));
    }
    if ch.s.d != d {
        return Err(not_enabled(rule, format!("sender flag is {}", ch.s.d)));
    }
    if ch.s.t <= ch.r.t {
        return Err(not_enabled(rule, "request was acknowledged"));
    }
    Ok(ProcState { expr: r.ctx.plug(Expr::Send(chan.clone(), Box::new(v))), ..p.clone() })
}

/// The extra condition on resuming: no handshake may be in flight on the
/// process's channels, and each sits at exactly the saved time.
fn quiescent(c: &ConfigLL, p: &ProcState) -> Result<(), StepError> {
    let Some(top) = p.top() else { return Ok(()) };
    for (chan, &saved) in &top.saved {
        let ch = c.channel(chan)?;
        let ok = if ch.s.n == p.id { ch.sender_has_token() } else { ch.r.d == Dir::F };
        if !ok || ch.r.t != saved {
            return Err(not_enabled("H8", format!("`{chan}` is not quiescent at {saved}")));
        }
    }
    Ok(())
}

pub(crate) fn resume_allowed(c: &ConfigLL, p: &ProcState) -> bool {
    quiescent(c, p).is_ok() && resume_forward(p, c).is_ok()
}
