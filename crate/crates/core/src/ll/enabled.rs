use std::collections::BTreeSet;

use crate::calculus::{Expr, RedexKind};
use crate::hl::{local_step, pop_frame, StepError, Time};

use super::rules::resume_allowed;
use super::{apply, sending_on, ConfigLL, LlRule};

/// Every enabled rule instance, with fresh timestamps drawn from the `k`
/// smallest admissible values. Backtracking may start anywhere outside a
/// send in progress; no signal is needed.
pub fn ll_enabled(c: &ConfigLL, k: u64) -> Vec<LlRule> {
    let k = k.max(1);
    let mut out = Vec::new();
    for p in &c.procs {
        let proc = || p.id.clone();
        let Ok(Some(redex)) = p.redex() else {
            continue;
        };
        match redex.kind {
            RedexKind::Beta | RedexKind::Prim if local_step(p).is_ok() => out.push(LlRule::Local { proc: proc() }),
            RedexKind::EnterStable => {
                out.extend((1..=k).map(|j| LlRule::EnterStable { proc: proc(), time: p.time + j }));
            }
            RedexKind::ExitStable if !p.stack.is_empty() => out.push(LlRule::ExitStable { proc: proc() }),
            RedexKind::Backtrack => {
                if pop_frame(p, c).is_ok() {
                    out.push(LlRule::PopFrame { proc: proc() });
                }
                if resume_allowed(c, p) {
                    out.push(LlRule::Resume { proc: proc() });
                }
            }
            _ => {}
        }
        if !p.stack.is_empty() && redex.kind != RedexKind::Sending && redex.kind != RedexKind::Backtrack {
            out.push(LlRule::Backtrack { proc: proc() });
        }
        match &redex.expr {
            Expr::Send(chan, _) => {
                if let Ok(ch) = c.channel(chan) {
                    let lo = ch.r.t.max(p.time);
                    out.extend((1..=k).map(|j| LlRule::SendInit { proc: proc(), chan: chan.clone(), time: lo + j }));
                }
            }
            Expr::Recv(_, chan, _) => {
                if let Ok(ch) = c.channel(chan) {
                    let lo = ch.s.t.max(p.time + 1);
                    out.extend((0..k).map(|j| LlRule::RecvAck { proc: proc(), chan: chan.clone(), time: lo + j }));
                }
            }
            _ => {}
        }
        if let Some((chan, _)) = sending_on(p) {
            out.push(LlRule::SendComplete { proc: proc(), chan: chan.clone() });
            out.push(LlRule::RetractRequest { proc: proc(), chan: chan.clone() });
            out.push(LlRule::RetractComplete { proc: proc(), chan: chan.clone() });
            out.push(LlRule::RefusedComplete { proc: proc(), chan });
        }
        for chan in c.channels.iter().filter(|(_, ch)| ch.r.n == p.id).map(|(k, _)| k) {
            for also_back in [false, true] {
                out.push(LlRule::RetractAllow { proc: proc(), chan: chan.clone(), also_back });
            }
            if redex.kind == RedexKind::Backtrack {
                out.push(LlRule::FwdRefuse { proc: proc(), chan: chan.clone() });
                out.push(LlRule::RcvSignal { proc: proc(), chan: chan.clone() });
                for resume_forward in [false, true] {
                    out.push(LlRule::BackAck { proc: proc(), chan: chan.clone(), resume_forward });
                }
            }
        }
        if redex.kind == RedexKind::Backtrack {
            for (chan, ch) in c.channels.iter().filter(|(_, ch)| ch.s.n == p.id) {
                let mut targets: BTreeSet<Time> = p.stack.iter().filter_map(|f| f.saved.get(chan).copied()).collect();
                targets.insert(0);
                for time in targets.into_iter().filter(|&t| t < ch.r.t) {
                    out.push(LlRule::BackInit { proc: proc(), chan: chan.clone(), time });
                }
            }
        }
    }
    // Guards are checked once, centrally, by actually firing the rule. A
    // failed proof obligation is kept so that the caller sees it.
    out.retain(|r| !matches!(apply(c, r), Err(e) if !matches!(e, StepError::Obligation { .. })));
    out
}
