use std::collections::BTreeMap;

use super::*;
use crate::calculus::{name, parse_expr, parse_program, CtxFrame, EvalContext, Op};
use crate::hl::{Event, Frame, ProcState};
use crate::protocol::Dir;

fn n(s: &str) -> Name {
    name(s)
}

fn e(src: &str) -> Expr {
    parse_expr(src).unwrap()
}

fn proc(id: &str, time: Time, stack: Vec<Frame>, expr: Expr) -> ProcState {
    ProcState { id: n(id), time, stack, expr }
}

fn frame(fun: &str, time: Time, saved_l: Time) -> Frame {
    Frame {
        cont: EvalContext::hole().with(CtxFrame::AppArg(Expr::stable(e(fun)))),
        resume: Expr::Int(0),
        time,
        saved: [(n("l"), saved_l)].into_iter().collect(),
    }
}

fn one_channel(p1: ProcState, p2: ProcState) -> ConfigLL {
    ConfigLL {
        channels: [(n("l"), ChannelLL::new(n("n1"), n("n2")))].into_iter().collect(),
        procs: vec![p1, p2],
    }
}

fn handshake() -> ConfigLL {
    one_channel(proc("n1", 5, vec![], e("(send l 10)")), proc("n2", 4, vec![], e("(recv x l (+ x 1))")))
}

fn step(c: &ConfigLL, rule: LlRule) -> ConfigLL {
    apply(c, &rule).unwrap_or_else(|err| panic!("{rule}: {err}")).0
}

fn l1(time: Time) -> LlRule {
    LlRule::SendInit { proc: n("n1"), chan: n("l"), time }
}

#[test]
fn three_step_handshake() {
    let c = handshake();
    assert_eq!(policy_step(&c, &n("n1")), Some(l1(6)));
    let c = step(&c, l1(6));
    let ch = &c.channels[&n("l")];
    assert_eq!((ch.s.t, ch.s.b, ch.s.d, &ch.s.v), (6, true, Dir::F, &Expr::Int(10)));
    assert_eq!(c.procs[0].expr, Expr::sending("l", Expr::Int(10)));
    assert_eq!(c.procs[0].time, 5);

    let ack = LlRule::RecvAck { proc: n("n2"), chan: n("l"), time: 6 };
    assert_eq!(policy_step(&c, &n("n2")), Some(ack.clone()));
    let (c, ev) = apply(&c, &ack).unwrap();
    assert_eq!(ev, Some(Event::Comm { chan: n("l"), time: 6, value: Expr::Int(10) }));
    assert_eq!((c.procs[1].time, &c.procs[1].expr), (6, &e("(+ 10 1)")));
    assert_eq!(c.channels[&n("l")].r.t, 6);

    let done = LlRule::SendComplete { proc: n("n1"), chan: n("l") };
    assert_eq!(policy_step(&c, &n("n1")), Some(done.clone()));
    let c = step(&c, done);
    assert_eq!((c.procs[0].time, &c.procs[0].expr), (6, &Expr::Unit));
}

#[test]
fn send_guards() {
    let mut c = handshake();
    c.channels.get_mut(&n("l")).unwrap().r.d = Dir::B;
    assert!(matches!(apply(&c, &l1(6)), Err(StepError::NotEnabled { .. })));
    assert!(matches!(apply(&handshake(), &l1(5)), Err(StepError::BadTime { .. })));
    let wrong = LlRule::SendInit { proc: n("n2"), chan: n("l"), time: 6 };
    assert!(matches!(apply(&handshake(), &wrong), Err(StepError::WrongEndpoint { .. })));

    let pending = step(&handshake(), l1(6));
    let complete = LlRule::SendComplete { proc: n("n1"), chan: n("l") };
    assert!(apply(&pending, &complete).is_err());
    assert!(apply(&pending, &LlRule::Backtrack { proc: n("n1") }).is_err());
}

#[test]
fn receive_guards() {
    let pending = step(&handshake(), l1(6));
    let ack = LlRule::RecvAck { proc: n("n2"), chan: n("l"), time: 6 };
    let mut back = pending.clone();
    back.channels.get_mut(&n("l")).unwrap().s.d = Dir::B;
    assert!(apply(&back, &ack).is_err());
    let mut refusing = pending.clone();
    refusing.channels.get_mut(&n("l")).unwrap().r.d = Dir::B;
    assert!(apply(&refusing, &ack).is_err());
    assert!(apply(&pending, &LlRule::RecvAck { proc: n("n2"), chan: n("l"), time: 5 }).is_err());
}

/// Sender blocked in `send̲` on `l`, receiver waiting on another channel.
fn retraction_setup() -> ConfigLL {
    let mut c = step(&handshake(), l1(6));
    c.procs[1] = proc("n2", 4, vec![frame("(lam z z)", 1, 0)], e("(recv x l x)"));
    c
}

#[test]
fn retraction_round_trip() {
    let c = retraction_setup();
    let c = step(&c, LlRule::RetractRequest { proc: n("n1"), chan: n("l") });
    assert_eq!(c.channels[&n("l")].s.d, Dir::I);
    assert!(apply(&c, &LlRule::RetractComplete { proc: n("n1"), chan: n("l") }).is_err());

    let allow = LlRule::RetractAllow { proc: n("n2"), chan: n("l"), also_back: false };
    let c = step(&c, allow);
    assert!(!c.channels[&n("l")].sync);
    assert!(apply(&c, &LlRule::SendComplete { proc: n("n1"), chan: n("l") }).is_err());
    assert_eq!(policy_step(&c, &n("n1")), Some(LlRule::RetractComplete { proc: n("n1"), chan: n("l") }));
    let c = step(&c, LlRule::RetractComplete { proc: n("n1"), chan: n("l") });
    assert_eq!(c.procs[0].expr, e("(send l 10)"));
}

#[test]
fn retraction_allow_checks_its_obligation() {
    let mut c = step(&retraction_setup(), LlRule::RetractRequest { proc: n("n1"), chan: n("l") });
    c.procs[0].expr = Expr::Unit;
    let allow = LlRule::RetractAllow { proc: n("n2"), chan: n("l"), also_back: false };
    assert!(matches!(apply(&c, &allow), Err(StepError::Obligation { rule: "L9", .. })));
}

#[test]
fn acknowledgement_can_win_the_retraction_race() {
    let c = step(&retraction_setup(), LlRule::RetractRequest { proc: n("n1"), chan: n("l") });
    let c = step(&c, LlRule::RecvAck { proc: n("n2"), chan: n("l"), time: 6 });
    assert!(apply(&c, &LlRule::RetractComplete { proc: n("n1"), chan: n("l") }).is_err());
    let c = step(&c, LlRule::SendComplete { proc: n("n1"), chan: n("l") });
    assert_eq!(c.procs[0].expr, Expr::Unit);
}

/// A completed handshake at time 3 with both sides inside a region entered
/// at 0, the receiver now backtracking.
fn after_comm() -> ConfigLL {
    let mut c = one_channel(
        proc("n1", 3, vec![frame("(lam a a)", 0, 0)], e("(send l 1)")),
        proc("n2", 3, vec![frame("(lam z z)", 0, 0)], Expr::backtrack(Expr::Int(0))),
    );
    let ch = c.channels.get_mut(&n("l")).unwrap();
    ch.s.t = 3;
    ch.r.t = 3;
    c
}

#[test]
fn receiver_signals_and_sender_rewinds() {
    let c = after_comm();
    assert_eq!(policy_step(&c, &n("n2")), Some(LlRule::RcvSignal { proc: n("n2"), chan: n("l") }));
    let c = step(&c, LlRule::RcvSignal { proc: n("n2"), chan: n("l") });
    assert_eq!(c.channels[&n("l")].r.d, Dir::B);
    assert!(apply(&c, &l1(4)).is_err());
    assert_eq!(policy_step(&c, &n("n1")), Some(LlRule::Backtrack { proc: n("n1") }));
    let c = step(&c, LlRule::Backtrack { proc: n("n1") });
    let back = LlRule::BackInit { proc: n("n1"), chan: n("l"), time: 0 };
    assert_eq!(policy_step(&c, &n("n1")), Some(back.clone()));
    let c = step(&c, back);
    let ack = LlRule::BackAck { proc: n("n2"), chan: n("l"), resume_forward: true };
    assert_eq!(policy_step(&c, &n("n2")), Some(ack.clone()));
    let (c, ev) = apply(&c, &ack).unwrap();
    assert_eq!(ev, Some(Event::Rewind { chan: n("l"), time: 0 }));
    assert_eq!(policy_step(&c, &n("n1")), Some(LlRule::Resume { proc: n("n1") }));
    assert_eq!(policy_step(&c, &n("n2")), Some(LlRule::Resume { proc: n("n2") }));
}

#[test]
fn signal_needs_history() {
    let mut c = after_comm();
    c.channels.get_mut(&n("l")).unwrap().r.t = 0;
    assert!(apply(&c, &LlRule::RcvSignal { proc: n("n2"), chan: n("l") }).is_err());
}

#[test]
fn backtracking_receiver_refuses_pending_request() {
    let mut c = after_comm();
    c.procs[0].expr = e("(send l 1)");
    let c = step(&c, l1(4));
    assert_eq!(policy_step(&c, &n("n2")), Some(LlRule::FwdRefuse { proc: n("n2"), chan: n("l") }));
    let c = step(&c, LlRule::FwdRefuse { proc: n("n2"), chan: n("l") });
    assert_eq!(c.channels[&n("l")].r.d, Dir::B);
    let back = LlRule::RefusedComplete { proc: n("n1"), chan: n("l") };
    assert_eq!(policy_step(&c, &n("n1")), Some(back.clone()));
    assert_eq!(step(&c, back).procs[0].expr, e("(send l 1)"));
}

#[test]
fn back_ack_can_ask_for_more() {
    let mut c = after_comm();
    c.procs[0].expr = Expr::backtrack(Expr::Int(0));
    let c = step(&c, LlRule::BackInit { proc: n("n1"), chan: n("l"), time: 2 });
    assert!(apply(&c, &LlRule::BackInit { proc: n("n1"), chan: n("l"), time: 1 }).is_err());
    let (c, _) = apply(&c, &LlRule::BackAck { proc: n("n2"), chan: n("l"), resume_forward: false }).unwrap();
    assert_eq!((c.channels[&n("l")].r.t, c.channels[&n("l")].r.d), (2, Dir::B));
    assert!(apply(&c, &LlRule::Resume { proc: n("n2") }).is_err());
}

#[test]
fn resume_waits_for_quiescence() {
    let mut c = after_comm();
    c.procs[0].expr = Expr::backtrack(Expr::Int(0));
    let ch = c.channels.get_mut(&n("l")).unwrap();
    ch.r.t = 0;
    ch.s.t = 0;
    assert!(apply(&c, &LlRule::Resume { proc: n("n1") }).is_ok());
    c.channels.get_mut(&n("l")).unwrap().r.d = Dir::B;
    assert!(apply(&c, &LlRule::Resume { proc: n("n2") }).is_err());
    assert!(apply(&c, &LlRule::Resume { proc: n("n1") }).is_ok());
    let ch = c.channels.get_mut(&n("l")).unwrap();
    ch.r.d = Dir::F;
    ch.s.b = !ch.s.b;
    assert!(apply(&c, &LlRule::Resume { proc: n("n1") }).is_err());
}

#[test]
fn local_rules_read_receiver_time() {
    let mut c = one_channel(proc("n1", 5, vec![], e("(app (stable (lam x x)) 1)")), proc("n2", 0, vec![], Expr::Unit));
    c.channels.get_mut(&n("l")).unwrap().r.t = 4;
    c.channels.get_mut(&n("l")).unwrap().s.t = 9;
    let c = step(&c, LlRule::EnterStable { proc: n("n1"), time: 6 });
    assert_eq!(c.procs[0].stack[0].saved, BTreeMap::from([(n("l"), 4)]));
    let plus = one_channel(proc("n1", 0, vec![], e("(+ 1 2)")), proc("n2", 0, vec![], Expr::Unit));
    let plus = step(&plus, LlRule::Local { proc: n("n1") });
    assert_eq!(plus.procs[0].expr, Expr::app(Expr::Prim(Op::Add, vec![Expr::Int(1)]), Expr::Int(2)));
}

/// The backtracking walkthrough, low-level edition: n1 rewinds its way to
/// the outer region through two backward transactions.
#[test]
fn walkthrough_reaches_the_same_resume_point() {
    let seven_plus = EvalContext::hole().with(CtxFrame::AppArg(Expr::Prim(Op::Add, vec![Expr::Int(7)])));
    let mut c = one_channel(
        proc("n1", 9, vec![frame("(lam x x)", 3, 2), frame("(lam y y)", 7, 5)], seven_plus.plug(Expr::backtrack(Expr::Int(100)))),
        proc("n2", 13, vec![frame("(lam z z)", 2, 2)], Expr::backtrack(Expr::Int(0))),
    );
    let ch = c.channels.get_mut(&n("l")).unwrap();
    ch.s.t = 8;
    ch.r.t = 8;
    let mut events = Vec::new();
    let mut c2 = c;
    while c2.procs[0].stack.len() == 2 || c2.procs[0].is_backtracking() {
        let rule = c2.procs.iter().find_map(|p| policy_step(&c2, &p.id)).expect("progress");
        let (next, ev) = apply(&c2, &rule).unwrap();
        events.extend(ev);
        c2 = next;
    }
    let lines: Vec<String> = events.iter().map(ToString::to_string).collect();
    assert_eq!(lines, ["rewind l@5", "rewind l@2"]);
    assert_eq!(c2.channels[&n("l")].r.t, 2);
    assert_eq!(c2.procs[0].time, 3);
    assert_eq!(c2.procs[0].expr, Expr::app(Expr::stable(e("(lam x x)")), Expr::Int(100)));
}

#[test]
fn fig1_policy_run_retracts_through_two_rewinds() {
    let c = ConfigLL::initial(&parse_program(include_str!("../../programs/fig1.rcsp")).unwrap());
    let run = run_policy(&c, 500);
    assert!(run.quiescent && run.config.is_terminated());
    let lines: Vec<String> = run.events().iter().map(ToString::to_string).collect();
    assert_eq!(lines, ["comm c@3 2", "comm c@5 2", "rewind c@3", "rewind c@0", "comm c@3 2", "comm c@5 2"]);
    assert_eq!(run.config.proc("p2").unwrap().result(), Some(&Expr::Int(4)));
}

#[test]
fn every_policy_choice_is_in_the_free_enumeration() {
    let mut c = ConfigLL::initial(&parse_program(include_str!("../../programs/fig1.rcsp")).unwrap());
    for _ in 0..100 {
        let Some(rule) = c.procs.iter().find_map(|p| policy_step(&c, &p.id)) else { break };
        assert!(ll_enabled(&c, 1).contains(&rule), "{rule} missing");
        c = step(&c, rule);
    }
}

#[test]
fn rule_display() {
    assert_eq!(l1(3).to_string(), "L1 n1 l 3");
    assert_eq!(LlRule::BackAck { proc: n("p"), chan: n("c"), resume_forward: true }.to_string(), "L6 p c 1");
    assert_eq!(LlRule::PopFrame { proc: n("p") }.to_string(), "H7 p");
}
