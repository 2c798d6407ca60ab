use super::*;
use crate::calculus::parse_program;
use crate::hl::committed_events;
use crate::refinement::check_trace;

fn program(src: &str) -> Program {
    parse_program(src).unwrap()
}

fn fig1() -> Program {
    program(include_str!("../../programs/fig1.rcsp"))
}

const LONG: Duration = Duration::from_secs(20);

#[test]
fn fig1_backtracks_and_reexecutes() {
    let mut sys = System::spawn(&fig1(), 1).unwrap();
    let out = sys.run(LONG);
    let Outcome::Terminated { values } = out else { panic!("{out:?}") };
    assert_eq!(values.iter().find(|(n, _)| &**n == "p2").unwrap().1, Expr::Int(4));
    let kinds: Vec<String> = sys.events().iter().map(|e| e.to_string()).collect();
    assert_eq!(kinds, ["comm c@3 2", "comm c@5 2", "rewind c@3", "rewind c@0", "comm c@3 2", "comm c@5 2"]);
    assert_eq!(committed_events(&sys.events()).len(), 2);
    assert_eq!(sys.audit(), Vec::<String>::new());
}

#[test]
fn seeded_runs_replay_on_the_stepper() {
    let p = fig1();
    for seed in 0..100 {
        let mut sys = System::spawn(&p, seed).unwrap();
        let out = sys.run(LONG);
        assert!(matches!(out, Outcome::Terminated { .. }), "seed {seed}: {out:?}");
        let report = check_trace(sys.initial(), &sys.schedule(), None)
            .unwrap_or_else(|e| panic!("seed {seed}: {e:?}"));
        assert_eq!(report.steps.len(), sys.log().len());
        assert_eq!(sys.audit(), Vec::<String>::new(), "seed {seed}");
    }
}

#[test]
fn chain_replays_too() {
    let p = program(include_str!("../../programs/chain3.rcsp"));
    for seed in 0..10 {
        let mut sys = System::spawn(&p, seed).unwrap();
        assert!(matches!(sys.run(LONG), Outcome::Terminated { .. }), "seed {seed}");
        check_trace(sys.initial(), &sys.schedule(), None).unwrap_or_else(|e| panic!("seed {seed}: {e:?}"));
    }
}

#[test]
fn mismatch_is_stuck_in_send() {
    let mut sys = System::spawn(&program(include_str!("../../programs/mismatch.rcsp")), 0).unwrap();
    let Outcome::Stuck { dump } = sys.run(LONG) else { panic!() };
    assert!(dump.contains("send"), "{dump}");
}

#[test]
fn empty_system_completes_at_once() {
    let mut sys = System::spawn(&program("(system)"), 0).unwrap();
    assert_eq!(sys.run(Duration::ZERO), Outcome::Terminated { values: vec![] });
}

#[test]
fn zero_timeout() {
    let mut sys = System::spawn(&fig1(), 0).unwrap();
    assert_eq!(sys.run(Duration::ZERO), Outcome::Timeout);
    assert!(sys.snapshot().is_ok());
}

#[test]
fn snapshots() {
    let mut sys = System::spawn(&fig1(), 0).unwrap();
    assert_eq!(&sys.snapshot().unwrap(), sys.initial());
    sys.start();
    assert!(matches!(sys.snapshot(), Err(RuntimeError::NotQuiescent)));
    assert!(matches!(sys.wait(LONG), Outcome::Terminated { .. }));
    assert!(sys.snapshot().unwrap().is_terminated());
}

#[test]
fn trace_lines() {
    let mut sys = System::spawn(&fig1(), 0).unwrap();
    sys.run(LONG);
    let log = sys.log();
    let quiet: Vec<String> = log.iter().filter_map(|e| trace_line(e, false)).collect();
    let comm = quiet.iter().find(|l| l.contains("\tcomm\t")).unwrap();
    let cols: Vec<&str> = comm.split('\t').collect();
    assert_eq!(cols[1..], ["comm", "c", "3", "2", "p2"]);
    assert!(quiet.iter().any(|l| l.contains("\tbacktrack\t")));
    let loud: Vec<String> = log.iter().filter_map(|e| trace_line(e, true)).collect();
    assert_eq!(loud.len(), log.len());
    assert!(loud.iter().any(|l| l.starts_with("silent L1 ")));
}
