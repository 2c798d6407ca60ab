use rcsp::cli::{run_cli, EX_DATAERR, EX_NOINPUT, EX_USAGE};

fn prog(file: &str) -> String {
    format!("{}/programs/{file}", env!("CARGO_MANIFEST_DIR"))
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_cli(std::iter::once("rcsp").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn run_prints_the_trace_and_results() {
    let (code, out, _) = cli(&["run", &prog("fig1.rcsp")]);
    assert_eq!(code, 0, "{out}");
    let comms: Vec<Vec<&str>> =
        out.lines().map(|l| l.split('\t').collect::<Vec<_>>()).filter(|c| c.get(1) == Some(&"comm")).collect();
    assert_eq!(comms.len(), 4);
    assert!(comms.iter().all(|c| c[2..] == ["c", "3", "2", "p2"] || c[2..] == ["c", "5", "2", "p2"]));
    assert_eq!(out.matches("\trewind\t").count(), 2);
    assert!(out.ends_with("result p1 unit\nresult p2 4\n"), "{out}");
    assert!(!out.contains("silent"));
}

#[test]
fn run_verbose_and_log() {
    let log = std::env::temp_dir().join(format!("rcsp-log-{}.txt", std::process::id()));
    let (code, out, _) = cli(&["run", &prog("fig1.rcsp"), "--verbose", "--seed", "7", "--log", log.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l.starts_with("silent L1 p1")));
    let full = std::fs::read_to_string(&log).unwrap();
    assert!(full.lines().any(|l| l.ends_with("H3 p1 1")), "{full}");
    std::fs::remove_file(log).unwrap();
}

#[test]
fn run_exit_codes() {
    assert_eq!(cli(&["run", &prog("fig1.rcsp"), "--timeout", "0"]).0, 2);
    let (code, out, _) = cli(&["run", &prog("mismatch.rcsp")]);
    assert_eq!(code, 3);
    assert!(out.contains("stuck\nchan c "), "{out}");
    assert_eq!(cli(&["run", "missing.rcsp"]).0, EX_NOINPUT);
    assert_eq!(cli(&["run"]).0, EX_USAGE);
    assert_eq!(cli(&["run", &prog("fig1.rcsp"), "--timeout", "-1"]).0, EX_USAGE);
    assert_eq!(cli(&["run", &prog("empty.rcsp")]), (0, String::new(), String::new()));
}

#[test]
fn parse_only() {
    assert_eq!(cli(&["parse", &prog("chain3.rcsp")]).1, "ok: 2 channels, 3 processes\n");
    let bad = std::env::temp_dir().join(format!("rcsp-bad-{}.rcsp", std::process::id()));
    std::fs::write(&bad, "(system (proc p (recv x)))").unwrap();
    let (code, _, err) = cli(&["parse", bad.to_str().unwrap()]);
    assert_eq!(code, EX_DATAERR);
    assert!(err.contains("1:"), "{err}");
    std::fs::remove_file(bad).unwrap();
}

#[test]
fn check_protocol() {
    let (code, out, _) = cli(&["check-protocol"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("states 601\n"));
    assert_eq!(cli(&["check-protocol", "--time-bound", "1"]).0, 0);
    for fault in ["t2", "t5", "t7"] {
        let (code, out, _) = cli(&["check-protocol", "--inject-fault", fault]);
        assert_eq!(code, 1, "{fault}");
        assert!(out.contains("key-invariant FAIL\ncounterexample:\n"));
    }
    assert_eq!(cli(&["check-protocol", "--time-bound", "0"]).0, EX_USAGE);
    assert_eq!(cli(&["check-protocol", "--inject-fault", "l3"]).0, EX_USAGE);
    assert_eq!(cli(&["check-protocol", "--time-bound", "x"]).0, EX_USAGE);
}

#[test]
fn check_refinement() {
    let (code, out, _) = cli(&["check-refinement", &prog("fig1.rcsp"), "--depth", "12"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("violations 0\n"));
    let (code, out, _) = cli(&["check-refinement", &prog("fig1.rcsp"), "--depth", "20", "--inject-fault", "l3"]);
    assert_eq!(code, 1, "{out}");
    let (code, _, err) = cli(&["check-refinement", &prog("fig1.rcsp"), "--depth", "0"]);
    assert_eq!(code, 0);
    assert!(err.contains("warning"));
}

#[test]
fn explore_writes_a_deterministic_report() {
    let path = std::env::temp_dir().join(format!("rcsp-report-{}.txt", std::process::id()));
    let args = ["explore", &prog("chain3.rcsp"), "--depth", "10", "--k", "2", "--report", path.to_str().unwrap()];
    let (code, first, _) = cli(&args);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), first);
    assert_eq!(cli(&args).1, first);
    std::fs::remove_file(path).unwrap();
    let (code, out, _) = cli(&["explore", "--time-bound", "2", "--canonical"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("states "));
}

#[test]
fn policy_mode_reports_the_mismatch_deadlock() {
    // Deadlocks are reported but are not refinement violations.
    let (code, out, _) = cli(&["explore", &prog("mismatch.rcsp"), "--mode", "policy", "--depth", "50"]);
    assert_eq!(code, 0);
    assert!(!out.contains("deadlocks 0\n"), "{out}");
}
