//! Bounded exhaustive exploration: one channel cell on its own, or a whole
//! program under the low-level semantics.

use thiserror::Error;

use crate::hl::{self, Violation};
use crate::ll::{sending_on, ConfigLL};
use crate::protocol::Dir;
use crate::refinement::map_config;

mod protocol;
mod system;

pub use protocol::{explore_protocol, ProtocolBounds, ProtocolReport, ProtocolTrace};
pub use system::{explore_system, Mode, SystemBounds, SystemReport, SystemViolation};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("state space exceeds {cap} states; lower the bounds")]
    BoundsTooLarge { cap: usize },
    #[error("bounds must be at least 1")]
    EmptyBounds,
}

/// Invariants A and B and stack order, evaluated on the high-level image,
/// plus the retraction-flag obligation on the protocol state.
pub fn check_invariants(c: &ConfigLL) -> Vec<Violation> {
    let mut out = match map_config(c) {
        Ok(image) => hl::check_invariants(&image),
        Err(_) => Vec::new(),
    };
    for (name, ch) in &c.channels {
        if ch.sender_has_token() || ch.s.d != Dir::I {
            continue;
        }
        let sending = c.proc(&ch.s.n).ok().and_then(sending_on).is_some_and(|(on, _)| &on == name);
        if !sending {
            out.push(Violation::RetractFlag { chan: name.clone() });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{name, parse_program};
    use crate::ll::{apply, run_policy, LlRule};

    fn fig1() -> ConfigLL {
        ConfigLL::initial(&parse_program(include_str!("../../programs/fig1.rcsp")).unwrap())
    }

    #[test]
    fn initial_state_is_clean() {
        assert_eq!(check_invariants(&fig1()), vec![]);
    }

    #[test]
    fn forward_process_behind_its_channel() {
        let mut c = run_policy(&fig1(), 5).config;
        c.procs[1].time = 1;
        assert!(matches!(check_invariants(&c)[..], [Violation::InvariantB { .. }]));
    }

    #[test]
    fn backtracking_processes_are_exempt() {
        let run = run_policy(&fig1(), 500);
        let mut c = fig1();
        for (rule, _) in &run.steps {
            c = apply(&c, rule).unwrap().0;
            assert_eq!(check_invariants(&c), vec![], "after {rule}");
        }
    }

    #[test]
    fn dangling_retraction_flag() {
        let mut c = run_policy(&fig1(), 3).config;
        let (p1, chan) = (name("p1"), name("c"));
        c = apply(&c, &LlRule::RetractRequest { proc: p1, chan }).unwrap().0;
        assert_eq!(check_invariants(&c), vec![]);
        c.procs[0].expr = crate::calculus::Expr::Unit;
        assert!(check_invariants(&c).contains(&Violation::RetractFlag { chan: name("c") }));
    }
}
