use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use rcsp::calculus::{decompose, name, parse_expr, Decomposition, Op};
use rcsp::explorer::check_invariants;
use rcsp::ll::{apply, ll_enabled, ConfigLL};
use rcsp::protocol::{ChannelLL, Transition};
use rcsp::refinement::{check_step, map_config};
use rcsp::{parse_program, Expr};

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::Unit),
        (0i64..20).prop_map(Expr::Int),
        prop::sample::select(vec!["x", "y", "k"]).prop_map(Expr::var),
        prop::sample::select(vec![Op::Add, Op::Sub, Op::Ge]).prop_map(|op| Expr::Prim(op, vec![])),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        let x = prop::sample::select(vec!["x", "y", "k"]);
        let ch = prop::sample::select(vec!["c", "d"]);
        prop_oneof![
            (x.clone(), inner.clone()).prop_map(|(x, b)| Expr::lam(x, b)),
            (inner.clone(), inner.clone()).prop_map(|(f, a)| Expr::app(f, a)),
            (ch.clone(), inner.clone()).prop_map(|(c, e)| Expr::Send(name(c), Box::new(e))),
            (x, ch, inner.clone()).prop_map(|(x, c, e)| Expr::Recv(name(x), name(c), Box::new(e))),
            inner.clone().prop_map(Expr::stable),
            inner.prop_map(Expr::backtrack),
        ]
    })
}

proptest! {
    #[test]
    fn display_then_parse_is_identity(e in expr()) {
        prop_assert_eq!(parse_expr(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn plugging_the_redex_back_rebuilds_the_term(e in expr()) {
        if let Ok(Decomposition::Redex(r)) = decompose(&e) {
            prop_assert_eq!(r.ctx.plug(r.expr.clone()), e);
        }
    }

    /// Random walks through the channel cell never break the key invariant
    /// and never let both sides hold the token.
    #[test]
    fn protocol_walks_keep_the_key_invariant(choices in prop::collection::vec((0usize..8, 0u64..6, 0i64..2, any::<bool>()), 1..60)) {
        let mut ch = ChannelLL::new(name("s"), name("r"));
        for (pick, t, v, flag) in choices {
            let tr = match pick {
                0 => Transition::FwdRequest { time: ch.r.t + 1 + t, value: Expr::Int(v) },
                1 => Transition::FwdAck { time: ch.s.t + t },
                2 => Transition::FwdRefuse,
                3 => Transition::BackRequest { time: t.min(ch.r.t.saturating_sub(1)) },
                4 => Transition::BackAck { resume_forward: flag },
                5 => Transition::RetractRequest,
                6 => Transition::RetractAllow { also_back: flag },
                _ => Transition::RcvSignalBack,
            };
            if let Ok(next) = ch.apply(&tr, None) {
                prop_assert!(next.key_invariant(), "{} --{}--> {}", ch, tr, next);
                ch = next;
            }
        }
    }
}

/// Long random runs of the unconstrained low-level rules, deeper than the
/// exhaustive bounds: every step refines and every state is clean.
#[test]
fn random_low_level_runs_refine() {
    for file in ["fig1.rcsp", "chain3.rcsp", "loop.rcsp"] {
        let path = format!("{}/programs/{file}", env!("CARGO_MANIFEST_DIR"));
        let start = ConfigLL::initial(&parse_program(&std::fs::read_to_string(path).unwrap()).unwrap());
        for seed in 0..30 {
            let mut rng = StdRng::seed_from_u64(seed);
            let mut c = start.clone();
            for _ in 0..300 {
                let rules = ll_enabled(&c, 2);
                let Some(rule) = rules.choose(&mut rng) else { break };
                let Ok((next, event)) = apply(&c, rule) else { continue };
                if map_config(&c).is_ok() && map_config(&next).is_ok() {
                    check_step(&c, rule, &next, event.as_ref()).unwrap_or_else(|v| panic!("{file} seed {seed}: {v:?}"));
                }
                assert_eq!(check_invariants(&next), vec![], "{file} seed {seed} after {rule}");
                c = next;
            }
        }
    }
}
