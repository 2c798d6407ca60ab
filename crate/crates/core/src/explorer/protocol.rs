use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::calculus::{name, Expr};
use crate::hl::Time;
use crate::protocol::{ChannelLL, ProtocolFault, Side, Transition};

use super::ExploreError;

#[derive(Clone, Debug)]
pub struct ProtocolBounds {
    /// Largest timestamp either endpoint may choose.
    pub time_bound: Time,
    /// Values are drawn from `0..values`.
    pub values: i64,
    pub max_states: usize,
    /// Identify states whose timestamps are order-isomorphic.
    pub canonical: bool,
    pub fault: Option<ProtocolFault>,
}

impl ProtocolBounds {
    pub fn new(time_bound: Time, values: i64) -> Self {
        Self { time_bound, values, max_states: 5_000_000, canonical: false, fault: None }
    }
}

/// A path from the initial state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolTrace {
    pub start: ChannelLL,
    pub steps: Vec<(Transition, ChannelLL)>,
}

impl fmt::Display for ProtocolTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.start)?;
        for (tr, ch) in &self.steps {
            writeln!(f, "  --{tr}--> {ch}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolReport {
    pub states: usize,
    pub edges: usize,
    pub key_invariant: Option<ProtocolTrace>,
    pub token_alternation: Option<ProtocolTrace>,
    pub rt_monotone: Option<ProtocolTrace>,
}

impl ProtocolReport {
    pub fn passed(&self) -> bool {
        self.key_invariant.is_none() && self.token_alternation.is_none() && self.rt_monotone.is_none()
    }
}

impl fmt::Display for ProtocolReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "states {}", self.states)?;
        writeln!(f, "edges {}", self.edges)?;
        for (label, cex) in [
            ("key-invariant", &self.key_invariant),
            ("token-alternation", &self.token_alternation),
            ("rt-monotone", &self.rt_monotone),
        ] {
            match cex {
                None => writeln!(f, "{label} pass")?,
                Some(trace) => write!(f, "{label} FAIL\ncounterexample:\n{trace}")?,
            }
        }
        Ok(())
    }
}

fn successors(ch: &ChannelLL, b: &ProtocolBounds) -> Vec<Transition> {
    let mut out = Vec::new();
    for time in ch.r.t + 1..=b.time_bound {
        out.extend((0..b.values).map(|v| Transition::FwdRequest { time, value: Expr::Int(v) }));
    }
    out.extend((ch.s.t..=b.time_bound).map(|time| Transition::FwdAck { time }));
    out.push(Transition::FwdRefuse);
    out.extend((0..ch.r.t).map(|time| Transition::BackRequest { time }));
    out.extend([false, true].map(|resume_forward| Transition::BackAck { resume_forward }));
    out.push(Transition::RetractRequest);
    out.extend([false, true].map(|also_back| Transition::RetractAllow { also_back }));
    out.push(Transition::RcvSignalBack);
    out
}

/// Replaces the two timestamps by their ranks.
fn canonical(ch: &ChannelLL) -> ChannelLL {
    let mut out = ch.clone();
    let (s, r) = (ch.s.t, ch.r.t);
    (out.s.t, out.r.t) = match s.cmp(&r) {
        std::cmp::Ordering::Less => (0, 1),
        std::cmp::Ordering::Equal => (0, 0),
        std::cmp::Ordering::Greater => (1, 0),
    };
    out
}

/// Token-passing transitions are fired by the holder and hand the token
/// over; the two flag raises are fired by the other side and leave it.
fn alternates(before: &ChannelLL, tr: &Transition, after: &ChannelLL) -> bool {
    let held = match tr.side() {
        Side::Sender => before.sender_has_token(),
        Side::Receiver => !before.sender_has_token(),
    };
    held == tr.moves_token() && (before.sender_has_token() != after.sender_has_token()) == tr.moves_token()
}

/// Breadth-first search over every state one channel can reach with both
/// endpoints free to fire any enabled transition.
pub fn explore_protocol(b: &ProtocolBounds) -> Result<ProtocolReport, ExploreError> {
    if b.time_bound < 1 || b.values < 1 {
        return Err(ExploreError::EmptyBounds);
    }
    let start = ChannelLL::new(name("s"), name("r"));
    let key = |ch: &ChannelLL| if b.canonical { canonical(ch) } else { ch.clone() };
    let mut states = vec![start.clone()];
    let mut parent: Vec<Option<(usize, Transition)>> = vec![None];
    let mut index = HashMap::from([(key(&start), 0usize)]);
    let mut queue = VecDeque::from([0usize]);
    let mut report = ProtocolReport { states: 0, edges: 0, key_invariant: None, token_alternation: None, rt_monotone: None };

    let trace_to = |states: &[ChannelLL], parent: &[Option<(usize, Transition)>], mut i: usize, last: Option<(Transition, ChannelLL)>| {
        let mut steps = Vec::new();
        steps.extend(last);
        while let Some((p, tr)) = &parent[i] {
            steps.push((tr.clone(), states[i].clone()));
            i = *p;
        }
        steps.reverse();
        ProtocolTrace { start: states[0].clone(), steps }
    };

    if !start.key_invariant() {
        report.key_invariant = Some(trace_to(&states, &parent, 0, None));
    }
    while let Some(i) = queue.pop_front() {
        let here = states[i].clone();
        for tr in successors(&here, b) {
            let Ok(next) = here.apply(&tr, b.fault) else { continue };
            report.edges += 1;
            if report.token_alternation.is_none() && !alternates(&here, &tr, &next) {
                let mut steps = trace_to(&states, &parent, i, None);
                steps.steps.push((tr.clone(), next.clone()));
                report.token_alternation = Some(steps);
            }
            if report.rt_monotone.is_none() && next.r.t < here.r.t && !matches!(tr, Transition::BackAck { .. }) {
                report.rt_monotone = Some(trace_to(&states, &parent, i, Some((tr.clone(), next.clone()))));
            }
            let k = key(&next);
            if index.contains_key(&k) {
                continue;
            }
            if states.len() >= b.max_states {
                return Err(ExploreError::BoundsTooLarge { cap: b.max_states });
            }
            let j = states.len();
            index.insert(k, j);
            states.push(next.clone());
            parent.push(Some((i, tr)));
            queue.push_back(j);
            if report.key_invariant.is_none() && !next.key_invariant() {
                report.key_invariant = Some(trace_to(&states, &parent, j, None));
            }
        }
    }
    report.states = states.len();
    Ok(report)
}
