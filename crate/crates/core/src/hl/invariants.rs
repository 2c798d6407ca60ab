use std::fmt;

use crate::calculus::Name;

use super::{ChannelTimes, ConfigHL, Time};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Violation {
    /// A forward process's channel is older than its top frame's record of it.
    InvariantA { proc: Name, chan: Name, saved: Time, current: Time },
    /// A forward process is behind one of its channels.
    InvariantB { proc: Name, chan: Name, proc_time: Time, chan_time: Time },
    /// Frame times do not strictly increase bottom to top.
    StackOrder { proc: Name },
    /// `s.d = I` while the sender is not executing `send̲` on that channel.
    RetractFlag { chan: Name },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvariantA { proc, chan, saved, current } => {
                write!(f, "invariant A: {proc} saved {chan}@{saved} but channel is at {current}")
            }
            Violation::InvariantB { proc, chan, proc_time, chan_time } => {
                write!(f, "invariant B: {proc}@{proc_time} behind {chan}@{chan_time}")
            }
            Violation::StackOrder { proc } => write!(f, "stack order: {proc}"),
            Violation::RetractFlag { chan } => write!(f, "retract flag on {chan} without send in progress"),
        }
    }
}

/// Invariants A and B for forward-mode processes, plus stack ordering for
/// all processes. Backtracking processes may violate A and B.
pub fn check_invariants(c: &ConfigHL) -> Vec<Violation> {
    let mut out = Vec::new();
    for p in &c.procs {
        if p.stack.windows(2).any(|w| w[0].time >= w[1].time) {
            out.push(Violation::StackOrder { proc: p.id.clone() });
        }
        if p.is_backtracking() {
            continue;
        }
        for chan in c.channels_of(&p.id) {
            let current = c.channel_time(&chan).expect("listed");
            if let Some(saved) = p.top_saved(&chan) {
                if current < saved {
                    out.push(Violation::InvariantA { proc: p.id.clone(), chan: chan.clone(), saved, current });
                }
            }
            if p.time < current {
                out.push(Violation::InvariantB { proc: p.id.clone(), chan, proc_time: p.time, chan_time: current });
            }
        }
    }
    out
}
