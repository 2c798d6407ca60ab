//! One execution unit per process.  A step locks the unit's own halves for
//! writing and the partner halves for reading, always in channel-name order
//! with the sender half first, so steps that share a channel are serialized
//! and steps that do not share one run in parallel.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Mutex, OnceLock};
use std::thread::Thread;
use std::time::Duration;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::calculus::Name;
use crate::hl::{Event, ProcState, Time};
use crate::ll::{apply, policy_step, ConfigLL, LlRule};
use crate::protocol::ChannelLL;

use super::cell::{Cell, Guard};

/// One executed rule, stamped with its place in the global order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogEntry {
    pub seq: u64,
    pub rule: LlRule,
    pub event: Option<Event>,
    /// Process time after the step.
    pub time: Time,
}

pub(crate) struct Shared {
    pub cells: Vec<Cell>,
    pub procs: Vec<Mutex<ProcState>>,
    /// Per unit: indices into `cells` in name order, and whether the unit
    /// is the sender.
    pub mine: Vec<Vec<(usize, bool)>>,
    /// Per unit: units it shares a channel with.
    pub partners: Vec<Vec<usize>>,
    pub seq: AtomicU64,
    /// Bumped by every step, while its locks are still held.
    pub writes: AtomicU64,
    /// Value of `writes` read before the unit's last step attempt that found
    /// nothing to do.
    pub idle_at: Vec<AtomicU64>,
    pub started: AtomicBool,
    pub stop: AtomicBool,
    pub logs: Vec<Mutex<Vec<LogEntry>>>,
    pub audit: Mutex<Vec<String>>,
    pub threads: OnceLock<Vec<Thread>>,
}

impl Shared {
    pub fn new(start: &ConfigLL) -> Self {
        let cells: Vec<Cell> = start.channels.iter().map(|(n, ch)| Cell::new(n.clone(), ch.clone())).collect();
        let n = start.procs.len();
        let mut mine = vec![Vec::new(); n];
        let mut partners = vec![Vec::new(); n];
        let index: BTreeMap<&Name, usize> = start.procs.iter().enumerate().map(|(i, p)| (&p.id, i)).collect();
        for (ci, (_, ch)) in start.channels.iter().enumerate() {
            let (Some(&s), Some(&r)) = (index.get(&ch.s.n), index.get(&ch.r.n)) else { continue };
            mine[s].push((ci, true));
            mine[r].push((ci, false));
            partners[s].push(r);
            partners[r].push(s);
        }
        Self {
            cells,
            procs: start.procs.iter().cloned().map(Mutex::new).collect(),
            mine,
            partners,
            seq: AtomicU64::new(0),
            writes: AtomicU64::new(0),
            idle_at: (0..n).map(|_| AtomicU64::new(u64::MAX)).collect(),
            started: AtomicBool::new(false),
            stop: AtomicBool::new(false),
            logs: (0..n).map(|_| Mutex::new(Vec::new())).collect(),
            audit: Mutex::new(Vec::new()),
            threads: OnceLock::new(),
        }
    }

    pub fn config(&self) -> ConfigLL {
        ConfigLL {
            channels: self.cells.iter().map(|c| (c.name.clone(), c.snapshot())).collect(),
            procs: self.procs.iter().map(|p| p.lock().expect("poisoned").clone()).collect(),
        }
    }

    /// Every unit has looked at the current state and found nothing to do.
    pub fn quiescent(&self) -> bool {
        let w = self.writes.load(Ordering::SeqCst);
        self.idle_at.iter().all(|i| i.load(Ordering::SeqCst) == w)
    }

    fn wake(&self, units: &[usize]) {
        if let Some(threads) = self.threads.get() {
            for &u in units {
                threads[u].unpark();
            }
        }
    }

    /// Attempts one policy step for unit `me`; false if none applies.
    fn step(&self, me: usize) -> bool {
        let mut proc = self.procs[me].lock().expect("poisoned");
        let mut guards = Vec::with_capacity(self.mine[me].len());
        for &(ci, is_sender) in &self.mine[me] {
            let cell = &self.cells[ci];
            let s = Guard::lock(&cell.s, is_sender);
            let r = Guard::lock(&cell.r, !is_sender);
            guards.push((ci, s, r));
        }
        let view = ConfigLL {
            channels: guards
                .iter()
                .map(|(ci, s, r)| {
                    let ch = ChannelLL { s: s.value.clone(), r: r.value.0.clone(), sync: r.value.1 };
                    (self.cells[*ci].name.clone(), ch)
                })
                .collect(),
            procs: vec![proc.clone()],
        };
        let Some(rule) = policy_step(&view, &proc.id) else { return false };
        let (next, event) = match apply(&view, &rule) {
            Ok(done) => done,
            Err(e) => {
                self.audit.lock().expect("poisoned").push(format!("{rule}: {e}"));
                return false;
            }
        };
        for (ci, s, r) in &mut guards {
            let name = &self.cells[*ci].name;
            let (old, new) = (&view.channels[name], &next.channels[name]);
            if old.s != new.s {
                match s.as_write() {
                    Some(g) => g.write(new.s.clone(), &proc.id),
                    None => self.foreign_write(&proc.id, name, "sender"),
                }
            }
            if old.r != new.r || old.sync != new.sync {
                match r.as_write() {
                    Some(g) => g.write((new.r.clone(), new.sync), &proc.id),
                    None => self.foreign_write(&proc.id, name, "receiver"),
                }
            }
        }
        *proc = next.procs[0].clone();
        let seq = self.seq.fetch_add(1, Ordering::SeqCst);
        self.writes.fetch_add(1, Ordering::SeqCst);
        self.logs[me].lock().expect("poisoned").push(LogEntry { seq, rule, event, time: proc.time });
        drop(guards);
        drop(proc);
        self.wake(&self.partners[me]);
        true
    }

    fn foreign_write(&self, by: &Name, chan: &Name, half: &str) {
        self.audit.lock().expect("poisoned").push(format!("{by} tried to write the {half} half of {chan}"));
    }
}

pub(crate) fn unit_main(shared: &Shared, me: usize, seed: u64) {
    let mut rng = StdRng::seed_from_u64(seed ^ (me as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    while !shared.started.load(Ordering::SeqCst) && !shared.stop.load(Ordering::SeqCst) {
        std::thread::park_timeout(Duration::from_millis(1));
    }
    while !shared.stop.load(Ordering::SeqCst) {
        let w = shared.writes.load(Ordering::SeqCst);
        if shared.step(me) {
            // Seeded jitter varies which of the competing units gets a
            // channel first.
            match rng.gen_range(0..8) {
                0 => std::thread::sleep(Duration::from_micros(rng.gen_range(1..50))),
                1 | 2 => std::thread::yield_now(),
                _ => {}
            }
            continue;
        }
        shared.idle_at[me].store(w, Ordering::SeqCst);
        while !shared.stop.load(Ordering::SeqCst) && shared.writes.load(Ordering::SeqCst) == w {
            std::thread::park_timeout(Duration::from_millis(1));
        }
    }
}
