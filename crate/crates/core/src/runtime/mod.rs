//! Runs a program with one thread per process, each driving the low-level
//! rules for its own process.  There is no coordinator: units meet only in
//! the channel cells.

use std::fmt;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::calculus::{Expr, Name, Program};
use crate::hl::Event;
use crate::ll::{ConfigLL, LlRule};

mod cell;
mod unit;

pub use unit::LogEntry;
use unit::{unit_main, Shared};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("could not spawn a unit thread: {0}")]
    SpawnFailure(#[from] std::io::Error),
    #[error("system is still running")]
    NotQuiescent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Every process finished; results in declaration order.
    Terminated { values: Vec<(Name, Expr)> },
    Timeout,
    /// Nothing can move but some process is unfinished.
    Stuck { dump: String },
}

pub struct System {
    shared: Arc<Shared>,
    start: ConfigLL,
    handles: Vec<JoinHandle<()>>,
    finished: bool,
}

impl System {
    /// Spawns the units parked; nothing runs until [`System::start`].
    pub fn spawn(program: &Program, seed: u64) -> Result<Self, RuntimeError> {
        let start = ConfigLL::initial(program);
        let shared = Arc::new(Shared::new(&start));
        let mut handles = Vec::with_capacity(start.procs.len());
        for (i, p) in start.procs.iter().enumerate() {
            let sh = Arc::clone(&shared);
            let spawned = std::thread::Builder::new().name(format!("unit-{}", p.id)).spawn(move || unit_main(&sh, i, seed));
            match spawned {
                Ok(h) => handles.push(h),
                Err(e) => {
                    shared.stop.store(true, Ordering::SeqCst);
                    for h in handles {
                        h.thread().unpark();
                        let _ = h.join();
                    }
                    return Err(e.into());
                }
            }
        }
        let _ = shared.threads.set(handles.iter().map(|h| h.thread().clone()).collect());
        Ok(Self { shared, start, handles, finished: false })
    }

    pub fn start(&self) {
        self.shared.started.store(true, Ordering::SeqCst);
        for h in &self.handles {
            h.thread().unpark();
        }
    }

    /// Waits until the system is quiescent or the deadline passes, then
    /// stops every unit at a rule boundary.
    pub fn wait(&mut self, timeout: Duration) -> Outcome {
        let deadline = Instant::now() + timeout;
        let outcome = loop {
            if self.handles.is_empty() {
                break None;
            }
            if Instant::now() >= deadline {
                break Some(Outcome::Timeout);
            }
            if self.shared.quiescent() {
                // Confirm across a short pause so a unit that has just been
                // woken gets to look again.
                let w = self.shared.writes.load(Ordering::SeqCst);
                std::thread::sleep(Duration::from_micros(200));
                if self.shared.quiescent() && self.shared.writes.load(Ordering::SeqCst) == w {
                    break None;
                }
                continue;
            }
            std::thread::sleep(Duration::from_micros(200));
        };
        self.stop();
        outcome.unwrap_or_else(|| {
            let c = self.shared.config();
            if c.is_terminated() {
                Outcome::Terminated {
                    values: c.procs.iter().map(|p| (p.id.clone(), p.result().cloned().unwrap_or(Expr::Unit))).collect(),
                }
            } else {
                Outcome::Stuck { dump: c.to_string() }
            }
        })
    }

    pub fn run(&mut self, timeout: Duration) -> Outcome {
        self.start();
        self.wait(timeout)
    }

    fn stop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        for h in self.handles.drain(..) {
            h.thread().unpark();
            let _ = h.join();
        }
        self.finished = true;
    }

    /// The full state; only available before start or after the units
    /// have stopped.
    pub fn snapshot(&self) -> Result<ConfigLL, RuntimeError> {
        if !self.shared.started.load(Ordering::SeqCst) {
            return Ok(self.start.clone());
        }
        if !self.finished {
            return Err(RuntimeError::NotQuiescent);
        }
        Ok(self.shared.config())
    }

    pub fn initial(&self) -> &ConfigLL {
        &self.start
    }

    /// Every executed step in global order.
    pub fn log(&self) -> Vec<LogEntry> {
        let mut all: Vec<LogEntry> = self.shared.logs.iter().flat_map(|l| l.lock().expect("poisoned").clone()).collect();
        all.sort_by_key(|e| e.seq);
        all
    }

    pub fn schedule(&self) -> Vec<LlRule> {
        self.log().into_iter().map(|e| e.rule).collect()
    }

    pub fn events(&self) -> Vec<Event> {
        self.log().into_iter().filter_map(|e| e.event).collect()
    }

    /// Problems seen by the units: a write to a half owned by the other
    /// endpoint, a chosen rule that failed, or a half with several writers.
    pub fn audit(&self) -> Vec<String> {
        let mut out = self.shared.audit.lock().expect("poisoned").clone();
        for cell in &self.shared.cells {
            let s = cell.s.read().expect("poisoned");
            let r = cell.r.read().expect("poisoned");
            if s.writers.len() > 1 || s.writers.iter().any(|w| w != &s.value.n) {
                out.push(format!("sender half of {} written by {:?}", cell.name, s.writers));
            }
            if r.writers.len() > 1 || r.writers.iter().any(|w| w != &r.value.0.n) {
                out.push(format!("receiver half of {} written by {:?}", cell.name, r.writers));
            }
        }
        out
    }
}

impl Drop for System {
    fn drop(&mut self) {
        self.stop();
    }
}

/// One trace line: `seq kind chan time value proc`, tab-separated, for
/// visible events and stable-region markers.  Other steps are silent and
/// render only when `verbose` is set.
pub fn trace_line(e: &LogEntry, verbose: bool) -> Option<String> {
    let p = e.rule.proc();
    let line = |kind: &str, chan: &str, time: String, value: String| Some(format!("{}\t{kind}\t{chan}\t{time}\t{value}\t{p}", e.seq));
    match (&e.event, &e.rule) {
        (Some(Event::Comm { chan, time, value }), _) => line("comm", chan, time.to_string(), value.to_string()),
        (Some(Event::Rewind { chan, time }), _) => line("rewind", chan, time.to_string(), "-".into()),
        (None, LlRule::EnterStable { .. }) => line("enter-stable", "-", e.time.to_string(), "-".into()),
        (None, LlRule::ExitStable { .. }) => line("exit-stable", "-", e.time.to_string(), "-".into()),
        (None, LlRule::Backtrack { .. }) => line("backtrack", "-", e.time.to_string(), "-".into()),
        (None, LlRule::Resume { .. }) => line("resume", "-", e.time.to_string(), "-".into()),
        _ if verbose => Some(format!("silent {} {p}", e.rule.tag())),
        _ => None,
    }
}

impl fmt::Debug for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("System").field("procs", &self.start.procs.len()).field("finished", &self.finished).finish()
    }
}

#[cfg(test)]
mod tests;
