//! Shared channel cells: each half is its own lock, written only by the
//! endpoint that owns it.

use std::ops::Deref;
use std::sync::{RwLock, RwLockReadGuard, RwLockWriteGuard};

use crate::calculus::Name;
use crate::protocol::{ChannelLL, ReceiverHalf, SenderHalf};

#[derive(Clone, Debug)]
pub(crate) struct Versioned<T> {
    pub value: T,
    pub version: u64,
    /// Every unit that has written this half; the audit expects one.
    pub writers: Vec<Name>,
}

impl<T> Versioned<T> {
    fn new(value: T) -> Self {
        Self { value, version: 0, writers: Vec::new() }
    }

    pub fn write(&mut self, value: T, by: &Name) {
        self.value = value;
        self.version += 1;
        if !self.writers.contains(by) {
            self.writers.push(by.clone());
        }
    }
}

/// The receiver half carries the shadow `sync` bit, which only the
/// receiver's transitions touch.
pub(crate) type RecvState = (ReceiverHalf, bool);

#[derive(Debug)]
pub(crate) struct Cell {
    pub name: Name,
    pub s: RwLock<Versioned<SenderHalf>>,
    pub r: RwLock<Versioned<RecvState>>,
}

impl Cell {
    pub fn new(name: Name, ch: ChannelLL) -> Self {
        Self { name, s: RwLock::new(Versioned::new(ch.s)), r: RwLock::new(Versioned::new((ch.r, ch.sync))) }
    }

    pub fn snapshot(&self) -> ChannelLL {
        let s = self.s.read().expect("poisoned").value.clone();
        let (r, sync) = self.r.read().expect("poisoned").value.clone();
        ChannelLL { s, r, sync }
    }
}

pub(crate) enum Guard<'a, T> {
    Read(RwLockReadGuard<'a, Versioned<T>>),
    Write(RwLockWriteGuard<'a, Versioned<T>>),
}

impl<T> Deref for Guard<'_, T> {
    type Target = Versioned<T>;

    fn deref(&self) -> &Versioned<T> {
        match self {
            Guard::Read(g) => g,
            Guard::Write(g) => g,
        }
    }
}

impl<'a, T> Guard<'a, T> {
    pub fn lock(l: &'a RwLock<Versioned<T>>, write: bool) -> Self {
        if write {
            Guard::Write(l.write().expect("poisoned"))
        } else {
            Guard::Read(l.read().expect("poisoned"))
        }
    }

    pub fn as_write(&mut self) -> Option<&mut Versioned<T>> {
        match self {
            Guard::Write(g) => Some(g),
            Guard::Read(_) => None,
        }
    }
}
