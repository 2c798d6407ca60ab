//! Reversible communicating processes.
//!
//! A small call-by-value calculus with synchronous channels, stable regions
//! and backtracking, given two executable semantics:
//!
//! - [`hl`]: atomic steps over a global channel map (the reference model);
//! - [`ll`]: per-process steps over a two-phase channel cell ([`protocol`]).
//!
//! [`refinement`] maps low-level states to high-level ones and checks every
//! low-level step against the reference model, [`explorer`] enumerates
//! bounded state spaces, and [`runtime`] runs programs with one thread per
//! process.

pub mod calculus;
pub mod cli;
pub mod explorer;
pub mod hl;
pub mod ll;
pub mod protocol;
pub mod refinement;
pub mod runtime;

pub use calculus::{parse_program, Expr, Name, Program};
