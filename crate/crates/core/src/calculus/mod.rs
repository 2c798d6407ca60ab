//! The core calculus: syntax, evaluation contexts, substitution and the
//! program text format.

mod context;
mod expr;
mod parse;
mod subst;

pub use context::{apply_prim, decompose, plug, redex_of, CtxFrame, Decomposition, EvalContext, Redex, RedexKind, Stuck};
pub use expr::{name, Expr, Name, Op};
pub use parse::{parse_expr, parse_program, ChannelDecl, ParseError, ProcessDef, Program};
pub use subst::{free_vars, is_closed, subst};
