//! Evaluation contexts and unique decomposition.

use std::fmt;

use thiserror::Error;

use super::expr::{Expr, Name};

/// Runtime type errors: the expression is not a value and has no redex.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Stuck {
    #[error("`{0}` is not a function")]
    NotAFunction(Expr),
    #[error("operator `{op}` cannot be applied to `{arg}`")]
    BadOperand { op: &'static str, arg: Expr },
    #[error("free variable `{0}`")]
    FreeVariable(Name),
    #[error("`stable` applied to non-function `{0}`")]
    StableNonFunction(Expr),
}

/// One layer of an evaluation context, outermost first when stored in
/// [`EvalContext`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CtxFrame {
    /// `□ e`
    AppFun(Expr),
    /// `v □`
    AppArg(Expr),
    /// `send ℓ □`
    Send(Name),
    /// `stable □`
    Stable,
    /// `stable̲ □`
    Active,
    /// `backtrack □`
    Backtrack,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EvalContext {
    frames: Vec<CtxFrame>,
}

impl EvalContext {
    pub fn hole() -> Self {
        Self::default()
    }

    pub fn from_frames(frames: Vec<CtxFrame>) -> Self {
        Self { frames }
    }

    pub fn frames(&self) -> &[CtxFrame] {
        &self.frames
    }

    pub fn is_hole(&self) -> bool {
        self.frames.is_empty()
    }

    /// Extends the context at the hole: `E[F[□]]`.
    pub fn push(&mut self, frame: CtxFrame) {
        self.frames.push(frame);
    }

    pub fn with(mut self, frame: CtxFrame) -> Self {
        self.push(frame);
        self
    }

    pub fn plug(&self, e: Expr) -> Expr {
        self.frames.iter().rev().fold(e, |acc, frame| match frame {
            CtxFrame::AppFun(arg) => Expr::app(acc, arg.clone()),
            CtxFrame::AppArg(f) => Expr::app(f.clone(), acc),
            CtxFrame::Send(c) => Expr::Send(c.clone(), Box::new(acc)),
            CtxFrame::Stable => Expr::stable(acc),
            CtxFrame::Active => Expr::active(acc),
            CtxFrame::Backtrack => Expr::backtrack(acc),
        })
    }
}

impl fmt::Display for EvalContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.plug(Expr::Var(super::expr::name("[]"))))
    }
}

pub fn plug(ctx: &EvalContext, e: Expr) -> Expr {
    ctx.plug(e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RedexKind {
    /// `(λx.e) v`
    Beta,
    /// A primitive operator receiving its last argument, or a partial
    /// application of one.
    Prim,
    /// `send ℓ v`
    Send,
    /// `recv x ℓ in e`
    Recv,
    /// `(stable (λx.e)) v`
    EnterStable,
    /// `stable̲ v`
    ExitStable,
    /// `backtrack v`
    Backtrack,
    /// `send̲ ℓ v`
    Sending,
}

impl RedexKind {
    /// Redexes reduced by purely local steps that never consult channels.
    pub fn is_local(self) -> bool {
        matches!(self, RedexKind::Beta | RedexKind::Prim)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Redex {
    pub ctx: EvalContext,
    pub expr: Expr,
    pub kind: RedexKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decomposition {
    AlreadyValue,
    Redex(Redex),
}

/// Splits `e` into the unique left-to-right call-by-value context and redex.
pub fn decompose(e: &Expr) -> Result<Decomposition, Stuck> {
    let mut frames = Vec::new();
    match find(e, &mut frames)? {
        None => Ok(Decomposition::AlreadyValue),
        Some((expr, kind)) => Ok(Decomposition::Redex(Redex {
            ctx: EvalContext::from_frames(frames),
            expr,
            kind,
        })),
    }
}

/// Convenience: the redex of a non-value, or `None` for values.
pub fn redex_of(e: &Expr) -> Result<Option<Redex>, Stuck> {
    Ok(match decompose(e)? {
        Decomposition::AlreadyValue => None,
        Decomposition::Redex(r) => Some(r),
    })
}

fn find(e: &Expr, frames: &mut Vec<CtxFrame>) -> Result<Option<(Expr, RedexKind)>, Stuck> {
    if e.is_value() {
        return Ok(None);
    }
    let found = match e {
        Expr::Var(x) => return Err(Stuck::FreeVariable(x.clone())),
        Expr::App(f, a) => {
            if !f.is_value() {
                frames.push(CtxFrame::AppFun((**a).clone()));
                return find(f, frames);
            }
            if !a.is_value() {
                frames.push(CtxFrame::AppArg((**f).clone()));
                return find(a, frames);
            }
            let kind = match &**f {
                Expr::Lam(..) => RedexKind::Beta,
                Expr::Prim(..) => RedexKind::Prim,
                Expr::Stable(_) => RedexKind::EnterStable,
                other => return Err(Stuck::NotAFunction(other.clone())),
            };
            (e.clone(), kind)
        }
        Expr::Send(c, a) => {
            if !a.is_value() {
                frames.push(CtxFrame::Send(c.clone()));
                return find(a, frames);
            }
            (e.clone(), RedexKind::Send)
        }
        Expr::Recv(..) => (e.clone(), RedexKind::Recv),
        Expr::Stable(a) => {
            if a.is_value() {
                return Err(Stuck::StableNonFunction((**a).clone()));
            }
            frames.push(CtxFrame::Stable);
            return find(a, frames);
        }
        Expr::Active(a) => {
            if !a.is_value() {
                frames.push(CtxFrame::Active);
                return find(a, frames);
            }
            (e.clone(), RedexKind::ExitStable)
        }
        Expr::Backtrack(a) => {
            if !a.is_value() {
                frames.push(CtxFrame::Backtrack);
                return find(a, frames);
            }
            (e.clone(), RedexKind::Backtrack)
        }
        Expr::Sending(..) => (e.clone(), RedexKind::Sending),
        Expr::Unit | Expr::Int(_) | Expr::Prim(..) | Expr::Lam(..) => unreachable!("values"),
    };
    Ok(Some(found))
}

/// Reduces a `Prim` redex `p v`: either extends the partial application or
/// computes the result.
pub fn apply_prim(f: &Expr, arg: &Expr) -> Result<Expr, Stuck> {
    let Expr::Prim(op, args) = f else {
        return Err(Stuck::NotAFunction(f.clone()));
    };
    let Expr::Int(_) = arg else {
        return Err(Stuck::BadOperand { op: op.symbol(), arg: arg.clone() });
    };
    let mut args = args.clone();
    args.push(arg.clone());
    if args.len() < op.arity() {
        return Ok(Expr::Prim(*op, args));
    }
    let (Expr::Int(a), Expr::Int(b)) = (&args[0], &args[1]) else {
        unreachable!("operands checked on entry");
    };
    use super::expr::Op;
    Ok(match op {
        Op::Add => Expr::Int(a.wrapping_add(*b)),
        Op::Sub => Expr::Int(a.wrapping_sub(*b)),
        Op::Ge => Expr::Int(i64::from(a >= b)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::expr::Op;

    // `7 + □` once the operator has consumed its first operand.
    fn seven_plus(e: Expr) -> Expr {
        Expr::app(Expr::Prim(Op::Add, vec![Expr::Int(7)]), e)
    }

    #[test]
    fn decomposes_stable_application_under_addition() {
        let f = Expr::lam("x", Expr::var("x"));
        let e = seven_plus(Expr::app(Expr::stable(f.clone()), Expr::Int(4)));
        let Decomposition::Redex(r) = decompose(&e).unwrap() else { panic!() };
        assert_eq!(r.kind, RedexKind::EnterStable);
        assert_eq!(r.expr, Expr::app(Expr::stable(f), Expr::Int(4)));
        assert_eq!(r.ctx.plug(Expr::Var(crate::calculus::name("HOLE"))), seven_plus(Expr::var("HOLE")));
    }

    #[test]
    fn integer_is_already_a_value() {
        assert_eq!(decompose(&Expr::Int(3)).unwrap(), Decomposition::AlreadyValue);
    }

    #[test]
    fn constant_in_function_position_is_stuck() {
        let e = Expr::app(Expr::Int(1), Expr::Int(2));
        assert_eq!(decompose(&e), Err(Stuck::NotAFunction(Expr::Int(1))));
    }

    #[test]
    fn plug_examples() {
        assert_eq!(EvalContext::hole().plug(Expr::Int(3)), Expr::Int(3));
        let ctx = EvalContext::hole().with(CtxFrame::AppArg(Expr::Prim(Op::Add, vec![Expr::Int(7)])));
        assert_eq!(ctx.plug(Expr::active(Expr::Int(100))), seven_plus(Expr::active(Expr::Int(100))));
        let ctx = EvalContext::hole().with(CtxFrame::AppFun(Expr::Int(2)));
        let v = Expr::lam("y", Expr::var("y"));
        assert_eq!(ctx.plug(v.clone()), Expr::app(v, Expr::Int(2)));
    }

    #[test]
    fn primitive_arithmetic() {
        let add = Expr::Prim(Op::Add, vec![]);
        let partial = apply_prim(&add, &Expr::Int(1)).unwrap();
        assert_eq!(apply_prim(&partial, &Expr::Int(2)).unwrap(), Expr::Int(3));
        let ge = apply_prim(&Expr::Prim(Op::Ge, vec![]), &Expr::Int(1)).unwrap();
        assert_eq!(apply_prim(&ge, &Expr::Int(2)).unwrap(), Expr::Int(0));
        assert!(apply_prim(&add, &Expr::Unit).is_err());
    }

    #[test]
    fn stable_of_non_function_is_stuck() {
        let e = Expr::stable(Expr::Int(3));
        assert!(matches!(decompose(&e), Err(Stuck::StableNonFunction(_))));
    }
}
