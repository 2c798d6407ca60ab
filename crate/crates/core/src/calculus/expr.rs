//! Abstract syntax of the core calculus.
//!
//! User programs are call-by-value lambda terms extended with synchronous
//! channel communication (`send`, `recv`) and the backtracking primitives
//! (`stable`, `backtrack`). Two forms only ever appear at run time: the
//! active region [`Expr::Active`] and the in-progress send [`Expr::Sending`].

use std::fmt;
use std::sync::Arc;

/// Variable, channel and process names.
pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

/// Primitive operators. All are curried and reduce once fully applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Add,
    Sub,
    /// `a >= b`, yielding `1` or `0`.
    Ge,
}

impl Op {
    pub fn arity(self) -> usize {
        2
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Unit,
    Int(i64),
    /// A primitive operator applied to fewer arguments than its arity.
    /// `Prim(op, [])` is the bare operator constant.
    Prim(Op, Vec<Expr>),
    Var(Name),
    Lam(Name, Box<Expr>),
    App(Box<Expr>, Box<Expr>),
    Send(Name, Box<Expr>),
    /// `recv x ℓ in e`: binds `x` in the body.
    Recv(Name, Name, Box<Expr>),
    Stable(Box<Expr>),
    Backtrack(Box<Expr>),
    /// Internal: an active stable region.
    Active(Box<Expr>),
    /// Internal: a send whose request has been issued but not completed.
    Sending(Name, Box<Expr>),
}

impl Expr {
    pub fn lam(x: &str, body: Expr) -> Expr {
        Expr::Lam(name(x), Box::new(body))
    }

    pub fn app(f: Expr, a: Expr) -> Expr {
        Expr::App(Box::new(f), Box::new(a))
    }

    pub fn var(x: &str) -> Expr {
        Expr::Var(name(x))
    }

    pub fn op(op: Op, a: Expr, b: Expr) -> Expr {
        Expr::app(Expr::app(Expr::Prim(op, Vec::new()), a), b)
    }

    pub fn send(chan: &str, e: Expr) -> Expr {
        Expr::Send(name(chan), Box::new(e))
    }

    pub fn recv(x: &str, chan: &str, body: Expr) -> Expr {
        Expr::Recv(name(x), name(chan), Box::new(body))
    }

    pub fn stable(e: Expr) -> Expr {
        Expr::Stable(Box::new(e))
    }

    pub fn backtrack(e: Expr) -> Expr {
        Expr::Backtrack(Box::new(e))
    }

    pub fn active(e: Expr) -> Expr {
        Expr::Active(Box::new(e))
    }

    pub fn sending(chan: &str, v: Expr) -> Expr {
        Expr::Sending(name(chan), Box::new(v))
    }

    /// Values: constants (including partially applied operators),
    /// abstractions, and `stable (λx.e)`.
    pub fn is_value(&self) -> bool {
        match self {
            Expr::Unit | Expr::Int(_) | Expr::Prim(..) | Expr::Lam(..) => true,
            Expr::Stable(inner) => matches!(**inner, Expr::Lam(..)),
            _ => false,
        }
    }

    /// True if the expression contains `Active` or `Sending` anywhere.
    pub fn has_internal_form(&self) -> bool {
        match self {
            Expr::Active(_) | Expr::Sending(..) => true,
            Expr::Unit | Expr::Int(_) | Expr::Var(_) => false,
            Expr::Prim(_, args) => args.iter().any(Expr::has_internal_form),
            Expr::Lam(_, b)
            | Expr::Send(_, b)
            | Expr::Recv(_, _, b)
            | Expr::Stable(b)
            | Expr::Backtrack(b) => b.has_internal_form(),
            Expr::App(f, a) => f.has_internal_form() || a.has_internal_form(),
        }
    }

    /// Channels mentioned by `send`/`recv` forms, in first-occurrence order.
    pub fn channels(&self) -> Vec<Name> {
        let mut out = Vec::new();
        self.collect_channels(&mut out);
        out
    }

    fn collect_channels(&self, out: &mut Vec<Name>) {
        let mut push = |c: &Name| {
            if !out.contains(c) {
                out.push(c.clone());
            }
        };
        match self {
            Expr::Send(c, b) | Expr::Sending(c, b) => {
                push(c);
                b.collect_channels(out);
            }
            Expr::Recv(_, c, b) => {
                push(c);
                b.collect_channels(out);
            }
            Expr::Unit | Expr::Int(_) | Expr::Var(_) => {}
            Expr::Prim(_, args) => args.iter().for_each(|a| a.collect_channels(out)),
            Expr::Lam(_, b) | Expr::Stable(b) | Expr::Backtrack(b) | Expr::Active(b) => {
                b.collect_channels(out)
            }
            Expr::App(f, a) => {
                f.collect_channels(out);
                a.collect_channels(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Unit => write!(f, "unit"),
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Prim(op, args) => {
                if args.is_empty() {
                    write!(f, "{}", op.symbol())
                } else {
                    write!(f, "({}", op.symbol())?;
                    for a in args {
                        write!(f, " {a}")?;
                    }
                    write!(f, ")")
                }
            }
            Expr::Var(x) => write!(f, "{x}"),
            Expr::Lam(x, b) => write!(f, "(lam {x} {b})"),
            Expr::App(a, b) => {
                // Operator applications print in operator form.
                if let Expr::Prim(op, args) = &**a {
                    if args.len() == 1 {
                        return write!(f, "({} {} {b})", op.symbol(), args[0]);
                    }
                }
                if let Expr::App(g, x) = &**a {
                    if let Expr::Prim(op, args) = &**g {
                        if args.is_empty() {
                            return write!(f, "({} {x} {b})", op.symbol());
                        }
                    }
                }
                write!(f, "(app {a} {b})")
            }
            Expr::Send(c, e) => write!(f, "(send {c} {e})"),
            Expr::Recv(x, c, e) => write!(f, "(recv {x} {c} {e})"),
            Expr::Stable(e) => write!(f, "(stable {e})"),
            Expr::Backtrack(e) => write!(f, "(backtrack {e})"),
            Expr::Active(e) => write!(f, "(stable-active {e})"),
            Expr::Sending(c, e) => write!(f, "(send-active {c} {e})"),
        }
    }
}
