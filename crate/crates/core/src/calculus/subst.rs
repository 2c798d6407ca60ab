//! Capture-avoiding substitution.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};

use super::expr::{name, Expr, Name};

static FRESH: AtomicU64 = AtomicU64::new(0);

fn fresh_like(base: &str) -> Name {
    let base = base.split('%').next().unwrap_or(base);
    let n = FRESH.fetch_add(1, Ordering::Relaxed);
    name(&format!("{base}%{n}"))
}

pub fn free_vars(e: &Expr) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    collect_free(e, &mut Vec::new(), &mut out);
    out
}

fn collect_free(e: &Expr, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match e {
        Expr::Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        Expr::Lam(x, b) | Expr::Recv(x, _, b) => {
            bound.push(x.clone());
            collect_free(b, bound, out);
            bound.pop();
        }
        Expr::Unit | Expr::Int(_) => {}
        Expr::Prim(_, args) => args.iter().for_each(|a| collect_free(a, bound, out)),
        Expr::App(f, a) => {
            collect_free(f, bound, out);
            collect_free(a, bound, out);
        }
        Expr::Send(_, b)
        | Expr::Sending(_, b)
        | Expr::Stable(b)
        | Expr::Backtrack(b)
        | Expr::Active(b) => collect_free(b, bound, out),
    }
}

pub fn is_closed(e: &Expr) -> bool {
    free_vars(e).is_empty()
}

/// `e[v/x]`. Binders that would capture a free variable of `v` are renamed
/// with a globally fresh name.
pub fn subst(e: &Expr, v: &Expr, x: &Name) -> Expr {
    let fv = free_vars(v);
    go(e, v, x, &fv)
}

fn go(e: &Expr, v: &Expr, x: &Name, fv: &BTreeSet<Name>) -> Expr {
    match e {
        Expr::Var(y) if y == x => v.clone(),
        Expr::Var(_) | Expr::Unit | Expr::Int(_) => e.clone(),
        Expr::Prim(op, args) => Expr::Prim(*op, args.iter().map(|a| go(a, v, x, fv)).collect()),
        Expr::App(f, a) => Expr::app(go(f, v, x, fv), go(a, v, x, fv)),
        Expr::Send(c, b) => Expr::Send(c.clone(), Box::new(go(b, v, x, fv))),
        Expr::Sending(c, b) => Expr::Sending(c.clone(), Box::new(go(b, v, x, fv))),
        Expr::Stable(b) => Expr::stable(go(b, v, x, fv)),
        Expr::Backtrack(b) => Expr::backtrack(go(b, v, x, fv)),
        Expr::Active(b) => Expr::active(go(b, v, x, fv)),
        Expr::Lam(y, b) => {
            let (y, b) = under_binder(y, b, v, x, fv);
            Expr::Lam(y, Box::new(b))
        }
        Expr::Recv(y, c, b) => {
            let (y, b) = under_binder(y, b, v, x, fv);
            Expr::Recv(y, c.clone(), Box::new(b))
        }
    }
}

fn under_binder(y: &Name, body: &Expr, v: &Expr, x: &Name, fv: &BTreeSet<Name>) -> (Name, Expr) {
    if y == x {
        return (y.clone(), body.clone());
    }
    if fv.contains(y) && free_vars(body).contains(x) {
        let z = fresh_like(y);
        let renamed = go(body, &Expr::Var(z.clone()), y, &BTreeSet::from([z.clone()]));
        return (z, go(&renamed, v, x, fv));
    }
    (y.clone(), go(body, v, x, fv))
}
