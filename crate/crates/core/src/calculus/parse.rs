//! S-expression program format.
//!
//! ```text
//! (system
//!   (chan c p1 p2)                  ; channel c: sender p1, receiver p2
//!   (proc p1 (send c 2))
//!   (proc p2 (recv x c (+ x 1))))
//! ```
//!
//! Expressions: integers, `unit` (or `()`), variables, `(lam x e)`,
//! `(app f a ...)`, `(send c e)`, `(recv x c e)`, `(stable e)`,
//! `(backtrack e)`, `(+ a b)`, `(- a b)`, `(>= a b)`. Sugar:
//! `(seq e1 ... en)` and `(let x e1 e2)`. `;` starts a line comment.

use std::collections::BTreeSet;

use thiserror::Error;

use super::expr::{name, Expr, Name, Op};
use super::subst::free_vars;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelDecl {
    pub name: Name,
    pub sender: Name,
    pub receiver: Name,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessDef {
    pub name: Name,
    pub body: Expr,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub channels: Vec<ChannelDecl>,
    pub processes: Vec<ProcessDef>,
}

impl Program {
    pub fn channel(&self, c: &str) -> Option<&ChannelDecl> {
        self.channels.iter().find(|d| &*d.name == c)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: `{keyword}` is an internal form and cannot appear in source")]
    InternalForm { line: usize, col: usize, keyword: String },
    #[error("duplicate channel `{0}`")]
    DuplicateChannel(Name),
    #[error("duplicate process `{0}`")]
    DuplicateProcess(Name),
    #[error("channel `{chan}` names unknown process `{process}`")]
    UnknownEndpoint { chan: Name, process: Name },
    #[error("process `{process}` uses undeclared channel `{chan}`")]
    UndeclaredChannel { process: Name, chan: Name },
    #[error("process `{process}` cannot {action} on channel `{chan}`: it is not the channel's {role}")]
    WrongEndpoint { process: Name, chan: Name, action: &'static str, role: &'static str },
    #[error("process `{process}` has free variable `{var}`")]
    UnboundVariable { process: Name, var: Name },
}

#[derive(Clone, Debug)]
enum Sexp {
    Atom { text: String, line: usize, col: usize },
    List { items: Vec<Sexp>, line: usize, col: usize },
}

impl Sexp {
    fn pos(&self) -> (usize, usize) {
        match self {
            Sexp::Atom { line, col, .. } | Sexp::List { line, col, .. } => (*line, *col),
        }
    }
}

fn syntax(at: (usize, usize), msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line: at.0, col: at.1, msg: msg.into() }
}

const INTERNAL_KEYWORDS: &[&str] = &["stable-active", "send-active"];

fn read(text: &str) -> Result<Vec<Sexp>, ParseError> {
    let mut stack: Vec<(Vec<Sexp>, usize, usize)> = vec![(Vec::new(), 0, 0)];
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&ch) = chars.peek() {
        let here = (line, col);
        match ch {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                chars.next();
                col += 1;
                stack.push((Vec::new(), here.0, here.1));
            }
            ')' => {
                chars.next();
                col += 1;
                if stack.len() == 1 {
                    return Err(syntax(here, "unbalanced `)`"));
                }
                let (items, l, c) = stack.pop().expect("non-empty");
                stack.last_mut().expect("root").0.push(Sexp::List { items, line: l, col: c });
            }
            _ => {
                let mut tok = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    tok.push(c);
                    chars.next();
                    col += 1;
                }
                if INTERNAL_KEYWORDS.contains(&tok.as_str()) {
                    return Err(ParseError::InternalForm { line: here.0, col: here.1, keyword: tok });
                }
                stack.last_mut().expect("root").0.push(Sexp::Atom { text: tok, line: here.0, col: here.1 });
            }
        }
    }
    if stack.len() > 1 {
        let (_, l, c) = stack.last().expect("non-empty");
        return Err(syntax((*l, *c), "unclosed `(`"));
    }
    Ok(stack.pop().expect("root").0)
}

fn ident(s: &Sexp, what: &str) -> Result<Name, ParseError> {
    match s {
        Sexp::Atom { text, .. } if is_ident(text) => Ok(name(text)),
        _ => Err(syntax(s.pos(), format!("expected {what}"))),
    }
}

fn is_ident(t: &str) -> bool {
    let reserved = [
        "lam", "app", "send", "recv", "stable", "backtrack", "unit", "seq", "let", "chan", "proc",
        "system", "par", "+", "-", ">=",
    ];
    !t.is_empty()
        && !reserved.contains(&t)
        && t.parse::<i64>().is_err()
        && t.chars().all(|c| c.is_alphanumeric() || "_'?!*.".contains(c))
}

fn arity(items: &[Sexp], n: usize, head: &str, at: (usize, usize)) -> Result<(), ParseError> {
    if items.len() != n + 1 {
        return Err(syntax(at, format!("`{head}` takes {n} argument(s), got {}", items.len() - 1)));
    }
    Ok(())
}

fn expr(s: &Sexp) -> Result<Expr, ParseError> {
    match s {
        Sexp::Atom { text, .. } => {
            if let Ok(n) = text.parse::<i64>() {
                return Ok(Expr::Int(n));
            }
            match text.as_str() {
                "unit" => Ok(Expr::Unit),
                "+" => Ok(Expr::Prim(Op::Add, vec![])),
                "-" => Ok(Expr::Prim(Op::Sub, vec![])),
                ">=" => Ok(Expr::Prim(Op::Ge, vec![])),
                _ => Ok(Expr::Var(ident(s, "a variable")?)),
            }
        }
        Sexp::List { items, line, col } => {
            let at = (*line, *col);
            let Some(head) = items.first() else {
                return Ok(Expr::Unit);
            };
            let Sexp::Atom { text: head, .. } = head else {
                return Err(syntax(at, "expected a keyword after `(`"));
            };
            match head.as_str() {
                "lam" => {
                    arity(items, 2, head, at)?;
                    Ok(Expr::Lam(ident(&items[1], "a parameter name")?, Box::new(expr(&items[2])?)))
                }
                "app" => {
                    if items.len() < 3 {
                        return Err(syntax(at, "`app` takes at least 2 arguments"));
                    }
                    let mut acc = expr(&items[1])?;
                    for a in &items[2..] {
                        acc = Expr::app(acc, expr(a)?);
                    }
                    Ok(acc)
                }
                "send" => {
                    arity(items, 2, head, at)?;
                    Ok(Expr::Send(ident(&items[1], "a channel name")?, Box::new(expr(&items[2])?)))
                }
                "recv" => {
                    arity(items, 3, head, at)?;
                    Ok(Expr::Recv(
                        ident(&items[1], "a variable")?,
                        ident(&items[2], "a channel name")?,
                        Box::new(expr(&items[3])?),
                    ))
                }
                "stable" => {
                    arity(items, 1, head, at)?;
                    Ok(Expr::stable(expr(&items[1])?))
                }
                "backtrack" => {
                    arity(items, 1, head, at)?;
                    Ok(Expr::backtrack(expr(&items[1])?))
                }
                "+" | "-" | ">=" => {
                    arity(items, 2, head, at)?;
                    let op = match head.as_str() {
                        "+" => Op::Add,
                        "-" => Op::Sub,
                        _ => Op::Ge,
                    };
                    Ok(Expr::op(op, expr(&items[1])?, expr(&items[2])?))
                }
                "seq" => {
                    if items.len() < 2 {
                        return Err(syntax(at, "`seq` needs at least one expression"));
                    }
                    let mut rest = items[1..].iter().rev();
                    let mut acc = expr(rest.next().expect("non-empty"))?;
                    for e in rest {
                        acc = Expr::app(Expr::lam("_", acc), expr(e)?);
                    }
                    Ok(acc)
                }
                "let" => {
                    arity(items, 3, head, at)?;
                    let x = ident(&items[1], "a variable")?;
                    Ok(Expr::app(Expr::Lam(x, Box::new(expr(&items[3])?)), expr(&items[2])?))
                }
                other => Err(syntax(at, format!("unknown form `{other}`"))),
            }
        }
    }
}

/// Parses a single expression (used by tests and tooling).
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let forms = read(text)?;
    match forms.as_slice() {
        [one] => expr(one),
        _ => Err(syntax((1, 1), "expected exactly one expression")),
    }
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let forms = read(text)?;
    let [Sexp::List { items, line, col }] = forms.as_slice() else {
        return Err(syntax((1, 1), "expected a single `(system ...)` form"));
    };
    match items.first() {
        Some(Sexp::Atom { text, .. }) if text == "system" || text == "par" => {}
        _ => return Err(syntax((*line, *col), "expected `system`")),
    }
    let mut program = Program::default();
    for item in &items[1..] {
        let Sexp::List { items: parts, line, col } = item else {
            return Err(syntax(item.pos(), "expected `(chan ...)` or `(proc ...)`"));
        };
        let at = (*line, *col);
        match parts.first() {
            Some(Sexp::Atom { text, .. }) if text == "chan" => {
                arity(parts, 3, "chan", at)?;
                let decl = ChannelDecl {
                    name: ident(&parts[1], "a channel name")?,
                    sender: ident(&parts[2], "a sender process name")?,
                    receiver: ident(&parts[3], "a receiver process name")?,
                };
                if program.channel(&decl.name).is_some() {
                    return Err(ParseError::DuplicateChannel(decl.name));
                }
                program.channels.push(decl);
            }
            Some(Sexp::Atom { text, .. }) if text == "proc" => {
                // `(proc p body)`; `(proc p () body)` is accepted too.
                let body = match parts.len() {
                    3 => expr(&parts[2])?,
                    4 if matches!(&parts[2], Sexp::List { items, .. } if items.is_empty()) => expr(&parts[3])?,
                    _ => return Err(syntax(at, "`proc` takes a name and a body")),
                };
                let def = ProcessDef { name: ident(&parts[1], "a process name")?, body };
                if program.processes.iter().any(|p| p.name == def.name) {
                    return Err(ParseError::DuplicateProcess(def.name));
                }
                program.processes.push(def);
            }
            _ => return Err(syntax(at, "expected `(chan ...)` or `(proc ...)`")),
        }
    }
    validate(&program)?;
    Ok(program)
}

fn validate(program: &Program) -> Result<(), ParseError> {
    let procs: BTreeSet<&Name> = program.processes.iter().map(|p| &p.name).collect();
    for c in &program.channels {
        for end in [&c.sender, &c.receiver] {
            if !procs.contains(end) {
                return Err(ParseError::UnknownEndpoint { chan: c.name.clone(), process: end.clone() });
            }
        }
    }
    for p in &program.processes {
        if let Some(var) = free_vars(&p.body).into_iter().next() {
            return Err(ParseError::UnboundVariable { process: p.name.clone(), var });
        }
        check_endpoints(program, &p.name, &p.body)?;
    }
    Ok(())
}

fn check_endpoints(program: &Program, process: &Name, e: &Expr) -> Result<(), ParseError> {
    let check = |chan: &Name, sending: bool| {
        let decl = program
            .channel(chan)
            .ok_or_else(|| ParseError::UndeclaredChannel { process: process.clone(), chan: chan.clone() })?;
        let (owner, action, role) =
            if sending { (&decl.sender, "send", "sender") } else { (&decl.receiver, "receive", "receiver") };
        if owner != process {
            return Err(ParseError::WrongEndpoint { process: process.clone(), chan: chan.clone(), action, role });
        }
        Ok(())
    };
    match e {
        Expr::Send(c, b) | Expr::Sending(c, b) => {
            check(c, true)?;
            check_endpoints(program, process, b)
        }
        Expr::Recv(_, c, b) => {
            check(c, false)?;
            check_endpoints(program, process, b)
        }
        Expr::Unit | Expr::Int(_) | Expr::Var(_) => Ok(()),
        Expr::Prim(_, args) => args.iter().try_for_each(|a| check_endpoints(program, process, a)),
        Expr::Lam(_, b) | Expr::Stable(b) | Expr::Backtrack(b) | Expr::Active(b) => {
            check_endpoints(program, process, b)
        }
        Expr::App(f, a) => {
            check_endpoints(program, process, f)?;
            check_endpoints(program, process, a)
        }
    }
}
