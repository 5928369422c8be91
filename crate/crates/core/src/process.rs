//! Plain and extended processes, binder hygiene, and the correctness check
//! for extended processes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::term::{check_acyclic, FreshGen, Kind, Symbol, Term};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PlainProcess {
    Nil,
    Par(Box<PlainProcess>, Box<PlainProcess>),
    Repl(Box<PlainProcess>),
    New(Symbol, Box<PlainProcess>),
    /// `if lhs = rhs then P else Q`
    If(Term, Term, Box<PlainProcess>, Box<PlainProcess>),
    /// `in(channel, x).P`; the channel never mentions `x`.
    In(Term, Symbol, Box<PlainProcess>),
    /// `out(channel, message).P`
    Out(Term, Term, Box<PlainProcess>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtendedProcess {
    Plain(PlainProcess),
    Par(Box<ExtendedProcess>, Box<ExtendedProcess>),
    Res(Symbol, Box<ExtendedProcess>),
    /// The active substitution `{term/var}`.
    Subst(Symbol, Term),
}

/// One step of a path from the root of a process to a sub-process.
/// Extended-to-plain injections are transparent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    Left,
    Right,
    Body,
    Then,
    Else,
}

pub type Path = Vec<Step>;

fn fmt_path(p: &[Step]) -> String {
    if p.is_empty() {
        return "/".into();
    }
    p.iter()
        .map(|s| match s {
            Step::Left => "/left",
            Step::Right => "/right",
            Step::Body => "/body",
            Step::Then => "/then",
            Step::Else => "/else",
        })
        .collect()
}

impl PlainProcess {
    pub fn par(a: PlainProcess, b: PlainProcess) -> Self {
        PlainProcess::Par(Box::new(a), Box::new(b))
    }

    pub fn repl(p: PlainProcess) -> Self {
        PlainProcess::Repl(Box::new(p))
    }

    pub fn new_name(n: Symbol, p: PlainProcess) -> Self {
        PlainProcess::New(n, Box::new(p))
    }

    pub fn if_then_else(l: Term, r: Term, p: PlainProcess, q: PlainProcess) -> Self {
        PlainProcess::If(l, r, Box::new(p), Box::new(q))
    }

    pub fn input(c: Term, x: Symbol, p: PlainProcess) -> Self {
        PlainProcess::In(c, x, Box::new(p))
    }

    pub fn output(c: Term, e: Term, p: PlainProcess) -> Self {
        PlainProcess::Out(c, e, Box::new(p))
    }

    /// Right-nested parallel composition; `Nil` when empty.
    pub fn par_all(items: impl IntoIterator<Item = PlainProcess>) -> Self {
        let mut items: Vec<_> = items.into_iter().collect();
        let Some(mut acc) = items.pop() else {
            return PlainProcess::Nil;
        };
        while let Some(p) = items.pop() {
            acc = PlainProcess::par(p, acc);
        }
        acc
    }

    fn free_into(&self, kind: Kind, bound: &mut Vec<Symbol>, out: &mut BTreeSet<Symbol>) {
        let term = |t: &Term, bound: &Vec<Symbol>, out: &mut BTreeSet<Symbol>| {
            let mut s = BTreeSet::new();
            t.collect(kind, &mut s);
            out.extend(s.into_iter().filter(|x| !bound.contains(x)));
        };
        match self {
            PlainProcess::Nil => {}
            PlainProcess::Par(a, b) => {
                a.free_into(kind, bound, out);
                b.free_into(kind, bound, out);
            }
            PlainProcess::Repl(p) => p.free_into(kind, bound, out),
            PlainProcess::New(n, p) => {
                bound.push(n.clone());
                p.free_into(kind, bound, out);
                bound.pop();
            }
            PlainProcess::If(l, r, p, q) => {
                term(l, bound, out);
                term(r, bound, out);
                p.free_into(kind, bound, out);
                q.free_into(kind, bound, out);
            }
            PlainProcess::In(c, x, p) => {
                term(c, bound, out);
                bound.push(x.clone());
                p.free_into(kind, bound, out);
                bound.pop();
            }
            PlainProcess::Out(c, e, p) => {
                term(c, bound, out);
                term(e, bound, out);
                p.free_into(kind, bound, out);
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.free_into(Kind::Variable, &mut Vec::new(), &mut out);
        out
    }

    pub fn free_names(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.free_into(Kind::Name, &mut Vec::new(), &mut out);
        out
    }

    /// Every symbol occurring anywhere, binders included.
    pub fn symbols(&self, out: &mut BTreeSet<Symbol>) {
        self.visit_terms(&mut |t| t.atoms(out));
        self.visit_binders(&mut |s| {
            out.insert(s.clone());
        });
    }

    pub fn visit_terms(&self, f: &mut impl FnMut(&Term)) {
        match self {
            PlainProcess::Nil => {}
            PlainProcess::Par(a, b) => {
                a.visit_terms(f);
                b.visit_terms(f);
            }
            PlainProcess::Repl(p) | PlainProcess::New(_, p) => p.visit_terms(f),
            PlainProcess::If(l, r, p, q) => {
                f(l);
                f(r);
                p.visit_terms(f);
                q.visit_terms(f);
            }
            PlainProcess::In(c, _, p) => {
                f(c);
                p.visit_terms(f);
            }
            PlainProcess::Out(c, e, p) => {
                f(c);
                f(e);
                p.visit_terms(f);
            }
        }
    }

    pub fn visit_binders(&self, f: &mut impl FnMut(&Symbol)) {
        match self {
            PlainProcess::Nil => {}
            PlainProcess::Par(a, b) => {
                a.visit_binders(f);
                b.visit_binders(f);
            }
            PlainProcess::Repl(p) => p.visit_binders(f),
            PlainProcess::New(n, p) | PlainProcess::In(_, n, p) => {
                f(n);
                p.visit_binders(f);
            }
            PlainProcess::If(_, _, p, q) => {
                p.visit_binders(f);
                q.visit_binders(f);
            }
            PlainProcess::Out(_, _, p) => p.visit_binders(f),
        }
    }

    /// Applies `f` to every term, binder-unaware.
    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> PlainProcess {
        use PlainProcess::*;
        match self {
            Nil => Nil,
            Par(a, b) => PlainProcess::par(a.map_terms(f), b.map_terms(f)),
            Repl(p) => PlainProcess::repl(p.map_terms(f)),
            New(n, p) => PlainProcess::new_name(n.clone(), p.map_terms(f)),
            If(l, r, p, q) => PlainProcess::if_then_else(f(l), f(r), p.map_terms(f), q.map_terms(f)),
            In(c, x, p) => PlainProcess::input(f(c), x.clone(), p.map_terms(f)),
            Out(c, e, p) => PlainProcess::output(f(c), f(e), p.map_terms(f)),
        }
    }

    /// Capture-avoiding replacement of the free occurrences of `x` by `by`.
    pub fn substitute(&self, x: &Symbol, by: &Term) -> PlainProcess {
        use PlainProcess::*;
        match self {
            Nil => Nil,
            Par(a, b) => PlainProcess::par(a.substitute(x, by), b.substitute(x, by)),
            Repl(p) => PlainProcess::repl(p.substitute(x, by)),
            If(l, r, p, q) => PlainProcess::if_then_else(
                l.substitute(x, by),
                r.substitute(x, by),
                p.substitute(x, by),
                q.substitute(x, by),
            ),
            Out(c, e, p) => PlainProcess::output(c.substitute(x, by), e.substitute(x, by), p.substitute(x, by)),
            New(n, p) => {
                let (n, p) = self.under_binder(n, p, x, by);
                PlainProcess::new_name(n, p)
            }
            In(c, y, p) => {
                let c = c.substitute(x, by);
                let (y, p) = self.under_binder(y, p, x, by);
                PlainProcess::input(c, y, p)
            }
        }
    }

    fn under_binder(&self, u: &Symbol, body: &PlainProcess, x: &Symbol, by: &Term) -> (Symbol, PlainProcess) {
        if u == x {
            return (u.clone(), body.clone());
        }
        if by.contains(u) {
            let mut used = BTreeSet::new();
            body.symbols(&mut used);
            by.atoms(&mut used);
            used.insert(x.clone());
            let fresh = FreshGen::global().fresh(u, |s| used.contains(s));
            let body = body.substitute(u, &Term::Atom(fresh.clone()));
            return (fresh.clone(), body.substitute(x, by));
        }
        (u.clone(), body.substitute(x, by))
    }

    /// Number of AST nodes, terms counted as one.
    pub fn size(&self) -> usize {
        match self {
            PlainProcess::Nil => 1,
            PlainProcess::Par(a, b) => 1 + a.size() + b.size(),
            PlainProcess::Repl(p) | PlainProcess::New(_, p) => 1 + p.size(),
            PlainProcess::If(_, _, p, q) => 3 + p.size() + q.size(),
            PlainProcess::In(_, _, p) => 2 + p.size(),
            PlainProcess::Out(_, _, p) => 3 + p.size(),
        }
    }

    pub fn has_replication(&self) -> bool {
        match self {
            PlainProcess::Nil => false,
            PlainProcess::Repl(_) => true,
            PlainProcess::Par(a, b) | PlainProcess::If(_, _, a, b) => a.has_replication() || b.has_replication(),
            PlainProcess::New(_, p) | PlainProcess::In(_, _, p) | PlainProcess::Out(_, _, p) => p.has_replication(),
        }
    }

    fn child(&self, step: Step) -> Option<&PlainProcess> {
        match (self, step) {
            (PlainProcess::Par(a, _), Step::Left) => Some(a),
            (PlainProcess::Par(_, b), Step::Right) => Some(b),
            (PlainProcess::If(_, _, p, _), Step::Then) => Some(p),
            (PlainProcess::If(_, _, _, q), Step::Else) => Some(q),
            (PlainProcess::Repl(p), Step::Body)
            | (PlainProcess::New(_, p), Step::Body)
            | (PlainProcess::In(_, _, p), Step::Body)
            | (PlainProcess::Out(_, _, p), Step::Body) => Some(p),
            _ => None,
        }
    }

    fn rebuild_at(&self, path: &[Step], f: &mut dyn FnMut(&PlainProcess) -> Result<PlainProcess>) -> Result<PlainProcess> {
        use PlainProcess::*;
        let Some((&step, rest)) = path.split_first() else {
            return f(self);
        };
        let bad = || Error::PreconditionViolated("path does not exist".into());
        Ok(match (self, step) {
            (Par(a, b), Step::Left) => PlainProcess::par(a.rebuild_at(rest, f)?, (**b).clone()),
            (Par(a, b), Step::Right) => PlainProcess::par((**a).clone(), b.rebuild_at(rest, f)?),
            (Repl(p), Step::Body) => PlainProcess::repl(p.rebuild_at(rest, f)?),
            (New(n, p), Step::Body) => PlainProcess::new_name(n.clone(), p.rebuild_at(rest, f)?),
            (In(c, x, p), Step::Body) => PlainProcess::input(c.clone(), x.clone(), p.rebuild_at(rest, f)?),
            (Out(c, e, p), Step::Body) => PlainProcess::output(c.clone(), e.clone(), p.rebuild_at(rest, f)?),
            (If(l, r, p, q), Step::Then) => {
                PlainProcess::if_then_else(l.clone(), r.clone(), p.rebuild_at(rest, f)?, (**q).clone())
            }
            (If(l, r, p, q), Step::Else) => {
                PlainProcess::if_then_else(l.clone(), r.clone(), (**p).clone(), q.rebuild_at(rest, f)?)
            }
            _ => return Err(bad()),
        })
    }
}

impl ExtendedProcess {
    pub fn nil() -> Self {
        ExtendedProcess::Plain(PlainProcess::Nil)
    }

    pub fn par(a: ExtendedProcess, b: ExtendedProcess) -> Self {
        match (a, b) {
            (ExtendedProcess::Plain(p), ExtendedProcess::Plain(q)) => ExtendedProcess::Plain(PlainProcess::par(p, q)),
            (a, b) => ExtendedProcess::Par(Box::new(a), Box::new(b)),
        }
    }

    pub fn res(u: Symbol, a: ExtendedProcess) -> Self {
        match a {
            ExtendedProcess::Plain(p) if u.is_name() => ExtendedProcess::Plain(PlainProcess::new_name(u, p)),
            a => ExtendedProcess::Res(u, Box::new(a)),
        }
    }

    pub fn subst(x: Symbol, e: Term) -> Self {
        ExtendedProcess::Subst(x, e)
    }

    /// Right-nested parallel composition; `0` when empty.
    pub fn par_all(items: impl IntoIterator<Item = ExtendedProcess>) -> Self {
        let mut items: Vec<_> = items.into_iter().collect();
        let Some(mut acc) = items.pop() else {
            return ExtendedProcess::nil();
        };
        while let Some(p) = items.pop() {
            acc = ExtendedProcess::par(p, acc);
        }
        acc
    }

    pub fn restrict_all(us: &[Symbol], a: ExtendedProcess) -> Self {
        us.iter().rev().fold(a, |acc, u| ExtendedProcess::res(u.clone(), acc))
    }

    pub fn as_plain(&self) -> Option<&PlainProcess> {
        match self {
            ExtendedProcess::Plain(p) => Some(p),
            _ => None,
        }
    }

    fn free_into(&self, kind: Kind, bound: &mut Vec<Symbol>, out: &mut BTreeSet<Symbol>) {
        match self {
            ExtendedProcess::Plain(p) => {
                let mut inner = BTreeSet::new();
                p.free_into(kind, &mut Vec::new(), &mut inner);
                out.extend(inner.into_iter().filter(|s| !bound.contains(s)));
            }
            ExtendedProcess::Par(a, b) => {
                a.free_into(kind, bound, out);
                b.free_into(kind, bound, out);
            }
            ExtendedProcess::Res(u, a) => {
                bound.push(u.clone());
                a.free_into(kind, bound, out);
                bound.pop();
            }
            ExtendedProcess::Subst(x, e) => {
                if x.kind() == kind && !bound.contains(x) {
                    out.insert(x.clone());
                }
                let mut s = BTreeSet::new();
                e.collect(kind, &mut s);
                out.extend(s.into_iter().filter(|y| !bound.contains(y)));
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.free_into(Kind::Variable, &mut Vec::new(), &mut out);
        out
    }

    pub fn free_names(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.free_into(Kind::Name, &mut Vec::new(), &mut out);
        out
    }

    /// Constants occurring anywhere.
    pub fn constants(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.visit_terms(&mut |t| t.collect(Kind::Constant, &mut out));
        out
    }

    /// Variables `x` with an active substitution `{e/x}` that is not under
    /// a `nu x`.
    pub fn domain(&self) -> BTreeSet<Symbol> {
        fn go(a: &ExtendedProcess, bound: &mut Vec<Symbol>, out: &mut BTreeSet<Symbol>) {
            match a {
                ExtendedProcess::Plain(_) => {}
                ExtendedProcess::Par(l, r) => {
                    go(l, bound, out);
                    go(r, bound, out);
                }
                ExtendedProcess::Res(u, b) => {
                    bound.push(u.clone());
                    go(b, bound, out);
                    bound.pop();
                }
                ExtendedProcess::Subst(x, _) => {
                    if !bound.contains(x) {
                        out.insert(x.clone());
                    }
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_closed(&self) -> bool {
        self.domain() == self.free_vars()
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.symbols_into(&mut out);
        out
    }

    fn symbols_into(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            ExtendedProcess::Plain(p) => p.symbols(out),
            ExtendedProcess::Par(a, b) => {
                a.symbols_into(out);
                b.symbols_into(out);
            }
            ExtendedProcess::Res(u, a) => {
                out.insert(u.clone());
                a.symbols_into(out);
            }
            ExtendedProcess::Subst(x, e) => {
                out.insert(x.clone());
                e.atoms(out);
            }
        }
    }

    pub fn visit_terms(&self, f: &mut impl FnMut(&Term)) {
        match self {
            ExtendedProcess::Plain(p) => p.visit_terms(f),
            ExtendedProcess::Par(a, b) => {
                a.visit_terms(f);
                b.visit_terms(f);
            }
            ExtendedProcess::Res(_, a) => a.visit_terms(f),
            ExtendedProcess::Subst(_, e) => f(e),
        }
    }

    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> ExtendedProcess {
        match self {
            ExtendedProcess::Plain(p) => ExtendedProcess::Plain(p.map_terms(f)),
            ExtendedProcess::Par(a, b) => ExtendedProcess::Par(Box::new(a.map_terms(f)), Box::new(b.map_terms(f))),
            ExtendedProcess::Res(u, a) => ExtendedProcess::Res(u.clone(), Box::new(a.map_terms(f))),
            ExtendedProcess::Subst(x, e) => ExtendedProcess::Subst(x.clone(), f(e)),
        }
    }

    /// Capture-avoiding replacement of free occurrences of `x` by `by`. The
    /// target variable of an active substitution is never replaced.
    pub fn substitute(&self, x: &Symbol, by: &Term) -> ExtendedProcess {
        match self {
            ExtendedProcess::Plain(p) => ExtendedProcess::Plain(p.substitute(x, by)),
            ExtendedProcess::Par(a, b) => {
                ExtendedProcess::Par(Box::new(a.substitute(x, by)), Box::new(b.substitute(x, by)))
            }
            ExtendedProcess::Subst(y, e) => ExtendedProcess::Subst(y.clone(), e.substitute(x, by)),
            ExtendedProcess::Res(u, a) => {
                if u == x {
                    return self.clone();
                }
                if by.contains(u) {
                    let mut used = a.symbols();
                    by.atoms(&mut used);
                    used.insert(x.clone());
                    let fresh = FreshGen::global().fresh(u, |s| used.contains(s));
                    let body = a.rename_free(u, &fresh);
                    return ExtendedProcess::Res(fresh, Box::new(body.substitute(x, by)));
                }
                ExtendedProcess::Res(u.clone(), Box::new(a.substitute(x, by)))
            }
        }
    }

    /// Renames free occurrences of `from`, including substitution targets.
    pub fn rename_free(&self, from: &Symbol, to: &Symbol) -> ExtendedProcess {
        match self {
            ExtendedProcess::Subst(y, e) => {
                let y = if y == from { to.clone() } else { y.clone() };
                ExtendedProcess::Subst(y, e.rename(from, to))
            }
            ExtendedProcess::Par(a, b) => {
                ExtendedProcess::Par(Box::new(a.rename_free(from, to)), Box::new(b.rename_free(from, to)))
            }
            ExtendedProcess::Res(u, a) if u == from => self.clone(),
            ExtendedProcess::Res(u, a) => ExtendedProcess::Res(u.clone(), Box::new(a.rename_free(from, to))),
            ExtendedProcess::Plain(p) => ExtendedProcess::Plain(p.substitute(from, &Term::Atom(to.clone()))),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            ExtendedProcess::Plain(p) => p.size(),
            ExtendedProcess::Par(a, b) => 1 + a.size() + b.size(),
            ExtendedProcess::Res(_, a) => 1 + a.size(),
            ExtendedProcess::Subst(..) => 2,
        }
    }

    pub fn has_replication(&self) -> bool {
        match self {
            ExtendedProcess::Plain(p) => p.has_replication(),
            ExtendedProcess::Par(a, b) => a.has_replication() || b.has_replication(),
            ExtendedProcess::Res(_, a) => a.has_replication(),
            ExtendedProcess::Subst(..) => false,
        }
    }

    /// All active substitutions with their paths, in traversal order.
    pub fn substitutions(&self) -> Vec<(Symbol, Term, Path)> {
        fn go(a: &ExtendedProcess, path: &mut Path, out: &mut Vec<(Symbol, Term, Path)>) {
            match a {
                ExtendedProcess::Plain(_) => {}
                ExtendedProcess::Par(l, r) => {
                    path.push(Step::Left);
                    go(l, path, out);
                    path.pop();
                    path.push(Step::Right);
                    go(r, path, out);
                    path.pop();
                }
                ExtendedProcess::Res(_, b) => {
                    path.push(Step::Body);
                    go(b, path, out);
                    path.pop();
                }
                ExtendedProcess::Subst(x, e) => out.push((x.clone(), e.clone(), path.clone())),
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Applies `f` to the sub-process at `path` and rebuilds around it.
    pub fn rebuild_at(
        &self,
        path: &[Step],
        f: &mut dyn FnMut(&ExtendedProcess) -> Result<ExtendedProcess>,
    ) -> Result<ExtendedProcess> {
        let Some((&step, rest)) = path.split_first() else {
            return f(self);
        };
        let bad = || Error::PreconditionViolated("path does not exist".into());
        Ok(match (self, step) {
            (ExtendedProcess::Par(a, b), Step::Left) => {
                ExtendedProcess::Par(Box::new(a.rebuild_at(rest, f)?), b.clone())
            }
            (ExtendedProcess::Par(a, b), Step::Right) => {
                ExtendedProcess::Par(a.clone(), Box::new(b.rebuild_at(rest, f)?))
            }
            (ExtendedProcess::Res(u, a), Step::Body) => ExtendedProcess::Res(u.clone(), Box::new(a.rebuild_at(rest, f)?)),
            (ExtendedProcess::Plain(p), _) => {
                let mut g = |q: &PlainProcess| match f(&ExtendedProcess::Plain(q.clone()))? {
                    ExtendedProcess::Plain(r) => Ok(r),
                    _ => Err(Error::PreconditionViolated(
                        "extended process cannot replace a plain sub-process".into(),
                    )),
                };
                ExtendedProcess::Plain(p.rebuild_at(path, &mut g)?)
            }
            _ => return Err(bad()),
        })
    }

    /// The sub-process at `path`, seen as an extended process.
    pub fn at(&self, path: &[Step]) -> Option<ExtendedProcess> {
        let Some((&step, rest)) = path.split_first() else {
            return Some(self.clone());
        };
        match (self, step) {
            (ExtendedProcess::Par(a, _), Step::Left) => a.at(rest),
            (ExtendedProcess::Par(_, b), Step::Right) => b.at(rest),
            (ExtendedProcess::Res(_, a), Step::Body) => a.at(rest),
            (ExtendedProcess::Plain(p), _) => {
                let mut cur = p;
                for &s in path {
                    cur = cur.child(s)?;
                }
                Some(ExtendedProcess::Plain(cur.clone()))
            }
            _ => None,
        }
    }

    /// Canonical binder numbering; alpha-equivalent processes map to the
    /// same value.
    pub fn alpha_canonical(&self) -> ExtendedProcess {
        let mut counter = 0u32;
        alpha_ext(self, &mut BTreeMap::new(), &mut counter)
    }

    pub fn alpha_eq(&self, other: &ExtendedProcess) -> bool {
        self.alpha_canonical() == other.alpha_canonical()
    }
}

fn canon_binder(u: &Symbol, counter: &mut u32) -> Symbol {
    *counter += 1;
    Symbol::new(u.kind(), "", *counter)
}

fn alpha_term(t: &Term, env: &BTreeMap<Symbol, Symbol>) -> Term {
    t.map_atoms(&mut |s| Term::Atom(env.get(s).cloned().unwrap_or_else(|| s.clone())))
}

fn alpha_plain(p: &PlainProcess, env: &mut BTreeMap<Symbol, Symbol>, counter: &mut u32) -> PlainProcess {
    use PlainProcess::*;
    let bind = |u: &Symbol, body: &PlainProcess, env: &mut BTreeMap<Symbol, Symbol>, counter: &mut u32| {
        let c = canon_binder(u, counter);
        let saved = env.insert(u.clone(), c.clone());
        let body = alpha_plain(body, env, counter);
        match saved {
            Some(s) => env.insert(u.clone(), s),
            None => env.remove(u),
        };
        (c, body)
    };
    match p {
        Nil => Nil,
        Par(a, b) => PlainProcess::par(alpha_plain(a, env, counter), alpha_plain(b, env, counter)),
        Repl(q) => PlainProcess::repl(alpha_plain(q, env, counter)),
        If(l, r, a, b) => PlainProcess::if_then_else(
            alpha_term(l, env),
            alpha_term(r, env),
            alpha_plain(a, env, counter),
            alpha_plain(b, env, counter),
        ),
        Out(c, e, q) => PlainProcess::output(alpha_term(c, env), alpha_term(e, env), alpha_plain(q, env, counter)),
        New(n, q) => {
            let (n, q) = bind(n, q, env, counter);
            PlainProcess::new_name(n, q)
        }
        In(c, x, q) => {
            let c = alpha_term(c, env);
            let (x, q) = bind(x, q, env, counter);
            PlainProcess::input(c, x, q)
        }
    }
}

fn alpha_ext(a: &ExtendedProcess, env: &mut BTreeMap<Symbol, Symbol>, counter: &mut u32) -> ExtendedProcess {
    match a {
        ExtendedProcess::Plain(p) => ExtendedProcess::Plain(alpha_plain(p, env, counter)),
        ExtendedProcess::Par(l, r) => {
            let l = alpha_ext(l, env, counter);
            ExtendedProcess::Par(Box::new(l), Box::new(alpha_ext(r, env, counter)))
        }
        ExtendedProcess::Subst(x, e) => {
            let x = env.get(x).cloned().unwrap_or_else(|| x.clone());
            ExtendedProcess::Subst(x, alpha_term(e, env))
        }
        ExtendedProcess::Res(u, b) => {
            let c = canon_binder(u, counter);
            let saved = env.insert(u.clone(), c.clone());
            let b = alpha_ext(b, env, counter);
            match saved {
                Some(s) => env.insert(u.clone(), s),
                None => env.remove(u),
            };
            ExtendedProcess::Res(c, Box::new(b))
        }
    }
}

pub fn free_vars(a: &ExtendedProcess) -> BTreeSet<Symbol> {
    a.free_vars()
}

pub fn free_names(a: &ExtendedProcess) -> BTreeSet<Symbol> {
    a.free_names()
}

pub fn domain(a: &ExtendedProcess) -> BTreeSet<Symbol> {
    a.domain()
}

/// `dom(A) = fv(A)`.
pub fn is_closed_ep(a: &ExtendedProcess) -> bool {
    a.is_closed()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    /// Both sides of a parallel composition export the listed variables.
    OverlappingDomains { vars: Vec<Symbol> },
    DuplicateSubstitution { var: Symbol },
    /// `nu x.B` where `B` has zero or several substitutions for `x`.
    RestrictedVariable { var: Symbol, substitutions: usize },
    CyclicSubstitutions { var: Symbol },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Which of the four correctness conditions failed (1-based).
    pub bullet: u8,
    pub kind: ViolationKind,
    pub path: Path,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "correctness bullet {}: ", self.bullet)?;
        match &self.kind {
            ViolationKind::OverlappingDomains { vars } => {
                let vs: Vec<_> = vars.iter().map(|v| v.to_string()).collect();
                write!(f, "parallel components share domain variable(s) {}", vs.join(", "))?
            }
            ViolationKind::DuplicateSubstitution { var } => write!(f, "duplicate substitution for {var}")?,
            ViolationKind::RestrictedVariable { var, substitutions } => write!(
                f,
                "restriction of {var} must enclose exactly one substitution for it, found {substitutions}"
            )?,
            ViolationKind::CyclicSubstitutions { var } => write!(f, "cyclic substitution set (at {var})")?,
        }
        write!(f, " at {}", fmt_path(&self.path))
    }
}

/// All violations of the four correctness conditions. Bound symbols are
/// first renamed apart, so the verdict is invariant under alpha-renaming.
pub fn check_correct(a: &ExtendedProcess) -> std::result::Result<(), Vec<Violation>> {
    let a = freshen_binders(a, &BTreeSet::new());
    let mut violations = Vec::new();

    fn overlaps(a: &ExtendedProcess, path: &mut Path, out: &mut Vec<Violation>) {
        match a {
            ExtendedProcess::Par(l, r) => {
                let shared: Vec<_> = l.domain().intersection(&r.domain()).cloned().collect();
                if !shared.is_empty() {
                    out.push(Violation {
                        bullet: 1,
                        kind: ViolationKind::OverlappingDomains { vars: shared },
                        path: path.clone(),
                    });
                }
                path.push(Step::Left);
                overlaps(l, path, out);
                path.pop();
                path.push(Step::Right);
                overlaps(r, path, out);
                path.pop();
            }
            ExtendedProcess::Res(u, b) => {
                if u.is_var() {
                    let n = b.substitutions().iter().filter(|(x, _, _)| x == u).count();
                    if n != 1 {
                        out.push(Violation {
                            bullet: 3,
                            kind: ViolationKind::RestrictedVariable {
                                var: u.clone(),
                                substitutions: n,
                            },
                            path: path.clone(),
                        });
                    }
                }
                path.push(Step::Body);
                overlaps(b, path, out);
                path.pop();
            }
            ExtendedProcess::Plain(_) | ExtendedProcess::Subst(..) => {}
        }
    }
    overlaps(&a, &mut Vec::new(), &mut violations);

    let substs = a.substitutions();
    let mut seen = BTreeSet::new();
    let mut distinct = Vec::new();
    for (x, e, path) in &substs {
        if !seen.insert(x.clone()) {
            violations.push(Violation {
                bullet: 2,
                kind: ViolationKind::DuplicateSubstitution { var: x.clone() },
                path: path.clone(),
            });
        } else {
            distinct.push((x.clone(), e.clone()));
        }
    }
    if let Err(Error::CyclicSubstitution(x)) = check_acyclic(distinct) {
        violations.push(Violation {
            bullet: 4,
            kind: ViolationKind::CyclicSubstitutions { var: x },
            path: Vec::new(),
        });
    }
    violations.sort_by_key(|v| v.bullet);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Renames the boundness group of the binder at `path` to `fresh`.
pub fn alpha_rename(a: &ExtendedProcess, path: &[Step], fresh: &Symbol) -> Result<ExtendedProcess> {
    if a.symbols().contains(fresh) {
        return Err(Error::NotFresh(fresh.clone()));
    }
    let mut f = |node: &ExtendedProcess| -> Result<ExtendedProcess> {
        let check_kind = |u: &Symbol| {
            if u.kind() != fresh.kind() {
                Err(Error::PreconditionViolated(format!("{fresh} and {u} differ in kind")))
            } else {
                Ok(())
            }
        };
        let to = Term::Atom(fresh.clone());
        match node {
            ExtendedProcess::Res(u, b) => {
                check_kind(u)?;
                Ok(ExtendedProcess::Res(fresh.clone(), Box::new(b.rename_free(u, fresh))))
            }
            ExtendedProcess::Plain(PlainProcess::New(n, p)) => {
                check_kind(n)?;
                Ok(ExtendedProcess::Plain(PlainProcess::new_name(fresh.clone(), p.substitute(n, &to))))
            }
            ExtendedProcess::Plain(PlainProcess::In(c, x, p)) => {
                check_kind(x)?;
                Ok(ExtendedProcess::Plain(PlainProcess::input(c.clone(), fresh.clone(), p.substitute(x, &to))))
            }
            _ => Err(Error::NotABinder),
        }
    };
    a.rebuild_at(path, &mut f)
}

/// Renames binders so that each binds a distinct symbol, none of which is
/// in `avoid`. The first binder of a symbol keeps it when possible.
pub fn freshen_binders(a: &ExtendedProcess, avoid: &BTreeSet<Symbol>) -> ExtendedProcess {
    struct Ctx<'a> {
        avoid: &'a BTreeSet<Symbol>,
        used: BTreeSet<Symbol>,
        seen: BTreeSet<Symbol>,
    }
    impl Ctx<'_> {
        fn bind(&mut self, u: &Symbol) -> Symbol {
            let v = if self.seen.contains(u) || self.avoid.contains(u) {
                let used = &self.used;
                let avoid = self.avoid;
                let seen = &self.seen;
                FreshGen::global().fresh(u, |s| used.contains(s) || avoid.contains(s) || seen.contains(s))
            } else {
                u.clone()
            };
            self.seen.insert(v.clone());
            v
        }
    }
    fn term(t: &Term, env: &BTreeMap<Symbol, Symbol>) -> Term {
        alpha_term(t, env)
    }
    fn plain(p: &PlainProcess, env: &mut BTreeMap<Symbol, Symbol>, cx: &mut Ctx) -> PlainProcess {
        use PlainProcess::*;
        match p {
            Nil => Nil,
            Par(a, b) => {
                let a = plain(a, env, cx);
                PlainProcess::par(a, plain(b, env, cx))
            }
            Repl(q) => PlainProcess::repl(plain(q, env, cx)),
            If(l, r, a, b) => {
                let (l, r) = (term(l, env), term(r, env));
                let a = plain(a, env, cx);
                PlainProcess::if_then_else(l, r, a, plain(b, env, cx))
            }
            Out(c, e, q) => PlainProcess::output(term(c, env), term(e, env), plain(q, env, cx)),
            New(n, q) => {
                let v = cx.bind(n);
                let saved = env.insert(n.clone(), v.clone());
                let q = plain(q, env, cx);
                restore(env, n, saved);
                PlainProcess::new_name(v, q)
            }
            In(c, x, q) => {
                let c = term(c, env);
                let v = cx.bind(x);
                let saved = env.insert(x.clone(), v.clone());
                let q = plain(q, env, cx);
                restore(env, x, saved);
                PlainProcess::input(c, v, q)
            }
        }
    }
    fn restore(env: &mut BTreeMap<Symbol, Symbol>, u: &Symbol, saved: Option<Symbol>) {
        match saved {
            Some(s) => env.insert(u.clone(), s),
            None => env.remove(u),
        };
    }
    fn ext(a: &ExtendedProcess, env: &mut BTreeMap<Symbol, Symbol>, cx: &mut Ctx) -> ExtendedProcess {
        match a {
            ExtendedProcess::Plain(p) => ExtendedProcess::Plain(plain(p, env, cx)),
            ExtendedProcess::Par(l, r) => {
                let l = ext(l, env, cx);
                ExtendedProcess::Par(Box::new(l), Box::new(ext(r, env, cx)))
            }
            ExtendedProcess::Subst(x, e) => {
                let x = env.get(x).cloned().unwrap_or_else(|| x.clone());
                ExtendedProcess::Subst(x, term(e, env))
            }
            ExtendedProcess::Res(u, b) => {
                let v = cx.bind(u);
                let saved = env.insert(u.clone(), v.clone());
                let b = ext(b, env, cx);
                restore(env, u, saved);
                ExtendedProcess::Res(v, Box::new(b))
            }
        }
    }
    let mut cx = Ctx {
        avoid,
        used: a.symbols(),
        seen: BTreeSet::new(),
    };
    ext(a, &mut BTreeMap::new(), &mut cx)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Context {
    Hole,
    Process(ExtendedProcess),
    Par(Box<Context>, Box<Context>),
    Res(Symbol, Box<Context>),
}

impl Context {
    pub fn par(a: Context, b: Context) -> Self {
        Context::Par(Box::new(a), Box::new(b))
    }

    pub fn res(u: Symbol, c: Context) -> Self {
        Context::Res(u, Box::new(c))
    }

    pub fn holes(&self) -> usize {
        match self {
            Context::Hole => 1,
            Context::Process(_) => 0,
            Context::Par(a, b) => a.holes() + b.holes(),
            Context::Res(_, c) => c.holes(),
        }
    }
}

/// `E[A]`: every hole replaced by `A`, textually.
pub fn plug(e: &Context, a: &ExtendedProcess) -> ExtendedProcess {
    match e {
        Context::Hole => a.clone(),
        Context::Process(p) => p.clone(),
        Context::Par(l, r) => ExtendedProcess::Par(Box::new(plug(l, a)), Box::new(plug(r, a))),
        Context::Res(u, c) => ExtendedProcess::Res(u.clone(), Box::new(plug(c, a))),
    }
}

/// Whether `E[A]` is a correct extended process.
pub fn closes(e: &Context, a: &ExtendedProcess) -> bool {
    check_correct(&plug(e, a)).is_ok()
}

/// `A^{e/x}`: free occurrences of `x` in `A` replaced by `e`.
pub fn apply_active(a: &ExtendedProcess, x: &Symbol, e: &Term) -> ExtendedProcess {
    let result = a.substitute(x, e);
    debug_assert!(
        check_correct(&ExtendedProcess::par(ExtendedProcess::subst(x.clone(), e.clone()), a.clone())).is_err()
            || check_correct(&result).is_ok(),
        "A^{{e/x}} must be correct"
    );
    result
}

fn write_plain(f: &mut fmt::Formatter<'_>, p: &PlainProcess, guarded: bool) -> fmt::Result {
    use PlainProcess::*;
    match p {
        Par(a, b) => {
            if guarded {
                write!(f, "(")?;
            }
            write_plain(f, a, matches!(**a, Par(..)))?;
            write!(f, " | ")?;
            write_plain(f, b, false)?;
            if guarded {
                write!(f, ")")?;
            }
            Ok(())
        }
        Nil => write!(f, "0"),
        Repl(q) => {
            write!(f, "!")?;
            write_plain(f, q, true)
        }
        New(n, q) => {
            write!(f, "new {n}.")?;
            write_plain(f, q, true)
        }
        If(l, r, a, b) => {
            write!(f, "if {l} = {r} then ")?;
            write_plain(f, a, true)?;
            write!(f, " else ")?;
            write_plain(f, b, true)
        }
        In(c, x, q) => {
            write!(f, "in({c}, {x}).")?;
            write_plain(f, q, true)
        }
        Out(c, e, q) => {
            write!(f, "out({c}, {e}).")?;
            write_plain(f, q, true)
        }
    }
}

fn write_ext(f: &mut fmt::Formatter<'_>, a: &ExtendedProcess, guarded: bool) -> fmt::Result {
    let is_par = |a: &ExtendedProcess| {
        matches!(a, ExtendedProcess::Par(..) | ExtendedProcess::Plain(PlainProcess::Par(..)))
    };
    match a {
        ExtendedProcess::Plain(p) => write_plain(f, p, guarded),
        ExtendedProcess::Par(l, r) => {
            if guarded {
                write!(f, "(")?;
            }
            write_ext(f, l, is_par(l))?;
            write!(f, " | ")?;
            write_ext(f, r, false)?;
            if guarded {
                write!(f, ")")?;
            }
            Ok(())
        }
        ExtendedProcess::Res(u, b) => {
            write!(f, "nu {u}.")?;
            write_ext(f, b, true)
        }
        ExtendedProcess::Subst(x, e) => write!(f, "{{{e}/{x}}}"),
    }
}

impl fmt::Display for PlainProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_plain(f, self, false)
    }
}

impl fmt::Display for ExtendedProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_ext(f, self, false)
    }
}

impl Serialize for ExtendedProcess {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
