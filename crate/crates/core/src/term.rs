//! Terms over variables, names, constants and arity-checked function symbols,
//! together with acyclic substitutions applied sequentially.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Variable,
    Name,
    Constant,
}

/// An atom of the term language. Two symbols are the same iff kind,
/// identifier and generation index all agree.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol {
    kind: Kind,
    ident: Arc<str>,
    index: u32,
}

impl Symbol {
    pub fn new(kind: Kind, ident: &str, index: u32) -> Self {
        Symbol {
            kind,
            ident: Arc::from(ident),
            index,
        }
    }

    pub fn var(ident: &str) -> Self {
        Self::new(Kind::Variable, ident, 0)
    }

    pub fn name(ident: &str) -> Self {
        Self::new(Kind::Name, ident, 0)
    }

    pub fn constant(ident: &str) -> Self {
        Self::new(Kind::Constant, ident, 0)
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn ident(&self) -> &str {
        &self.ident
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn is_var(&self) -> bool {
        self.kind == Kind::Variable
    }

    pub fn is_name(&self) -> bool {
        self.kind == Kind::Name
    }

    /// Same identifier and kind, different generation.
    pub fn with_index(&self, index: u32) -> Self {
        Symbol {
            kind: self.kind,
            ident: self.ident.clone(),
            index,
        }
    }

    pub fn with_kind(&self, kind: Kind) -> Self {
        Symbol {
            kind,
            ident: self.ident.clone(),
            index: self.index,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == 0 {
            write!(f, "{}", self.ident)
        } else {
            write!(f, "{}#{}", self.ident, self.index)
        }
    }
}

impl Serialize for Symbol {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Issues symbols that are pairwise distinct for the lifetime of the process.
///
/// Every request bumps a shared atomic counter, so concurrent callers never
/// receive the same generation index.
#[derive(Debug)]
pub struct FreshGen {
    next: AtomicU32,
}

static GLOBAL_FRESH: FreshGen = FreshGen::new();

impl FreshGen {
    pub const fn new() -> Self {
        FreshGen {
            next: AtomicU32::new(1),
        }
    }

    pub fn global() -> &'static FreshGen {
        &GLOBAL_FRESH
    }

    /// A symbol with the same kind and identifier as `like`, never issued
    /// before by this generator and not contained in `avoid`.
    pub fn fresh(&self, like: &Symbol, avoid: impl Fn(&Symbol) -> bool) -> Symbol {
        loop {
            let index = self.next.fetch_add(1, Ordering::Relaxed);
            let candidate = like.with_index(index);
            if !avoid(&candidate) {
                return candidate;
            }
        }
    }
}

impl Default for FreshGen {
    fn default() -> Self {
        Self::new()
    }
}

/// Function symbols and their arities. Always contains `pair/2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    functions: BTreeMap<Arc<str>, usize>,
}

pub const PAIR: &str = "pair";

impl Signature {
    pub fn new() -> Self {
        let mut functions = BTreeMap::new();
        functions.insert(Arc::from(PAIR), 2);
        Signature { functions }
    }

    pub fn declare(&mut self, name: &str, arity: usize) -> Result<()> {
        if arity == 0 {
            return Err(Error::ArityMismatch {
                symbol: name.to_string(),
                expected: 1,
                found: 0,
            });
        }
        match self.functions.get(name) {
            Some(&a) if a != arity => Err(Error::ArityMismatch {
                symbol: name.to_string(),
                expected: a,
                found: arity,
            }),
            _ => {
                self.functions.insert(Arc::from(name), arity);
                Ok(())
            }
        }
    }

    pub fn with(mut self, name: &str, arity: usize) -> Self {
        self.declare(name, arity).expect("valid declaration");
        self
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.functions.get(name).copied()
    }

    pub fn functions(&self) -> impl Iterator<Item = (&str, usize)> {
        self.functions.iter().map(|(k, v)| (&**k, *v))
    }

    pub fn function_symbol(&self, name: &str) -> Option<Arc<str>> {
        self.functions.get_key_value(name).map(|(k, _)| k.clone())
    }
}

impl Default for Signature {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Atom(Symbol),
    App(Arc<str>, Vec<Term>),
}

impl Term {
    pub fn var(ident: &str) -> Self {
        Term::Atom(Symbol::var(ident))
    }

    pub fn name(ident: &str) -> Self {
        Term::Atom(Symbol::name(ident))
    }

    pub fn constant(ident: &str) -> Self {
        Term::Atom(Symbol::constant(ident))
    }

    pub fn app(f: &str, args: Vec<Term>) -> Self {
        Term::App(Arc::from(f), args)
    }

    pub fn pair(a: Term, b: Term) -> Self {
        Term::app(PAIR, vec![a, b])
    }

    pub fn as_atom(&self) -> Option<&Symbol> {
        match self {
            Term::Atom(s) => Some(s),
            Term::App(..) => None,
        }
    }

    pub fn atoms(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            Term::Atom(s) => {
                out.insert(s.clone());
            }
            Term::App(_, args) => args.iter().for_each(|a| a.atoms(out)),
        }
    }

    pub fn variables(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect(Kind::Variable, &mut out);
        out
    }

    pub fn names(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect(Kind::Name, &mut out);
        out
    }

    pub fn collect(&self, kind: Kind, out: &mut BTreeSet<Symbol>) {
        match self {
            Term::Atom(s) if s.kind == kind => {
                out.insert(s.clone());
            }
            Term::Atom(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.collect(kind, out)),
        }
    }

    pub fn contains(&self, sym: &Symbol) -> bool {
        match self {
            Term::Atom(s) => s == sym,
            Term::App(_, args) => args.iter().any(|a| a.contains(sym)),
        }
    }

    pub fn is_closed(&self) -> bool {
        match self {
            Term::Atom(s) => s.kind != Kind::Variable,
            Term::App(_, args) => args.iter().all(Term::is_closed),
        }
    }

    /// `self` with every occurrence of `x` replaced by `by`.
    pub fn substitute(&self, x: &Symbol, by: &Term) -> Term {
        match self {
            Term::Atom(s) if s == x => by.clone(),
            Term::Atom(_) => self.clone(),
            Term::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| a.substitute(x, by)).collect())
            }
        }
    }

    pub fn rename(&self, from: &Symbol, to: &Symbol) -> Term {
        self.substitute(from, &Term::Atom(to.clone()))
    }

    pub fn map_atoms(&self, f: &mut impl FnMut(&Symbol) -> Term) -> Term {
        match self {
            Term::Atom(s) => f(s),
            Term::App(g, args) => Term::App(g.clone(), args.iter().map(|a| a.map_atoms(f)).collect()),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Term::Atom(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::height).max().unwrap_or(0),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Atom(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }

    /// Arity check against `sig`.
    pub fn check(&self, sig: &Signature) -> Result<()> {
        match self {
            Term::Atom(_) => Ok(()),
            Term::App(f, args) => {
                let arity = sig
                    .arity(f)
                    .ok_or_else(|| Error::UnknownFunction(f.to_string()))?;
                if arity != args.len() {
                    return Err(Error::ArityMismatch {
                        symbol: f.to_string(),
                        expected: arity,
                        found: args.len(),
                    });
                }
                args.iter().try_for_each(|a| a.check(sig))
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(s) => write!(f, "{s}"),
            Term::App(g, args) if &**g == PAIR && args.len() == 2 => {
                write!(f, "({}, {})", args[0], args[1])
            }
            Term::App(g, args) => {
                write!(f, "{g}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `var(e)`: the variables (not names, not constants) occurring in `e`.
pub fn variables_of(e: &Term) -> BTreeSet<Symbol> {
    e.variables()
}

/// Membership in `tm(X)`.
pub fn in_tm(e: &Term, vars: &BTreeSet<Symbol>) -> bool {
    e.variables().is_subset(vars)
}

/// Bindings `x1 ↦ e1, …, xl ↦ el` ordered so that no `xi` occurs in the
/// image of any `xj` with `i <= j`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AcyclicSubstitution {
    bindings: Vec<(Symbol, Term)>,
}

impl AcyclicSubstitution {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Accepts `bindings` as given if they already satisfy the ordering
    /// condition.
    pub fn from_ordered(bindings: Vec<(Symbol, Term)>) -> Result<Self> {
        let s = AcyclicSubstitution { bindings };
        let mut seen = BTreeSet::new();
        for (x, _) in &s.bindings {
            if !x.is_var() {
                return Err(Error::NotAVariable(x.clone()));
            }
            if !seen.insert(x.clone()) {
                return Err(Error::DuplicateBinding(x.clone()));
            }
        }
        match s.first_violation() {
            Some(x) => Err(Error::CyclicSubstitution(x)),
            None => Ok(s),
        }
    }

    pub fn bindings(&self) -> &[(Symbol, Term)] {
        &self.bindings
    }

    pub fn into_bindings(self) -> Vec<(Symbol, Term)> {
        self.bindings
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn domain(&self) -> BTreeSet<Symbol> {
        self.bindings.iter().map(|(x, _)| x.clone()).collect()
    }

    pub fn get(&self, x: &Symbol) -> Option<&Term> {
        self.bindings.iter().find(|(y, _)| y == x).map(|(_, e)| e)
    }

    /// Direct scan of the ordering condition; returns an offending variable.
    pub fn first_violation(&self) -> Option<Symbol> {
        for (j, (_, ej)) in self.bindings.iter().enumerate() {
            for (xi, _) in &self.bindings[..=j] {
                if ej.contains(xi) {
                    return Some(xi.clone());
                }
            }
        }
        None
    }

    pub fn apply(&self, e: &Term) -> Term {
        apply_substitution(e, self)
    }
}

impl fmt::Display for AcyclicSubstitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, (x, e)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x} -> {e}")?;
        }
        write!(f, "]")
    }
}

/// Orders `bindings` topologically so that a variable precedes every
/// variable its image mentions; ties go to the smallest (identifier, index).
pub fn check_acyclic(bindings: Vec<(Symbol, Term)>) -> Result<AcyclicSubstitution> {
    let mut map: BTreeMap<Symbol, Term> = BTreeMap::new();
    for (x, e) in bindings {
        if !x.is_var() {
            return Err(Error::NotAVariable(x));
        }
        if map.contains_key(&x) {
            return Err(Error::DuplicateBinding(x));
        }
        map.insert(x, e);
    }
    // mentioned_by[y] = number of bindings whose image contains y
    let mut mentioned_by: BTreeMap<&Symbol, usize> = map.keys().map(|x| (x, 0)).collect();
    for (x, e) in &map {
        for y in e.variables() {
            if &y == x {
                return Err(Error::CyclicSubstitution(y));
            }
            if let Some(c) = mentioned_by.get_mut(&y) {
                *c += 1;
            }
        }
    }
    let mut ready: BTreeSet<&Symbol> = mentioned_by
        .iter()
        .filter(|(_, c)| **c == 0)
        .map(|(x, _)| *x)
        .collect();
    let mut ordered = Vec::with_capacity(map.len());
    while let Some(x) = ready.pop_first() {
        let e = &map[x];
        for y in e.variables() {
            if let Some((key, c)) = mentioned_by.get_key_value(&y).map(|(k, c)| (*k, *c)) {
                let c = c - 1;
                mentioned_by.insert(key, c);
                if c == 0 {
                    ready.insert(key);
                }
            }
        }
        ordered.push((x.clone(), e.clone()));
    }
    if ordered.len() != map.len() {
        let stuck = mentioned_by
            .iter()
            .find(|(_, c)| **c > 0)
            .map(|(x, _)| (*x).clone())
            .expect("some binding left over");
        return Err(Error::CyclicSubstitution(stuck));
    }
    Ok(AcyclicSubstitution { bindings: ordered })
}

/// `e^θ`: the singleton substitutions of θ applied one after another, in
/// order.
pub fn apply_substitution(e: &Term, theta: &AcyclicSubstitution) -> Term {
    theta
        .bindings
        .iter()
        .fold(e.clone(), |acc, (x, ex)| acc.substitute(x, ex))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(args: Vec<Term>) -> Term {
        Term::app("f", args)
    }

    fn g(args: Vec<Term>) -> Term {
        Term::app("g", args)
    }

    #[test]
    fn variables_ignore_names_and_constants() {
        let x = Symbol::var("x");
        assert_eq!(
            variables_of(&Term::pair(Term::var("x"), Term::name("n"))),
            BTreeSet::from([x.clone()])
        );
        assert!(variables_of(&Term::constant("c")).is_empty());
        // structural recursion by hand: f(x, g(y, x))
        let e = f(vec![Term::var("x"), g(vec![Term::var("y"), Term::var("x")])]);
        assert_eq!(variables_of(&e), BTreeSet::from([x, Symbol::var("y")]));
    }

    #[test]
    fn tm_membership() {
        let xy = BTreeSet::from([Symbol::var("x"), Symbol::var("y")]);
        assert!(in_tm(&f(vec![Term::var("x")]), &xy));
        assert!(!in_tm(&f(vec![Term::var("x")]), &BTreeSet::new()));
        assert!(in_tm(
            &Term::pair(Term::name("n"), Term::constant("c")),
            &BTreeSet::new()
        ));
    }

    #[test]
    fn topological_order() {
        let x = Symbol::var("x");
        let y = Symbol::var("y");
        let fy = f(vec![Term::var("y")]);
        let c = Term::constant("c");
        // only [x, y] satisfies the condition; [y, x] does not
        assert!(AcyclicSubstitution::from_ordered(vec![(y.clone(), c.clone()), (x.clone(), fy.clone())]).is_err());
        let theta = check_acyclic(vec![(y.clone(), c.clone()), (x.clone(), fy.clone())]).unwrap();
        assert_eq!(theta.bindings(), &[(x.clone(), fy), (y, c.clone())]);
        assert_eq!(check_acyclic(vec![(x.clone(), c.clone())]).unwrap().bindings(), &[(x, c)]);
    }

    #[test]
    fn cycles_are_rejected() {
        let bindings = vec![
            (Symbol::var("x"), f(vec![Term::var("y")])),
            (Symbol::var("y"), g(vec![Term::var("x")])),
        ];
        assert!(matches!(check_acyclic(bindings), Err(Error::CyclicSubstitution(_))));
        let self_loop = vec![(Symbol::var("x"), f(vec![Term::var("x")]))];
        assert!(matches!(check_acyclic(self_loop), Err(Error::CyclicSubstitution(_))));
        let dup = vec![
            (Symbol::var("x"), Term::constant("c")),
            (Symbol::var("x"), Term::constant("d")),
        ];
        assert!(matches!(check_acyclic(dup), Err(Error::DuplicateBinding(_))));
    }

    #[test]
    fn sequential_application() {
        let theta = check_acyclic(vec![
            (Symbol::var("x"), f(vec![Term::var("y")])),
            (Symbol::var("y"), Term::constant("c")),
        ])
        .unwrap();
        // x -> f(y) -> f(c)
        assert_eq!(theta.apply(&Term::var("x")), f(vec![Term::constant("c")]));
        assert_eq!(theta.apply(&Term::name("n")), Term::name("n"));
        let single = check_acyclic(vec![(Symbol::var("x"), Term::constant("c"))]).unwrap();
        assert_eq!(
            single.apply(&Term::pair(Term::var("x"), Term::var("x"))),
            Term::pair(Term::constant("c"), Term::constant("c"))
        );
    }

    #[test]
    fn arity_is_checked() {
        let sig = Signature::new().with("f", 1);
        assert!(f(vec![Term::var("x")]).check(&sig).is_ok());
        assert!(matches!(
            f(vec![Term::var("x"), Term::var("y")]).check(&sig),
            Err(Error::ArityMismatch { .. })
        ));
        assert!(matches!(g(vec![]).check(&sig), Err(Error::UnknownFunction(_))));
        assert!(Signature::new().declare("h", 0).is_err());
        assert_eq!(Signature::new().arity(PAIR), Some(2));
    }

    #[test]
    fn fresh_symbols_are_distinct_across_threads() {
        let gen = std::sync::Arc::new(FreshGen::new());
        let avoid: BTreeSet<Symbol> = (1..20).map(|i| Symbol::var("x").with_index(i)).collect();
        let avoid = std::sync::Arc::new(avoid);
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let gen = gen.clone();
                let avoid = avoid.clone();
                std::thread::spawn(move || {
                    (0..50)
                        .map(|_| gen.fresh(&Symbol::var("x"), |s| avoid.contains(s)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let all: Vec<Symbol> = handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
        let distinct: BTreeSet<_> = all.iter().cloned().collect();
        assert_eq!(distinct.len(), all.len());
        assert!(distinct.is_disjoint(&avoid));
    }

    #[test]
    fn pair_sugar_prints() {
        assert_eq!(Term::pair(Term::name("a"), Term::constant("0")).to_string(), "(a, 0)");
        assert_eq!(Symbol::var("x").with_index(3).to_string(), "x#3");
    }
}
