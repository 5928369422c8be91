//! Random and enumerated process corpora, random contexts, and single-rule
//! structural rewrites.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::process::{check_correct, ExtendedProcess, PlainProcess};
use crate::rewrite::EquationalTheory;
use crate::syntax::{parse_process, Declarations};
use crate::term::{FreshGen, Signature, Symbol, Term};

/// Shape limits for random processes.
#[derive(Clone, Debug)]
pub struct GenConfig {
    pub max_nodes: usize,
    pub max_term_height: usize,
    pub max_frame: usize,
    pub replication: bool,
    pub channels: Vec<Symbol>,
    pub constants: Vec<Symbol>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_nodes: 30,
            max_term_height: 2,
            max_frame: 3,
            replication: false,
            channels: vec![Symbol::name("c"), Symbol::name("d")],
            constants: vec![Symbol::constant("0"), Symbol::constant("1")],
        }
    }
}

/// A random term of height at most `height` over `atoms`.
pub fn random_term<R: Rng>(rng: &mut R, atoms: &[Symbol], sig: &Signature, height: usize) -> Term {
    let funs: Vec<(String, usize)> = sig.functions().map(|(f, n)| (f.to_string(), n)).collect();
    if height <= 1 || funs.is_empty() || rng.gen_bool(0.6) {
        return Term::Atom(atoms.choose(rng).expect("atoms").clone());
    }
    let (f, n) = funs.choose(rng).expect("functions").clone();
    let args = (0..n).map(|_| random_term(rng, atoms, sig, height - 1)).collect();
    Term::app(&f, args)
}

struct PlainGen<'a, R> {
    rng: &'a mut R,
    cfg: &'a GenConfig,
    sig: &'a Signature,
    budget: usize,
    counter: u32,
}

impl<R: Rng> PlainGen<'_, R> {
    fn term(&mut self, scope: &[Symbol]) -> Term {
        let h = self.rng.gen_range(1..=self.cfg.max_term_height);
        random_term(self.rng, scope, self.sig, h)
    }

    fn channel(&mut self, scope: &[Symbol]) -> Term {
        let names: Vec<&Symbol> = scope.iter().filter(|s| s.is_name()).collect();
        if !names.is_empty() && self.rng.gen_bool(0.85) {
            Term::Atom((*names.choose(self.rng).expect("names")).clone())
        } else {
            self.term(scope)
        }
    }

    fn fresh(&mut self, like: Symbol) -> Symbol {
        self.counter += 1;
        like.with_index(self.counter)
    }

    fn plain(&mut self, scope: &mut Vec<Symbol>, top: bool) -> PlainProcess {
        if self.budget == 0 {
            return PlainProcess::Nil;
        }
        self.budget -= 1;
        let choice = self.rng.gen_range(0..if self.cfg.replication && top { 8 } else { 7 });
        match choice {
            0 => PlainProcess::Nil,
            1 | 2 => {
                let c = self.channel(scope);
                let e = self.term(scope);
                PlainProcess::output(c, e, self.plain(scope, false))
            }
            3 => {
                let c = self.channel(scope);
                let y = self.fresh(Symbol::var("y"));
                scope.push(y.clone());
                let p = self.plain(scope, false);
                scope.pop();
                PlainProcess::input(c, y, p)
            }
            4 => {
                let (l, r) = (self.term(scope), self.term(scope));
                let p = self.plain(scope, false);
                let q = self.plain(scope, false);
                PlainProcess::if_then_else(l, r, p, q)
            }
            5 => {
                let m = self.fresh(Symbol::name("m"));
                scope.push(m.clone());
                let p = self.plain(scope, top);
                scope.pop();
                PlainProcess::new_name(m, p)
            }
            6 => {
                let p = self.plain(scope, top);
                let q = self.plain(scope, top);
                PlainProcess::par(p, q)
            }
            _ => PlainProcess::repl(self.plain(scope, false)),
        }
    }
}

/// A random plain process whose free atoms lie in `scope`.
pub fn random_plain<R: Rng>(
    rng: &mut R,
    scope: &[Symbol],
    sig: &Signature,
    cfg: &GenConfig,
    budget: usize,
) -> PlainProcess {
    let mut g = PlainGen {
        rng,
        cfg,
        sig,
        budget,
        counter: 100,
    };
    g.plain(&mut scope.to_vec(), true)
}

/// A random correct closed extended process of at most `cfg.max_nodes`
/// nodes. Frames are acyclic by construction: the i-th substitution only
/// mentions later variables.
pub fn random_closed_ep<R: Rng>(rng: &mut R, sig: &Signature, cfg: &GenConfig) -> ExtendedProcess {
    loop {
        let a = attempt(rng, sig, cfg);
        if a.size() <= cfg.max_nodes && check_correct(&a).is_ok() && a.is_closed() {
            return a;
        }
    }
}

fn attempt<R: Rng>(rng: &mut R, sig: &Signature, cfg: &GenConfig) -> ExtendedProcess {
    let nvars = rng.gen_range(0..=cfg.max_frame);
    let nnames = rng.gen_range(0..=2);
    let vars: Vec<Symbol> = (1..=nvars).map(|i| Symbol::var("x").with_index(i as u32)).collect();
    let names: Vec<Symbol> = (1..=nnames).map(|i| Symbol::name("n").with_index(i as u32)).collect();
    let mut base: Vec<Symbol> = cfg.channels.clone();
    base.extend(cfg.constants.iter().cloned());
    base.extend(names.iter().cloned());

    let mut items = Vec::new();
    for (i, x) in vars.iter().enumerate() {
        let mut atoms = base.clone();
        atoms.extend(vars[i + 1..].iter().cloned());
        let h = rng.gen_range(1..=cfg.max_term_height);
        items.push(ExtendedProcess::Subst(x.clone(), random_term(rng, &atoms, sig, h)));
    }
    let mut scope = base.clone();
    scope.extend(vars.iter().cloned());
    let ncomps = rng.gen_range(1..=2);
    let per = (cfg.max_nodes.saturating_sub(2 * nvars + nnames + 4) / ncomps).max(1);
    for _ in 0..ncomps {
        let budget = rng.gen_range(1..=per.min(8));
        items.push(ExtendedProcess::Plain(random_plain(rng, &scope, sig, cfg, budget)));
    }
    items.shuffle(rng);
    let mut tree = random_tree(rng, items);
    let mut restricted: Vec<Symbol> = names.clone();
    restricted.extend(vars.iter().filter(|_| rng.gen_bool(0.4)).cloned());
    restricted.shuffle(rng);
    for u in restricted {
        tree = place_restriction(rng, tree, &u);
    }
    tree
}

fn random_tree<R: Rng>(rng: &mut R, mut items: Vec<ExtendedProcess>) -> ExtendedProcess {
    while items.len() > 1 {
        let i = rng.gen_range(0..items.len() - 1);
        let a = items.remove(i);
        let b = items.remove(i);
        items.insert(i, ExtendedProcess::par(a, b));
    }
    items.pop().unwrap_or_else(ExtendedProcess::nil)
}

fn mentions(a: &ExtendedProcess, u: &Symbol) -> bool {
    a.free_vars().contains(u) || a.free_names().contains(u)
}

/// Wraps `nu u` around a random sub-tree that covers every occurrence of `u`.
fn place_restriction<R: Rng>(rng: &mut R, a: ExtendedProcess, u: &Symbol) -> ExtendedProcess {
    if let ExtendedProcess::Par(l, r) = &a {
        let (ml, mr) = (mentions(l, u), mentions(r, u));
        if ml != mr && rng.gen_bool(0.6) {
            return if ml {
                ExtendedProcess::Par(Box::new(place_restriction(rng, (**l).clone(), u)), r.clone())
            } else {
                ExtendedProcess::Par(l.clone(), Box::new(place_restriction(rng, (**r).clone(), u)))
            };
        }
    }
    ExtendedProcess::res(u.clone(), a)
}

/// Template processes with at most twelve nodes, grouped by domain: the
/// first list has an empty domain, the second has domain `{x}`.
pub fn template_family() -> (Vec<ExtendedProcess>, Vec<ExtendedProcess>) {
    let decls = Declarations::from_symbols(
        &[Symbol::name("c"), Symbol::constant("1"), Symbol::var("x")],
        Signature::new(),
    );
    let parse = |s: &&str| parse_process(s, &decls).unwrap_or_else(|e| panic!("template {s}: {e}"));
    let closed = [
        "0",
        "out(c, 0).0",
        "out(c, 1).0",
        "in(c, y).0",
        "in(c, y).out(c, y).0",
        "if 0 = 0 then out(c, 0).0",
        "if 0 = 1 then out(c, 0).0",
        "out(c, 0).0 | in(c, y).0",
        "new k.out(c, k).0",
        "new k.out(c, (k, k)).0",
        "new k.out(c, k).out(c, k).0",
        "new k.out(c, k).in(c, y).out(c, y).0",
        "in(c, y).if y = 0 then out(c, 1).0",
        "new d.(out(d, 0).0 | in(d, y).out(c, y).0)",
        "out(c, 0).out(c, 0).0",
        "out(c, 0).0 | out(c, 0).0",
    ];
    let framed = [
        "{0/x}",
        "{1/x}",
        "new k.{k/x}",
        "new k.{(k, k)/x}",
        "{0/x} | out(c, x).0",
        "new k.({k/x} | out(c, k).0)",
        "{(0, 1)/x}",
        "{0/x} | in(c, y).if y = x then 0",
    ];
    (closed.iter().map(parse).collect(), framed.iter().map(parse).collect())
}

/// Frames over `dom` used as a fixed comparison panel for static
/// equivalence.
pub fn frame_panel(dom: &BTreeSet<Symbol>) -> Vec<ExtendedProcess> {
    let vars: Vec<&Symbol> = dom.iter().collect();
    let subst_all = |f: &dyn Fn(usize) -> Term| {
        ExtendedProcess::par_all(vars.iter().enumerate().map(|(i, x)| ExtendedProcess::Subst((*x).clone(), f(i))))
    };
    let k = |i: usize| Symbol::name("k").with_index(i as u32 + 1);
    let mut panel = vec![
        subst_all(&|_| Term::constant("0")),
        subst_all(&|i| if i == 0 { Term::constant("1") } else { Term::constant("0") }),
        subst_all(&|_| Term::name("c")),
        ExtendedProcess::restrict_all(
            &(0..vars.len()).map(k).collect::<Vec<_>>(),
            subst_all(&|i| Term::Atom(k(i))),
        ),
        ExtendedProcess::res(k(0), subst_all(&|_| Term::Atom(k(0)))),
        ExtendedProcess::res(
            k(0),
            subst_all(&|i| if i == 0 { Term::pair(Term::Atom(k(0)), Term::constant("0")) } else { Term::Atom(k(0)) }),
        ),
    ];
    panel.dedup();
    panel
}

/// Contexts for closure checks: random plain processes over the public
/// channels, constants and the variables of `dom`.
pub fn random_contexts<R: Rng>(
    rng: &mut R,
    dom: &BTreeSet<Symbol>,
    sig: &Signature,
    cfg: &GenConfig,
    count: usize,
    budget: usize,
) -> Vec<ExtendedProcess> {
    let mut scope: Vec<Symbol> = cfg.channels.clone();
    scope.extend(cfg.constants.iter().cloned());
    scope.extend(dom.iter().cloned());
    (0..count)
        .map(|_| ExtendedProcess::Plain(random_plain(rng, &scope, sig, cfg, budget)))
        .collect()
}

/// The structural rules applied one at a time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    /// Nil, associativity and commutativity of `|`.
    ParMonoid,
    /// `!P = P | !P`.
    Replication,
    /// Dropping, adding and swapping restrictions.
    Restriction,
    /// Scope extrusion.
    Extrusion,
    /// `nu x.({e/x} | A) = A{e/x}`.
    Alias,
    /// `{e/x} | A = {e/x} | A{e/x}`.
    Application,
    /// `{e/x} = {e'/x}` for equal terms.
    Rewriting,
}

impl Rule {
    pub const ALL: [Rule; 7] = [
        Rule::ParMonoid,
        Rule::Replication,
        Rule::Restriction,
        Rule::Extrusion,
        Rule::Alias,
        Rule::Application,
        Rule::Rewriting,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Rule::ParMonoid => "2a",
            Rule::Replication => "2b",
            Rule::Restriction => "2c",
            Rule::Extrusion => "2d",
            Rule::Alias => "2e",
            Rule::Application => "2f",
            Rule::Rewriting => "2g",
        }
    }
}

fn free_in(a: &ExtendedProcess, u: &Symbol) -> bool {
    a.free_vars().contains(u) || a.free_names().contains(u)
}

fn plain_free_in(p: &PlainProcess, u: &Symbol) -> bool {
    p.free_vars().contains(u) || p.free_names().contains(u)
}

/// Every one-step rewrite of `a` by `rule` at an evaluation position.
pub fn rewrites(a: &ExtendedProcess, rule: Rule, theory: &EquationalTheory) -> Vec<ExtendedProcess> {
    let mut out = Vec::new();
    let avoid = a.symbols();
    ext_sites(a, rule, theory, &avoid, &mut out, &|x| x);
    out
}

/// A uniformly chosen one-step rewrite, if any applies.
pub fn random_rewrite<R: Rng>(
    rng: &mut R,
    a: &ExtendedProcess,
    rule: Rule,
    theory: &EquationalTheory,
) -> Option<ExtendedProcess> {
    rewrites(a, rule, theory).choose(rng).cloned()
}

fn ext_sites(
    a: &ExtendedProcess,
    rule: Rule,
    th: &EquationalTheory,
    avoid: &BTreeSet<Symbol>,
    out: &mut Vec<ExtendedProcess>,
    rebuild: &dyn Fn(ExtendedProcess) -> ExtendedProcess,
) {
    use ExtendedProcess as E;
    for r in ext_local(a, rule, th, avoid) {
        out.push(rebuild(r));
    }
    match a {
        E::Plain(p) => plain_sites(p, rule, avoid, out, &|q| rebuild(E::Plain(q))),
        E::Par(l, r) => {
            ext_sites(l, rule, th, avoid, out, &|x| rebuild(E::Par(Box::new(x), r.clone())));
            ext_sites(r, rule, th, avoid, out, &|x| rebuild(E::Par(l.clone(), Box::new(x))));
        }
        E::Res(u, b) => ext_sites(b, rule, th, avoid, out, &|x| rebuild(E::Res(u.clone(), Box::new(x)))),
        E::Subst(..) => {}
    }
}

fn fresh_name(avoid: &BTreeSet<Symbol>) -> Symbol {
    FreshGen::global().fresh(&Symbol::name("r"), |s| avoid.contains(s))
}

fn fresh_var(avoid: &BTreeSet<Symbol>) -> Symbol {
    FreshGen::global().fresh(&Symbol::var("z"), |s| avoid.contains(s))
}

fn ext_local(a: &ExtendedProcess, rule: Rule, th: &EquationalTheory, avoid: &BTreeSet<Symbol>) -> Vec<ExtendedProcess> {
    use ExtendedProcess as E;
    let bx = Box::new;
    let mut out = Vec::new();
    match rule {
        Rule::ParMonoid => {
            out.push(E::Par(bx(a.clone()), bx(E::nil())));
            if let E::Par(l, r) = a {
                out.push(E::Par(r.clone(), l.clone()));
                if let E::Par(m, n) = &**r {
                    out.push(E::Par(bx(E::Par(l.clone(), m.clone())), n.clone()));
                }
                if **r == E::nil() {
                    out.push((**l).clone());
                }
            }
        }
        Rule::Replication => {}
        Rule::Restriction => {
            out.push(E::Res(fresh_name(avoid), bx(a.clone())));
            if let E::Res(u, b) = a {
                if !free_in(b, u) {
                    out.push((**b).clone());
                }
                if let E::Res(v, c) = &**b {
                    out.push(E::Res(v.clone(), bx(E::Res(u.clone(), c.clone()))));
                }
            }
        }
        Rule::Extrusion => {
            if let E::Par(l, r) = a {
                if let E::Res(u, b) = &**r {
                    if !free_in(l, u) {
                        out.push(E::Res(u.clone(), bx(E::Par(l.clone(), b.clone()))));
                    }
                }
                if let E::Res(u, b) = &**l {
                    if !free_in(r, u) {
                        out.push(E::Res(u.clone(), bx(E::Par(b.clone(), r.clone()))));
                    }
                }
            }
            if let E::Res(u, b) = a {
                if let E::Par(l, r) = &**b {
                    if !free_in(l, u) {
                        out.push(E::Par(l.clone(), bx(E::Res(u.clone(), r.clone()))));
                    }
                    if !free_in(r, u) {
                        out.push(E::Par(bx(E::Res(u.clone(), l.clone())), r.clone()));
                    }
                }
            }
        }
        Rule::Alias => {
            let z = fresh_var(avoid);
            out.push(E::Res(z.clone(), bx(E::Par(bx(E::Subst(z, Term::constant("0"))), bx(a.clone())))));
            if let E::Res(x, b) = a {
                if x.is_var() {
                    match &**b {
                        E::Subst(y, e) if y == x && !e.contains(x) => out.push(E::nil()),
                        E::Par(l, r) => {
                            if let E::Subst(y, e) = &**l {
                                if y == x && !e.contains(x) {
                                    out.push(r.substitute(x, e));
                                }
                            }
                            if let E::Subst(y, e) = &**r {
                                if y == x && !e.contains(x) {
                                    out.push(l.substitute(x, e));
                                }
                            }
                        }
                        _ => {}
                    }
                }
            }
        }
        Rule::Application => {
            if let E::Par(l, r) = a {
                if let E::Subst(x, e) = &**l {
                    if free_in(r, x) {
                        out.push(E::Par(l.clone(), bx(r.substitute(x, e))));
                    }
                }
                if let E::Subst(x, e) = &**r {
                    if free_in(l, x) {
                        out.push(E::Par(bx(l.substitute(x, e)), r.clone()));
                    }
                }
            }
        }
        Rule::Rewriting => {
            if let E::Subst(x, e) = a {
                if let Ok(n) = th.normalize(e) {
                    if n != *e {
                        out.push(E::Subst(x.clone(), n));
                    }
                }
                let sig = th.signature();
                if sig.arity("fst").is_some() {
                    out.push(E::Subst(
                        x.clone(),
                        Term::app("fst", vec![Term::pair(e.clone(), Term::constant("0"))]),
                    ));
                }
            }
        }
    }
    out
}

fn plain_sites(
    p: &PlainProcess,
    rule: Rule,
    avoid: &BTreeSet<Symbol>,
    out: &mut Vec<ExtendedProcess>,
    rebuild: &dyn Fn(PlainProcess) -> ExtendedProcess,
) {
    use PlainProcess as P;
    for q in plain_local(p, rule, avoid) {
        out.push(rebuild(q));
    }
    match p {
        P::Par(l, r) => {
            plain_sites(l, rule, avoid, out, &|x| rebuild(P::Par(Box::new(x), r.clone())));
            plain_sites(r, rule, avoid, out, &|x| rebuild(P::Par(l.clone(), Box::new(x))));
        }
        P::New(n, b) => plain_sites(b, rule, avoid, out, &|x| rebuild(P::New(n.clone(), Box::new(x)))),
        _ => {}
    }
}

fn plain_local(p: &PlainProcess, rule: Rule, avoid: &BTreeSet<Symbol>) -> Vec<PlainProcess> {
    use PlainProcess as P;
    let bx = Box::new;
    let mut out = Vec::new();
    match rule {
        Rule::ParMonoid => {
            out.push(P::Par(bx(p.clone()), bx(P::Nil)));
            if let P::Par(l, r) = p {
                out.push(P::Par(r.clone(), l.clone()));
                if let P::Par(m, n) = &**r {
                    out.push(P::Par(bx(P::Par(l.clone(), m.clone())), n.clone()));
                }
                if **r == P::Nil {
                    out.push((**l).clone());
                }
            }
        }
        Rule::Replication => {
            if let P::Repl(q) = p {
                out.push(P::Par(q.clone(), bx(p.clone())));
            }
            if let P::Par(l, r) = p {
                if matches!(&**r, P::Repl(q) if q == l) {
                    out.push((**r).clone());
                }
            }
        }
        Rule::Restriction => {
            out.push(P::New(fresh_name(avoid), bx(p.clone())));
            if let P::New(n, b) = p {
                if !plain_free_in(b, n) {
                    out.push((**b).clone());
                }
                if let P::New(m, c) = &**b {
                    out.push(P::New(m.clone(), bx(P::New(n.clone(), c.clone()))));
                }
            }
        }
        Rule::Extrusion => {
            if let P::Par(l, r) = p {
                if let P::New(n, b) = &**r {
                    if !plain_free_in(l, n) {
                        out.push(P::New(n.clone(), bx(P::Par(l.clone(), b.clone()))));
                    }
                }
                if let P::New(n, b) = &**l {
                    if !plain_free_in(r, n) {
                        out.push(P::New(n.clone(), bx(P::Par(b.clone(), r.clone()))));
                    }
                }
            }
            if let P::New(n, b) = p {
                if let P::Par(l, r) = &**b {
                    if !plain_free_in(l, n) {
                        out.push(P::Par(l.clone(), bx(P::New(n.clone(), r.clone()))));
                    }
                    if !plain_free_in(r, n) {
                        out.push(P::Par(bx(P::New(n.clone(), l.clone())), r.clone()));
                    }
                }
            }
        }
        Rule::Alias | Rule::Application | Rule::Rewriting => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_processes_are_correct_and_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sig = Signature::new();
        for _ in 0..100 {
            let a = random_closed_ep(&mut rng, &sig, &GenConfig::default());
            assert!(check_correct(&a).is_ok(), "{a}");
            assert!(a.is_closed() && a.size() <= 30 && !a.has_replication(), "{a}");
        }
    }

    #[test]
    fn templates_are_small() {
        let (closed, framed) = template_family();
        assert_eq!(closed.len(), 16);
        assert_eq!(framed.len(), 8);
        for a in closed.iter().chain(&framed) {
            assert!(a.size() <= 12, "{a} has {} nodes", a.size());
            assert!(a.is_closed());
        }
        assert!(closed.iter().all(|a| a.domain().is_empty()));
        assert!(framed.iter().all(|a| a.domain() == BTreeSet::from([Symbol::var("x")])));
    }

    #[test]
    fn every_rule_has_sites() {
        let th = EquationalTheory::pair_projection();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = GenConfig {
            replication: true,
            ..GenConfig::default()
        };
        let mut seen = BTreeSet::new();
        for _ in 0..200 {
            let a = random_closed_ep(&mut rng, th.signature(), &cfg);
            for rule in Rule::ALL {
                if !rewrites(&a, rule, &th).is_empty() {
                    seen.insert(rule);
                }
            }
        }
        assert_eq!(seen.len(), Rule::ALL.len());
    }
}
