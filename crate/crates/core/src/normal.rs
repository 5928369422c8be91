//! Normal forms `new n~.({e~/x~} | P)` of closed extended processes, the
//! canonical state representation used for deduplication, and a sound
//! structural-equivalence check.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::process::{check_correct, freshen_binders, ExtendedProcess, PlainProcess};
use crate::rewrite::EquationalTheory;
use crate::term::{check_acyclic, AcyclicSubstitution, Kind, Symbol, Term};

/// Default number of replication unfoldings tried by [`struct_equiv`].
pub const DEFAULT_UNFOLDINGS: usize = 2;

/// Cap on the orderings tried when breaking ties between identical-looking
/// components that mention restricted names.
const TIE_PERMUTATION_CAP: usize = 720;

/// A guarded top-level component (input, output, conditional or
/// replication). `unfolds` counts how often a replication has been unfolded
/// during exploration.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Component {
    pub proc: PlainProcess,
    pub unfolds: u32,
}

impl Component {
    pub fn new(proc: PlainProcess) -> Self {
        Component { proc, unfolds: 0 }
    }
}

/// A closed extended process in extruded form, not yet canonical:
/// `new names.(frame | comps)`, every frame term closed.
#[derive(Clone, Debug, Default)]
pub struct Parts {
    pub names: Vec<Symbol>,
    pub frame: Vec<(Symbol, Term)>,
    pub comps: Vec<Component>,
}

/// Canonical representative of a closed extended process modulo structural
/// rearrangement: equal states denote structurally equivalent processes.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State {
    names: Vec<Symbol>,
    frame: Vec<(Symbol, Term)>,
    comps: Vec<Component>,
}

fn walk_atoms(t: &Term, f: &mut impl FnMut(&Symbol)) {
    match t {
        Term::Atom(s) => f(s),
        Term::App(_, args) => args.iter().for_each(|a| walk_atoms(a, f)),
    }
}

/// Moves top-level restrictions of `p` into `names` and its guarded
/// parallel components into `comps`.
pub fn flatten(p: &PlainProcess, names: &mut Vec<Symbol>, comps: &mut Vec<Component>) {
    match p {
        PlainProcess::Nil => {}
        PlainProcess::Par(a, b) => {
            flatten(a, names, comps);
            flatten(b, names, comps);
        }
        PlainProcess::New(n, q) => {
            names.push(n.clone());
            flatten(q, names, comps);
        }
        _ => comps.push(Component::new(p.clone())),
    }
}

impl Parts {
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out: BTreeSet<Symbol> = self.names.iter().cloned().collect();
        for (x, e) in &self.frame {
            out.insert(x.clone());
            e.atoms(&mut out);
        }
        for c in &self.comps {
            c.proc.symbols(&mut out);
        }
        out
    }

    /// Adds `p` as new components after renaming its binders apart from
    /// everything already present. Returns the indices of the new
    /// components.
    pub fn add_fresh(&mut self, p: &PlainProcess) -> Vec<usize> {
        let avoid = self.symbols();
        let fresh = match freshen_binders(&ExtendedProcess::Plain(p.clone()), &avoid) {
            ExtendedProcess::Plain(q) => q,
            _ => unreachable!("freshening preserves the plain shape"),
        };
        let start = self.comps.len();
        flatten(&fresh, &mut self.names, &mut self.comps);
        (start..self.comps.len()).collect()
    }

    /// Opens a closed, correct extended process: extrudes every binder,
    /// eliminates restricted variables, and applies the remaining
    /// substitutions until no variable is left outside the frame domain.
    pub fn from_process(a: &ExtendedProcess) -> Result<Parts> {
        if let Err(v) = check_correct(a) {
            return Err(Error::PreconditionViolated(format!(
                "process is not correct: {}",
                v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
            )));
        }
        if !a.is_closed() {
            return Err(Error::PreconditionViolated(format!("process {a} is not closed")));
        }
        let mut avoid = a.free_names();
        avoid.extend(a.free_vars());
        let a = freshen_binders(a, &avoid);

        let mut names = Vec::new();
        let mut bound_vars = BTreeSet::new();
        let mut substs = Vec::new();
        let mut comps = Vec::new();
        fn extrude(
            a: &ExtendedProcess,
            names: &mut Vec<Symbol>,
            bound_vars: &mut BTreeSet<Symbol>,
            substs: &mut Vec<(Symbol, Term)>,
            comps: &mut Vec<Component>,
        ) {
            match a {
                ExtendedProcess::Plain(p) => flatten(p, names, comps),
                ExtendedProcess::Par(l, r) => {
                    extrude(l, names, bound_vars, substs, comps);
                    extrude(r, names, bound_vars, substs, comps);
                }
                ExtendedProcess::Res(u, b) => {
                    if u.is_var() {
                        bound_vars.insert(u.clone());
                    } else {
                        names.push(u.clone());
                    }
                    extrude(b, names, bound_vars, substs, comps);
                }
                ExtendedProcess::Subst(x, e) => substs.push((x.clone(), e.clone())),
            }
        }
        extrude(&a, &mut names, &mut bound_vars, &mut substs, &mut comps);

        // nu x.({e/x} | A) = A^{e/x}
        for x in &bound_vars {
            let pos = substs
                .iter()
                .position(|(y, _)| y == x)
                .ok_or_else(|| Error::PreconditionViolated(format!("no substitution for restricted {x}")))?;
            let (_, e) = substs.remove(pos);
            for (_, t) in substs.iter_mut() {
                *t = t.substitute(x, &e);
            }
            for c in comps.iter_mut() {
                c.proc = c.proc.substitute(x, &e);
            }
        }

        // {e/x} | A = {e/x} | A^{e/x}, then close the frame itself
        let theta = check_acyclic(substs)?;
        let frame: Vec<_> = theta.bindings().iter().map(|(x, e)| (x.clone(), theta.apply(e))).collect();
        for c in comps.iter_mut() {
            for (x, e) in &frame {
                c.proc = c.proc.substitute(x, e);
            }
        }
        let parts = Parts { names, frame, comps };
        let leftover: BTreeSet<Symbol> = parts
            .comps
            .iter()
            .flat_map(|c| c.proc.free_vars())
            .chain(parts.frame.iter().flat_map(|(_, e)| e.variables()))
            .collect();
        if let Some(x) = leftover.into_iter().next() {
            return Err(Error::PreconditionViolated(format!("variable {x} is not in the domain")));
        }
        Ok(parts)
    }

    /// Normalizes every term and picks the canonical representative.
    pub fn canonicalize(self, theory: &EquationalTheory) -> Result<State> {
        let mut err = None;
        let mut norm = |t: &Term| match theory.normalize(t) {
            Ok(n) => n,
            Err(e) => {
                err.get_or_insert(e);
                t.clone()
            }
        };
        let mut frame: Vec<_> = self.frame.iter().map(|(x, e)| (x.clone(), norm(e))).collect();
        let comps: Vec<Component> = self
            .comps
            .iter()
            .map(|c| Component {
                proc: c.proc.map_terms(&mut norm),
                unfolds: c.unfolds,
            })
            .collect();
        if let Some(e) = err {
            return Err(e);
        }
        frame.sort_by(|a, b| a.0.cmp(&b.0));

        let mut used = BTreeSet::new();
        let mut binders = BTreeSet::new();
        for (_, e) in &frame {
            e.atoms(&mut used);
        }
        for c in &comps {
            c.proc.visit_terms(&mut |t| t.atoms(&mut used));
            c.proc.visit_binders(&mut |s| {
                binders.insert(s.clone());
            });
        }
        let restricted: BTreeSet<Symbol> = self.names.iter().filter(|n| used.contains(*n)).cloned().collect();
        let base = used
            .iter()
            .chain(frame.iter().map(|(x, _)| x))
            .filter(|s| !restricted.contains(*s) && !binders.contains(*s))
            .map(Symbol::index)
            .max()
            .unwrap_or(0)
            + 1;

        let mut canon = Canon {
            restricted: &restricted,
            base,
            map: BTreeMap::new(),
        };
        for (_, e) in &frame {
            walk_atoms(e, &mut |s| canon.assign(s));
        }
        let frame: Vec<_> = frame.iter().map(|(x, e)| (x.clone(), canon.term(e, &BTreeMap::new()))).collect();

        let placeholder = Symbol::new(Kind::Name, "", 0);
        let mut keyed: Vec<(Component, Component)> = comps
            .into_iter()
            .map(|c| {
                let key = Component {
                    proc: canon.render(&c.proc, Some(&placeholder)),
                    unfolds: c.unfolds,
                };
                (key, c)
            })
            .collect();
        keyed.sort();

        // tie groups whose members mention restricted names not yet assigned
        let mentions_unassigned = |c: &Component, map: &BTreeMap<Symbol, Symbol>| {
            let mut hit = false;
            c.proc.visit_terms(&mut |t| walk_atoms(t, &mut |s| hit |= restricted.contains(s) && !map.contains_key(s)));
            hit
        };
        let mut groups = Vec::new();
        let mut i = 0;
        while i < keyed.len() {
            let mut j = i + 1;
            while j < keyed.len() && keyed[j].0 == keyed[i].0 {
                j += 1;
            }
            if j - i > 1 && mentions_unassigned(&keyed[i].1, &canon.map) {
                groups.push((i, j));
            }
            i = j;
        }

        let order: Vec<Component> = keyed.into_iter().map(|(_, c)| c).collect();
        let mut best: Option<Vec<Component>> = None;
        let mut tried = 0usize;
        let mut perm: Vec<usize> = (0..order.len()).collect();
        permute_groups(&mut perm, &groups, 0, &mut |perm| {
            tried += 1;
            let mut cx = Canon {
                restricted: &restricted,
                base,
                map: canon.map.clone(),
            };
            for &k in perm {
                order[k].proc.visit_terms(&mut |t| walk_atoms(t, &mut |s| cx.assign(s)));
            }
            let mut rendered: Vec<Component> = perm
                .iter()
                .map(|&k| Component {
                    proc: cx.render(&order[k].proc, None),
                    unfolds: order[k].unfolds,
                })
                .collect();
            rendered.sort();
            if best.as_ref().is_none_or(|b| rendered < *b) {
                best = Some(rendered);
            }
            tried < TIE_PERMUTATION_CAP
        });
        let comps = best.unwrap_or_default();
        let names = (1..=restricted.len() as u32).map(|k| Symbol::new(Kind::Name, "n", base + k - 1)).collect();
        Ok(State { names, frame, comps })
    }
}

/// Visits orderings of `perm` that permute each group in place. The callback
/// returns `false` to stop.
fn permute_groups(
    perm: &mut Vec<usize>,
    groups: &[(usize, usize)],
    g: usize,
    f: &mut impl FnMut(&[usize]) -> bool,
) -> bool {
    let Some(&(lo, hi)) = groups.get(g) else {
        return f(perm);
    };
    heap_permute(perm, lo, hi - lo, &mut |p| permute_groups(p, groups, g + 1, f))
}

fn heap_permute(
    perm: &mut Vec<usize>,
    lo: usize,
    k: usize,
    f: &mut impl FnMut(&mut Vec<usize>) -> bool,
) -> bool {
    if k <= 1 {
        return f(perm);
    }
    for i in 0..k {
        if !heap_permute(perm, lo, k - 1, f) {
            return false;
        }
        let j = if k.is_multiple_of(2) { lo + i } else { lo };
        if i + 1 < k {
            perm.swap(j, lo + k - 1);
        }
    }
    true
}

struct Canon<'a> {
    restricted: &'a BTreeSet<Symbol>,
    base: u32,
    map: BTreeMap<Symbol, Symbol>,
}

impl Canon<'_> {
    fn assign(&mut self, s: &Symbol) {
        if self.restricted.contains(s) && !self.map.contains_key(s) {
            let k = self.map.len() as u32;
            self.map.insert(s.clone(), Symbol::new(Kind::Name, "n", self.base + k));
        }
    }

    fn term(&self, t: &Term, env: &BTreeMap<Symbol, Symbol>) -> Term {
        self.term_with(t, env, None)
    }

    fn term_with(&self, t: &Term, env: &BTreeMap<Symbol, Symbol>, placeholder: Option<&Symbol>) -> Term {
        t.map_atoms(&mut |s| {
            if let Some(b) = env.get(s) {
                return Term::Atom(b.clone());
            }
            if self.restricted.contains(s) {
                if let Some(m) = self.map.get(s) {
                    return Term::Atom(m.clone());
                }
                if let Some(p) = placeholder {
                    return Term::Atom(p.clone());
                }
            }
            Term::Atom(s.clone())
        })
    }

    /// Restricted names through the map (unassigned ones become
    /// `placeholder`), inner binders numbered by position.
    fn render(&self, p: &PlainProcess, placeholder: Option<&Symbol>) -> PlainProcess {
        let mut k = 0u32;
        self.render_in(p, &mut BTreeMap::new(), &mut k, placeholder)
    }

    fn render_in(
        &self,
        p: &PlainProcess,
        env: &mut BTreeMap<Symbol, Symbol>,
        k: &mut u32,
        ph: Option<&Symbol>,
    ) -> PlainProcess {
        use PlainProcess::*;
        let t = |t: &Term, env: &BTreeMap<Symbol, Symbol>| self.term_with(t, env, ph);
        match p {
            Nil => Nil,
            Par(a, b) => {
                let a = self.render_in(a, env, k, ph);
                PlainProcess::par(a, self.render_in(b, env, k, ph))
            }
            Repl(q) => PlainProcess::repl(self.render_in(q, env, k, ph)),
            If(l, r, a, b) => {
                let (l, r) = (t(l, env), t(r, env));
                let a = self.render_in(a, env, k, ph);
                PlainProcess::if_then_else(l, r, a, self.render_in(b, env, k, ph))
            }
            Out(c, e, q) => PlainProcess::output(t(c, env), t(e, env), self.render_in(q, env, k, ph)),
            New(n, q) => {
                let b = self.binder(n, k);
                let saved = env.insert(n.clone(), b.clone());
                let q = self.render_in(q, env, k, ph);
                restore(env, n, saved);
                PlainProcess::new_name(b, q)
            }
            In(c, x, q) => {
                let c = t(c, env);
                let b = self.binder(x, k);
                let saved = env.insert(x.clone(), b.clone());
                let q = self.render_in(q, env, k, ph);
                restore(env, x, saved);
                PlainProcess::input(c, b, q)
            }
        }
    }

    fn binder(&self, u: &Symbol, k: &mut u32) -> Symbol {
        let b = match u.kind() {
            Kind::Variable => Symbol::new(Kind::Variable, "y", self.base + *k),
            _ => Symbol::new(Kind::Name, "m", self.base + *k),
        };
        *k += 1;
        b
    }
}

fn restore(env: &mut BTreeMap<Symbol, Symbol>, u: &Symbol, saved: Option<Symbol>) {
    match saved {
        Some(s) => env.insert(u.clone(), s),
        None => env.remove(u),
    };
}

impl State {
    pub fn from_process(a: &ExtendedProcess, theory: &EquationalTheory) -> Result<State> {
        Parts::from_process(a)?.canonicalize(theory)
    }

    pub fn names(&self) -> &[Symbol] {
        &self.names
    }

    /// Frame bindings sorted by variable; every term is closed and normal.
    pub fn frame(&self) -> &[(Symbol, Term)] {
        &self.frame
    }

    pub fn comps(&self) -> &[Component] {
        &self.comps
    }

    pub fn domain(&self) -> BTreeSet<Symbol> {
        self.frame.iter().map(|(x, _)| x.clone()).collect()
    }

    pub fn substitution(&self) -> AcyclicSubstitution {
        AcyclicSubstitution::from_ordered(self.frame.clone()).expect("closed frame terms are acyclic")
    }

    pub fn is_restricted(&self, s: &Symbol) -> bool {
        self.names.contains(s)
    }

    pub fn mentions_restricted(&self, t: &Term) -> bool {
        let mut hit = false;
        walk_atoms(t, &mut |s| hit |= self.is_restricted(s));
        hit
    }

    /// `e` with the frame applied (not yet normalized).
    pub fn apply_frame(&self, e: &Term) -> Term {
        self.frame.iter().fold(e.clone(), |acc, (x, v)| acc.substitute(x, v))
    }

    pub fn to_parts(&self) -> Parts {
        Parts {
            names: self.names.clone(),
            frame: self.frame.clone(),
            comps: self.comps.clone(),
        }
    }

    pub fn has_replication(&self) -> bool {
        self.comps.iter().any(|c| c.proc.has_replication())
    }

    /// Whether a replicated component has used up `bound` unfoldings.
    pub fn exhausted(&self, bound: u32) -> bool {
        self.comps
            .iter()
            .any(|c| matches!(c.proc, PlainProcess::Repl(_)) && c.unfolds >= bound)
    }

    /// The same state with every unfolding counter reset.
    pub fn without_counters(&self, theory: &EquationalTheory) -> Result<State> {
        if self.comps.iter().all(|c| c.unfolds == 0) {
            return Ok(self.clone());
        }
        let mut parts = self.to_parts();
        parts.comps.iter_mut().for_each(|c| c.unfolds = 0);
        parts.canonicalize(theory)
    }

    /// `!P` at component `i` rewritten to `P | !P`, counters untouched.
    pub fn unfold(&self, i: usize, theory: &EquationalTheory) -> Result<State> {
        let PlainProcess::Repl(body) = &self.comps[i].proc else {
            return Err(Error::PreconditionViolated("component is not a replication".into()));
        };
        let mut parts = self.to_parts();
        parts.add_fresh(body);
        parts.canonicalize(theory)
    }

    pub fn to_normal_form(&self) -> NormalForm {
        let mut in_frame = BTreeSet::new();
        for (_, e) in &self.frame {
            e.atoms(&mut in_frame);
        }
        let frame_names: Vec<Symbol> = self.names.iter().filter(|n| in_frame.contains(*n)).cloned().collect();
        // each group: pushed names and the components they scope over
        let mut groups: Vec<(Vec<Symbol>, Vec<PlainProcess>)> =
            self.comps.iter().map(|c| (Vec::new(), vec![c.proc.clone()])).collect();
        for n in self.names.iter().filter(|n| !in_frame.contains(*n)) {
            let (hit, rest): (Vec<_>, Vec<_>) = groups.into_iter().partition(|(_, ps)| {
                let mut syms = BTreeSet::new();
                ps.iter().for_each(|p| p.symbols(&mut syms));
                syms.contains(n)
            });
            let mut merged: (Vec<Symbol>, Vec<PlainProcess>) = (Vec::new(), Vec::new());
            for (ns, ps) in hit {
                merged.0.extend(ns);
                merged.1.extend(ps);
            }
            merged.0.insert(0, n.clone());
            groups = rest;
            groups.push(merged);
        }
        let body = PlainProcess::par_all(groups.into_iter().map(|(ns, ps)| {
            ns.into_iter()
                .rev()
                .fold(PlainProcess::par_all(ps), |acc, n| PlainProcess::new_name(n, acc))
        }));
        NormalForm {
            names: frame_names,
            frame: self.substitution(),
            body,
        }
    }

    pub fn to_process(&self) -> ExtendedProcess {
        self.to_normal_form().to_process()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_normal_form().fmt(f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalForm {
    pub names: Vec<Symbol>,
    pub frame: AcyclicSubstitution,
    pub body: PlainProcess,
}

impl NormalForm {
    pub fn to_process(&self) -> ExtendedProcess {
        let mut items: Vec<ExtendedProcess> = self
            .frame
            .bindings()
            .iter()
            .map(|(x, e)| ExtendedProcess::subst(x.clone(), e.clone()))
            .collect();
        if items.is_empty() || self.body != PlainProcess::Nil {
            items.push(ExtendedProcess::Plain(self.body.clone()));
        }
        let inner = ExtendedProcess::par_all(items);
        self.names
            .iter()
            .rev()
            .fold(inner, |acc, n| ExtendedProcess::Res(n.clone(), Box::new(acc)))
    }
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.names {
            write!(f, "new {n}.")?;
        }
        let mut items: Vec<String> = self.frame.bindings().iter().map(|(x, e)| format!("{{{e}/{x}}}")).collect();
        if items.is_empty() || self.body != PlainProcess::Nil {
            items.push(self.body.to_string());
        }
        let single = items.len() == 1 && !matches!(self.body, PlainProcess::Par(..));
        let inner = items.join(" | ");
        if self.names.is_empty() || single {
            write!(f, "{inner}")
        } else {
            write!(f, "({inner})")
        }
    }
}

/// The normal form of a closed, correct extended process.
pub fn normalize_process(a: &ExtendedProcess, theory: &EquationalTheory) -> Result<NormalForm> {
    Ok(State::from_process(a, theory)?.to_normal_form())
}

/// The frame of the normal form of `a`.
pub fn frame_of(a: &ExtendedProcess, theory: &EquationalTheory) -> Result<AcyclicSubstitution> {
    Ok(State::from_process(a, theory)?.substitution())
}

/// Sound check of `a ≡ b` trying up to [`DEFAULT_UNFOLDINGS`] replication
/// unfoldings on each side.
pub fn struct_equiv(a: &ExtendedProcess, b: &ExtendedProcess, theory: &EquationalTheory) -> Result<bool> {
    struct_equiv_with(a, b, theory, DEFAULT_UNFOLDINGS)
}

pub fn struct_equiv_with(
    a: &ExtendedProcess,
    b: &ExtendedProcess,
    theory: &EquationalTheory,
    unfoldings: usize,
) -> Result<bool> {
    let sa = State::from_process(a, theory)?;
    let sb = State::from_process(b, theory)?;
    states_equiv(&sa, &sb, theory, unfoldings)
}

/// Structural equivalence of two canonical states, ignoring unfolding
/// counters.
pub fn states_equiv(a: &State, b: &State, theory: &EquationalTheory, unfoldings: usize) -> Result<bool> {
    let a = a.without_counters(theory)?;
    let b = b.without_counters(theory)?;
    if a == b {
        return Ok(true);
    }
    if unfoldings == 0 || !(a.has_replication() || b.has_replication()) {
        return Ok(false);
    }
    let ua = unfold_closure(&a, theory, unfoldings)?;
    let ub = unfold_closure(&b, theory, unfoldings)?;
    Ok(ua.iter().any(|s| ub.contains(s)))
}

fn unfold_closure(s: &State, theory: &EquationalTheory, depth: usize) -> Result<BTreeSet<State>> {
    let mut seen = BTreeSet::from([s.clone()]);
    let mut frontier = vec![s.clone()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for st in &frontier {
            for (i, c) in st.comps().iter().enumerate() {
                if matches!(c.proc, PlainProcess::Repl(_)) {
                    let u = st.unfold(i, theory)?;
                    if seen.insert(u.clone()) {
                        next.push(u);
                    }
                }
            }
        }
        frontier = next;
    }
    Ok(seen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use PlainProcess as P;

    fn th() -> EquationalTheory {
        EquationalTheory::pair_projection()
    }
    fn out(c: Term, e: Term) -> PlainProcess {
        P::output(c, e, P::Nil)
    }

    #[test]
    fn restricted_variable_is_eliminated() {
        let (x, n, c) = (Symbol::var("x"), Term::name("n"), Term::constant("c"));
        let a = ExtendedProcess::Res(
            x.clone(),
            Box::new(ExtendedProcess::par(
                ExtendedProcess::subst(x, c.clone()),
                ExtendedProcess::Plain(out(n.clone(), Term::var("x"))),
            )),
        );
        let nf = normalize_process(&a, &th()).unwrap();
        assert!(nf.names.is_empty());
        assert!(nf.frame.is_empty());
        assert_eq!(nf.body, out(n, c));
    }

    #[test]
    fn frame_name_stays_restricted() {
        let (x, n) = (Symbol::var("x"), Symbol::name("n"));
        let a = ExtendedProcess::Res(
            n.clone(),
            Box::new(ExtendedProcess::par(
                ExtendedProcess::subst(x.clone(), Term::Atom(n)),
                ExtendedProcess::Plain(out(Term::name("m"), Term::var("x"))),
            )),
        );
        let nf = normalize_process(&a, &th()).unwrap();
        assert_eq!(nf.names.len(), 1);
        let k = Term::Atom(nf.names[0].clone());
        assert_eq!(nf.frame.bindings(), &[(x, k.clone())]);
        assert_eq!(nf.body, out(Term::name("m"), k));
    }

    #[test]
    fn unused_restriction_disappears() {
        let nu = ExtendedProcess::Plain(P::new_name(Symbol::name("n"), P::Nil));
        assert!(struct_equiv(&nu, &ExtendedProcess::nil(), &th()).unwrap());
        let nf = normalize_process(&ExtendedProcess::nil(), &th()).unwrap();
        assert_eq!(nf.to_string(), "0");
    }

    #[test]
    fn frame_terms_are_normalized() {
        let a = ExtendedProcess::subst(
            Symbol::var("x"),
            Term::app("fst", vec![Term::pair(Term::name("a"), Term::name("b"))]),
        );
        let f = frame_of(&a, &th()).unwrap();
        assert_eq!(f.bindings(), &[(Symbol::var("x"), Term::name("a"))]);
    }

    #[test]
    fn nil_absorption_and_commutation() {
        let p = out(Term::name("a"), Term::constant("c"));
        let q = out(Term::name("b"), Term::constant("c"));
        let a = ExtendedProcess::Plain(P::par(p.clone(), P::Nil));
        assert!(struct_equiv(&a, &ExtendedProcess::Plain(p.clone()), &th()).unwrap());
        let pq = ExtendedProcess::Plain(P::par(p.clone(), q.clone()));
        let qp = ExtendedProcess::Plain(P::par(q.clone(), p.clone()));
        assert!(struct_equiv(&pq, &qp, &th()).unwrap());
        assert!(!struct_equiv(&ExtendedProcess::Plain(p), &ExtendedProcess::Plain(q), &th()).unwrap());
    }

    #[test]
    fn restricted_names_up_to_renaming_and_order() {
        // new n.new m.(out(n,c) | out(m,d)) vs new m.new n.(out(m,d) | out(n,c))
        let (n, m) = (Symbol::name("n"), Symbol::name("m"));
        let mk = |first: &Symbol, second: &Symbol, swap: bool| {
            let a = out(Term::Atom(first.clone()), Term::constant("c"));
            let b = out(Term::Atom(second.clone()), Term::constant("d"));
            let body = if swap { P::par(b, a) } else { P::par(a, b) };
            ExtendedProcess::Plain(P::new_name(first.clone(), P::new_name(second.clone(), body)))
        };
        assert!(struct_equiv(&mk(&n, &m, false), &mk(&m, &n, true), &th()).unwrap());
    }

    #[test]
    fn symmetric_ties_are_canonical() {
        // new n.new m.(out(a,n) | out(a,m) | out(b,n)) in two orders
        let (n, m, a, b) = (Term::name("n"), Term::name("m"), Term::name("a"), Term::name("b"));
        let mk = |x: &Term, y: &Term| {
            ExtendedProcess::Plain(P::new_name(
                Symbol::name("n"),
                P::new_name(
                    Symbol::name("m"),
                    P::par_all([out(a.clone(), x.clone()), out(a.clone(), y.clone()), out(b.clone(), x.clone())]),
                ),
            ))
        };
        assert!(struct_equiv(&mk(&n, &m), &mk(&m, &n), &th()).unwrap());
    }

    #[test]
    fn replication_unfolds() {
        let p = out(Term::name("a"), Term::constant("c"));
        let bang = ExtendedProcess::Plain(P::repl(p.clone()));
        let unfolded = ExtendedProcess::Plain(P::par(p.clone(), P::repl(p.clone())));
        assert!(struct_equiv(&bang, &unfolded, &th()).unwrap());
        assert!(!struct_equiv_with(&bang, &unfolded, &th(), 0).unwrap());
    }

    #[test]
    fn open_processes_are_rejected() {
        let a = ExtendedProcess::Plain(out(Term::name("a"), Term::var("x")));
        assert!(matches!(normalize_process(&a, &th()), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn pushed_names_print_inside() {
        let n = Symbol::name("n");
        let a = ExtendedProcess::par(
            ExtendedProcess::subst(Symbol::var("x"), Term::constant("c")),
            ExtendedProcess::Plain(P::new_name(
                n.clone(),
                P::par(out(Term::Atom(n.clone()), Term::constant("c")), P::input(Term::Atom(n), Symbol::var("y"), P::Nil)),
            )),
        );
        let nf = normalize_process(&a, &th()).unwrap();
        assert!(nf.names.is_empty());
        let s = nf.to_string();
        assert!(s.starts_with("{c/x} | new n#"), "{s}");
    }
}
