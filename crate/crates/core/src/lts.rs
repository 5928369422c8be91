//! Labelled transitions of closed extended processes, explored over
//! canonical states with finitely many input recipes and bounded
//! replication.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};
use std::rc::Rc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::normal::{Parts, State};
use crate::process::{ExtendedProcess, PlainProcess};
use crate::rewrite::EquationalTheory;
use crate::term::{Kind, Symbol, Term};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Input { channel: Term, message: Term },
    Output { channel: Term, message: Term },
    EqTest { left: Term, right: Term },
    NeqTest { left: Term, right: Term },
}

impl Action {
    pub fn input(c: Term, e: Term) -> Self {
        Action::Input { channel: c, message: e }
    }

    pub fn output(c: Term, e: Term) -> Self {
        Action::Output { channel: c, message: e }
    }

    pub fn is_external(&self) -> bool {
        matches!(self, Action::Input { .. } | Action::Output { .. })
    }

    pub fn terms(&self) -> (&Term, &Term) {
        match self {
            Action::Input { channel, message } | Action::Output { channel, message } => (channel, message),
            Action::EqTest { left, right } | Action::NeqTest { left, right } => (left, right),
        }
    }

    pub fn variables(&self) -> BTreeSet<Symbol> {
        let (a, b) = self.terms();
        let mut v = a.variables();
        v.extend(b.variables());
        v
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Input { channel, message } => write!(f, "{channel}({message})"),
            Action::Output { channel, message } => write!(f, "{channel}<{message}>"),
            Action::EqTest { left, right } => write!(f, "[{left} = {right}]"),
            Action::NeqTest { left, right } => write!(f, "[{left} != {right}]"),
        }
    }
}

/// Swaps input and output on the same channel and message.
pub fn co_action(a: &Action) -> Result<Action> {
    match a {
        Action::Input { channel, message } => Ok(Action::output(channel.clone(), message.clone())),
        Action::Output { channel, message } => Ok(Action::input(channel.clone(), message.clone())),
        _ => Err(Error::InternalAction),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputRecipes {
    /// All recipes up to this height over the domain and the public atoms.
    Depth(u32),
    /// Exactly these recipes (those mentioning variables outside the
    /// domain are skipped).
    Explicit(Vec<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputLabelMode {
    /// The label carries the message, as a recipe over the frame.
    Literal,
    /// The label carries the fresh frame variable.
    Alias,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExplorationConfig {
    pub input_recipes: InputRecipes,
    /// Recipe height for static equivalence and for labelling messages
    /// that mention restricted names.
    pub recipe_depth: u32,
    /// Atoms the environment may use besides the free atoms of the
    /// processes under study.
    pub public_atoms: Vec<Symbol>,
    pub replication_bound: u32,
    pub max_states: usize,
    pub output_label_mode: OutputLabelMode,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            input_recipes: InputRecipes::Depth(2),
            recipe_depth: 2,
            public_atoms: vec![Symbol::constant("0")],
            replication_bound: 2,
            max_states: 10_000,
            output_label_mode: OutputLabelMode::Literal,
        }
    }
}

impl ExplorationConfig {
    /// Sets both the input and the static-equivalence recipe height.
    pub fn with_depth(mut self, d: u32) -> Self {
        self.input_recipes = InputRecipes::Depth(d);
        self.recipe_depth = d;
        self
    }
}

/// Every recipe of height at most `depth` over `atoms` and the functions of
/// the signature, in a fixed order: by height, then by function name, then
/// lexicographically by arguments.
pub fn enumerate_recipes(atoms: &[Symbol], theory: &EquationalTheory, depth: u32) -> Vec<Term> {
    if depth == 0 {
        return Vec::new();
    }
    let mut funcs: Vec<(&str, usize)> = theory.signature().functions().collect();
    funcs.sort();
    let mut all: Vec<Term> = atoms.iter().map(|a| Term::Atom(a.clone())).collect();
    for (f, n) in &funcs {
        if *n == 0 {
            all.push(Term::app(f, Vec::new()));
        }
    }
    let mut prev_len = 0;
    for _ in 1..depth {
        let lower = all.clone();
        let boundary = all.len();
        let mut next = Vec::new();
        for (f, n) in &funcs {
            if *n == 0 {
                continue;
            }
            odometer(*n, boundary, |idx| {
                // at least one argument from the newest layer
                if idx.iter().any(|&i| i >= prev_len) {
                    next.push(Term::app(f, idx.iter().map(|&i| lower[i].clone()).collect()));
                }
            });
        }
        prev_len = boundary;
        all.extend(next);
    }
    all
}

/// Calls `f` on every `n`-tuple over `0..m` in lexicographic order.
fn odometer(n: usize, m: usize, mut f: impl FnMut(&[usize])) {
    if m == 0 {
        return;
    }
    let mut idx = vec![0usize; n];
    loop {
        f(&idx);
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Recipes with their values under one frame.
#[derive(Debug)]
pub struct RecipeTable {
    pub recipes: Vec<Term>,
    pub values: Vec<Term>,
    first: HashMap<Term, usize>,
}

impl RecipeTable {
    pub fn recipe_for(&self, value: &Term) -> Option<&Term> {
        self.first.get(value).map(|&i| &self.recipes[i])
    }

    /// Index of the first recipe with the same value as recipe `i`.
    pub fn class_of(&self, i: usize) -> usize {
        self.first[&self.values[i]]
    }

    /// `(recipe, value)` with one recipe per distinct value.
    pub fn distinct(&self) -> impl Iterator<Item = (&Term, &Term)> {
        self.recipes
            .iter()
            .zip(&self.values)
            .enumerate()
            .filter(|(i, (_, v))| self.first[*v] == *i)
            .map(|(_, rv)| rv)
    }
}

pub type StateId = usize;

/// A frame and a recipe height.
type TableKey = (Vec<(Symbol, Term)>, u32);

#[derive(Clone, Debug)]
pub struct Move {
    pub action: Action,
    /// For inputs and outputs, the channel and message values.
    pub values: Option<(Term, Term)>,
    /// Whether a test succeeds; always true for external actions.
    pub holds: bool,
    pub target: StateId,
}

impl Move {
    pub fn is_internal(&self) -> bool {
        !self.action.is_external()
    }

    pub fn enabled(&self) -> bool {
        self.holds
    }
}

/// Shared exploration context: interned states, cached moves and recipe
/// tables.
pub struct Explorer<'t> {
    theory: &'t EquationalTheory,
    cfg: ExplorationConfig,
    public: Vec<Symbol>,
    states: Vec<State>,
    ids: HashMap<State, StateId>,
    moves: HashMap<StateId, Rc<Vec<Move>>>,
    tau: HashMap<StateId, Rc<Vec<StateId>>>,
    tables: HashMap<TableKey, Rc<RecipeTable>>,
}

impl<'t> Explorer<'t> {
    /// Public atoms are those of the configuration plus the free names and
    /// constants of `roots`.
    pub fn new(theory: &'t EquationalTheory, cfg: ExplorationConfig, roots: &[&ExtendedProcess]) -> Self {
        let mut public: BTreeSet<Symbol> = cfg.public_atoms.iter().cloned().collect();
        for r in roots {
            public.extend(r.free_names());
            public.extend(r.constants());
        }
        Explorer {
            theory,
            cfg,
            public: public.into_iter().collect(),
            states: Vec::new(),
            ids: HashMap::new(),
            moves: HashMap::new(),
            tau: HashMap::new(),
            tables: HashMap::new(),
        }
    }

    pub fn theory(&self) -> &'t EquationalTheory {
        self.theory
    }

    pub fn config(&self) -> &ExplorationConfig {
        &self.cfg
    }

    pub fn public_atoms(&self) -> &[Symbol] {
        &self.public
    }

    pub fn state(&self, id: StateId) -> &State {
        &self.states[id]
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn add_process(&mut self, a: &ExtendedProcess) -> Result<StateId> {
        let s = State::from_process(a, self.theory)?;
        self.intern(s)
    }

    pub fn intern(&mut self, s: State) -> Result<StateId> {
        if let Some(&id) = self.ids.get(&s) {
            return Ok(id);
        }
        if self.states.len() >= self.cfg.max_states {
            return Err(Error::StateBudgetExceeded(self.cfg.max_states));
        }
        let id = self.states.len();
        self.ids.insert(s.clone(), id);
        self.states.push(s);
        Ok(id)
    }

    /// Whether some replication in the state has used up its unfoldings,
    /// so its outgoing moves may be incomplete.
    pub fn exhausted(&self, id: StateId) -> bool {
        self.states[id].exhausted(self.cfg.replication_bound)
    }

    /// Normal form of `e` under the frame of `id`.
    pub fn eval(&self, id: StateId, e: &Term) -> Result<Term> {
        self.theory.normalize(&self.states[id].apply_frame(e))
    }

    pub fn recipe_table(&mut self, id: StateId, depth: u32) -> Result<Rc<RecipeTable>> {
        let frame = self.states[id].frame().to_vec();
        self.table_for_frame(frame, depth)
    }

    fn table_for_frame(&mut self, frame: Vec<(Symbol, Term)>, depth: u32) -> Result<Rc<RecipeTable>> {
        let key = (frame, depth);
        if let Some(t) = self.tables.get(&key) {
            return Ok(t.clone());
        }
        let mut atoms: Vec<Symbol> = key.0.iter().map(|(x, _)| x.clone()).collect();
        atoms.extend(self.public.iter().cloned());
        let recipes = enumerate_recipes(&atoms, self.theory, depth);
        let mut values = Vec::with_capacity(recipes.len());
        let mut first = HashMap::new();
        for (i, r) in recipes.iter().enumerate() {
            let v = key.0.iter().fold(r.clone(), |acc, (x, e)| acc.substitute(x, e));
            let v = self.theory.normalize(&v)?;
            first.entry(v.clone()).or_insert(i);
            values.push(v);
        }
        let t = Rc::new(RecipeTable { recipes, values, first });
        self.tables.insert(key, t.clone());
        Ok(t)
    }

    /// A recipe the environment can use for `value`, if any.
    fn label_of(&mut self, id: StateId, value: &Term) -> Result<Option<Term>> {
        if !self.states[id].mentions_restricted(value) {
            return Ok(Some(value.clone()));
        }
        let t = self.recipe_table(id, self.cfg.recipe_depth)?;
        Ok(t.recipe_for(value).cloned())
    }

    /// `(value, recipe)` for every message the environment can send.
    fn input_values(&mut self, id: StateId) -> Result<Vec<(Term, Term)>> {
        match self.cfg.input_recipes.clone() {
            InputRecipes::Depth(d) => {
                let t = self.recipe_table(id, d)?;
                Ok(t.distinct().map(|(r, v)| (v.clone(), r.clone())).collect())
            }
            InputRecipes::Explicit(rs) => {
                let dom = self.states[id].domain();
                let mut seen = BTreeSet::new();
                let mut out = Vec::new();
                for r in rs {
                    if !r.variables().is_subset(&dom) {
                        continue;
                    }
                    let v = self.eval(id, &r)?;
                    if seen.insert(v.clone()) {
                        out.push((v, r));
                    }
                }
                Ok(out)
            }
        }
    }

    /// All transitions of a state, including failing tests.
    pub fn moves(&mut self, id: StateId) -> Result<Rc<Vec<Move>>> {
        if let Some(m) = self.moves.get(&id) {
            return Ok(m.clone());
        }
        let raw = self.raw_moves(id)?;
        let mut out: Vec<Move> = Vec::new();
        let mut seen = BTreeSet::new();
        for (action, values, holds, parts) in raw {
            let target = parts.canonicalize(self.theory)?;
            let target = self.intern(target)?;
            if seen.insert((action.clone(), target)) {
                out.push(Move {
                    action,
                    values,
                    holds,
                    target,
                });
            }
        }
        let out = Rc::new(out);
        self.moves.insert(id, out.clone());
        Ok(out)
    }

    fn raw_moves(&mut self, id: StateId) -> Result<Vec<RawMove>> {
        let base = self.states[id].to_parts();
        let bound = self.cfg.replication_bound;
        let mut out = Vec::new();
        self.moves_of(id, &base, Touch::Any, &mut out)?;
        let repls: Vec<usize> = (0..base.comps.len())
            .filter(|&i| matches!(base.comps[i].proc, PlainProcess::Repl(_)))
            .collect();
        for &i in &repls {
            if base.comps[i].unfolds >= bound {
                continue;
            }
            let mut p1 = base.clone();
            let new1 = spawn(&mut p1, i);
            self.moves_of(id, &p1, Touch::One(&new1), &mut out)?;
            for &j in repls.iter().filter(|&&j| j >= i) {
                if p1.comps[j].unfolds >= bound {
                    continue;
                }
                let mut p2 = p1.clone();
                let new2 = spawn(&mut p2, j);
                self.moves_of(id, &p2, Touch::Two(&new1, &new2), &mut out)?;
            }
        }
        Ok(out)
    }

    fn fresh_var(parts: &Parts) -> Symbol {
        let dom: BTreeSet<&Symbol> = parts.frame.iter().map(|(x, _)| x).collect();
        (1..)
            .map(|k| Symbol::new(Kind::Variable, "x", k))
            .find(|x| !dom.contains(x))
            .expect("unbounded supply")
    }

    fn moves_of(&mut self, id: StateId, parts: &Parts, touch: Touch, out: &mut Vec<RawMove>) -> Result<()> {
        let without = |drop: &[usize]| {
            let mut p = parts.clone();
            p.comps = parts
                .comps
                .iter()
                .enumerate()
                .filter(|(k, _)| !drop.contains(k))
                .map(|(_, c)| c.clone())
                .collect();
            p
        };
        for (k, comp) in parts.comps.iter().enumerate() {
            if !touch.single(k) {
                continue;
            }
            match &comp.proc {
                PlainProcess::Out(c, e, cont) => {
                    let Some(cl) = self.label_of(id, c)? else { continue };
                    let mut target = without(&[k]);
                    let x = Self::fresh_var(&target);
                    let ml = match self.cfg.output_label_mode {
                        OutputLabelMode::Literal => match self.label_of(id, e)? {
                            Some(l) => l,
                            None => continue,
                        },
                        OutputLabelMode::Alias => Term::Atom(x.clone()),
                    };
                    target.frame.push((x, e.clone()));
                    target.add_fresh(cont);
                    out.push((Action::output(cl, ml), Some((c.clone(), e.clone())), true, target));
                }
                PlainProcess::In(c, y, cont) => {
                    let Some(cl) = self.label_of(id, c)? else { continue };
                    for (v, r) in self.input_values(id)? {
                        let mut target = without(&[k]);
                        target.add_fresh(&cont.substitute(y, &v));
                        out.push((Action::input(cl.clone(), r), Some((c.clone(), v)), true, target));
                    }
                }
                PlainProcess::If(l, r, then, els) => {
                    let eq = self.theory.equal(l, r)?;
                    let (l, r) = (l.clone(), r.clone());
                    let mut t_eq = without(&[k]);
                    t_eq.add_fresh(then);
                    out.push((Action::EqTest { left: l.clone(), right: r.clone() }, None, eq, t_eq));
                    let mut t_ne = without(&[k]);
                    t_ne.add_fresh(els);
                    out.push((Action::NeqTest { left: l, right: r }, None, !eq, t_ne));
                }
                PlainProcess::Nil | PlainProcess::Par(..) | PlainProcess::New(..) | PlainProcess::Repl(_) => {}
            }
        }
        for (k, ck) in parts.comps.iter().enumerate() {
            let PlainProcess::Out(c, e, cont_out) = &ck.proc else { continue };
            for (l, cl) in parts.comps.iter().enumerate() {
                let PlainProcess::In(c2, y, cont_in) = &cl.proc else { continue };
                if k == l || c != c2 || !touch.pair(k, l) {
                    continue;
                }
                let mut target = without(&[k, l]);
                let x = Self::fresh_var(&target);
                target.frame.push((x, e.clone()));
                target.add_fresh(cont_out);
                target.add_fresh(&cont_in.substitute(y, e));
                let msg = Term::pair(c.clone(), e.clone());
                out.push((
                    Action::EqTest {
                        left: msg.clone(),
                        right: msg,
                    },
                    None,
                    true,
                    target,
                ));
            }
        }
        Ok(())
    }

    /// States reachable by succeeding internal moves, the state itself first.
    pub fn tau_closure(&mut self, id: StateId) -> Result<Rc<Vec<StateId>>> {
        if let Some(t) = self.tau.get(&id) {
            return Ok(t.clone());
        }
        let mut seen = BTreeSet::from([id]);
        let mut order = vec![id];
        let mut queue = VecDeque::from([id]);
        while let Some(s) = queue.pop_front() {
            for m in self.moves(s)?.iter() {
                if m.is_internal() && m.holds && seen.insert(m.target) {
                    order.push(m.target);
                    queue.push_back(m.target);
                }
            }
        }
        let order = Rc::new(order);
        self.tau.insert(id, order.clone());
        Ok(order)
    }

    /// Targets of succeeding internal moves.
    pub fn internal_steps(&mut self, id: StateId) -> Result<Vec<StateId>> {
        Ok(self
            .moves(id)?
            .iter()
            .filter(|m| m.is_internal() && m.holds)
            .map(|m| m.target)
            .collect())
    }

    /// External moves of `id` that realize the label `a`, whose recipes
    /// are evaluated under the frame of `id`.
    pub fn moves_on(&mut self, id: StateId, a: &Action) -> Result<Vec<StateId>> {
        let (cl, ml) = a.terms();
        let cv = self.eval(id, cl)?;
        let alias = self.cfg.output_label_mode == OutputLabelMode::Alias;
        let mv = match a {
            Action::Output { .. } if alias => None,
            _ => Some(self.eval(id, ml)?),
        };
        let moves = self.moves(id)?;
        Ok(moves
            .iter()
            .filter(|m| std::mem::discriminant(&m.action) == std::mem::discriminant(a))
            .filter(|m| match &m.values {
                Some((c, e)) => *c == cv && mv.as_ref().is_none_or(|v| v == e),
                None => false,
            })
            .map(|m| m.target)
            .collect())
    }

    /// `{A' | id ⇝ B -a-> B' ⇝ A'}`.
    pub fn weak_transition(&mut self, id: StateId, a: &Action) -> Result<Vec<StateId>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for b in self.tau_closure(id)?.iter().copied().collect::<Vec<_>>() {
            for b2 in self.moves_on(b, a)? {
                for t in self.tau_closure(b2)?.iter() {
                    if seen.insert(*t) {
                        out.push(*t);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Free names on which the state can eventually output, and whether the
    /// exploration behind the answer was complete.
    pub fn barbs(&mut self, id: StateId) -> Result<(BTreeSet<Symbol>, bool)> {
        let mut names = BTreeSet::new();
        let mut complete = true;
        for s in self.tau_closure(id)?.iter().copied().collect::<Vec<_>>() {
            complete &= !self.exhausted(s);
            for m in self.moves(s)?.iter() {
                if let (Action::Output { .. }, Some((Term::Atom(c), _))) = (&m.action, &m.values) {
                    if c.is_name() && !self.states[s].is_restricted(c) {
                        names.insert(c.clone());
                    }
                }
            }
        }
        Ok((names, complete))
    }

    /// The reachable part of the transition system from `root`, enabled
    /// moves only.
    pub fn materialize(&mut self, root: StateId) -> Result<Lts> {
        let mut local = HashMap::from([(root, 0usize)]);
        let mut order = vec![root];
        let mut edges = Vec::new();
        let mut i = 0;
        while i < order.len() {
            let s = order[i];
            for m in self.moves(s)?.iter().filter(|m| m.holds) {
                let next = local.len();
                let t = *local.entry(m.target).or_insert_with(|| {
                    order.push(m.target);
                    next
                });
                edges.push(LtsEdge {
                    source: i,
                    action: m.action.clone(),
                    values: m.values.clone(),
                    target: t,
                });
            }
            i += 1;
        }
        Ok(Lts {
            states: order.iter().map(|&s| self.states[s].clone()).collect(),
            exhausted: order.iter().map(|&s| self.exhausted(s)).collect(),
            edges,
        })
    }
}

type RawMove = (Action, Option<(Term, Term)>, bool, Parts);

#[derive(Clone, Copy)]
enum Touch<'a> {
    Any,
    One(&'a [usize]),
    Two(&'a [usize], &'a [usize]),
}

impl Touch<'_> {
    fn single(&self, k: usize) -> bool {
        match self {
            Touch::Any => true,
            Touch::One(s) => s.contains(&k),
            Touch::Two(..) => false,
        }
    }

    fn pair(&self, k: usize, l: usize) -> bool {
        match self {
            Touch::Any => true,
            Touch::One(s) => s.contains(&k) || s.contains(&l),
            Touch::Two(a, b) => (a.contains(&k) && b.contains(&l)) || (b.contains(&k) && a.contains(&l)),
        }
    }
}

fn spawn(parts: &mut Parts, i: usize) -> Vec<usize> {
    parts.comps[i].unfolds += 1;
    let PlainProcess::Repl(body) = parts.comps[i].proc.clone() else {
        unreachable!("spawn on a replication")
    };
    parts.add_fresh(&body)
}

#[derive(Clone, Debug, Serialize)]
pub struct LtsEdge {
    pub source: usize,
    pub action: Action,
    #[serde(skip)]
    pub values: Option<(Term, Term)>,
    pub target: usize,
}

/// A materialized transition system; state 0 is the root.
#[derive(Clone, Debug)]
pub struct Lts {
    pub states: Vec<State>,
    /// States whose outgoing moves may be incomplete because a replication
    /// ran out of unfoldings.
    pub exhausted: Vec<bool>,
    pub edges: Vec<LtsEdge>,
}

impl Lts {
    pub fn successors(&self, s: usize) -> impl Iterator<Item = &LtsEdge> {
        self.edges.iter().filter(move |e| e.source == s)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph lts {\n  node [shape=box];\n");
        for (i, s) in self.states.iter().enumerate() {
            let style = if i == 0 { ", style=bold" } else { "" };
            let _ = writeln!(out, "  s{i} [label=\"{}\"{style}];", escape(&s.to_string()));
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  s{} -> s{} [label=\"{}\"];",
                e.source,
                e.target,
                escape(&e.action.to_string())
            );
        }
        out.push_str("}\n");
        out
    }

    /// One `source<TAB>action<TAB>target` line per edge.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(out, "{}\t{}\t{}", e.source, e.action, e.target);
        }
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// A transition between extended processes.
#[derive(Clone, Debug)]
pub struct Transition {
    pub source: ExtendedProcess,
    pub action: Action,
    pub target: ExtendedProcess,
}

/// All transitions of `a`, including tests that fail.
pub fn enumerate_transitions(
    a: &ExtendedProcess,
    theory: &EquationalTheory,
    cfg: &ExplorationConfig,
) -> Result<Vec<Transition>> {
    let mut ex = Explorer::new(theory, cfg.clone(), &[a]);
    let id = ex.add_process(a)?;
    let source = ex.state(id).to_process();
    let moves = ex.moves(id)?;
    Ok(moves
        .iter()
        .map(|m| Transition {
            source: source.clone(),
            action: m.action.clone(),
            target: ex.state(m.target).to_process(),
        })
        .collect())
}

fn with_explorer<T>(
    a: &ExtendedProcess,
    theory: &EquationalTheory,
    cfg: &ExplorationConfig,
    f: impl FnOnce(&mut Explorer, StateId) -> Result<T>,
) -> Result<T> {
    let mut ex = Explorer::new(theory, cfg.clone(), &[a]);
    let id = ex.add_process(a)?;
    f(&mut ex, id)
}

/// Targets of succeeding tests.
pub fn internal_step(
    a: &ExtendedProcess,
    theory: &EquationalTheory,
    cfg: &ExplorationConfig,
) -> Result<Vec<ExtendedProcess>> {
    with_explorer(a, theory, cfg, |ex, id| {
        Ok(ex.internal_steps(id)?.into_iter().map(|t| ex.state(t).to_process()).collect())
    })
}

pub fn tau_closure(
    a: &ExtendedProcess,
    theory: &EquationalTheory,
    cfg: &ExplorationConfig,
) -> Result<Vec<ExtendedProcess>> {
    with_explorer(a, theory, cfg, |ex, id| {
        Ok(ex.tau_closure(id)?.iter().map(|&t| ex.state(t).to_process()).collect())
    })
}

/// `{A' | A ⇝ B -α-> B' ⇝ A'}` for an external `α` with `var(α) ⊆ dom(A)`.
pub fn weak_transition(
    a: &ExtendedProcess,
    action: &Action,
    theory: &EquationalTheory,
    cfg: &ExplorationConfig,
) -> Result<Vec<ExtendedProcess>> {
    if !action.is_external() {
        return Err(Error::InternalAction);
    }
    if !action.variables().is_subset(&a.domain()) {
        return Err(Error::PreconditionViolated(format!("{action} mentions variables outside the domain")));
    }
    with_explorer(a, theory, cfg, |ex, id| {
        Ok(ex.weak_transition(id, action)?.into_iter().map(|t| ex.state(t).to_process()).collect())
    })
}

pub fn barbs(a: &ExtendedProcess, theory: &EquationalTheory, cfg: &ExplorationConfig) -> Result<BTreeSet<Symbol>> {
    with_explorer(a, theory, cfg, |ex, id| Ok(ex.barbs(id)?.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::struct_equiv;
    use PlainProcess as P;

    fn th() -> EquationalTheory {
        EquationalTheory::pair_projection()
    }
    fn cfg() -> ExplorationConfig {
        ExplorationConfig::default()
    }
    fn plain(p: PlainProcess) -> ExtendedProcess {
        ExtendedProcess::Plain(p)
    }
    fn c() -> Term {
        Term::name("c")
    }
    fn d() -> Term {
        Term::constant("d")
    }

    #[test]
    fn co_action_swaps() {
        let a = Action::input(c(), d());
        assert_eq!(co_action(&a).unwrap(), Action::output(c(), d()));
        assert_eq!(co_action(&co_action(&a).unwrap()).unwrap(), a);
        assert!(matches!(
            co_action(&Action::EqTest { left: d(), right: d() }),
            Err(Error::InternalAction)
        ));
    }

    #[test]
    fn single_recipe_input() {
        let cfg = ExplorationConfig {
            input_recipes: InputRecipes::Explicit(vec![d()]),
            ..cfg()
        };
        let a = plain(P::input(c(), Symbol::var("x"), P::Nil));
        let ts = enumerate_transitions(&a, &th(), &cfg).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].action, Action::input(c(), d()));
        assert!(struct_equiv(&ts[0].target, &ExtendedProcess::nil(), &th()).unwrap());
    }

    #[test]
    fn output_extends_frame() {
        let a = plain(P::output(c(), d(), P::Nil));
        let ts = enumerate_transitions(&a, &th(), &cfg()).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].action, Action::output(c(), d()));
        let x1 = Symbol::new(Kind::Variable, "x", 1);
        assert_eq!(ts[0].target.domain(), BTreeSet::from([x1.clone()]));
        let expected = ExtendedProcess::subst(x1, d());
        assert!(struct_equiv(&ts[0].target, &expected, &th()).unwrap());
    }

    #[test]
    fn communication_is_a_test() {
        let y = Symbol::var("y");
        let a = plain(P::par(
            P::output(c(), d(), P::Nil),
            P::input(c(), y.clone(), P::output(Term::name("e"), Term::var("y"), P::Nil)),
        ));
        let ts = enumerate_transitions(&a, &th(), &cfg()).unwrap();
        let comm = ts
            .iter()
            .find(|t| matches!(t.action, Action::EqTest { .. }))
            .expect("communication");
        let cd = Term::pair(c(), d());
        assert_eq!(comm.action, Action::EqTest { left: cd.clone(), right: cd });
        let x1 = Symbol::new(Kind::Variable, "x", 1);
        let expected = ExtendedProcess::par(
            ExtendedProcess::subst(x1, d()),
            plain(P::output(Term::name("e"), d(), P::Nil)),
        );
        assert!(struct_equiv(&comm.target, &expected, &th()).unwrap());
    }

    #[test]
    fn restricted_channel_blocks_output() {
        let n = Symbol::name("n");
        let a = plain(P::new_name(n.clone(), P::output(Term::Atom(n), d(), P::Nil)));
        let ts = enumerate_transitions(&a, &th(), &cfg()).unwrap();
        assert!(ts.iter().all(|t| !t.action.is_external()));
        assert!(barbs(&a, &th(), &cfg()).unwrap().is_empty());
    }

    #[test]
    fn restricted_message_depends_on_label_mode() {
        let n = Symbol::name("n");
        let a = plain(P::new_name(n.clone(), P::output(c(), Term::Atom(n), P::Nil)));
        assert!(enumerate_transitions(&a, &th(), &cfg()).unwrap().is_empty());
        let alias = ExplorationConfig {
            output_label_mode: OutputLabelMode::Alias,
            ..cfg()
        };
        let ts = enumerate_transitions(&a, &th(), &alias).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].action, Action::output(c(), Term::Atom(Symbol::new(Kind::Variable, "x", 1))));
    }

    #[test]
    fn conditional_steps() {
        let out_a = P::output(Term::name("a"), Term::constant("0"), P::Nil);
        let yes = plain(P::if_then_else(c(), c(), out_a.clone(), P::Nil));
        let steps = internal_step(&yes, &th(), &cfg()).unwrap();
        assert_eq!(steps.len(), 1);
        assert!(struct_equiv(&steps[0], &plain(out_a.clone()), &th()).unwrap());
        let no = plain(P::if_then_else(c(), d(), out_a, P::Nil));
        let steps = internal_step(&no, &th(), &cfg()).unwrap();
        assert_eq!(steps.len(), 1);
        assert!(struct_equiv(&steps[0], &ExtendedProcess::nil(), &th()).unwrap());
    }

    #[test]
    fn projection_in_condition() {
        let (a, b) = (Term::name("a"), Term::name("b"));
        let p = ExtendedProcess::par(
            ExtendedProcess::subst(Symbol::var("x"), Term::pair(a.clone(), b)),
            plain(P::if_then_else(
                Term::app("fst", vec![Term::var("x")]),
                a.clone(),
                P::output(a, d(), P::Nil),
                P::Nil,
            )),
        );
        let steps = internal_step(&p, &th(), &cfg()).unwrap();
        assert_eq!(steps.len(), 1);
        assert!(!steps[0].as_plain().is_some_and(|q| *q == P::Nil));
        assert!(barbs(&p, &th(), &cfg()).unwrap().contains(&Symbol::name("a")));
    }

    #[test]
    fn chained_internal_steps() {
        let out_a = P::output(Term::name("a"), Term::constant("0"), P::Nil);
        let p = plain(P::if_then_else(c(), c(), P::if_then_else(d(), d(), out_a.clone(), P::Nil), P::Nil));
        let closure = tau_closure(&p, &th(), &cfg()).unwrap();
        assert_eq!(closure.len(), 3);
        assert!(closure.iter().any(|q| struct_equiv(q, &plain(out_a.clone()), &th()).unwrap()));
        let nil = tau_closure(&ExtendedProcess::nil(), &th(), &cfg()).unwrap();
        assert_eq!(nil.len(), 1);
    }

    #[test]
    fn weak_output_after_test() {
        let a = Term::name("a");
        let zero = Term::constant("0");
        let p = plain(P::if_then_else(c(), c(), P::output(a.clone(), zero.clone(), P::Nil), P::Nil));
        let targets = weak_transition(&p, &Action::output(a.clone(), zero.clone()), &th(), &cfg()).unwrap();
        let expected = ExtendedProcess::subst(Symbol::new(Kind::Variable, "x", 1), zero.clone());
        assert!(targets.iter().any(|t| struct_equiv(t, &expected, &th()).unwrap()));
        let none = weak_transition(&ExtendedProcess::nil(), &Action::output(a, zero), &th(), &cfg()).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn replication_is_bounded() {
        let a = Term::name("a");
        let p = plain(P::repl(P::output(a.clone(), d(), P::Nil)));
        let theory = th();
        let mut ex = Explorer::new(&theory, cfg(), &[&p]);
        let root = ex.add_process(&p).unwrap();
        let lts = ex.materialize(root).unwrap();
        // two unfoldings, then frozen
        assert_eq!(lts.states.len(), 3);
        assert_eq!(lts.edges.len(), 2);
        assert!(lts.exhausted[2]);
        assert!(!lts.exhausted[0]);
    }

    #[test]
    fn replicated_communication_needs_both_copies() {
        let y = Symbol::var("y");
        let p = plain(P::par(
            P::repl(P::output(c(), d(), P::Nil)),
            P::repl(P::input(c(), y, P::Nil)),
        ));
        let ts = enumerate_transitions(&p, &th(), &cfg()).unwrap();
        assert!(ts.iter().any(|t| matches!(t.action, Action::EqTest { .. })));
    }

    #[test]
    fn recipe_enumeration_by_height() {
        let sig = th();
        let atoms = [Symbol::var("x"), Symbol::constant("0")];
        let r1 = enumerate_recipes(&atoms, &sig, 1);
        assert_eq!(r1.len(), 2);
        let r2 = enumerate_recipes(&atoms, &sig, 2);
        // fst, snd: 2 each; pair: 4
        assert_eq!(r2.len(), 2 + 2 + 2 + 4);
        assert!(r2.iter().all(|r| r.height() <= 2));
        let r3 = enumerate_recipes(&atoms, &sig, 3);
        assert!(r3.iter().all(|r| r.height() <= 3));
        let distinct: BTreeSet<_> = r3.iter().collect();
        assert_eq!(distinct.len(), r3.len());
        // 10 of height <= 2; height 3: fst/snd over 8 new, pair over 10*10 - 2*2
        assert_eq!(r3.len(), 10 + 8 + 8 + 96);
    }

    #[test]
    fn dot_and_lines() {
        let p = plain(P::output(c(), d(), P::Nil));
        let theory = th();
        let mut ex = Explorer::new(&theory, cfg(), &[&p]);
        let root = ex.add_process(&p).unwrap();
        let lts = ex.materialize(root).unwrap();
        let dot = lts.to_dot();
        assert!(dot.starts_with("digraph lts {"));
        assert!(dot.contains("s0 -> s1 [label=\"c<d>\"]"));
        assert_eq!(lts.to_lines(), "0\tc<d>\t1\n");
    }
}
