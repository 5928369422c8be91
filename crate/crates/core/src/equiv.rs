//! Static equivalence, weak labelled bisimilarity, barb equivalence, probe
//! contexts and context closure, plus a naive fixpoint oracle used for
//! cross-checking.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lts::{enumerate_recipes, Action, ExplorationConfig, Explorer, Lts, OutputLabelMode, StateId};
use crate::normal::State;
use crate::process::{ExtendedProcess, PlainProcess};
use crate::rewrite::EquationalTheory;
use crate::term::{FreshGen, Symbol, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// The observation that finally separates two processes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fact {
    DomainMismatch {
        left: Vec<Symbol>,
        right: Vec<Symbol>,
    },
    /// The two recipes agree under the frame of `equal_on` only.
    StaticInequivalence {
        recipes: (Term, Term),
        equal_on: Side,
    },
    /// `side` performs `action`; the other side has no weak response.
    UnmatchedAction {
        side: Side,
        action: Action,
    },
    /// `name` is a barb of `present_on` only.
    BarbMismatch {
        name: Symbol,
        present_on: Side,
    },
    /// The pair is outside the greatest fixpoint computed by the oracle.
    Refuted,
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fact::DomainMismatch { left, right } => {
                let show = |v: &[Symbol]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ");
                write!(f, "domains differ: {{{}}} vs {{{}}}", show(left), show(right))
            }
            Fact::StaticInequivalence { recipes, equal_on } => write!(
                f,
                "frames differ: {} = {} holds on the {equal_on} only",
                recipes.0, recipes.1
            ),
            Fact::UnmatchedAction { side, action } => {
                write!(f, "{side} side performs {action}, which the {} side cannot match", side.other())
            }
            Fact::BarbMismatch { name, present_on } => write!(f, "barb {name} on the {present_on} side only"),
            Fact::Refuted => write!(f, "no labelled bisimulation contains the pair"),
        }
    }
}

/// One round of the distinguishing game: `attacker` moves with `action`,
/// the opponent answers, leading to (`left`, `right`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub attacker: Side,
    pub action: Action,
    pub left: State,
    pub right: State,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evidence {
    pub steps: Vec<TraceStep>,
    pub fact: Fact,
}

impl Evidence {
    /// Re-executes the trace from `(a, b)` and re-checks the final fact.
    pub fn replay(
        &self,
        a: &ExtendedProcess,
        b: &ExtendedProcess,
        theory: &EquationalTheory,
        cfg: &ExplorationConfig,
    ) -> Result<bool> {
        let mut ex = Explorer::new(theory, cfg.clone(), &[a, b]);
        let mut l = ex.add_process(a)?;
        let mut r = ex.add_process(b)?;
        for step in &self.steps {
            let nl = ex.intern(step.left.clone())?;
            let nr = ex.intern(step.right.clone())?;
            let (att, def, natt, ndef) = match step.attacker {
                Side::Left => (l, r, nl, nr),
                Side::Right => (r, l, nr, nl),
            };
            let att_ok = ex
                .moves(att)?
                .iter()
                .any(|m| m.holds && m.target == natt && same_step(&m.action, &step.action));
            let responses = if step.action.is_external() {
                ex.weak_transition(def, &step.action)?
            } else {
                ex.tau_closure(def)?.to_vec()
            };
            if !att_ok || !responses.contains(&ndef) {
                return Ok(false);
            }
            l = nl;
            r = nr;
        }
        match &self.fact {
            Fact::DomainMismatch { .. } => Ok(ex.state(l).domain() != ex.state(r).domain()),
            Fact::StaticInequivalence { recipes, equal_on } => {
                let el = ex.eval(l, &recipes.0)? == ex.eval(l, &recipes.1)?;
                let er = ex.eval(r, &recipes.0)? == ex.eval(r, &recipes.1)?;
                Ok(el != er && (el == (*equal_on == Side::Left)))
            }
            Fact::UnmatchedAction { side, action } => {
                let (att, def) = if *side == Side::Left { (l, r) } else { (r, l) };
                Ok(!ex.moves_on(att, action)?.is_empty() && ex.weak_transition(def, action)?.is_empty())
            }
            Fact::BarbMismatch { name, present_on } => {
                let (bl, _) = ex.barbs(l)?;
                let (br, _) = ex.barbs(r)?;
                let (has, lacks) = if *present_on == Side::Left { (bl, br) } else { (br, bl) };
                Ok(has.contains(name) && !lacks.contains(name))
            }
            Fact::Refuted => Ok(naive_check(&mut ex, l, r)?.kind() == VerdictKind::Distinguished),
        }
    }
}

fn same_step(a: &Action, b: &Action) -> bool {
    a == b || (!a.is_external() && !b.is_external())
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            writeln!(f, "  {}. {} side: {}", i + 1, s.attacker, s.action)?;
            writeln!(f, "     left:  {}", s.left)?;
            writeln!(f, "     right: {}", s.right)?;
        }
        write!(f, "  {}", self.fact)
    }
}

impl Serialize for Evidence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Step {
            attacker: Side,
            action: String,
            left: String,
            right: String,
        }
        let steps: Vec<Step> = self
            .steps
            .iter()
            .map(|t| Step {
                attacker: t.attacker,
                action: t.action.to_string(),
                left: t.left.to_string(),
                right: t.right.to_string(),
            })
            .collect();
        let mut st = s.serialize_struct("Evidence", 3)?;
        st.serialize_field("steps", &steps)?;
        st.serialize_field("fact", &self.fact)?;
        st.serialize_field("summary", &self.fact.to_string())?;
        st.end()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    Equivalent,
    Distinguished,
    Inconclusive,
}

#[derive(Clone, Debug)]
pub enum EquivVerdict {
    /// A symmetric relation containing the queried pair.
    Equivalent { witness: Vec<(State, State)> },
    Distinguished { evidence: Evidence },
    Inconclusive { reason: String },
}

impl EquivVerdict {
    pub fn kind(&self) -> VerdictKind {
        match self {
            EquivVerdict::Equivalent { .. } => VerdictKind::Equivalent,
            EquivVerdict::Distinguished { .. } => VerdictKind::Distinguished,
            EquivVerdict::Inconclusive { .. } => VerdictKind::Inconclusive,
        }
    }

    pub fn is_equivalent(&self) -> bool {
        self.kind() == VerdictKind::Equivalent
    }

    pub fn is_distinguished(&self) -> bool {
        self.kind() == VerdictKind::Distinguished
    }

    pub fn evidence(&self) -> Option<&Evidence> {
        match self {
            EquivVerdict::Distinguished { evidence } => Some(evidence),
            _ => None,
        }
    }

    pub fn witness(&self) -> Option<&[(State, State)]> {
        match self {
            EquivVerdict::Equivalent { witness } => Some(witness),
            _ => None,
        }
    }
}

impl fmt::Display for EquivVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquivVerdict::Equivalent { witness } => write!(f, "equivalent (witness of {} pairs)", witness.len()),
            EquivVerdict::Distinguished { evidence } => write!(f, "distinguished\n{evidence}"),
            EquivVerdict::Inconclusive { reason } => write!(f, "inconclusive: {reason}"),
        }
    }
}

impl Serialize for EquivVerdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("EquivVerdict", 2)?;
        st.serialize_field("verdict", &self.kind())?;
        match self {
            EquivVerdict::Equivalent { witness } => st.serialize_field("witness_size", &witness.len())?,
            EquivVerdict::Distinguished { evidence } => st.serialize_field("evidence", evidence)?,
            EquivVerdict::Inconclusive { reason } => st.serialize_field("reason", reason)?,
        }
        st.end()
    }
}

fn domain_fact(ex: &Explorer, l: StateId, r: StateId) -> Option<Fact> {
    let (dl, dr) = (ex.state(l).domain(), ex.state(r).domain());
    (dl != dr).then(|| Fact::DomainMismatch {
        left: dl.into_iter().collect(),
        right: dr.into_iter().collect(),
    })
}

/// A recipe pair separating the frames of two states with equal domains.
pub fn static_difference(ex: &mut Explorer, l: StateId, r: StateId) -> Result<Option<Fact>> {
    let depth = ex.config().recipe_depth;
    let tl = ex.recipe_table(l, depth)?;
    let tr = ex.recipe_table(r, depth)?;
    debug_assert_eq!(tl.recipes, tr.recipes);
    for i in 0..tl.recipes.len() {
        let (a, b) = (tl.class_of(i), tr.class_of(i));
        if a < b {
            return Ok(Some(Fact::StaticInequivalence {
                recipes: (tl.recipes[a].clone(), tl.recipes[i].clone()),
                equal_on: Side::Left,
            }));
        }
        if b < a {
            return Ok(Some(Fact::StaticInequivalence {
                recipes: (tl.recipes[b].clone(), tl.recipes[i].clone()),
                equal_on: Side::Right,
            }));
        }
    }
    Ok(None)
}

fn require_same_domain(a: &ExtendedProcess, b: &ExtendedProcess) -> Result<()> {
    let (da, db) = (a.domain(), b.domain());
    if da != db {
        let show = |v: BTreeSet<Symbol>| v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ");
        return Err(Error::DomainMismatch {
            left: format!("{{{}}}", show(da)),
            right: format!("{{{}}}", show(db)),
        });
    }
    Ok(())
}

/// Static equivalence of the frames of `a` and `b` over all recipe pairs up
/// to the configured height.
pub fn static_equivalent(
    a: &ExtendedProcess,
    b: &ExtendedProcess,
    theory: &EquationalTheory,
    cfg: &ExplorationConfig,
) -> Result<EquivVerdict> {
    require_same_domain(a, b)?;
    let mut ex = Explorer::new(theory, cfg.clone(), &[a, b]);
    let l = ex.add_process(a)?;
    let r = ex.add_process(b)?;
    Ok(match static_difference(&mut ex, l, r)? {
        Some(fact) => EquivVerdict::Distinguished {
            evidence: Evidence { steps: Vec::new(), fact },
        },
        None => EquivVerdict::Equivalent {
            witness: symmetric(&ex, &[(l, r)]),
        },
    })
}

fn symmetric(ex: &Explorer, pairs: &[(StateId, StateId)]) -> Vec<(State, State)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &(l, r) in pairs {
        for (p, q) in [(l, r), (r, l)] {
            if seen.insert((p, q)) {
                out.push((ex.state(p).clone(), ex.state(q).clone()));
            }
        }
    }
    out
}

struct Obligation {
    attacker: Side,
    action: Action,
    candidates: Vec<usize>,
    alive: usize,
    /// The defender's exploration hit the replication bound, so a missing
    /// answer proves nothing.
    incomplete: bool,
}

enum Bad {
    Fact(Fact),
    Obligation(usize),
}

struct PairNode {
    l: StateId,
    r: StateId,
    bad: Option<(Bad, usize)>,
    obligations: Vec<Obligation>,
    dependents: Vec<(usize, usize)>,
}

/// On-the-fly weak bisimulation over the pair graph: refutations propagate
/// backwards from failing pairs to the pairs whose obligations relied on
/// them.
struct Checker<'e, 't> {
    ex: &'e mut Explorer<'t>,
    pairs: Vec<PairNode>,
    index: HashMap<(StateId, StateId), usize>,
    queue: VecDeque<usize>,
    clock: usize,
    unknown: bool,
}

impl<'e, 't> Checker<'e, 't> {
    fn new(ex: &'e mut Explorer<'t>) -> Self {
        Checker {
            ex,
            pairs: Vec::new(),
            index: HashMap::new(),
            queue: VecDeque::new(),
            clock: 0,
            unknown: false,
        }
    }

    fn pair(&mut self, l: StateId, r: StateId) -> usize {
        if let Some(&p) = self.index.get(&(l, r)) {
            return p;
        }
        let p = self.pairs.len();
        self.pairs.push(PairNode {
            l,
            r,
            bad: None,
            obligations: Vec::new(),
            dependents: Vec::new(),
        });
        self.index.insert((l, r), p);
        self.queue.push_back(p);
        p
    }

    fn mark_bad(&mut self, p: usize, why: Bad) {
        let mut stack = vec![(p, why)];
        while let Some((p, why)) = stack.pop() {
            if self.pairs[p].bad.is_some() {
                continue;
            }
            self.clock += 1;
            self.pairs[p].bad = Some((why, self.clock));
            for (q, o) in std::mem::take(&mut self.pairs[p].dependents) {
                if self.pairs[q].bad.is_some() {
                    continue;
                }
                let ob = &mut self.pairs[q].obligations[o];
                ob.alive -= 1;
                if ob.alive == 0 {
                    if ob.incomplete {
                        self.unknown = true;
                    } else {
                        stack.push((q, Bad::Obligation(o)));
                    }
                }
            }
        }
    }

    fn expand(&mut self, p: usize) -> Result<()> {
        let (l, r) = (self.pairs[p].l, self.pairs[p].r);
        if self.ex.exhausted(l) || self.ex.exhausted(r) {
            self.unknown = true;
            return Ok(());
        }
        if let Some(f) = domain_fact(self.ex, l, r) {
            self.mark_bad(p, Bad::Fact(f));
            return Ok(());
        }
        if let Some(f) = static_difference(self.ex, l, r)? {
            self.mark_bad(p, Bad::Fact(f));
            return Ok(());
        }
        for attacker in [Side::Left, Side::Right] {
            let (att, def) = if attacker == Side::Left { (l, r) } else { (r, l) };
            let incomplete = self.ex.tau_closure(def)?.iter().any(|&s| self.ex.exhausted(s));
            for m in self.ex.moves(att)?.iter().filter(|m| m.holds) {
                let answers: Vec<StateId> = if m.is_internal() {
                    self.ex.tau_closure(def)?.to_vec()
                } else {
                    self.ex.weak_transition(def, &m.action)?
                };
                if answers.is_empty() {
                    if incomplete {
                        self.unknown = true;
                        continue;
                    }
                    self.mark_bad(
                        p,
                        Bad::Fact(Fact::UnmatchedAction {
                            side: attacker,
                            action: m.action.clone(),
                        }),
                    );
                    return Ok(());
                }
                let o = self.pairs[p].obligations.len();
                let mut candidates = Vec::with_capacity(answers.len());
                let mut alive = 0;
                for t in answers {
                    let (cl, cr) = if attacker == Side::Left { (m.target, t) } else { (t, m.target) };
                    let q = self.pair(cl, cr);
                    candidates.push(q);
                    if self.pairs[q].bad.is_none() {
                        alive += 1;
                        self.pairs[q].dependents.push((p, o));
                    }
                }
                self.pairs[p].obligations.push(Obligation {
                    attacker,
                    action: m.action.clone(),
                    candidates,
                    alive,
                    incomplete,
                });
                if alive == 0 {
                    if incomplete {
                        self.unknown = true;
                    } else {
                        self.mark_bad(p, Bad::Obligation(o));
                        return Ok(());
                    }
                }
            }
        }
        Ok(())
    }

    fn run(&mut self, l: StateId, r: StateId) -> Result<EquivVerdict> {
        let root = self.pair(l, r);
        while let Some(p) = self.queue.pop_front() {
            if self.pairs[p].bad.is_some() {
                continue;
            }
            match self.expand(p) {
                Ok(()) => {}
                Err(Error::StateBudgetExceeded(n)) => {
                    return Ok(match self.pairs[root].bad {
                        Some(_) => self.distinguished(root),
                        None => EquivVerdict::Inconclusive {
                            reason: format!("state budget of {n} exhausted"),
                        },
                    })
                }
                Err(e) => return Err(e),
            }
            if self.pairs[root].bad.is_some() {
                return Ok(self.distinguished(root));
            }
        }
        if self.unknown {
            return Ok(EquivVerdict::Inconclusive {
                reason: format!(
                    "replication bound of {} reached before the check resolved",
                    self.ex.config().replication_bound
                ),
            });
        }
        let good: Vec<(StateId, StateId)> =
            self.pairs.iter().filter(|n| n.bad.is_none()).map(|n| (n.l, n.r)).collect();
        Ok(EquivVerdict::Equivalent {
            witness: symmetric(self.ex, &good),
        })
    }

    fn distinguished(&self, root: usize) -> EquivVerdict {
        let mut steps = Vec::new();
        let mut p = root;
        loop {
            let node = &self.pairs[p];
            match &node.bad {
                Some((Bad::Fact(f), _)) => {
                    return EquivVerdict::Distinguished {
                        evidence: Evidence { steps, fact: f.clone() },
                    }
                }
                Some((Bad::Obligation(o), _)) => {
                    let ob = &node.obligations[*o];
                    let next = *ob
                        .candidates
                        .iter()
                        .min_by_key(|&&q| self.pairs[q].bad.as_ref().map_or(usize::MAX, |b| b.1))
                        .expect("failed obligation has candidates");
                    steps.push(TraceStep {
                        attacker: ob.attacker,
                        action: ob.action.clone(),
                        left: self.ex.state(self.pairs[next].l).clone(),
                        right: self.ex.state(self.pairs[next].r).clone(),
                    });
                    p = next;
                }
                None => unreachable!("evidence walks bad pairs only"),
            }
        }
    }
}

/// Weak labelled bisimilarity of two closed processes with equal domains.
pub fn weak_labeled_bisim(
    a: &ExtendedProcess,
    b: &ExtendedProcess,
    theory: &EquationalTheory,
    cfg: &ExplorationConfig,
) -> Result<EquivVerdict> {
    require_same_domain(a, b)?;
    let mut ex = Explorer::new(theory, cfg.clone(), &[a, b]);
    let (l, r) = match (ex.add_process(a), ex.add_process(b)) {
        (Ok(l), Ok(r)) => (l, r),
        (Err(Error::StateBudgetExceeded(n)), _) | (_, Err(Error::StateBudgetExceeded(n))) => {
            return Ok(EquivVerdict::Inconclusive {
                reason: format!("state budget of {n} exhausted"),
            })
        }
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    bisim_states(&mut ex, l, r)
}

/// Weak labelled bisimilarity of two states of one explorer.
pub fn bisim_states(ex: &mut Explorer, l: StateId, r: StateId) -> Result<EquivVerdict> {
    Checker::new(ex).run(l, r)
}

/// Re-checks the three bisimulation conditions pointwise on a witness.
pub fn verify_witness(
    witness: &[(State, State)],
    theory: &EquationalTheory,
    cfg: &ExplorationConfig,
    roots: &[&ExtendedProcess],
) -> Result<bool> {
    let mut ex = Explorer::new(theory, cfg.clone(), roots);
    let mut rel = HashSet::new();
    for (p, q) in witness {
        let (p, q) = (ex.intern(p.clone())?, ex.intern(q.clone())?);
        rel.insert((p, q));
    }
    if rel.iter().any(|&(p, q)| !rel.contains(&(q, p))) {
        return Ok(false);
    }
    let pairs: Vec<_> = rel.iter().copied().collect();
    for (p, q) in pairs {
        if domain_fact(&ex, p, q).is_some() || static_difference(&mut ex, p, q)?.is_some() {
            return Ok(false);
        }
        for m in ex.moves(p)?.iter().filter(|m| m.holds) {
            let answers = if m.is_internal() {
                ex.tau_closure(q)?.to_vec()
            } else {
                ex.weak_transition(q, &m.action)?
            };
            if !answers.iter().any(|&t| rel.contains(&(m.target, t))) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Compares the barbs of `a` and `b`.
pub fn barb_equivalent(
    a: &ExtendedProcess,
    b: &ExtendedProcess,
    theory: &EquationalTheory,
    cfg: &ExplorationConfig,
) -> Result<EquivVerdict> {
    let mut ex = Explorer::new(theory, cfg.clone(), &[a, b]);
    let run = |ex: &mut Explorer| -> Result<EquivVerdict> {
        let l = ex.add_process(a)?;
        let r = ex.add_process(b)?;
        barbs_states(ex, l, r)
    };
    match run(&mut ex) {
        Err(Error::StateBudgetExceeded(n)) => Ok(EquivVerdict::Inconclusive {
            reason: format!("state budget of {n} exhausted"),
        }),
        other => other,
    }
}

fn barbs_states(ex: &mut Explorer, l: StateId, r: StateId) -> Result<EquivVerdict> {
    let (bl, cl) = ex.barbs(l)?;
    let (br, cr) = ex.barbs(r)?;
    for (has, lacks, lacks_complete, side) in [(&bl, &br, cr, Side::Left), (&br, &bl, cl, Side::Right)] {
        if let Some(n) = has.difference(lacks).next() {
            if lacks_complete {
                return Ok(EquivVerdict::Distinguished {
                    evidence: Evidence {
                        steps: Vec::new(),
                        fact: Fact::BarbMismatch {
                            name: n.clone(),
                            present_on: side,
                        },
                    },
                });
            }
        }
    }
    if bl != br || !cl || !cr {
        return Ok(EquivVerdict::Inconclusive {
            reason: "replication bound reached while collecting barbs".into(),
        });
    }
    Ok(EquivVerdict::Equivalent {
        witness: symmetric(ex, &[(l, r)]),
    })
}

/// The three probe shapes; `a` is the fresh observation channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProbeSpec {
    /// `if e = e2 then out(a, 0).0`
    Test { left: Term, right: Term, a: Symbol },
    /// `out(c, e).in(a, x).0 | out(a, 0).0`
    Input { channel: Term, message: Term, a: Symbol },
    /// `in(c, x).if x = e then in(a, y).0 | out(a, 0).0`
    Output { channel: Term, message: Term, a: Symbol },
}

impl ProbeSpec {
    pub fn observer(&self) -> &Symbol {
        match self {
            ProbeSpec::Test { a, .. } | ProbeSpec::Input { a, .. } | ProbeSpec::Output { a, .. } => a,
        }
    }

    /// The context process placed in parallel with the target.
    pub fn context(&self) -> ExtendedProcess {
        let zero = Term::constant("0");
        let a = Term::Atom(self.observer().clone());
        let signal = PlainProcess::output(a.clone(), zero.clone(), PlainProcess::Nil);
        let p = match self {
            ProbeSpec::Test { left, right, .. } => {
                PlainProcess::if_then_else(left.clone(), right.clone(), signal, PlainProcess::Nil)
            }
            ProbeSpec::Input { channel, message, .. } => PlainProcess::par(
                PlainProcess::output(
                    channel.clone(),
                    message.clone(),
                    PlainProcess::input(a.clone(), Symbol::var("x"), PlainProcess::Nil),
                ),
                signal,
            ),
            ProbeSpec::Output { channel, message, .. } => {
                let mut used = BTreeSet::new();
                channel.atoms(&mut used);
                message.atoms(&mut used);
                let x = FreshGen::global().fresh(&Symbol::var("x"), |s| used.contains(s));
                let y = Symbol::var("y");
                PlainProcess::par(
                    PlainProcess::input(
                        channel.clone(),
                        x.clone(),
                        PlainProcess::if_then_else(
                            Term::Atom(x),
                            message.clone(),
                            PlainProcess::input(a, y, PlainProcess::Nil),
                            PlainProcess::Nil,
                        ),
                    ),
                    signal,
                )
            }
        };
        ExtendedProcess::Plain(p)
    }
}

/// `target | C` for the probe's context `C`.
pub fn build_probe(p: &ProbeSpec, target: &ExtendedProcess) -> Result<ExtendedProcess> {
    if target.symbols().contains(p.observer()) {
        return Err(Error::NotFresh(p.observer().clone()));
    }
    Ok(ExtendedProcess::Par(Box::new(target.clone()), Box::new(p.context())))
}

/// A name occurring in none of `procs`.
pub fn fresh_observer(procs: &[&ExtendedProcess]) -> Symbol {
    let used: BTreeSet<Symbol> = procs.iter().flat_map(|p| p.symbols()).collect();
    let base = Symbol::name("obs");
    if used.contains(&base) {
        FreshGen::global().fresh(&base, |s| used.contains(s))
    } else {
        base
    }
}

/// Probe instances over the atoms and height-`depth` recipes of the common
/// domain: tests on every recipe pair, inputs and outputs on every public
/// channel name.
pub fn probe_family(
    a: &ExtendedProcess,
    b: &ExtendedProcess,
    theory: &EquationalTheory,
    cfg: &ExplorationConfig,
    depth: u32,
) -> Vec<ProbeSpec> {
    let obs = fresh_observer(&[a, b]);
    let ex = Explorer::new(theory, cfg.clone(), &[a, b]);
    let mut atoms: Vec<Symbol> = a.domain().into_iter().collect();
    atoms.extend(ex.public_atoms().iter().cloned());
    let recipes = enumerate_recipes(&atoms, theory, depth);
    let channels: Vec<Term> = ex
        .public_atoms()
        .iter()
        .filter(|s| s.is_name())
        .map(|s| Term::Atom(s.clone()))
        .collect();
    let mut out = Vec::new();
    for (i, l) in recipes.iter().enumerate() {
        for r in &recipes[i + 1..] {
            out.push(ProbeSpec::Test {
                left: l.clone(),
                right: r.clone(),
                a: obs.clone(),
            });
        }
    }
    for c in &channels {
        for e in &recipes {
            out.push(ProbeSpec::Input {
                channel: c.clone(),
                message: e.clone(),
                a: obs.clone(),
            });
            out.push(ProbeSpec::Output {
                channel: c.clone(),
                message: e.clone(),
                a: obs.clone(),
            });
        }
    }
    out
}

/// `nu u~.(A | C)`.
pub fn compose(names: &[Symbol], a: &ExtendedProcess, c: &ExtendedProcess) -> ExtendedProcess {
    names.iter().rev().fold(
        ExtendedProcess::Par(Box::new(a.clone()), Box::new(c.clone())),
        |acc, u| ExtendedProcess::Res(u.clone(), Box::new(acc)),
    )
}

/// Checks `nu u~.(A | C)` against `nu u~.(B | C)` for every supplied
/// context. The first distinguished instance is returned; otherwise any
/// inconclusive instance makes the whole check inconclusive.
pub fn context_closure_check(
    a: &ExtendedProcess,
    b: &ExtendedProcess,
    contexts: &[(Vec<Symbol>, ExtendedProcess)],
    theory: &EquationalTheory,
    cfg: &ExplorationConfig,
) -> Result<EquivVerdict> {
    let mut witness = Vec::new();
    let mut inconclusive = None;
    for (i, (us, c)) in contexts.iter().enumerate() {
        let ca = compose(us, a, c);
        let cb = compose(us, b, c);
        for p in [&ca, &cb] {
            if let Err(v) = crate::process::check_correct(p) {
                return Err(Error::PreconditionViolated(format!(
                    "context {} does not compose: {}",
                    i + 1,
                    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
                )));
            }
            if !p.is_closed() {
                return Err(Error::PreconditionViolated(format!("context {} leaves {p} open", i + 1)));
            }
        }
        if ca.domain() != cb.domain() {
            return Err(Error::PreconditionViolated(format!(
                "context {} yields different domains",
                i + 1
            )));
        }
        match weak_labeled_bisim(&ca, &cb, theory, cfg)? {
            v @ EquivVerdict::Distinguished { .. } => return Ok(v),
            EquivVerdict::Inconclusive { reason } => {
                inconclusive.get_or_insert(format!("context {}: {reason}", i + 1));
            }
            EquivVerdict::Equivalent { witness: w } => witness.extend(w),
        }
    }
    Ok(match inconclusive {
        Some(reason) => EquivVerdict::Inconclusive { reason },
        None => EquivVerdict::Equivalent { witness },
    })
}

/// Greatest-fixpoint bisimilarity over two fully materialized transition
/// systems, starting from all domain-compatible statically equivalent pairs
/// and deleting pairs that violate a transfer condition until stable.
pub fn naive_bisim_oracle(
    lts_a: &Lts,
    lts_b: &Lts,
    theory: &EquationalTheory,
    cfg: &ExplorationConfig,
    public_atoms: &[Symbol],
) -> Result<EquivVerdict> {
    Oracle::new(lts_a, lts_b, theory, cfg, public_atoms).run()
}

fn naive_check(ex: &mut Explorer, l: StateId, r: StateId) -> Result<EquivVerdict> {
    let la = ex.materialize(l)?;
    let lb = ex.materialize(r)?;
    let public = ex.public_atoms().to_vec();
    let (th, cfg) = (ex.theory(), ex.config().clone());
    naive_bisim_oracle(&la, &lb, th, &cfg, &public)
}

/// Materializes both processes and runs [`naive_bisim_oracle`].
pub fn oracle_bisim(
    a: &ExtendedProcess,
    b: &ExtendedProcess,
    theory: &EquationalTheory,
    cfg: &ExplorationConfig,
) -> Result<EquivVerdict> {
    require_same_domain(a, b)?;
    let mut ex = Explorer::new(theory, cfg.clone(), &[a, b]);
    let run = |ex: &mut Explorer| -> Result<EquivVerdict> {
        let l = ex.add_process(a)?;
        let r = ex.add_process(b)?;
        naive_check(ex, l, r)
    };
    match run(&mut ex) {
        Err(Error::StateBudgetExceeded(n)) => Ok(EquivVerdict::Inconclusive {
            reason: format!("state budget of {n} exhausted"),
        }),
        other => other,
    }
}

struct OracleSide<'a> {
    lts: &'a Lts,
    tau: Vec<Vec<usize>>,
}

impl<'a> OracleSide<'a> {
    fn new(lts: &'a Lts) -> Self {
        let n = lts.states.len();
        let mut succ = vec![Vec::new(); n];
        for e in &lts.edges {
            if !e.action.is_external() {
                succ[e.source].push(e.target);
            }
        }
        let tau = (0..n)
            .map(|s| {
                let mut seen = vec![false; n];
                let mut stack = vec![s];
                let mut out = Vec::new();
                seen[s] = true;
                while let Some(u) = stack.pop() {
                    out.push(u);
                    for &v in &succ[u] {
                        if !seen[v] {
                            seen[v] = true;
                            stack.push(v);
                        }
                    }
                }
                out
            })
            .collect();
        OracleSide { lts, tau }
    }
}

struct Oracle<'a> {
    a: OracleSide<'a>,
    b: OracleSide<'a>,
    theory: &'a EquationalTheory,
    alias: bool,
    depth: u32,
    public: Vec<Symbol>,
}

impl<'a> Oracle<'a> {
    fn new(
        la: &'a Lts,
        lb: &'a Lts,
        theory: &'a EquationalTheory,
        cfg: &ExplorationConfig,
        public: &[Symbol],
    ) -> Self {
        Oracle {
            a: OracleSide::new(la),
            b: OracleSide::new(lb),
            theory,
            alias: cfg.output_label_mode == OutputLabelMode::Alias,
            depth: cfg.recipe_depth,
            public: public.to_vec(),
        }
    }

    fn eval(&self, s: &State, t: &Term) -> Result<Term> {
        self.theory.normalize(&s.apply_frame(t))
    }

    /// Pairwise comparison of every recipe pair.
    fn statically_equivalent(&self, p: &State, q: &State) -> Result<bool> {
        let mut atoms: Vec<Symbol> = p.domain().into_iter().collect();
        atoms.extend(self.public.iter().cloned());
        let recipes = enumerate_recipes(&atoms, self.theory, self.depth);
        let vp: Vec<Term> = recipes.iter().map(|r| self.eval(p, r)).collect::<Result<_>>()?;
        let vq: Vec<Term> = recipes.iter().map(|r| self.eval(q, r)).collect::<Result<_>>()?;
        for i in 0..recipes.len() {
            for j in i + 1..recipes.len() {
                if (vp[i] == vp[j]) != (vq[i] == vq[j]) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Weak answers of `side` from `t` to an external label.
    fn answers(&self, side: &OracleSide, t: usize, action: &Action) -> Result<Option<BTreeSet<usize>>> {
        let mut out = BTreeSet::new();
        let mut incomplete = false;
        for &u in &side.tau[t] {
            incomplete |= side.lts.exhausted[u];
            let st = &side.lts.states[u];
            let (cl, ml) = action.terms();
            let cv = self.eval(st, cl)?;
            let mv = match action {
                Action::Output { .. } if self.alias => None,
                _ => Some(self.eval(st, ml)?),
            };
            for e in side.lts.successors(u) {
                if std::mem::discriminant(&e.action) != std::mem::discriminant(action) {
                    continue;
                }
                let Some((c, m)) = &e.values else { continue };
                if *c == cv && mv.as_ref().is_none_or(|v| v == m) {
                    out.extend(side.tau[e.target].iter().copied());
                }
            }
        }
        Ok(if incomplete { None } else { Some(out) })
    }

    fn run(&self) -> Result<EquivVerdict> {
        let (na, nb) = (self.a.lts.states.len(), self.b.lts.states.len());
        let mut rel: BTreeMap<(usize, usize), bool> = BTreeMap::new();
        let mut static_cache = HashMap::new();
        for p in 0..na {
            for q in 0..nb {
                let (sp, sq) = (&self.a.lts.states[p], &self.b.lts.states[q]);
                let frozen = self.a.lts.exhausted[p] || self.b.lts.exhausted[q];
                if frozen {
                    rel.insert((p, q), true);
                    continue;
                }
                if sp.domain() != sq.domain() {
                    continue;
                }
                let key = (sp.frame().to_vec(), sq.frame().to_vec());
                let ok = match static_cache.get(&key) {
                    Some(&ok) => ok,
                    None => {
                        let ok = self.statically_equivalent(sp, sq)?;
                        static_cache.insert(key, ok);
                        ok
                    }
                };
                if ok {
                    rel.insert((p, q), false);
                }
            }
        }
        // precomputed answer sets: (pair, attacker side, edge index) -> targets
        let mut answer_cache: HashMap<(usize, usize, bool, usize), Option<BTreeSet<usize>>> = HashMap::new();
        loop {
            let mut removed = Vec::new();
            for (&(p, q), &frozen) in &rel {
                if frozen {
                    continue;
                }
                if !self.transfer(p, q, &rel, &mut answer_cache)? {
                    removed.push((p, q));
                }
            }
            if removed.is_empty() {
                break;
            }
            for k in removed {
                rel.remove(&k);
            }
        }
        if !rel.contains_key(&(0, 0)) {
            return Ok(EquivVerdict::Distinguished {
                evidence: Evidence {
                    steps: Vec::new(),
                    fact: Fact::Refuted,
                },
            });
        }
        if self.a.lts.exhausted.iter().chain(&self.b.lts.exhausted).any(|&e| e) {
            return Ok(EquivVerdict::Inconclusive {
                reason: "replication bound reached in a materialized system".into(),
            });
        }
        let witness = rel
            .keys()
            .flat_map(|&(p, q)| {
                let (sp, sq) = (self.a.lts.states[p].clone(), self.b.lts.states[q].clone());
                [(sp.clone(), sq.clone()), (sq, sp)]
            })
            .collect();
        Ok(EquivVerdict::Equivalent { witness })
    }

    fn transfer(
        &self,
        p: usize,
        q: usize,
        rel: &BTreeMap<(usize, usize), bool>,
        cache: &mut HashMap<(usize, usize, bool, usize), Option<BTreeSet<usize>>>,
    ) -> Result<bool> {
        for left_attacks in [true, false] {
            let (att, def, s, t) = if left_attacks {
                (&self.a, &self.b, p, q)
            } else {
                (&self.b, &self.a, q, p)
            };
            for (k, e) in att.lts.edges.iter().enumerate().filter(|(_, e)| e.source == s) {
                let key = (s, t, left_attacks, k);
                let answers = match cache.get(&key) {
                    Some(a) => a.clone(),
                    None => {
                        let a = if e.action.is_external() {
                            self.answers(def, t, &e.action)?
                        } else if def.tau[t].iter().any(|&u| def.lts.exhausted[u]) {
                            None
                        } else {
                            Some(def.tau[t].iter().copied().collect())
                        };
                        cache.insert(key, a.clone());
                        a
                    }
                };
                let Some(answers) = answers else { continue };
                let matched = answers.iter().any(|&u| {
                    let pair = if left_attacks { (e.target, u) } else { (u, e.target) };
                    rel.contains_key(&pair)
                });
                if !matched {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}
