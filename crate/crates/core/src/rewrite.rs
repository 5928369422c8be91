//! The equational theory, presented as a convergent rewrite system. Every
//! term comparison in the engine goes through [`EquationalTheory::equal`].
//!
//! Termination and confluence of user rules are assumed, not checked; a step
//! budget turns a looping theory into an error instead of a hang. Matching
//! is purely syntactic (no AC).

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::term::{Signature, Symbol, Term};

pub const DEFAULT_STEP_BUDGET: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteRule {
    lhs: Term,
    rhs: Term,
}

impl RewriteRule {
    /// Variables in either side are pattern variables.
    pub fn new(lhs: Term, rhs: Term) -> Result<Self> {
        if lhs.as_atom().is_some_and(Symbol::is_var) {
            return Err(Error::InvalidRule(format!("left-hand side {lhs} is a variable")));
        }
        if !rhs.variables().is_subset(&lhs.variables()) {
            return Err(Error::InvalidRule(format!(
                "{rhs} mentions variables not bound by {lhs}"
            )));
        }
        Ok(RewriteRule { lhs, rhs })
    }

    pub fn lhs(&self) -> &Term {
        &self.lhs
    }

    pub fn rhs(&self) -> &Term {
        &self.rhs
    }

    fn apply_at_root(&self, t: &Term) -> Option<Term> {
        let mut env = BTreeMap::new();
        if matches(&self.lhs, t, &mut env) {
            Some(self.rhs.map_atoms(&mut |s| {
                env.get(s).cloned().unwrap_or_else(|| Term::Atom(s.clone()))
            }))
        } else {
            None
        }
    }
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.lhs, self.rhs)
    }
}

fn matches(pattern: &Term, t: &Term, env: &mut BTreeMap<Symbol, Term>) -> bool {
    match (pattern, t) {
        (Term::Atom(p), _) if p.is_var() => match env.get(p) {
            Some(bound) => bound == t,
            None => {
                env.insert(p.clone(), t.clone());
                true
            }
        },
        (Term::Atom(p), Term::Atom(s)) => p == s,
        (Term::App(f, ps), Term::App(g, ts)) => {
            f == g && ps.len() == ts.len() && ps.iter().zip(ts).all(|(p, t)| matches(p, t, env))
        }
        _ => false,
    }
}

#[derive(Clone, Debug)]
pub struct EquationalTheory {
    signature: Signature,
    rules: Vec<RewriteRule>,
    step_budget: usize,
}

impl EquationalTheory {
    pub fn new(signature: Signature, rules: Vec<RewriteRule>) -> Result<Self> {
        for r in &rules {
            r.lhs.check(&signature)?;
            r.rhs.check(&signature)?;
        }
        Ok(EquationalTheory {
            signature,
            rules,
            step_budget: DEFAULT_STEP_BUDGET,
        })
    }

    pub fn empty(signature: Signature) -> Self {
        EquationalTheory {
            signature,
            rules: Vec::new(),
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }

    pub fn with_step_budget(mut self, budget: usize) -> Self {
        self.step_budget = budget;
        self
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }

    /// `fst(pair(x, y)) -> x`, `snd(pair(x, y)) -> y`.
    pub fn pair_projection() -> Self {
        let sig = Signature::new().with("fst", 1).with("snd", 1);
        let (x, y) = (Term::var("x"), Term::var("y"));
        let rules = vec![
            RewriteRule::new(Term::app("fst", vec![Term::pair(x.clone(), y.clone())]), x.clone()).unwrap(),
            RewriteRule::new(Term::app("snd", vec![Term::pair(x, y.clone())]), y).unwrap(),
        ];
        Self::new(sig, rules).unwrap()
    }

    /// Projections plus `dec(enc(x, y), y) -> x`.
    pub fn symmetric_encryption() -> Self {
        let base = Self::pair_projection();
        let sig = base.signature.clone().with("enc", 2).with("dec", 2);
        let (x, y) = (Term::var("x"), Term::var("y"));
        let mut rules = base.rules;
        rules.push(
            RewriteRule::new(
                Term::app("dec", vec![Term::app("enc", vec![x.clone(), y.clone()]), y]),
                x,
            )
            .unwrap(),
        );
        Self::new(sig, rules).unwrap()
    }

    /// Innermost, leftmost rewriting to a normal form; at each redex the
    /// first matching rule in declaration order wins.
    pub fn normalize(&self, t: &Term) -> Result<Term> {
        if self.rules.is_empty() {
            return Ok(t.clone());
        }
        let mut steps = 0;
        self.normalize_counted(t, &mut steps)
    }

    fn normalize_counted(&self, t: &Term, steps: &mut usize) -> Result<Term> {
        let t = match t {
            Term::Atom(_) => t.clone(),
            Term::App(f, args) => Term::App(
                f.clone(),
                args.iter()
                    .map(|a| self.normalize_counted(a, steps))
                    .collect::<Result<_>>()?,
            ),
        };
        for rule in &self.rules {
            if let Some(next) = rule.apply_at_root(&t) {
                *steps += 1;
                if *steps > self.step_budget {
                    return Err(Error::StepBudgetExceeded(self.step_budget));
                }
                return self.normalize_counted(&next, steps);
            }
        }
        Ok(t)
    }

    /// `⊢ a = b`.
    pub fn equal(&self, a: &Term, b: &Term) -> Result<bool> {
        if a == b {
            return Ok(true);
        }
        Ok(self.normalize(a)? == self.normalize(b)?)
    }
}

pub fn normalize_term(e: &Term, theory: &EquationalTheory) -> Result<Term> {
    theory.normalize(e)
}

pub fn terms_equal(e: &Term, e2: &Term, theory: &EquationalTheory) -> Result<bool> {
    theory.equal(e, e2)
}
