//! Built-in demonstrations of the probe constructions and the normal-form
//! invariants, run by the `selftest` command.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::equiv::{build_probe, ProbeSpec};
use crate::error::Result;
use crate::gen::{random_closed_ep, GenConfig};
use crate::lts::{ExplorationConfig, Explorer};
use crate::normal::normalize_process;
use crate::process::{ExtendedProcess, PlainProcess};
use crate::rewrite::EquationalTheory;
use crate::term::{Symbol, Term};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Barb `a` of `p`, and whether some internal evolution of `p` has lost it
/// for good.
pub fn observe(p: &ExtendedProcess, a: &Symbol, th: &EquationalTheory, cfg: &ExplorationConfig) -> Result<(bool, bool)> {
    let mut ex = Explorer::new(th, cfg.clone(), &[p]);
    let root = ex.add_process(p)?;
    let (now, _) = ex.barbs(root)?;
    let mut lost = false;
    for s in ex.tau_closure(root)?.to_vec() {
        let (b, complete) = ex.barbs(s)?;
        lost |= complete && !b.contains(a);
    }
    Ok((now.contains(a), lost))
}

fn probe_checks(cfg: &ExplorationConfig) -> Result<Vec<Check>> {
    let th = EquationalTheory::pair_projection();
    let a = Symbol::name("a");
    let c = Term::name("c");
    let (zero, one) = (Term::constant("0"), Term::constant("1"));
    let x = Symbol::var("x");
    let mut out = Vec::new();

    let test = ProbeSpec::Test {
        left: Term::Atom(x.clone()),
        right: zero.clone(),
        a: a.clone(),
    };
    let (l, _) = observe(&build_probe(&test, &ExtendedProcess::subst(x.clone(), zero.clone()))?, &a, &th, cfg)?;
    let (r, _) = observe(&build_probe(&test, &ExtendedProcess::subst(x.clone(), one.clone()))?, &a, &th, cfg)?;
    out.push(Check::new(
        "test probe: {0/x} vs {1/x} under if x = 0 then out(a, 0)",
        l && !r,
        format!("barb a: left {l}, right {r}"),
    ));

    let input = ProbeSpec::Input {
        channel: c.clone(),
        message: zero.clone(),
        a: a.clone(),
    };
    let receiver = ExtendedProcess::Plain(PlainProcess::input(c.clone(), Symbol::var("y"), PlainProcess::Nil));
    let (_, l) = observe(&build_probe(&input, &receiver)?, &a, &th, cfg)?;
    let (_, r) = observe(&build_probe(&input, &ExtendedProcess::nil())?, &a, &th, cfg)?;
    out.push(Check::new(
        "input probe: in(c, y).0 vs 0",
        l && !r,
        format!("barb a can be lost: left {l}, right {r}"),
    ));

    let output = ProbeSpec::Output {
        channel: c.clone(),
        message: zero.clone(),
        a: a.clone(),
    };
    let send = |e: &Term| ExtendedProcess::Plain(PlainProcess::output(c.clone(), e.clone(), PlainProcess::Nil));
    let (_, l) = observe(&build_probe(&output, &send(&zero))?, &a, &th, cfg)?;
    let (_, r) = observe(&build_probe(&output, &send(&one))?, &a, &th, cfg)?;
    out.push(Check::new(
        "output probe: out(c, 0).0 vs out(c, 1).0",
        l && !r,
        format!("barb a can be lost: left {l}, right {r}"),
    ));
    Ok(out)
}

/// The shape guarantees of a normal form: a closed body, a closed frame,
/// restricted names that all occur in the frame, and the original domain.
pub fn normal_form_violation(a: &ExtendedProcess, th: &EquationalTheory) -> Result<Option<String>> {
    let nf = normalize_process(a, th)?;
    if !nf.body.free_vars().is_empty() {
        return Ok(Some(format!("body of {nf} has free variables")));
    }
    if nf.frame.bindings().iter().any(|(_, e)| !e.variables().is_empty()) {
        return Ok(Some(format!("frame of {nf} mentions variables")));
    }
    let frame_names: BTreeSet<Symbol> = nf.frame.bindings().iter().flat_map(|(_, e)| e.names()).collect();
    if nf.names.iter().any(|n| !frame_names.contains(n)) {
        return Ok(Some(format!("{nf} restricts a name outside its frame")));
    }
    if nf.frame.domain() != a.domain() {
        return Ok(Some(format!("{nf} changes the domain of {a}")));
    }
    Ok(None)
}

pub fn run_selftest(seed: u64, cfg: &ExplorationConfig) -> Vec<Check> {
    let mut checks = match probe_checks(cfg) {
        Ok(c) => c,
        Err(e) => vec![Check::new("probe demonstrations", false, e.to_string())],
    };
    let th = EquationalTheory::symmetric_encryption();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 200;
    let mut failures = Vec::new();
    for _ in 0..n {
        let a = random_closed_ep(&mut rng, th.signature(), &GenConfig::default());
        match normal_form_violation(&a, &th) {
            Ok(None) => {}
            Ok(Some(v)) => failures.push(v),
            Err(e) => failures.push(format!("{a}: {e}")),
        }
    }
    checks.push(Check::new(
        &format!("normal-form invariants on {n} random processes (seed {seed})"),
        failures.is_empty(),
        failures.first().cloned().unwrap_or_else(|| "all hold".into()),
    ));
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in run_selftest(1, &ExplorationConfig::default()) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
