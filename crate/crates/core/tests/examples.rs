//! Worked examples for every layer, with expected values recomputed by small
//! independent helpers where they are not immediate.

use std::collections::BTreeSet;

use appi::equiv::{
    barb_equivalent, build_probe, context_closure_check, naive_bisim_oracle, static_equivalent, weak_labeled_bisim,
    ProbeSpec,
};
use appi::lts::{
    barbs, enumerate_transitions, internal_step, tau_closure, weak_transition, Action, ExplorationConfig, Explorer,
    InputRecipes, Lts, LtsEdge,
};
use appi::normal::{frame_of, normalize_process, struct_equiv};
use appi::process::{
    alpha_rename, apply_active, check_correct, freshen_binders, plug, Context, ExtendedProcess, Step, ViolationKind,
};
use appi::rewrite::{terms_equal, EquationalTheory};
use appi::syntax::{parse_process, parse_term, Declarations};
use appi::term::{apply_substitution, check_acyclic, in_tm, variables_of, Kind, Signature, Symbol, Term};
use appi::Error;

fn signature() -> Signature {
    Signature::new()
        .with("pair", 2)
        .with("fst", 1)
        .with("snd", 1)
        .with("f", 1)
        .with("g", 2)
        .with("h", 1)
        .with("enc", 2)
        .with("dec", 2)
}

fn decls() -> Declarations {
    let mut d = Declarations::prelude().with_signature(signature());
    for n in ["a", "b", "c", "d", "k", "m", "n", "obs"] {
        d.declare(&Symbol::name(n));
    }
    d.declare(&Symbol::constant("1"));
    for v in ["x", "y", "z"] {
        d.declare(&Symbol::var(v));
    }
    d
}

fn p(src: &str) -> ExtendedProcess {
    parse_process(src, &decls()).unwrap_or_else(|e| panic!("{src}: {e}"))
}

fn t(src: &str) -> Term {
    parse_term(src, &decls()).unwrap_or_else(|e| panic!("{src}: {e}"))
}

fn th() -> EquationalTheory {
    EquationalTheory::pair_projection()
}

fn empty() -> EquationalTheory {
    EquationalTheory::empty(signature())
}

fn cfg() -> ExplorationConfig {
    ExplorationConfig::default()
}

fn syms(kind: Kind, idents: &[&str]) -> BTreeSet<Symbol> {
    idents.iter().map(|i| Symbol::new(kind, i, 0)).collect()
}

fn var(i: &str) -> Symbol {
    Symbol::var(i)
}

fn x1() -> Symbol {
    Symbol::new(Kind::Variable, "x", 1)
}

/// Variables of a term by direct recursion.
fn vars_oracle(e: &Term, out: &mut BTreeSet<Symbol>) {
    match e {
        Term::Atom(s) if s.is_var() => {
            out.insert(s.clone());
        }
        Term::Atom(_) => {}
        Term::App(_, args) => args.iter().for_each(|a| vars_oracle(a, out)),
    }
}

/// Whether a binding order satisfies the acyclicity condition: no bound
/// variable occurs in its own or any later term.
fn ordered_ok(bindings: &[(Symbol, Term)]) -> bool {
    bindings.iter().enumerate().all(|(j, (x, _))| {
        bindings[j..].iter().all(|(_, e)| {
            let mut v = BTreeSet::new();
            vars_oracle(e, &mut v);
            !v.contains(x)
        })
    })
}

// terms

#[test]
fn variables_of_terms() {
    assert_eq!(variables_of(&t("(x, n)")), syms(Kind::Variable, &["x"]));
    assert!(variables_of(&t("0")).is_empty());
    let e = t("f(g(x, g(y, x)))");
    let mut expected = BTreeSet::new();
    vars_oracle(&e, &mut expected);
    assert_eq!(variables_of(&e), expected);
    assert_eq!(expected, syms(Kind::Variable, &["x", "y"]));
}

#[test]
fn membership_in_term_sets() {
    assert!(in_tm(&t("f(x)"), &syms(Kind::Variable, &["x", "y"])));
    assert!(!in_tm(&t("f(x)"), &BTreeSet::new()));
    assert!(in_tm(&t("(n, 0)"), &BTreeSet::new()));
}

#[test]
fn acyclic_ordering() {
    let fx = (var("x"), t("f(y)"));
    let yc = (var("y"), t("c"));
    let theta = check_acyclic(vec![yc.clone(), fx.clone()]).unwrap();
    assert_eq!(theta.bindings(), &[fx.clone(), yc.clone()]);
    assert!(ordered_ok(&[fx.clone(), yc.clone()]));
    assert!(!ordered_ok(&[yc.clone(), fx.clone()]));

    assert_eq!(check_acyclic(vec![yc.clone()]).unwrap().bindings(), &[yc]);
    let cyclic = check_acyclic(vec![fx, (var("y"), t("g(x, x)"))]);
    assert!(matches!(cyclic, Err(Error::CyclicSubstitution(_))), "{cyclic:?}");
}

#[test]
fn sequential_application() {
    let theta = check_acyclic(vec![(var("x"), t("f(y)")), (var("y"), t("c"))]).unwrap();
    let by_hand = theta
        .bindings()
        .iter()
        .fold(t("x"), |acc, (v, e)| acc.substitute(v, e));
    assert_eq!(apply_substitution(&t("x"), &theta), by_hand);
    assert_eq!(by_hand, t("f(c)"));
    assert_eq!(apply_substitution(&t("n"), &theta), t("n"));
    let xc = check_acyclic(vec![(var("x"), t("c"))]).unwrap();
    assert_eq!(apply_substitution(&t("(x, x)"), &xc), t("(c, c)"));
}

// rewriting

#[test]
fn rewriting_examples() {
    assert_eq!(th().normalize(&t("fst((a, b))")).unwrap(), t("a"));
    let any = t("f(g(x, fst((a, b))))");
    assert_eq!(empty().normalize(&any).unwrap(), any);
    let enc = EquationalTheory::symmetric_encryption();
    assert_eq!(enc.normalize(&t("dec(enc(m, k), k)")).unwrap(), t("m"));
    assert!(terms_equal(&t("fst((a, b))"), &t("a"), &th()).unwrap());
    assert!(terms_equal(&any, &any, &th()).unwrap());
    assert!(!terms_equal(&t("0"), &t("1"), &th()).unwrap());
}

// processes

#[test]
fn free_symbols() {
    assert_eq!(p("{f(y)/x}").free_vars(), syms(Kind::Variable, &["x", "y"]));
    assert!(p("nu x.({c/x} | 0)").free_vars().is_empty());
    assert!(p("new n.out(n, 1).0").free_names().is_empty());
    assert_eq!(p("out(n, 1).0").free_names(), syms(Kind::Name, &["n"]));
    let a = p("{f(y)/x} | {0/y}");
    assert!(a.domain().is_subset(&a.free_vars()));
}

#[test]
fn domains_and_closedness() {
    assert_eq!(p("{c/x} | out(c, 0).0").domain(), syms(Kind::Variable, &["x"]));
    assert!(p("nu x.({c/x} | out(c, x).0)").domain().is_empty());
    assert_eq!(p("{c/x} | {d/y}").domain(), syms(Kind::Variable, &["x", "y"]));
    assert!(p("{c/x} | out(n, x).0").is_closed());
    assert!(!p("out(n, x).0").is_closed());
    assert!(p("0").is_closed());
}

#[test]
fn correctness_violations() {
    let raw = |a, b| ExtendedProcess::Par(Box::new(a), Box::new(b));
    let dup = raw(
        ExtendedProcess::subst(var("x"), t("c")),
        ExtendedProcess::subst(var("x"), t("d")),
    );
    let v = check_correct(&dup).unwrap_err();
    assert!(v.iter().any(|v| v.bullet == 2 && matches!(v.kind, ViolationKind::DuplicateSubstitution { .. })));

    let empty_res = ExtendedProcess::Res(var("x"), Box::new(ExtendedProcess::nil()));
    let v = check_correct(&empty_res).unwrap_err();
    assert!(v.iter().any(|v| v.bullet == 3));

    let cyclic = raw(
        ExtendedProcess::subst(var("x"), t("f(y)")),
        ExtendedProcess::subst(var("y"), t("f(x)")),
    );
    let bindings = vec![(var("x"), t("f(y)")), (var("y"), t("f(x)"))];
    let reversed: Vec<_> = bindings.iter().rev().cloned().collect();
    assert!(!ordered_ok(&bindings) && !ordered_ok(&reversed));
    let v = check_correct(&cyclic).unwrap_err();
    assert!(v.iter().any(|v| matches!(v.kind, ViolationKind::CyclicSubstitutions { .. })));
}

#[test]
fn group_renaming() {
    let m = Symbol::name("m");
    let renamed = alpha_rename(&p("new n.out(n, c).0"), &[], &m).unwrap();
    assert!(renamed.alpha_eq(&p("new m.out(m, c).0")));
    assert_eq!(renamed.to_string(), "new m.out(m, c).0");

    let y = var("y");
    let renamed = alpha_rename(&p("in(c, x).out(c, x).0"), &[], &y).unwrap();
    assert_eq!(renamed, p("in(c, y).out(c, y).0"));

    let outer = alpha_rename(&p("new n.(out(n, c).0 | new n.out(n, d).0)"), &[], &m).unwrap();
    assert_eq!(outer, p("new m.(out(m, c).0 | new n.out(n, d).0)"));
    assert!(matches!(
        alpha_rename(&p("out(c, 0).0"), &[], &m),
        Err(Error::NotABinder)
    ));
}

#[test]
fn freshening() {
    let a = p("new n.out(n, c).0 | new n.out(n, d).0");
    let f = freshen_binders(&a, &BTreeSet::new());
    let mut binders = Vec::new();
    f.as_plain().unwrap().visit_binders(&mut |b| binders.push(b.clone()));
    assert_eq!(binders.len(), 2);
    assert_ne!(binders[0], binders[1]);
    assert!(f.alpha_eq(&a));

    let distinct = p("new n.out(n, c).0 | new m.out(m, d).0");
    assert_eq!(freshen_binders(&distinct, &BTreeSet::new()), distinct);

    let input = p("in(c, x).0");
    let f = freshen_binders(&input, &syms(Kind::Variable, &["x"]));
    let mut binders = Vec::new();
    f.as_plain().unwrap().visit_binders(&mut |b| binders.push(b.clone()));
    assert_eq!(binders.len(), 1);
    assert_ne!(binders[0], var("x"));
    assert_eq!(binders[0].kind(), Kind::Variable);
}

#[test]
fn plugging() {
    let a = p("{c/x}");
    let c = p("out(c, 0).0");
    let e = Context::par(Context::Hole, Context::Process(c.clone()));
    assert_eq!(plug(&e, &a), ExtendedProcess::Par(Box::new(a.clone()), Box::new(c.clone())));
    assert_eq!(plug(&Context::Process(c.clone()), &a), c);
    let two = Context::res(Symbol::name("n"), Context::par(Context::Hole, Context::Hole));
    let expected = ExtendedProcess::Res(
        Symbol::name("n"),
        Box::new(ExtendedProcess::Par(Box::new(a.clone()), Box::new(a.clone()))),
    );
    assert_eq!(plug(&two, &a), expected);
}

#[test]
fn applying_active_substitutions() {
    let x = var("x");
    assert_eq!(apply_active(&p("out(c, x).0"), &x, &t("d")), p("out(c, d).0"));
    let closed = p("out(c, 0).0");
    assert_eq!(apply_active(&closed, &x, &t("d")), closed);
    let bound = p("in(c, x).out(d, x).0");
    assert_eq!(apply_active(&bound, &x, &t("d")), bound);
}

// normal forms

#[test]
fn normal_forms() {
    let nf = normalize_process(&p("nu x.({c/x} | out(n, x).0)"), &th()).unwrap();
    assert!(nf.names.is_empty() && nf.frame.is_empty());
    assert_eq!(nf.body, p("out(n, c).0").as_plain().unwrap().clone());
    assert!(nf.body.free_vars().is_empty());

    let nf = normalize_process(&p("0"), &th()).unwrap();
    assert!(nf.names.is_empty() && nf.frame.is_empty());
    assert_eq!(nf.to_process(), p("0"));

    let nf = normalize_process(&p("new k.({k/x} | out(m, x).0)"), &th()).unwrap();
    assert_eq!(nf.names.len(), 1);
    let k = Term::Atom(nf.names[0].clone());
    assert_eq!(nf.frame.bindings(), &[(var("x"), k.clone())]);
    assert_eq!(nf.body, appi::process::PlainProcess::output(t("m"), k, appi::process::PlainProcess::Nil));

    let dropped = normalize_process(&p("new k.({c/x} | out(d, 0).0)"), &th()).unwrap();
    assert!(dropped.names.is_empty());
    assert_eq!(dropped.frame.bindings(), &[(var("x"), t("c"))]);
    let pushed = normalize_process(&p("new k.({c/x} | out(k, 0).0)"), &th()).unwrap();
    assert!(pushed.names.is_empty());
    assert!(pushed.to_process().alpha_eq(&p("{c/x} | new k.out(k, 0).0")));
}

#[test]
fn frames() {
    assert_eq!(frame_of(&p("{c/x} | 0"), &th()).unwrap().bindings(), &[(var("x"), t("c"))]);
    assert!(frame_of(&p("out(c, 0).0 | in(d, y).0"), &th()).unwrap().is_empty());
    let frame = frame_of(&p("{fst((a, b))/x}"), &th()).unwrap();
    assert_eq!(frame.bindings(), &[(var("x"), th().normalize(&t("fst((a, b))")).unwrap())]);
    assert_eq!(frame.bindings()[0].1, t("a"));
}

#[test]
fn structural_equivalence() {
    let body = p("out(a, c).0");
    let with_nil = ExtendedProcess::Par(Box::new(body.clone()), Box::new(p("0")));
    assert!(struct_equiv(&with_nil, &body, &th()).unwrap());
    assert!(struct_equiv(&p("new n.0"), &p("0"), &th()).unwrap());
    assert!(!struct_equiv(&p("out(a, c).0"), &p("out(b, c).0"), &th()).unwrap());
}

// transitions

#[test]
fn explicit_transitions() {
    let recipes = ExplorationConfig {
        input_recipes: InputRecipes::Explicit(vec![t("d")]),
        ..cfg()
    };
    let ts = enumerate_transitions(&p("in(c, x).0"), &th(), &recipes).unwrap();
    assert_eq!(ts.len(), 1);
    assert_eq!(ts[0].action, Action::input(t("c"), t("d")));
    assert!(struct_equiv(&ts[0].target, &p("0"), &th()).unwrap());

    let ts = enumerate_transitions(&p("out(c, d).0"), &th(), &cfg()).unwrap();
    assert_eq!(ts.len(), 1);
    assert_eq!(ts[0].action, Action::output(t("c"), t("d")));
    let expected = ExtendedProcess::subst(x1(), t("d"));
    assert!(struct_equiv(&ts[0].target, &expected, &th()).unwrap());

    let ts = enumerate_transitions(&p("out(c, d).0 | in(c, y).out(a, y).0"), &th(), &cfg()).unwrap();
    let cd = t("(c, d)");
    let comm = ts
        .iter()
        .find(|tr| tr.action == Action::EqTest { left: cd.clone(), right: cd.clone() })
        .expect("communication");
    let expected = ExtendedProcess::par(ExtendedProcess::subst(x1(), t("d")), p("out(a, d).0"));
    assert!(struct_equiv(&comm.target, &expected, &th()).unwrap());

    let ts = enumerate_transitions(&p("new n.out(n, d).0"), &th(), &cfg()).unwrap();
    assert!(ts.iter().all(|tr| !tr.action.is_external()));
}

#[test]
fn internal_steps() {
    let steps = internal_step(&p("if c = c then out(a, 0).0 else 0"), &empty(), &cfg()).unwrap();
    assert_eq!(steps.len(), 1);
    assert!(struct_equiv(&steps[0], &p("out(a, 0).0"), &empty()).unwrap());

    let steps = internal_step(&p("if c = d then out(a, 0).0 else out(b, 0).0"), &empty(), &cfg()).unwrap();
    assert_eq!(steps.len(), 1);
    assert!(struct_equiv(&steps[0], &p("out(b, 0).0"), &empty()).unwrap());

    let a = p("{(a, b)/x} | if fst(x) = a then out(c, 0).0");
    let steps = internal_step(&a, &th(), &cfg()).unwrap();
    let expected = p("{(a, b)/x} | out(c, 0).0");
    assert!(steps.iter().any(|s| struct_equiv(s, &expected, &th()).unwrap()));

    let closure = tau_closure(&p("0"), &th(), &cfg()).unwrap();
    assert_eq!(closure.len(), 1);
    let chained = tau_closure(&p("if c = c then if d = d then out(a, 0).0"), &empty(), &cfg()).unwrap();
    assert!(chained.iter().any(|s| struct_equiv(s, &p("out(a, 0).0"), &empty()).unwrap()));
    let out = tau_closure(&p("out(c, d).0"), &th(), &cfg()).unwrap();
    assert_eq!(out.len(), 1);
}

#[test]
fn weak_transitions_and_barbs() {
    let direct = weak_transition(&p("out(c, d).0"), &Action::output(t("c"), t("d")), &th(), &cfg()).unwrap();
    let expected = ExtendedProcess::subst(x1(), t("d"));
    assert!(direct.iter().any(|s| struct_equiv(s, &expected, &th()).unwrap()));

    let padded = p("if c = c then out(a, 0).0");
    let reached = weak_transition(&padded, &Action::output(t("a"), t("0")), &empty(), &cfg()).unwrap();
    let expected = ExtendedProcess::subst(x1(), t("0"));
    assert!(reached.iter().any(|s| struct_equiv(s, &expected, &empty()).unwrap()));
    let none = weak_transition(&p("0"), &Action::output(t("a"), t("0")), &th(), &cfg()).unwrap();
    assert!(none.is_empty());
    let tau = Action::EqTest { left: t("c"), right: t("c") };
    assert!(matches!(weak_transition(&p("0"), &tau, &th(), &cfg()), Err(Error::InternalAction)));

    assert_eq!(barbs(&p("out(a, c).0"), &th(), &cfg()).unwrap(), syms(Kind::Name, &["a"]));
    assert_eq!(barbs(&padded, &empty(), &cfg()).unwrap(), syms(Kind::Name, &["a"]));
    assert!(barbs(&p("new a.out(a, c).0"), &th(), &cfg()).unwrap().is_empty());
}

// equivalence

#[test]
fn static_equivalence_examples() {
    let zero = p("{0/x}");
    let one = p("{1/x}");
    let v = static_equivalent(&zero, &one, &empty(), &cfg()).unwrap();
    assert!(v.is_distinguished(), "{v}");
    assert!(static_equivalent(&zero, &zero, &empty(), &cfg()).unwrap().is_equivalent());
    let l = p("new n.{n/x}");
    let r = p("new m.{h(m)/x}");
    assert!(static_equivalent(&l, &r, &empty(), &cfg().with_depth(2)).unwrap().is_equivalent());
}

#[test]
fn bisimulation_examples() {
    let v = weak_labeled_bisim(&p("out(c, 0).0"), &p("if d = d then out(c, 0).0"), &empty(), &cfg()).unwrap();
    assert!(v.is_equivalent(), "{v}");
    let v = weak_labeled_bisim(&p("out(c, 0).0"), &p("out(c, 1).0"), &empty(), &cfg()).unwrap();
    assert!(v.is_distinguished(), "{v}");
    assert!(v.evidence().unwrap().replay(&p("out(c, 0).0"), &p("out(c, 1).0"), &empty(), &cfg()).unwrap());
    assert!(weak_labeled_bisim(&p("0"), &p("0"), &empty(), &cfg()).unwrap().is_equivalent());
}

#[test]
fn barb_equivalence_examples() {
    assert!(barb_equivalent(&p("out(a, 0).0"), &p("out(b, 0).0"), &empty(), &cfg())
        .unwrap()
        .is_distinguished());
    let a = p("out(a, 0).0");
    assert!(barb_equivalent(&a, &a, &empty(), &cfg()).unwrap().is_equivalent());
    assert!(barb_equivalent(&a, &p("if c = c then out(a, 0).0"), &empty(), &cfg())
        .unwrap()
        .is_equivalent());
}

#[test]
fn probe_examples() {
    let obs = Symbol::name("obs");
    let test = ProbeSpec::Test {
        left: t("x"),
        right: t("0"),
        a: obs.clone(),
    };
    let on = |target: &ExtendedProcess| barbs(&build_probe(&test, target).unwrap(), &empty(), &cfg()).unwrap();
    assert!(on(&p("{0/x}")).contains(&obs));
    assert!(!on(&p("{1/x}")).contains(&obs));

    let input = ProbeSpec::Input {
        channel: t("c"),
        message: t("0"),
        a: obs.clone(),
    };
    let composite = build_probe(&input, &p("in(c, y).0")).unwrap();
    assert!(barbs(&composite, &empty(), &cfg()).unwrap().contains(&obs));
    let theory = empty();
    let mut ex = Explorer::new(&theory, cfg(), &[&composite]);
    let root = ex.add_process(&composite).unwrap();
    let mut lost = false;
    for s in ex.tau_closure(root).unwrap().to_vec() {
        let (b, complete) = ex.barbs(s).unwrap();
        lost |= complete && !b.contains(&obs);
    }
    assert!(lost);

    let dead = ProbeSpec::Test {
        left: t("0"),
        right: t("1"),
        a: obs.clone(),
    };
    assert!(!barbs(&build_probe(&dead, &p("0")).unwrap(), &empty(), &cfg()).unwrap().contains(&obs));
}

#[test]
fn closure_examples() {
    let (a, b) = (p("out(c, 0).0"), p("if d = d then out(c, 0).0"));
    let nil = vec![(Vec::new(), p("0"))];
    assert!(context_closure_check(&a, &b, &nil, &empty(), &cfg()).unwrap().is_equivalent());
    let relay = vec![(Vec::new(), p("in(c, y).out(d, y).0"))];
    assert!(context_closure_check(&a, &b, &relay, &empty(), &cfg()).unwrap().is_equivalent());

    let probe = vec![(Vec::new(), p("if x = 0 then out(obs, 0).0"))];
    let v = context_closure_check(&p("{0/x}"), &p("{1/x}"), &probe, &empty(), &cfg()).unwrap();
    assert!(v.is_distinguished(), "{v}");
}

fn single_edge(action: Action) -> Lts {
    let th = empty();
    let mut ex = Explorer::new(&th, cfg(), &[]);
    let root = ex.add_process(&p("0")).unwrap();
    let mut lts = ex.materialize(root).unwrap();
    let target = ExtendedProcess::subst(x1(), action.terms().1.clone());
    let s = ex.add_process(&target).unwrap();
    lts.states.push(ex.state(s).clone());
    lts.exhausted.push(false);
    let (c, m) = action.terms();
    let values = Some((c.clone(), m.clone()));
    lts.edges.push(LtsEdge {
        source: 0,
        action,
        values,
        target: 1,
    });
    lts
}

#[test]
fn oracle_examples() {
    let l = single_edge(Action::output(t("c"), t("0")));
    let r = single_edge(Action::output(t("c"), t("0")));
    let public = [Symbol::name("c"), Symbol::constant("0"), Symbol::name("d")];
    let v = naive_bisim_oracle(&l, &r, &empty(), &cfg(), &public).unwrap();
    assert!(v.is_equivalent(), "{v}");
    let r = single_edge(Action::output(t("d"), t("0")));
    assert!(naive_bisim_oracle(&l, &r, &empty(), &cfg(), &public).unwrap().is_distinguished());
}

#[test]
fn binder_paths_reach_nested_restrictions() {
    let a = p("{c/x} | new n.out(n, 0).0");
    let m = Symbol::name("m");
    let renamed = alpha_rename(&a, &[Step::Right], &m).unwrap();
    assert_eq!(renamed, p("{c/x} | new m.out(m, 0).0"));
}
