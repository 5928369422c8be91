//! Randomized invariants. Processes and terms come from the library's
//! seeded generators, with seeds drawn by proptest.

use std::collections::BTreeSet;

use appi::equiv::{verify_witness, weak_labeled_bisim};
use appi::gen::{random_closed_ep, random_rewrite, random_term, template_family, GenConfig, Rule};
use appi::lts::ExplorationConfig;
use appi::normal::struct_equiv;
use appi::process::{check_correct, freshen_binders};
use appi::rewrite::{terms_equal, EquationalTheory};
use appi::syntax::{parse_process, Declarations};
use appi::term::{check_acyclic, Symbol, Term};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn vars() -> Vec<Symbol> {
    (0..4).map(|i| Symbol::new(appi::term::Kind::Variable, "x", i)).collect()
}

/// Bindings where each variable mentions only later ones, shuffled.
fn shuffled_acyclic(r: &mut ChaCha8Rng, th: &EquationalTheory) -> Vec<(Symbol, Term)> {
    let vs = vars();
    let mut out = Vec::new();
    for (i, x) in vs.iter().enumerate() {
        let mut pool = vec![Symbol::name("n"), Symbol::constant("0")];
        pool.extend(vs[i + 1..].iter().cloned());
        out.push((x.clone(), random_term(r, &pool, th.signature(), 2)));
    }
    out.shuffle(r);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn acyclic_order_satisfies_condition(seed in any::<u64>()) {
        let th = EquationalTheory::pair_projection();
        let mut r = rng(seed);
        let theta = check_acyclic(shuffled_acyclic(&mut r, &th)).unwrap();
        let b = theta.bindings();
        for (j, (x, _)) in b.iter().enumerate() {
            prop_assert!(b[j..].iter().all(|(_, e)| !e.variables().contains(x)));
        }
        let e = random_term(&mut r, &vars(), th.signature(), 3);
        let applied = theta.apply(&e);
        prop_assert!(applied.variables().is_disjoint(&theta.domain()));
    }

    #[test]
    fn printing_round_trips(seed in any::<u64>()) {
        let th = EquationalTheory::symmetric_encryption();
        let a = random_closed_ep(&mut rng(seed), th.signature(), &GenConfig::default());
        let decls = Declarations::from_symbols(a.symbols().iter(), th.signature().clone());
        let back = parse_process(&a.to_string(), &decls).unwrap();
        prop_assert!(back.alpha_eq(&a), "{} reparsed as {}", a, back);
    }

    #[test]
    fn structural_equivalence_is_reflexive_and_symmetric(seed in any::<u64>(), rule in 0usize..7) {
        let th = EquationalTheory::pair_projection();
        let mut r = rng(seed);
        let gc = GenConfig { replication: true, ..GenConfig::default() };
        let a = random_closed_ep(&mut r, th.signature(), &gc);
        prop_assert!(struct_equiv(&a, &a, &th).unwrap());
        if let Some(b) = random_rewrite(&mut r, &a, Rule::ALL[rule], &th) {
            prop_assert_eq!(struct_equiv(&a, &b, &th).unwrap(), struct_equiv(&b, &a, &th).unwrap());
        }
    }

    #[test]
    fn correctness_is_invariant_under_renaming(seed in any::<u64>()) {
        let th = EquationalTheory::pair_projection();
        let a = random_closed_ep(&mut rng(seed), th.signature(), &GenConfig::default());
        let avoid: BTreeSet<Symbol> = a.symbols();
        let renamed = freshen_binders(&a, &avoid);
        prop_assert!(renamed.alpha_eq(&a));
        prop_assert_eq!(check_correct(&a).is_ok(), check_correct(&renamed).is_ok());
    }

    #[test]
    fn equality_is_closed_under_substitution(seed in any::<u64>()) {
        let th = EquationalTheory::symmetric_encryption();
        let mut r = rng(seed);
        let e = random_term(&mut r, &vars(), th.signature(), 2);
        let k = random_term(&mut r, &vars(), th.signature(), 1);
        let e2 = Term::app("dec", vec![Term::app("enc", vec![e.clone(), k.clone()]), k]);
        prop_assert!(terms_equal(&e, &e2, &th).unwrap());
        let theta = check_acyclic(shuffled_acyclic(&mut r, &th)).unwrap();
        prop_assert!(terms_equal(&theta.apply(&e), &theta.apply(&e2), &th).unwrap());
        let x = vars()[r.gen_range(0..4)].clone();
        let by = random_term(&mut r, &[Symbol::name("m")], th.signature(), 2);
        prop_assert!(terms_equal(&e.substitute(&x, &by), &e2.substitute(&x, &by), &th).unwrap());
    }

    #[test]
    fn verdicts_carry_checkable_certificates(i in 0usize..24, j in 0usize..24) {
        let (closed, framed) = template_family();
        let all: Vec<_> = closed.iter().chain(framed.iter()).collect();
        let (a, b) = (all[i], all[j]);
        prop_assume!(a.domain() == b.domain());
        let th = EquationalTheory::empty(Default::default());
        let cfg = ExplorationConfig::default();
        let v = weak_labeled_bisim(a, b, &th, &cfg).unwrap();
        if let Some(w) = v.witness() {
            prop_assert!(verify_witness(w, &th, &cfg, &[a, b]).unwrap());
        }
        if let Some(e) = v.evidence() {
            prop_assert!(e.replay(a, b, &th, &cfg).unwrap());
        }
    }
}
