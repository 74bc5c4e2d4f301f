mod common;

use common::{brute_eval, epsilon_free_query};
use crpq::containment::{contains, validate_witness, ContainOptions, Strategy, Verdict, Witness};
use crpq::eval::{Limits, Semantics};
use crpq::expansion::{enumerate_ainj_expansions, enumerate_expansions, Expansion};
use crpq::oracle::QueryShape;
use crpq::qinj::{contains_qinj, QinjResult};
use crpq::query::{Crpq, QueryClass};
use crpq::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(s: &str) -> Crpq {
    Crpq::parse(s).unwrap()
}

fn exact(q1: &Crpq, q2: &Crpq, sem: Semantics) -> Verdict {
    let opts = ContainOptions { strategy: Strategy::Exact, ..ContainOptions::default() };
    contains(q1, q2, sem, &opts).unwrap().verdict
}

/// Whether the right query selects the free tuple of an expansion, by brute force.
fn selects(q2: &Crpq, e: &Expansion, sem: Semantics) -> bool {
    let g = e.db();
    let longest = q2.atoms.iter().map(|a| a.nfa.longest_word().unwrap().unwrap_or(0)).max().unwrap_or(0);
    brute_eval(q2, &g, sem, longest).contains(&e.free_nodes(&g))
}

/// Containment by brute force over the expansions (a-inj-expansions under
/// a-inj semantics) of a star-free left query.
fn brute_contained(q1: &Crpq, q2: &Crpq, sem: Semantics) -> bool {
    let longest = q1.atoms.iter().map(|a| a.nfa.longest_word().unwrap().unwrap_or(0)).max().unwrap_or(0);
    if sem == Semantics::AInj {
        enumerate_ainj_expansions(q1, longest).all(|f| selects(q2, &f.expansion, sem))
    } else {
        enumerate_expansions(q1, longest).all(|e| selects(q2, &e, sem))
    }
}

fn witness_refutes(q2: &Crpq, w: &Witness, sem: Semantics) -> bool {
    !selects(q2, &w.expansion, sem)
}

#[test]
fn worked_example() {
    let (q1, q2) = (q("Q() := x -[a]-> y, y -[b]-> z"), q("Q() := x -[ab]-> y"));
    let (p1, p2) = (q("Q() := x -[a]-> y, x -[b]-> y"), q("Q() := x -[a]-> y, x2 -[b]-> y2"));
    assert_eq!(exact(&p1, &p2, Semantics::AInj), Verdict::Contained);
    assert_eq!(exact(&p1, &p2, Semantics::St), Verdict::Contained);
    assert!(matches!(exact(&p1, &p2, Semantics::QInj), Verdict::NotContained(_)));
    assert_eq!(exact(&q1, &q2, Semantics::QInj), Verdict::Contained);
    assert_eq!(exact(&q1, &q2, Semantics::St), Verdict::Contained);
    let Verdict::NotContained(w) = exact(&q1, &q2, Semantics::AInj) else { panic!("expected a counterexample") };
    assert_eq!(w.blocks, vec![vec!["x".to_string(), "z".to_string()]]);
}

#[test]
fn exact_ainj_between_crpqs_is_undecidable() {
    let opts = ContainOptions { strategy: Strategy::Exact, ..ContainOptions::default() };
    let r = contains(&q("Q() := x -[a^+]-> y"), &q("Q() := x -[a^+]-> y, y -[a*]-> z"), Semantics::AInj, &opts);
    assert!(matches!(r, Err(Error::Undecidable(_))));
}

#[test]
fn crpq_in_cq_is_decided_by_truncation() {
    assert_eq!(
        exact(&q("Q(x,y) := x -[a^+]-> y"), &q("Q(x,y) := x -[a]-> z, w -[a]-> y"), Semantics::St),
        Verdict::Contained
    );
    assert!(matches!(
        exact(&q("Q() := x -[a^+]-> y"), &q("Q() := x -[a]-> y, y -[a]-> z"), Semantics::St),
        Verdict::NotContained(_)
    ));
}

fn pair(rng: &mut ChaCha8Rng, star_free_left: bool) -> (Crpq, Crpq) {
    loop {
        let a = epsilon_free_query(
            rng,
            &QueryShape { max_atoms: 3, max_vars: 3, max_free: 1, alphabet: 2, depth: 2, star_free: star_free_left },
        );
        let depth = rng.gen_range(0..=2);
        let b = epsilon_free_query(
            rng,
            &QueryShape { max_atoms: 3, max_vars: 3, max_free: a.arity(), alphabet: 2, depth, star_free: true },
        );
        if a.arity() == b.arity() {
            return (a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn star_free_verdicts_match_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (q1, q2) = pair(&mut rng, true);
        for sem in [Semantics::St, Semantics::AInj, Semantics::QInj] {
            let v = exact(&q1, &q2, sem);
            prop_assert_eq!(matches!(v, Verdict::Contained), brute_contained(&q1, &q2, sem), "{} {} in {}", sem, q1, q2);
            if let Verdict::NotContained(w) = &v {
                prop_assert!(witness_refutes(&q2, w, sem));
            }
        }
    }

    #[test]
    fn counterexamples_for_starred_queries_are_genuine(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (q1, q2) = pair(&mut rng, false);
        let opts = ContainOptions { max_len: Some(4), ..ContainOptions::default() };
        for sem in [Semantics::St, Semantics::AInj, Semantics::QInj] {
            let out = contains(&q1, &q2, sem, &opts).unwrap();
            if let Verdict::NotContained(w) = &out.verdict {
                prop_assert!(validate_witness(&q1, &q2, sem, w, &Limits::default()).unwrap());
                prop_assert!(witness_refutes(&q2, w, sem), "{} {} in {}", sem, q1, q2);
            }
        }
    }

    #[test]
    fn every_query_contains_itself(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (q1, _) = pair(&mut rng, false);
        let opts = ContainOptions { max_len: Some(3), ..ContainOptions::default() };
        for sem in [Semantics::St, Semantics::AInj, Semantics::QInj] {
            let v = contains(&q1, &q1, sem, &opts).unwrap().verdict;
            prop_assert!(!matches!(v, Verdict::NotContained(_)), "{} {}", sem, q1);
        }
    }

    #[test]
    fn qinj_decider_handles_parallel_atoms(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut q1, mut q2) = pair(&mut rng, true);
        // Duplicate an atom with a fresh language between the same endpoints.
        for q in [&mut q1, &mut q2] {
            let a = q.atoms[rng.gen_range(0..q.atoms.len())].clone();
            let r = crpq::oracle::random_regex(&mut rng, &crpq::oracle::letters(2), 1, true);
            let r = r.nonempty_part().unwrap_or_else(|| crpq::regex::Regex::sym("a"));
            let vars = q.vars();
            let mut atoms = q.atoms.clone();
            atoms.push(crpq::query::Atom::new(a.source, r, a.target));
            *q = Crpq::new(q.free.clone(), atoms).with_vars(vars);
        }
        let r = contains_qinj(&q1, &q2, &Limits::default()).unwrap();
        let brute = brute_contained(&q1, &q2, Semantics::QInj);
        match r {
            QinjResult::Contained => prop_assert!(brute, "{} in {}", q1, q2),
            QinjResult::NotContained { witness, .. } => {
                prop_assert!(!brute, "{} in {}", q1, q2);
                prop_assert!(witness_refutes(&q2, &witness, Semantics::QInj));
            }
            QinjResult::Inconclusive(_) => prop_assert!(!q2.is_connected()),
        }
    }
}

#[test]
fn generated_right_queries_are_classified() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (_, q2) = pair(&mut rng, true);
    assert_ne!(q2.classify(), QueryClass::Crpq);
}
