mod common;

use std::collections::BTreeSet;

use common::{brute_eval, epsilon_free_query};
use crpq::eval::{eval_membership_named, evaluate, Limits, Semantics};
use crpq::graph::GraphDb;
use crpq::oracle::{random_graph, QueryShape};
use crpq::query::Crpq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn q(s: &str) -> Crpq {
    Crpq::parse(s).unwrap()
}

fn answers(q: &Crpq, g: &GraphDb, sem: Semantics) -> BTreeSet<Vec<usize>> {
    evaluate(q, g, sem, &Limits::default()).unwrap().into_iter().collect()
}

fn shape(star_free: bool) -> QueryShape {
    QueryShape { max_atoms: 3, max_vars: 3, max_free: 2, alphabet: 2, depth: 2, star_free }
}

#[test]
fn single_edge() {
    let g = GraphDb::parse("u a v\n").unwrap();
    let r = answers(&q("Q(x,y) := x -[a]-> y"), &g, Semantics::St);
    assert_eq!(r, BTreeSet::from([vec![g.node_id("u").unwrap(), g.node_id("v").unwrap()]]));
}

#[test]
fn triangle_separates_the_semantics() {
    let g = GraphDb::parse("u a v\nv a w\nw a u\n").unwrap();
    let cycle = q("Q() := x -[aaa]-> x");
    let limits = Limits::default();
    assert!(eval_membership_named(&cycle, &g, &[], Semantics::AInj, &limits).unwrap());
    let walk = q("Q() := x -[aaaa]-> y");
    assert!(eval_membership_named(&walk, &g, &[], Semantics::St, &limits).unwrap());
    assert!(!eval_membership_named(&walk, &g, &[], Semantics::AInj, &limits).unwrap());
    let two = q("Q() := x -[aa]-> y, y -[a]-> x");
    assert!(eval_membership_named(&two, &g, &[], Semantics::QInj, &limits).unwrap());
    let shared = q("Q() := x -[aa]-> y, x -[aa]-> z");
    assert!(eval_membership_named(&shared, &g, &[], Semantics::AInj, &limits).unwrap());
    assert!(!eval_membership_named(&shared, &g, &[], Semantics::QInj, &limits).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(160))]

    #[test]
    fn injective_semantics_match_brute_force(seed in any::<u64>(), star_free in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let query = epsilon_free_query(&mut rng, &shape(star_free));
        let g = random_graph(&mut rng, 4, 2, 0.25);
        for sem in [Semantics::AInj, Semantics::QInj] {
            prop_assert_eq!(answers(&query, &g, sem), brute_eval(&query, &g, sem, g.node_count()), "{} {}", sem, query);
        }
    }

    #[test]
    fn standard_semantics_match_brute_force_on_star_free_queries(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let query = epsilon_free_query(&mut rng, &shape(true));
        let g = random_graph(&mut rng, 4, 2, 0.25);
        let longest = query.atoms.iter().map(|a| a.nfa.longest_word().unwrap().unwrap_or(0)).max().unwrap_or(0);
        prop_assert_eq!(answers(&query, &g, Semantics::St), brute_eval(&query, &g, Semantics::St, longest), "{}", query);
    }

    #[test]
    fn walks_found_by_brute_force_are_standard_answers(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let query = epsilon_free_query(&mut rng, &shape(false));
        let g = random_graph(&mut rng, 3, 2, 0.3);
        let st = answers(&query, &g, Semantics::St);
        prop_assert!(brute_eval(&query, &g, Semantics::St, 5).is_subset(&st), "{}", query);
    }

    #[test]
    fn semantics_form_a_hierarchy(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = QueryShape { max_atoms: 4, max_vars: 4, max_free: 2, alphabet: 3, depth: 3, star_free: false };
        let query = crpq::oracle::random_crpq(&mut rng, &shape);
        let g = random_graph(&mut rng, 5, 3, 0.2);
        let (st, ainj, qinj) = (answers(&query, &g, Semantics::St), answers(&query, &g, Semantics::AInj), answers(&query, &g, Semantics::QInj));
        prop_assert!(qinj.is_subset(&ainj));
        prop_assert!(ainj.is_subset(&st));
    }
}
