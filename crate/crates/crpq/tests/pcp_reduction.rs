use crpq::containment::{find_counterexample_bounded, ContainOptions, Verdict};
use crpq::eval::Semantics;
use crpq::expansion::build_expansion;
use crpq::pcp::{
    check_solution, claim_check, forbidden_scan, is_well_formed, reduce, search_index_blocks, solution_to_expansion,
    solution_words, solutions_up_to, witness_expansion, BlockSearch, PcpInstance,
};
use proptest::prelude::*;

fn instance(pairs: &[(&str, &str)]) -> PcpInstance {
    PcpInstance::new(pairs).unwrap()
}

#[test]
fn bounded_search_finds_the_single_pair_solution() {
    let out = reduce(&instance(&[("a", "a")]));
    let v = find_counterexample_bounded(&out.q1, &out.q2, Semantics::AInj, 3, &ContainOptions::default()).unwrap();
    let Verdict::NotContained(w) = v else { panic!("expected a counterexample, got {v:?}") };
    let f = witness_expansion(&out, &w).unwrap();
    assert!(is_well_formed(&f, &out).unwrap());
    assert!(forbidden_scan(&f, &out));
}

#[test]
fn unsolvable_instance_has_no_counterexample_up_to_three_blocks() {
    let out = reduce(&instance(&[("a", "b")]));
    assert!(solutions_up_to(&out.instance, 3).is_empty());
    let r = search_index_blocks(&out, 3, &ContainOptions::default()).unwrap();
    assert!(matches!(r, BlockSearch::NoneUpTo(3)), "{r:?}");
}

#[test]
fn balanced_two_block_solution_is_a_counterexample() {
    let out = reduce(&instance(&[("a", "a"), ("b", "b")]));
    let f = solution_to_expansion(&out, &[1, 2]).unwrap();
    assert!(is_well_formed(&f, &out).unwrap());
    assert!(forbidden_scan(&f, &out));
    let w =
        crpq::containment::Witness { words: f.base.words.clone(), blocks: f.blocks.clone(), expansion: f.expansion };
    let limits = crpq::eval::Limits::default();
    assert!(crpq::containment::validate_witness(&out.q1, &out.q2, Semantics::AInj, &w, &limits).unwrap());
}

#[test]
fn label_clean_samples_are_well_formed() {
    for pairs in [vec![("a", "a")], vec![("a", "ab"), ("ba", "a")], vec![("a", "b")]] {
        let out = reduce(&instance(&pairs));
        let sols = solutions_up_to(&out.instance, 3);
        let r = claim_check(&out, &sols, 200, 11, &ContainOptions::default()).unwrap();
        assert_eq!(r.checked, 200);
        assert_eq!(r.clean_but_ill_formed, 0, "{pairs:?}");
        assert_eq!(r.union_mismatch, 0, "{pairs:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solution_words_belong_to_their_atoms(seq in prop::collection::vec(1usize..=2, 1..4)) {
        let out = reduce(&instance(&[("ab", "b"), ("a", "ba")]));
        let words = solution_words(&out.instance, &seq);
        prop_assert!(build_expansion(&out.q1, &words).is_ok());
    }

    #[test]
    fn solutions_concatenate_equally(pairs in prop::collection::vec(("[ab]{1,3}", "[ab]{1,3}"), 1..3),
                                    seq in prop::collection::vec(0usize..8, 1..4)) {
        let refs: Vec<(&str, &str)> = pairs.iter().map(|(u, v)| (u.as_str(), v.as_str())).collect();
        let inst = instance(&refs);
        let seq: Vec<usize> = seq.iter().map(|i| i % inst.len() + 1).collect();
        let u: String = seq.iter().map(|&i| pairs[i - 1].0.as_str()).collect();
        let v: String = seq.iter().map(|&i| pairs[i - 1].1.as_str()).collect();
        prop_assert_eq!(check_solution(&inst, &seq).unwrap(), u == v);
    }

    #[test]
    fn templates_have_three_symbols_per_letter(u in "[abc]{1,4}", v in "[abc]{1,4}") {
        let inst = instance(&[(u.as_str(), v.as_str())]);
        prop_assert_eq!(inst.u_word(1).len(), 3 * u.len());
        prop_assert_eq!(inst.v_word(1).len(), 3 * v.len());
    }
}
