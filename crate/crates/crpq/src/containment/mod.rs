//! Containment of CRPQs under standard, atom-injective and query-injective
//! semantics: exact deciders for the decidable fragments and a bounded
//! counterexample search for the rest.

mod repair;
mod truncation;

use std::fmt;

use crate::error::{Error, Result};
use crate::eval::{find_match, Budget, Limits, Semantics};
use crate::expansion::{build_expansion, enumerate_expansions, Expansion, Word};
use crate::morphism::{find_hom, HomMode};
use crate::qinj::{self, QinjResult};
use crate::query::{eliminate_epsilon, Crpq, CrpqUnion, QueryClass};

pub use repair::RepairOutcome;
use repair::RepairSearch;

/// A counterexample: an expansion of Q1 (quotiented by `blocks` under a-inj
/// semantics) whose free tuple Q2 does not select.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub words: Vec<Word>,
    pub blocks: Vec<Vec<String>>,
    pub expansion: Expansion,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Contained,
    NotContained(Box<Witness>),
    /// No counterexample with words up to `bound`, and no proof of containment.
    Unknown {
        bound: usize,
    },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Contained => "contained",
            Verdict::NotContained(_) => "not-contained",
            Verdict::Unknown { .. } => "unknown",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decider {
    CqCqAinj,
    CrpqCqTruncation,
    CrpqFinStTruncation,
    Exhaustive,
    QinjAbstraction,
    BoundedSearch,
}

impl fmt::Display for Decider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decider::CqCqAinj => "cq-cq-ainj",
            Decider::CrpqCqTruncation => "crpq-cq-truncation",
            Decider::CrpqFinStTruncation => "crpq-crpqfin-st-truncation",
            Decider::Exhaustive => "exhaustive",
            Decider::QinjAbstraction => "qinj-abstraction",
            Decider::BoundedSearch => "bounded-search",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Exact decider when one applies, bounded search otherwise.
    #[default]
    Auto,
    Bounded,
    /// Exact deciders only; an error when none applies.
    Exact,
}

#[derive(Clone, Debug)]
pub struct ContainOptions {
    /// Word length bound for the bounded search (default from `default_max_len`).
    pub max_len: Option<usize>,
    pub strategy: Strategy,
    pub limits: Limits,
    /// Cap on base expansions (bounded search) or word combinations (truncation).
    pub max_expansions: u64,
    /// Cap on partitions visited per base expansion by the a-inj search.
    pub max_partitions: u64,
}

impl Default for ContainOptions {
    fn default() -> Self {
        ContainOptions {
            max_len: None,
            strategy: Strategy::Auto,
            limits: Limits::default(),
            max_expansions: 200_000,
            max_partitions: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub verdict: Verdict,
    pub decider: Decider,
    /// Decider remarks: a failing abstraction, or why an exact route fell back.
    pub notes: Vec<String>,
}

/// Default bound of the bounded search: twice the automaton size of Q1 plus
/// its number of variables.
pub fn default_max_len(q1: &Crpq) -> usize {
    2 * q1.atoms.iter().map(|a| a.nfa.state_count()).sum::<usize>() + q1.vars.len()
}

fn member(q2: &CrpqUnion, e: &Expansion, sem: Semantics, limits: &Limits) -> Result<bool> {
    let g = e.db();
    let tuple = e.free_nodes(&g);
    let mut budget = Budget::new(limits.step_budget);
    for d in &q2.disjuncts {
        if find_match(d, &g, &tuple, sem, &mut budget)?.is_some() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Re-checks a witness from scratch: the words belong to Q1, the expansion is
/// the stated quotient and Q2 does not select its free tuple.
pub fn validate_witness(q1: &Crpq, q2: &Crpq, sem: Semantics, w: &Witness, limits: &Limits) -> Result<bool> {
    if sem != Semantics::AInj && !w.blocks.is_empty() {
        return Ok(false);
    }
    let Ok(base) = build_expansion(q1, &w.words) else { return Ok(false) };
    let Ok(f) = base.quotient(&w.blocks) else { return Ok(false) };
    if f != w.expansion {
        return Ok(false);
    }
    let q2u = eliminate_epsilon(q2, limits.disjunct_cap)?;
    Ok(!member(&q2u, &f, sem, limits)?)
}

fn check_arity(q1: &Crpq, q2: &Crpq) -> Result<()> {
    if q1.arity() != q2.arity() {
        return Err(Error::domain(format!("arity mismatch: {} vs {}", q1.arity(), q2.arity())));
    }
    Ok(())
}

enum SearchEnd {
    Found(Witness),
    Exhausted,
    Capped,
}

fn search(q1: &Crpq, q2: &Crpq, sem: Semantics, max_len: usize, opts: &ContainOptions) -> Result<SearchEnd> {
    let q2u = eliminate_epsilon(q2, opts.limits.disjunct_cap)?;
    let mut capped = false;
    for (count, base) in enumerate_expansions(q1, max_len).enumerate() {
        if count as u64 >= opts.max_expansions {
            return Ok(SearchEnd::Capped);
        }
        match sem {
            Semantics::St | Semantics::QInj => {
                if !member(&q2u, &base, sem, &opts.limits)? {
                    let words = base.words.clone();
                    return Ok(SearchEnd::Found(Witness { words, blocks: Vec::new(), expansion: base }));
                }
            }
            Semantics::AInj => match RepairSearch::new(&q2u, &base, opts.limits, opts.max_partitions).run()? {
                RepairOutcome::Counterexample(blocks) => {
                    let expansion = base.quotient(&blocks)?;
                    let words = base.words.clone();
                    return Ok(SearchEnd::Found(Witness { words, blocks, expansion }));
                }
                RepairOutcome::NoCounterexample => {}
                RepairOutcome::Capped => capped = true,
            },
        }
    }
    Ok(if capped { SearchEnd::Capped } else { SearchEnd::Exhausted })
}

fn checked(q1: &Crpq, q2: &Crpq, sem: Semantics, w: Witness, limits: &Limits) -> Result<Verdict> {
    if !validate_witness(q1, q2, sem, &w, limits)? {
        return Err(Error::Structural("counterexample failed revalidation".into()));
    }
    Ok(Verdict::NotContained(Box::new(w)))
}

/// Longest word over all atoms of a star-free query.
fn longest_word(q: &Crpq) -> Option<usize> {
    q.atoms.iter().try_fold(0usize, |acc, a| match a.nfa.longest_word() {
        Some(Some(n)) => Some(acc.max(n)),
        Some(None) => Some(acc),
        None => None,
    })
}

/// Searches for a counterexample among the expansions with words of length at
/// most `max_len`. Returns `Contained` only when this covers every expansion.
pub fn find_counterexample_bounded(
    q1: &Crpq,
    q2: &Crpq,
    sem: Semantics,
    max_len: usize,
    opts: &ContainOptions,
) -> Result<Verdict> {
    check_arity(q1, q2)?;
    match search(q1, q2, sem, max_len, opts)? {
        SearchEnd::Found(w) => checked(q1, q2, sem, w, &opts.limits),
        SearchEnd::Exhausted if longest_word(q1).is_some_and(|l| l <= max_len) => Ok(Verdict::Contained),
        _ => Ok(Verdict::Unknown { bound: max_len }),
    }
}

/// Searches the a-inj-expansions of one base expansion for one that `q2`
/// does not match.
pub fn ainj_counterexample_in(q2: &CrpqUnion, base: &Expansion, opts: &ContainOptions) -> Result<RepairOutcome> {
    RepairSearch::new(q2, base, opts.limits, opts.max_partitions).run()
}

/// Exact decision for star-free Q1: every expansion is enumerated.
pub fn contains_exhaustive(q1: &Crpq, q2: &Crpq, sem: Semantics, opts: &ContainOptions) -> Result<Verdict> {
    check_arity(q1, q2)?;
    let Some(max_len) = longest_word(q1) else {
        return Err(Error::domain("exhaustive containment needs a star-free left query"));
    };
    match search(q1, q2, sem, max_len, opts)? {
        SearchEnd::Found(w) => checked(q1, q2, sem, w, &opts.limits),
        SearchEnd::Exhausted => Ok(Verdict::Contained),
        SearchEnd::Capped => Err(Error::resource("expansion budget exhausted before the search finished")),
    }
}

/// CQ containment under a-inj semantics: a non-contracting homomorphism from
/// Q2 into the canonical database of Q1 fixing the free tuple.
pub fn contains_cq_cq_ainj(q1: &Crpq, q2: &Crpq, limits: &Limits) -> Result<Verdict> {
    check_arity(q1, q2)?;
    if q1.classify() != QueryClass::Cq || q2.classify() != QueryClass::Cq {
        return Err(Error::domain("both queries must be CQs"));
    }
    let words: Vec<Word> = q1.atoms.iter().map(|a| vec![a.single_letter().expect("CQ atom").to_string()]).collect();
    let base = build_expansion(q1, &words)?;
    let g = base.db();
    let anchor = base.free_nodes(&g);
    if find_hom(q2, &g, Some(&anchor), &HomMode::NonContracting)?.is_some() {
        return Ok(Verdict::Contained);
    }
    let w = Witness { words, blocks: Vec::new(), expansion: base };
    checked(q1, q2, Semantics::AInj, w, limits)
}

fn truncation(q1: &Crpq, q2: &Crpq, sem: Semantics, opts: &ContainOptions) -> Result<Verdict> {
    match truncation::truncation_search(q1, q2, sem, &opts.limits, opts.max_expansions)? {
        None => Ok(Verdict::Contained),
        Some(words) => {
            let expansion = build_expansion(q1, &words)?;
            checked(q1, q2, sem, Witness { words, blocks: Vec::new(), expansion }, &opts.limits)
        }
    }
}

/// CRPQ in CQ. Under q-inj semantics Q2 must be connected.
pub fn contains_crpq_cq(q1: &Crpq, q2: &Crpq, sem: Semantics, opts: &ContainOptions) -> Result<Verdict> {
    check_arity(q1, q2)?;
    if q2.classify() != QueryClass::Cq {
        return Err(Error::domain("right query must be a CQ"));
    }
    if sem == Semantics::QInj && !q2.is_connected() {
        return Err(Error::domain("truncation under q-inj semantics needs a connected right query"));
    }
    truncation(q1, q2, sem, opts)
}

/// CRPQ in finite CRPQ under standard semantics.
pub fn contains_crpq_crpqfin_st(q1: &Crpq, q2: &Crpq, opts: &ContainOptions) -> Result<Verdict> {
    check_arity(q1, q2)?;
    if q2.classify() == QueryClass::Crpq {
        return Err(Error::domain("right query must have finite languages"));
    }
    truncation(q1, q2, Semantics::St, opts)
}

/// Dispatches to the strongest applicable procedure.
pub fn contains(q1: &Crpq, q2: &Crpq, sem: Semantics, opts: &ContainOptions) -> Result<Outcome> {
    check_arity(q1, q2)?;
    let bounded = |opts: &ContainOptions| -> Result<Outcome> {
        let max_len = opts.max_len.unwrap_or_else(|| default_max_len(q1));
        Ok(Outcome {
            verdict: find_counterexample_bounded(q1, q2, sem, max_len, opts)?,
            decider: Decider::BoundedSearch,
            notes: Vec::new(),
        })
    };
    if opts.strategy == Strategy::Bounded {
        return bounded(opts);
    }
    let (c1, c2) = (q1.classify(), q2.classify());
    let star_free = c1 != QueryClass::Crpq;
    let exact = |verdict, decider| Ok(Outcome { verdict, decider, notes: Vec::new() });
    match sem {
        Semantics::AInj if c1 == QueryClass::Cq && c2 == QueryClass::Cq => {
            exact(contains_cq_cq_ainj(q1, q2, &opts.limits)?, Decider::CqCqAinj)
        }
        Semantics::QInj => {
            let note = match qinj::contains_qinj(q1, q2, &opts.limits) {
                Ok(QinjResult::Contained) => return exact(Verdict::Contained, Decider::QinjAbstraction),
                Ok(QinjResult::NotContained { witness, abstraction }) => {
                    return Ok(Outcome {
                        verdict: Verdict::NotContained(witness),
                        decider: Decider::QinjAbstraction,
                        notes: vec![format!("failing abstraction:\n{abstraction}")],
                    });
                }
                Ok(other) => other.to_string(),
                Err(Error::Resource(m)) => format!("abstraction decider: {m}"),
                Err(e) => return Err(e),
            };
            let mut out = if star_free {
                exact(contains_exhaustive(q1, q2, sem, opts)?, Decider::Exhaustive)?
            } else if opts.strategy == Strategy::Exact {
                return Err(Error::Undecidable(format!("no exact procedure applies to this q-inj instance ({note})")));
            } else {
                bounded(opts)?
            };
            out.notes.push(note);
            Ok(out)
        }
        _ if star_free => exact(contains_exhaustive(q1, q2, sem, opts)?, Decider::Exhaustive),
        _ if c2 == QueryClass::Cq => exact(contains_crpq_cq(q1, q2, sem, opts)?, Decider::CrpqCqTruncation),
        Semantics::St if c2 == QueryClass::CrpqFin => {
            exact(contains_crpq_crpqfin_st(q1, q2, opts)?, Decider::CrpqFinStTruncation)
        }
        Semantics::St if opts.strategy == Strategy::Exact => {
            Err(Error::domain("no exact procedure is implemented for CRPQ containment under standard semantics"))
        }
        Semantics::AInj if opts.strategy == Strategy::Exact => {
            Err(Error::Undecidable("a-inj containment of a CRPQ in a non-CQ query has no exact procedure".into()))
        }
        _ => bounded(opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Crpq {
        Crpq::parse(s).unwrap()
    }

    fn decide(a: &str, b: &str, sem: Semantics) -> Outcome {
        contains(&q(a), &q(b), sem, &ContainOptions::default()).unwrap()
    }

    #[test]
    fn star_is_not_contained_in_single_letter() {
        let o = decide("Q() := x -[a*]-> y", "Q() := x -[a]-> y", Semantics::St);
        assert_eq!(o.decider, Decider::CrpqCqTruncation);
        let Verdict::NotContained(w) = o.verdict else { panic!("expected a counterexample") };
        assert_eq!(w.words, vec![Vec::<String>::new()]);
    }

    #[test]
    fn plus_is_contained_in_single_letter_boolean() {
        let o = decide("Q() := x -[a^+]-> y", "Q() := x -[a]-> y", Semantics::St);
        assert_eq!(o.verdict, Verdict::Contained);
    }

    #[test]
    fn finite_union_misses_odd_lengths() {
        let o = decide("Q(x,y) := x -[(aa)*a]-> y", "Q(x,y) := x -[a + aaa]-> y", Semantics::St);
        assert_eq!(o.decider, Decider::CrpqFinStTruncation);
        let Verdict::NotContained(w) = o.verdict else { panic!("expected a counterexample") };
        assert_eq!(w.words[0].len(), 5);
    }

    #[test]
    fn reflexive_on_small_queries() {
        for s in ["Q(x,y) := x -[a b*]-> y", "Q() := x -[a]-> y, y -[b]-> x", "Q(x) := x -[(ab)^+]-> x"] {
            for sem in [Semantics::St, Semantics::AInj] {
                let o = decide(s, s, sem);
                assert_ne!(o.verdict.label(), "not-contained", "{s} under {sem}");
            }
        }
    }

    #[test]
    fn cq_pairs_differ_between_standard_and_atom_injective() {
        let q1 = "Q() := x -[a]-> x";
        let q2 = "Q() := x -[a]-> y, y -[a]-> z";
        assert_eq!(decide(q1, q2, Semantics::St).verdict, Verdict::Contained);
        assert_eq!(decide(q1, q2, Semantics::AInj).verdict.label(), "not-contained");
    }

    #[test]
    fn atom_injective_counterexample_identifies_variables() {
        let q1 = "Q() := x -[a]-> y, y -[b]-> z";
        let q2 = "Q() := u -[a b]-> v";
        assert_eq!(decide(q1, q2, Semantics::St).verdict, Verdict::Contained);
        let o = decide(q1, q2, Semantics::AInj);
        assert_eq!(o.decider, Decider::Exhaustive);
        let Verdict::NotContained(w) = o.verdict else { panic!("expected a counterexample") };
        assert_eq!(w.blocks, vec![vec!["x".to_string(), "z".to_string()]]);
    }

    #[test]
    fn arity_mismatch_is_domain_error() {
        let r = contains(&q("Q(x) := x -[a]-> y"), &q("Q() := x -[a]-> y"), Semantics::St, &ContainOptions::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn bounded_search_reports_unknown_for_starred_queries() {
        let opts = ContainOptions { strategy: Strategy::Bounded, max_len: Some(3), ..Default::default() };
        let o = contains(&q("Q() := x -[a^+]-> y"), &q("Q() := x -[a]-> y"), Semantics::St, &opts).unwrap();
        assert_eq!(o.verdict, Verdict::Unknown { bound: 3 });
        assert_eq!(o.decider, Decider::BoundedSearch);
    }
}
