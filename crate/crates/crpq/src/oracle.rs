//! Seeded random instances and cross-validation suites that compare each
//! decider or evaluator with an independent brute-force characterisation.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::containment::{
    contains_cq_cq_ainj, contains_exhaustive, find_counterexample_bounded, ContainOptions, Verdict,
};
use crate::error::{Error, Result};
use crate::eval::{eval_membership, evaluate, Limits, Semantics};
use crate::expansion::{enumerate_ainj_expansions, enumerate_expansions};
use crate::graph::GraphDb;
use crate::morphism::{find_hom, HomMode};
use crate::nfa::Nfa;
use crate::qinj::{achievable_profiles, contains_qinj, profile_by_definition, profile_of_word, JointNfa, QinjResult};
use crate::query::{Atom, Crpq};
use crate::regex::Regex;

const VAR_NAMES: [&str; 6] = ["x", "y", "z", "w", "u", "v"];

pub fn letters(n: usize) -> Vec<String> {
    (0..n).map(|i| ((b'a' + i as u8) as char).to_string()).collect()
}

/// Random regex of depth at most `depth` over the given letters.
pub fn random_regex(rng: &mut ChaCha8Rng, letters: &[String], depth: usize, star_free: bool) -> Regex {
    if depth == 0 || rng.gen_bool(0.35) {
        return Regex::sym(letters[rng.gen_range(0..letters.len())].clone());
    }
    let ops = if star_free { 2 } else { 4 };
    match rng.gen_range(0..ops) {
        0 => Regex::concat(
            random_regex(rng, letters, depth - 1, star_free),
            random_regex(rng, letters, depth - 1, star_free),
        ),
        1 => Regex::union(
            random_regex(rng, letters, depth - 1, star_free),
            random_regex(rng, letters, depth - 1, star_free),
        ),
        2 => Regex::star(random_regex(rng, letters, depth - 1, star_free)),
        _ => Regex::plus(random_regex(rng, letters, depth - 1, star_free)),
    }
}

#[derive(Clone, Debug)]
pub struct QueryShape {
    pub max_atoms: usize,
    pub max_vars: usize,
    pub max_free: usize,
    pub alphabet: usize,
    pub depth: usize,
    pub star_free: bool,
}

/// Random CRPQ; free variables are drawn from the variables used by atoms.
pub fn random_crpq(rng: &mut ChaCha8Rng, shape: &QueryShape) -> Crpq {
    let ls = letters(shape.alphabet);
    let nvars = rng.gen_range(1..=shape.max_vars.min(VAR_NAMES.len()));
    let natoms = rng.gen_range(1..=shape.max_atoms);
    let atoms: Vec<Atom> = (0..natoms)
        .map(|_| {
            let s = VAR_NAMES[rng.gen_range(0..nvars)];
            let t = VAR_NAMES[rng.gen_range(0..nvars)];
            Atom::new(s, random_regex(rng, &ls, shape.depth, shape.star_free), t)
        })
        .collect();
    let used: Vec<String> = {
        let mut u: Vec<String> = Vec::new();
        for a in &atoms {
            for v in [&a.source, &a.target] {
                if !u.contains(v) {
                    u.push(v.clone());
                }
            }
        }
        u
    };
    let nfree = rng.gen_range(0..=shape.max_free.min(used.len()));
    let mut free = Vec::new();
    while free.len() < nfree {
        let v = used[rng.gen_range(0..used.len())].clone();
        if !free.contains(&v) {
            free.push(v);
        }
    }
    Crpq::new(free, atoms)
}

/// Random CQ with the given arity over variables drawn from the atoms.
pub fn random_cq(rng: &mut ChaCha8Rng, max_atoms: usize, max_vars: usize, alphabet: usize, arity: usize) -> Crpq {
    loop {
        let shape = QueryShape { max_atoms, max_vars, max_free: arity, alphabet, depth: 0, star_free: true };
        let q = random_crpq(rng, &shape);
        if q.arity() == arity {
            return q;
        }
    }
}

/// Random graph with `nodes` nodes named `n0..` and each possible edge kept
/// with probability `density`.
pub fn random_graph(rng: &mut ChaCha8Rng, nodes: usize, alphabet: usize, density: f64) -> GraphDb {
    let ls = letters(alphabet);
    let mut b = GraphDb::builder();
    for i in 0..nodes {
        b.node(format!("n{i}"));
    }
    for s in 0..nodes {
        for t in 0..nodes {
            for l in &ls {
                if rng.gen_bool(density) {
                    b.edge(format!("n{s}"), l.as_str(), format!("n{t}"));
                }
            }
        }
    }
    b.build()
}

/// Random automaton with `states` states over the letters, without
/// guaranteeing trimness.
pub fn random_nfa(rng: &mut ChaCha8Rng, letters: &[String], states: usize, density: f64, epsilon_free: bool) -> Nfa {
    let mut n = Nfa::new(letters.to_vec(), states);
    for s in 0..states {
        for a in 0..letters.len() {
            for t in 0..states {
                if rng.gen_bool(density) {
                    n.add_transition(s, a, t);
                }
            }
        }
        n.set_initial(s, rng.gen_bool(0.35));
        n.set_final(s, rng.gen_bool(0.35));
    }
    n.set_initial(0, true);
    if epsilon_free {
        for s in 0..states {
            if n.is_initial(s) {
                n.set_final(s, false);
            }
        }
        if states > 1 {
            n.set_initial(states - 1, false);
            n.set_final(states - 1, true);
        }
    }
    n
}

fn all_tuples(nodes: usize, arity: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out.into_iter().flat_map(|t| (0..nodes).map(move |n| [t.clone(), vec![n]].concat())).collect();
    }
    out
}

fn drop_atom(q: &Crpq, i: usize) -> Crpq {
    let mut atoms = q.atoms.clone();
    atoms.remove(i);
    let mut r = Crpq::new(q.free.clone(), atoms);
    r.name = q.name.clone();
    r
}

/// Greedy removal of atoms while the failure persists.
pub fn shrink_query(q: &Crpq, fails: &dyn Fn(&Crpq) -> bool) -> Crpq {
    let mut cur = q.clone();
    'outer: loop {
        for i in 0..cur.atoms.len() {
            if cur.atoms.len() == 1 {
                break 'outer;
            }
            let cand = drop_atom(&cur, i);
            if fails(&cand) {
                cur = cand;
                continue 'outer;
            }
        }
        break;
    }
    cur
}

/// Greedy removal of edges while the failure persists.
pub fn shrink_graph(g: &GraphDb, fails: &dyn Fn(&GraphDb) -> bool) -> GraphDb {
    let mut cur = g.clone();
    'outer: loop {
        for i in 0..cur.edges().len() {
            let mut b = GraphDb::builder();
            for n in cur.nodes() {
                b.node(n.clone());
            }
            for (k, &(s, l, t)) in cur.edges().iter().enumerate() {
                if k != i {
                    b.edge(cur.node_name(s), cur.label_name(l), cur.node_name(t));
                }
            }
            let cand = b.build();
            if fails(&cand) {
                cur = cand;
                continue 'outer;
            }
        }
        break;
    }
    cur
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Hierarchy,
    AinjExpansions,
    QinjVsFin,
    Cqcq,
    Profiles,
}

impl Suite {
    pub const ALL: [Suite; 5] =
        [Suite::Hierarchy, Suite::AinjExpansions, Suite::QinjVsFin, Suite::Cqcq, Suite::Profiles];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Hierarchy => "hierarchy",
            Suite::AinjExpansions => "ainj-expansions",
            Suite::QinjVsFin => "qinj-vs-fin",
            Suite::Cqcq => "cqcq",
            Suite::Profiles => "profiles",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Suite> {
        // `lemma44` is the established command-line name of the a-inj expansion suite.
        let s = if s == "lemma44" { "ainj-expansions" } else { s };
        Suite::ALL.into_iter().find(|x| x.to_string() == s).ok_or_else(|| Error::domain(format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub instances: usize,
    /// Individual comparisons performed.
    pub checks: u64,
    /// Instances the compared procedure declined (counted, not failures).
    pub skipped: usize,
    /// Minimised reproductions of every disagreement.
    pub failures: Vec<String>,
    /// Extra named counters, printed in order.
    pub counters: Vec<(String, u64)>,
}

impl SuiteReport {
    fn new(suite: Suite, seed: u64) -> Self {
        SuiteReport { suite: suite.to_string(), seed, ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn bump(&mut self, name: &str) {
        match self.counters.iter_mut().find(|(n, _)| n == name) {
            Some((_, c)) => *c += 1,
            None => self.counters.push((name.to_string(), 1)),
        }
    }

    pub fn counter(&self, name: &str) -> u64 {
        self.counters.iter().find(|(n, _)| n == name).map_or(0, |(_, c)| *c)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "suite {} seed {}: {status} ({} instances, {} checks, {} skipped, {} failures)",
            self.suite,
            self.seed,
            self.instances,
            self.checks,
            self.skipped,
            self.failures.len()
        )?;
        for (n, c) in &self.counters {
            write!(f, "\n  {n}: {c}")?;
        }
        for r in &self.failures {
            write!(f, "\n--- repro ---\n{r}")?;
        }
        Ok(())
    }
}

pub fn run_suite(suite: Suite, seed: u64, instances: usize, limits: &Limits) -> Result<SuiteReport> {
    match suite {
        Suite::Hierarchy => hierarchy(seed, instances, limits),
        Suite::AinjExpansions => ainj_expansions(seed, instances, limits),
        Suite::QinjVsFin => qinj_vs_fin(seed, instances, limits),
        Suite::Cqcq => cqcq(seed, instances, limits),
        Suite::Profiles => profiles(seed, instances),
    }
}

fn hierarchy_violation(q: &Crpq, g: &GraphDb, limits: &Limits) -> Result<Option<String>> {
    let sets: Vec<BTreeSet<Vec<usize>>> = [Semantics::QInj, Semantics::AInj, Semantics::St]
        .iter()
        .map(|&s| evaluate(q, g, s, limits).map(|v| v.into_iter().collect()))
        .collect::<Result<_>>()?;
    if !sets[0].is_subset(&sets[1]) {
        return Ok(Some("q-inj answers not contained in a-inj answers".into()));
    }
    if !sets[1].is_subset(&sets[2]) {
        return Ok(Some("a-inj answers not contained in standard answers".into()));
    }
    Ok(None)
}

/// Answer sets under the three semantics are nested q-inj, a-inj, standard.
fn hierarchy(seed: u64, n: usize, limits: &Limits) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new(Suite::Hierarchy, seed);
    let shape = QueryShape { max_atoms: 4, max_vars: 4, max_free: 2, alphabet: 3, depth: 3, star_free: false };
    for _ in 0..n {
        let alphabet = rng.gen_range(1..=3);
        let q = random_crpq(&mut rng, &QueryShape { alphabet, ..shape.clone() });
        let nodes = rng.gen_range(1..=6);
        let density = rng.gen_range(0.1..0.4);
        let g = random_graph(&mut rng, nodes, alphabet, density);
        rep.instances += 1;
        rep.checks += 2;
        if let Some(msg) = hierarchy_violation(&q, &g, limits)? {
            let fails = |q: &Crpq, g: &GraphDb| matches!(hierarchy_violation(q, g, limits), Ok(Some(_)));
            let q = shrink_query(&q, &|c| fails(c, &g));
            let g = shrink_graph(&g, &|c| fails(&q, c));
            rep.failures.push(format!("{msg}\nquery: {q}\ngraph:\n{g}"));
        }
    }
    Ok(rep)
}

/// Evaluation under a-inj semantics three ways on queries whose words have
/// length at most 3: some expansion maps atom-injectively, some a-inj-expansion
/// maps injectively, and the evaluator itself.
fn ainj_expansions_disagreement(q: &Crpq, g: &GraphDb, limits: &Limits) -> Result<Option<String>> {
    let tuples = all_tuples(g.node_count(), q.arity());
    let mut via_exp = vec![false; tuples.len()];
    for e in enumerate_expansions(q, 3) {
        let mode = HomMode::AtomInjective(e.related_pairs());
        for (k, t) in tuples.iter().enumerate() {
            if !via_exp[k] && find_hom(&e.cq, g, Some(t), &mode)?.is_some() {
                via_exp[k] = true;
            }
        }
    }
    let mut via_ainj = vec![false; tuples.len()];
    for f in enumerate_ainj_expansions(q, 3) {
        for (k, t) in tuples.iter().enumerate() {
            if !via_ainj[k] && find_hom(&f.expansion.cq, g, Some(t), &HomMode::Injective)?.is_some() {
                via_ainj[k] = true;
            }
        }
    }
    for (k, t) in tuples.iter().enumerate() {
        let direct = eval_membership(q, g, t, Semantics::AInj, limits)?;
        if via_exp[k] != via_ainj[k] || via_exp[k] != direct {
            return Ok(Some(format!(
                "tuple {t:?}: expansion+a-inj hom {}, a-inj-expansion+injective hom {}, evaluator {direct}",
                via_exp[k], via_ainj[k]
            )));
        }
    }
    Ok(None)
}

fn longest_at_most(q: &Crpq, n: usize) -> bool {
    q.atoms.iter().all(|a| matches!(a.nfa.longest_word(), Some(Some(l)) if l <= n))
}

fn ainj_expansions(seed: u64, n: usize, limits: &Limits) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new(Suite::AinjExpansions, seed);
    let shape = QueryShape { max_atoms: 3, max_vars: 3, max_free: 2, alphabet: 2, depth: 2, star_free: true };
    while rep.instances < n {
        let q = random_crpq(&mut rng, &shape);
        if !longest_at_most(&q, 3) {
            continue;
        }
        rep.instances += 1;
        for _ in 0..3 {
            let nodes = rng.gen_range(1..=4);
            let density = rng.gen_range(0.15..0.45);
            let g = random_graph(&mut rng, nodes, 2, density);
            rep.checks += all_tuples(nodes, q.arity()).len() as u64;
            if let Some(msg) = ainj_expansions_disagreement(&q, &g, limits)? {
                let fails = |q: &Crpq, g: &GraphDb| matches!(ainj_expansions_disagreement(q, g, limits), Ok(Some(_)));
                let q2 = shrink_query(&q, &|c| fails(c, &g));
                let g2 = shrink_graph(&g, &|c| fails(&q2, c));
                rep.failures.push(format!("{msg}\nquery: {q2}\ngraph:\n{g2}"));
            }
        }
    }
    Ok(rep)
}

/// The non-contracting homomorphism decider against brute force over every
/// a-inj-expansion of the left CQ.
fn cqcq_disagreement(q1: &Crpq, q2: &Crpq, limits: &Limits) -> Result<Option<String>> {
    let decided = contains_cq_cq_ainj(q1, q2, limits)?;
    let mut brute = true;
    for f in enumerate_ainj_expansions(q1, 1) {
        let g = f.expansion.db();
        let t = f.expansion.free_nodes(&g);
        if !eval_membership(q2, &g, &t, Semantics::AInj, limits)? {
            brute = false;
            break;
        }
    }
    let contained = decided == Verdict::Contained;
    Ok((contained != brute).then(|| format!("decider contained {contained}, brute force contained {brute}")))
}

fn cqcq(seed: u64, n: usize, limits: &Limits) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new(Suite::Cqcq, seed);
    for _ in 0..n {
        let arity = rng.gen_range(0..=1);
        let q1 = random_cq(&mut rng, 4, 4, 2, arity);
        let q2 = random_cq(&mut rng, 4, 4, 2, arity);
        rep.instances += 1;
        rep.checks += 1;
        if let Some(msg) = cqcq_disagreement(&q1, &q2, limits)? {
            let fails = |a: &Crpq, b: &Crpq| matches!(cqcq_disagreement(a, b, limits), Ok(Some(_)));
            let a = shrink_query(&q1, &|c| c.arity() == arity && fails(c, &q2));
            let b = shrink_query(&q2, &|c| c.arity() == arity && fails(&a, c));
            rep.failures.push(format!("{msg}\nleft: {a}\nright: {b}"));
        }
    }
    Ok(rep)
}

fn qinj_star_free_disagreement(q1: &Crpq, q2: &Crpq, limits: &Limits) -> Result<Option<String>> {
    let opts = ContainOptions { limits: *limits, ..ContainOptions::default() };
    let decided = match contains_qinj(q1, q2, limits)?.verdict() {
        Some(v) => v,
        None => return Ok(None),
    };
    let exhaustive = contains_exhaustive(q1, q2, Semantics::QInj, &opts)?;
    Ok((decided.label() != exhaustive.label())
        .then(|| format!("abstraction decider {}, exhaustive {}", decided.label(), exhaustive.label())))
}

/// The abstraction decider against exhaustive search on star-free pairs,
/// against bounded search on starred left queries, and reflexivity.
fn qinj_vs_fin(seed: u64, n: usize, limits: &Limits) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new(Suite::QinjVsFin, seed);
    let fin = QueryShape { max_atoms: 3, max_vars: 3, max_free: 1, alphabet: 2, depth: 2, star_free: true };
    let opts = ContainOptions { limits: *limits, ..ContainOptions::default() };
    let mut corpus: Vec<Crpq> = Vec::new();
    let pair = |rng: &mut ChaCha8Rng, left: &QueryShape| -> (Crpq, Crpq) {
        loop {
            let a = random_crpq(rng, left);
            let b = random_crpq(rng, &QueryShape { max_free: a.arity(), ..fin.clone() });
            if a.arity() == b.arity() {
                return (a, b);
            }
        }
    };
    // Pairs outside the decider's scope are counted and replaced, so that `n`
    // pairs are compared.
    let mut decided = 0;
    while decided < n && rep.instances < 20 * n.max(1) {
        let (q1, q2) = pair(&mut rng, &fin);
        rep.instances += 1;
        let r = contains_qinj(&q1, &q2, limits)?;
        if r.verdict().is_none() {
            rep.skipped += 1;
            rep.bump("star-free pairs declined by the abstraction decider");
            continue;
        }
        decided += 1;
        rep.checks += 1;
        if let Some(msg) = qinj_star_free_disagreement(&q1, &q2, limits)? {
            let fails = |a: &Crpq, b: &Crpq| {
                a.arity() == b.arity() && matches!(qinj_star_free_disagreement(a, b, limits), Ok(Some(_)))
            };
            let a = shrink_query(&q1, &|c| fails(c, &q2));
            let b = shrink_query(&q2, &|c| fails(&a, c));
            rep.failures.push(format!("{msg}\nleft: {a}\nright: {b}"));
        }
        corpus.extend([q1, q2]);
    }
    if decided < n {
        rep.failures.push(format!("only {decided} of {n} star-free pairs were in the decider's scope"));
    }
    rep.counters.push(("star-free pairs compared".into(), decided as u64));
    let starred = QueryShape { star_free: false, ..fin.clone() };
    for _ in 0..n {
        let (q1, q2) = pair(&mut rng, &starred);
        rep.instances += 1;
        rep.checks += 1;
        let r = contains_qinj(&q1, &q2, limits)?;
        if r.verdict().is_none() {
            rep.bump("starred pairs declined by the abstraction decider");
        }
        let bounded = find_counterexample_bounded(&q1, &q2, Semantics::QInj, 4, &opts)?;
        if matches!(bounded, Verdict::NotContained(_)) {
            rep.bump("starred pairs refuted by bounded search");
            if matches!(r, QinjResult::Contained) {
                rep.failures
                    .push(format!("abstraction decider contained, bounded search refutes\nleft: {q1}\nright: {q2}"));
            }
        }
        corpus.extend([q1, q2]);
    }
    for q in &corpus {
        rep.checks += 1;
        match contains_qinj(q, q, limits)? {
            QinjResult::Contained => {}
            QinjResult::NotContained { .. } => rep.failures.push(format!("reflexivity refuted\nquery: {q}")),
            _ => rep.bump("reflexivity checks declined by the abstraction decider"),
        }
    }
    Ok(rep)
}

fn profile_disagreement(joint: &JointNfa, word: &[String]) -> Result<Option<String>> {
    let scan = profile_of_word(word, joint)?;
    let def = profile_by_definition(word, joint)?;
    Ok((scan != def)
        .then(|| format!("word {}: scan {:?} definition {:?}", word.concat(), scan.markers(), def.markers())))
}

fn words_of(n: &Nfa, max_len: usize) -> Vec<Vec<String>> {
    n.words_up_to(max_len).into_iter().filter(|w| !w.is_empty()).collect()
}

/// Profiles by scan against profiles by definition on every word up to
/// length 6, and saturation of the achievable profile search.
fn profiles(seed: u64, n: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new(Suite::Profiles, seed);
    let ls = letters(2);
    let mut all_words = vec![Vec::new()];
    let mut layer: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..6 {
        layer = layer.iter().flat_map(|w| ls.iter().map(move |l| [w.clone(), vec![l.clone()]].concat())).collect();
        all_words.extend(layer.iter().cloned());
    }
    for _ in 0..n {
        let states = rng.gen_range(2..=6);
        let nfa = random_nfa(&mut rng, &ls, states, 0.3, false);
        let cut = rng.gen_range(1..=states);
        let blocks = if cut == states { vec![0..states] } else { vec![0..cut, cut..states] };
        let joint = JointNfa { nfa, blocks };
        rep.instances += 1;
        for w in all_words.iter().filter(|w| !w.is_empty()) {
            rep.checks += 1;
            if let Some(msg) = profile_disagreement(&joint, w)? {
                rep.failures.push(format!("{msg}\nautomaton states {states}, blocks {:?}", joint.blocks));
                break;
            }
        }
        let atom_states = rng.gen_range(1..=4);
        let atom = random_nfa(&mut rng, &ls, atom_states, 0.35, true);
        let achieved = achievable_profiles(&atom, &joint, crate::qinj::PROFILE_STATE_CAP)?;
        let witness_len = achieved.iter().map(|(_, w)| w.len()).max().unwrap_or(1);
        let found: HashSet<_> = achieved.into_iter().map(|(p, _)| p).collect();
        let bound = witness_len.max(1);
        if 2 * bound > 16 {
            rep.skipped += 1;
            continue;
        }
        let profiles_up_to = |len: usize| -> Result<HashSet<_>> {
            words_of(&atom, len).iter().map(|w| profile_of_word(w, &joint)).collect()
        };
        let (b1, b2) = (profiles_up_to(bound)?, profiles_up_to(2 * bound)?);
        rep.checks += 1;
        if b1 != b2 || b1 != found {
            rep.failures.push(format!(
                "saturation: {} profiles up to length {bound}, {} up to {}, {} found by search",
                b1.len(),
                b2.len(),
                2 * bound,
                found.len()
            ));
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let shape = QueryShape { max_atoms: 4, max_vars: 4, max_free: 2, alphabet: 3, depth: 3, star_free: false };
        let a = random_crpq(&mut ChaCha8Rng::seed_from_u64(5), &shape);
        let b = random_crpq(&mut ChaCha8Rng::seed_from_u64(5), &shape);
        assert_eq!(a, b);
        let g = random_graph(&mut ChaCha8Rng::seed_from_u64(5), 4, 2, 0.3);
        assert_eq!(g, random_graph(&mut ChaCha8Rng::seed_from_u64(5), 4, 2, 0.3));
    }

    #[test]
    fn generated_regexes_respect_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let r = random_regex(&mut rng, &letters(3), 3, true);
            assert!(r.depth() <= 4);
            assert!(r.is_star_free());
        }
    }

    #[test]
    fn free_variables_occur_in_atoms() {
        let shape = QueryShape { max_atoms: 3, max_vars: 4, max_free: 2, alphabet: 2, depth: 1, star_free: true };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let q = random_crpq(&mut rng, &shape);
            for v in &q.free {
                assert!(q.atoms.iter().any(|a| &a.source == v || &a.target == v));
            }
        }
    }

    #[test]
    fn shrinking_keeps_the_failure() {
        let q = Crpq::parse("Q() := x -[a]-> y, y -[b]-> z, z -[c]-> x").unwrap();
        let small = shrink_query(&q, &|c| c.alphabet().contains("b"));
        assert_eq!(small.atoms.len(), 1);
        assert_eq!(small.atoms[0].regex, Regex::sym("b"));
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn small_runs_pass() {
        let limits = Limits::default();
        for s in Suite::ALL {
            let r = run_suite(s, 3, 4, &limits).unwrap();
            assert!(r.passed(), "{r}");
        }
    }
}
