//! Exact containment of a CRPQ in a CQ or finite CRPQ by truncating long
//! atom words.
//!
//! A connected component of Q2 with total word length at most `m` only sees a
//! window of `m` edges. An expansion word longer than `2N` (with `N` bounding
//! every component) is split as `u w v` with `|u| = |v| = N`. The middle is
//! replaced by a fresh symbol, and a component either maps into that
//! truncated database or, when Boolean, into one path `u w v` by itself.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::eval::{eval_membership, Limits, Semantics};
use crate::expansion::{build_expansion, Word};
use crate::graph::GraphDb;
use crate::nfa::{intersection_witness, Nfa};
use crate::query::{eliminate_epsilon, Atom, Crpq};
use crate::regex::Regex;

/// Cap on the words tested when tabulating the paths a component matches.
const MATCH_TABLE_CAP: usize = 1 << 18;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Piece {
    Exact(Word),
    Cut { u: Word, v: Word },
}

struct Component {
    q: Crpq,
    positions: Vec<usize>,
}

/// Outcome of a truncation run: `None` when contained, otherwise the words of
/// a counterexample expansion.
pub fn truncation_search(
    q1: &Crpq,
    q2: &Crpq,
    sem: Semantics,
    limits: &Limits,
    max_combos: u64,
) -> Result<Option<Vec<Word>>> {
    let union = eliminate_epsilon(q2, limits.disjunct_cap)?;
    let bound = union
        .disjuncts
        .iter()
        .flat_map(|d| d.atoms.iter())
        .map(|a| match a.nfa.longest_word() {
            Some(Some(n)) => Ok(n),
            Some(None) => Ok(0),
            None => Err(Error::domain("containment target must have finite languages")),
        })
        .sum::<Result<usize>>()?
        .max(1);
    let hash = fresh_symbol(q1, q2);
    let options: Vec<Vec<Piece>> = q1.atoms.iter().map(|a| atom_pieces(&a.nfa, bound)).collect();
    let disjuncts: Vec<Vec<Component>> = union
        .disjuncts
        .iter()
        .map(|d| d.components().into_iter().map(|(q, positions)| Component { q, positions }).collect())
        .collect();
    if options.iter().any(Vec::is_empty) {
        return Ok(None);
    }
    let mut tables: HashMap<(usize, usize), Vec<Word>> = HashMap::new();
    let mut odometer = vec![0usize; options.len()];
    let mut combos = 0u64;
    loop {
        combos += 1;
        if combos > max_combos {
            return Err(Error::resource(format!("truncation exceeded {max_combos} word combinations")));
        }
        let choice: Vec<&Piece> = odometer.iter().zip(&options).map(|(&i, o)| &o[i]).collect();
        if let Some(words) = check_combination(q1, &choice, &disjuncts, &hash, sem, limits, &mut tables)? {
            return Ok(Some(words));
        }
        let mut k = 0;
        loop {
            if k == odometer.len() {
                return Ok(None);
            }
            odometer[k] += 1;
            if odometer[k] < options[k].len() {
                break;
            }
            odometer[k] = 0;
            k += 1;
        }
    }
}

fn fresh_symbol(q1: &Crpq, q2: &Crpq) -> String {
    let used: BTreeSet<String> = q1.alphabet().union(&q2.alphabet()).cloned().collect();
    let mut s = "#".to_string();
    while used.contains(&s) {
        s.push('#');
    }
    s
}

/// Exact words of length at most `2n` and cut pairs `(u, v)` with
/// `L ∩ u Σ⁺ v ≠ ∅`.
fn atom_pieces(nfa: &Nfa, n: usize) -> Vec<Piece> {
    let mut out: Vec<Piece> = nfa.words_up_to(2 * n).into_iter().map(Piece::Exact).collect();
    let co = nfa.coaccessible();
    let k = nfa.alphabet().len();
    // Prefixes of length n with the reached state sets.
    let mut prefixes: Vec<(Word, FixedBitSet)> = vec![(Vec::new(), nfa.initial().clone())];
    for _ in 0..n {
        let mut next = Vec::new();
        for (w, s) in &prefixes {
            for a in 0..k {
                let t = nfa.step(s, a);
                if t.intersection(&co).next().is_some() {
                    let mut w2 = w.clone();
                    w2.push(nfa.alphabet()[a].clone());
                    next.push((w2, t));
                }
            }
        }
        prefixes = next;
    }
    // Suffixes of length n with the state sets from which they reach a final state.
    let acc = nfa.accessible();
    let mut suffixes: Vec<(Word, FixedBitSet)> = vec![(Vec::new(), nfa.finals().clone())];
    for _ in 0..n {
        let mut next = Vec::new();
        for (w, s) in &suffixes {
            for a in 0..k {
                let t = nfa.step_back(s, a);
                if t.intersection(&acc).next().is_some() {
                    let mut w2 = vec![nfa.alphabet()[a].clone()];
                    w2.extend(w.iter().cloned());
                    next.push((w2, t));
                }
            }
        }
        suffixes = next;
    }
    suffixes.sort();
    for (u, su) in &prefixes {
        // States reachable from `su` in at least one step.
        let mut reach = nfa.empty_set();
        let mut frontier: Vec<FixedBitSet> = (0..k).map(|a| nfa.step(su, a)).collect();
        while let Some(s) = frontier.pop() {
            if s.is_subset(&reach) {
                continue;
            }
            reach.union_with(&s);
            frontier.extend((0..k).map(|a| nfa.step(&s, a)));
        }
        for (v, bv) in &suffixes {
            if !reach.is_disjoint(bv) {
                out.push(Piece::Cut { u: u.clone(), v: v.clone() });
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn check_combination(
    q1: &Crpq,
    choice: &[&Piece],
    disjuncts: &[Vec<Component>],
    hash: &str,
    sem: Semantics,
    limits: &Limits,
    tables: &mut HashMap<(usize, usize), Vec<Word>>,
) -> Result<Option<Vec<Word>>> {
    let truncated: Vec<Word> = choice
        .iter()
        .map(|p| match p {
            Piece::Exact(w) => w.clone(),
            Piece::Cut { u, v } => [u.clone(), vec![hash.to_string()], v.clone()].concat(),
        })
        .collect();
    let synthetic = Crpq::new(
        q1.free.clone(),
        q1.atoms
            .iter()
            .zip(&truncated)
            .map(|(a, w)| {
                let r = if w.is_empty() { Regex::Eps } else { Regex::word(w) };
                Atom::new(a.source.clone(), r, a.target.clone())
            })
            .collect(),
    )
    .with_vars(q1.vars.iter().cloned());
    let e = build_expansion(&synthetic, &truncated)?;
    let g = e.db();
    let tuple = e.free_nodes(&g);
    let cuts: Vec<usize> = (0..choice.len()).filter(|&i| matches!(choice[i], Piece::Cut { .. })).collect();

    // Per disjunct: components failing on the truncated database, split into
    // those needing no further condition and Boolean ones.
    let mut per_disjunct: Vec<Vec<usize>> = Vec::new();
    for (d, comps) in disjuncts.iter().enumerate() {
        let mut failing = Vec::new();
        let mut unconditional = false;
        for (c, comp) in comps.iter().enumerate() {
            let sub: Vec<usize> = comp.positions.iter().map(|&p| tuple[p]).collect();
            if eval_membership(&comp.q, &g, &sub, sem, limits)? {
                continue;
            }
            if !comp.positions.is_empty() || cuts.is_empty() {
                unconditional = true;
                break;
            }
            if comp.q.atoms.is_empty() {
                continue;
            }
            failing.push(c);
        }
        if !unconditional {
            if failing.is_empty() {
                return Ok(None);
            }
            per_disjunct.push(failing.into_iter().map(|c| key(d, c)).collect());
        }
    }
    // Choose one failing Boolean component per remaining disjunct such that
    // every cut admits a middle word avoiding all chosen components.
    let mut pick = vec![0usize; per_disjunct.len()];
    loop {
        let chosen: BTreeSet<usize> = pick.iter().zip(&per_disjunct).map(|(&i, opts)| opts[i]).collect();
        if let Some(middles) = middles_avoiding(q1, choice, &cuts, &chosen, disjuncts, sem, limits, tables)? {
            let mut words: Vec<Word> = Vec::with_capacity(choice.len());
            let mut it = middles.into_iter();
            for p in choice {
                words.push(match p {
                    Piece::Exact(w) => w.clone(),
                    Piece::Cut { u, v } => [u.clone(), it.next().expect("one middle per cut"), v.clone()].concat(),
                });
            }
            return Ok(Some(words));
        }
        let mut k = 0;
        loop {
            if k == pick.len() {
                return Ok(None);
            }
            pick[k] += 1;
            if pick[k] < per_disjunct[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
    }
}

fn key(d: usize, c: usize) -> usize {
    (d << 20) | c
}

#[allow(clippy::too_many_arguments)]
fn middles_avoiding(
    q1: &Crpq,
    choice: &[&Piece],
    cuts: &[usize],
    chosen: &BTreeSet<usize>,
    disjuncts: &[Vec<Component>],
    sem: Semantics,
    limits: &Limits,
    tables: &mut HashMap<(usize, usize), Vec<Word>>,
) -> Result<Option<Vec<Word>>> {
    let mut middles = Vec::new();
    for &i in cuts {
        let Piece::Cut { u, v } = choice[i] else { unreachable!() };
        let atom = &q1.atoms[i].nfa;
        let alphabet: Vec<String> = atom.alphabet().to_vec();
        let frame = framed(u, v, &alphabet);
        let mut avoiders = Vec::new();
        for &k in chosen {
            let (d, c) = (k >> 20, k & ((1 << 20) - 1));
            let comp = &disjuncts[d][c].q;
            if let Entry::Vacant(e) = tables.entry((d, c)) {
                e.insert(matched_paths(comp, sem, limits)?);
            }
            avoiders.push(avoid_dfa(&tables[&(d, c)], &alphabet, window_len(comp)));
        }
        let mut all: Vec<&Nfa> = vec![atom, &frame];
        all.extend(avoiders.iter());
        match intersection_witness(&all) {
            Some(w) => middles.push(w[u.len()..w.len() - v.len()].to_vec()),
            None => return Ok(None),
        }
    }
    Ok(Some(middles))
}

fn window_len(c: &Crpq) -> usize {
    c.atoms.iter().map(|a| a.nfa.longest_word().flatten().unwrap_or(0)).sum()
}

/// Words `x` with `1 <= |x| <= m` over the component alphabet such that the
/// Boolean component matches the path labelled `x`.
fn matched_paths(c: &Crpq, sem: Semantics, limits: &Limits) -> Result<Vec<Word>> {
    let m = window_len(c);
    let letters: Vec<String> = c.alphabet().into_iter().collect();
    let mut out = Vec::new();
    let mut layer: Vec<Word> = vec![Vec::new()];
    let mut tested = 0usize;
    for _ in 0..m {
        let mut next = Vec::new();
        for w in &layer {
            for l in &letters {
                let mut x = w.clone();
                x.push(l.clone());
                tested += 1;
                if tested > MATCH_TABLE_CAP {
                    return Err(Error::resource("component window table is too large"));
                }
                if eval_membership(c, &path_db(&x), &[], sem, limits)? {
                    out.push(x.clone());
                }
                next.push(x);
            }
        }
        layer = next;
    }
    Ok(out)
}

fn path_db(x: &[String]) -> GraphDb {
    let mut b = GraphDb::builder();
    for i in 0..=x.len() {
        b.node(format!("p{i}"));
    }
    for (i, l) in x.iter().enumerate() {
        b.edge(format!("p{i}"), l.clone(), format!("p{}", i + 1));
    }
    b.build()
}

/// Automaton for `u Σ⁺ v`.
fn framed(u: &[String], v: &[String], alphabet: &[String]) -> Nfa {
    let (nu, nv) = (u.len(), v.len());
    let mid = nu + 1;
    let mut n = Nfa::new(alphabet.to_vec(), nu + 2 + nv);
    let idx = |n: &Nfa, s: &str| n.letter(s).expect("frame letters belong to the atom alphabet");
    n.set_initial(0, true);
    for (i, l) in u.iter().enumerate() {
        let a = idx(&n, l);
        n.add_transition(i, a, i + 1);
    }
    for a in 0..alphabet.len() {
        n.add_transition(nu, a, mid);
        n.add_transition(mid, a, mid);
    }
    let mut prev = mid;
    for (j, l) in v.iter().enumerate() {
        let a = idx(&n, l);
        n.add_transition(prev, a, mid + 1 + j);
        prev = mid + 1 + j;
    }
    n.set_final(prev, true);
    n
}

/// Deterministic automaton accepting the words with no factor in `forbidden`;
/// states remember the last `m - 1` letters.
fn avoid_dfa(forbidden: &[Word], alphabet: &[String], m: usize) -> Nfa {
    let bad: BTreeSet<&[String]> = forbidden.iter().map(Vec::as_slice).collect();
    let relevant: BTreeSet<&str> = forbidden.iter().flatten().map(String::as_str).collect();
    let keep = m.saturating_sub(1);
    let mut index: BTreeMap<Word, usize> = BTreeMap::new();
    let mut states: Vec<Word> = vec![Vec::new()];
    let mut trans: Vec<(usize, usize, usize)> = Vec::new();
    index.insert(Vec::new(), 0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        for (a, l) in alphabet.iter().enumerate() {
            let next: Word = if relevant.contains(l.as_str()) {
                let mut w = states[s].clone();
                w.push(l.clone());
                if (0..w.len()).any(|i| bad.contains(&w[i..])) {
                    continue;
                }
                let cut = w.len().saturating_sub(keep);
                w[cut..].to_vec()
            } else {
                Vec::new()
            };
            let t = *index.entry(next.clone()).or_insert_with(|| {
                states.push(next);
                queue.push_back(states.len() - 1);
                states.len() - 1
            });
            trans.push((s, a, t));
        }
    }
    let mut n = Nfa::new(alphabet.to_vec(), states.len());
    n.set_initial(0, true);
    for q in 0..states.len() {
        n.set_final(q, true);
    }
    for (p, a, q) in trans {
        n.add_transition(p, a, q);
    }
    n
}
