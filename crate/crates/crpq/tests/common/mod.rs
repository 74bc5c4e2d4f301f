//! Brute-force reference evaluator shared by the integration tests. It
//! enumerates variable assignments and candidate paths directly and checks
//! labels with the regex reference matcher.

#![allow(dead_code)]

use std::collections::BTreeSet;

use crpq::eval::Semantics;
use crpq::graph::GraphDb;
use crpq::oracle::{random_crpq, QueryShape};
use crpq::query::{Atom, Crpq};
use rand_chacha::ChaCha8Rng;

/// A path as its node sequence; `nodes.len() - 1` edges.
type NodePath = Vec<usize>;

/// Paths from `u` to `v` whose label the atom accepts. Walks up to `max_len`
/// edges under standard semantics; simple paths (simple cycles for loop
/// atoms) otherwise.
fn atom_paths(g: &GraphDb, atom: &Atom, u: usize, v: usize, sem: Semantics, max_len: usize) -> Vec<NodePath> {
    let mut out = Vec::new();
    let mut nodes = vec![u];
    let mut labels: Vec<String> = Vec::new();
    let simple = sem != Semantics::St;
    walk(g, atom, v, simple, max_len, &mut nodes, &mut labels, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn walk(
    g: &GraphDb,
    atom: &Atom,
    v: usize,
    simple: bool,
    max_len: usize,
    nodes: &mut Vec<usize>,
    labels: &mut Vec<String>,
    out: &mut Vec<NodePath>,
) {
    let cur = *nodes.last().unwrap();
    if !labels.is_empty() && cur == v && atom.regex.matches(labels) {
        let ok = !simple || atom.is_loop() == (nodes[0] == v);
        if ok {
            out.push(nodes.clone());
        }
    }
    if labels.len() == max_len {
        return;
    }
    if simple && nodes.len() > 1 && cur == nodes[0] {
        return;
    }
    for &(l, t) in g.out_edges(cur) {
        if simple && nodes[1..].contains(&t) {
            continue;
        }
        if simple && t == nodes[0] && !atom.is_loop() {
            continue;
        }
        nodes.push(t);
        labels.push(g.label_name(l).to_string());
        walk(g, atom, v, simple, max_len, nodes, labels, out);
        nodes.pop();
        labels.pop();
    }
}

fn internal(p: &NodePath) -> &[usize] {
    &p[1..p.len() - 1]
}

/// All answers of an epsilon-free query. Under standard semantics walks are
/// bounded by `max_len` edges, which is complete for star-free queries whose
/// words are at most that long.
pub fn brute_eval(q: &Crpq, g: &GraphDb, sem: Semantics, max_len: usize) -> BTreeSet<Vec<usize>> {
    let vars = q.vars();
    let n = g.node_count();
    let mut out = BTreeSet::new();
    let mut assign = vec![0usize; vars.len()];
    let total = n.checked_pow(vars.len() as u32).unwrap();
    for code in 0..total {
        let mut c = code;
        for a in assign.iter_mut() {
            *a = c % n;
            c /= n;
        }
        if sem == Semantics::QInj && assign.iter().collect::<BTreeSet<_>>().len() < assign.len() {
            continue;
        }
        let img = |v: &str| assign[vars.iter().position(|x| x == v).unwrap()];
        let cands: Vec<Vec<NodePath>> =
            q.atoms.iter().map(|a| atom_paths(g, a, img(&a.source), img(&a.target), sem, max_len)).collect();
        if cands.iter().any(Vec::is_empty) {
            continue;
        }
        let ok = sem != Semantics::QInj || disjoint_choice(&cands, &assign, 0, &mut Vec::new());
        if ok {
            out.insert(q.free.iter().map(|v| img(v)).collect());
        }
    }
    out
}

/// Picks one path per atom with internal nodes pairwise disjoint and
/// disjoint from the variable images.
fn disjoint_choice(cands: &[Vec<NodePath>], assign: &[usize], i: usize, used: &mut Vec<usize>) -> bool {
    if i == cands.len() {
        return true;
    }
    for p in &cands[i] {
        let inner = internal(p);
        if inner.iter().any(|x| assign.contains(x) || used.contains(x)) {
            continue;
        }
        let mark = used.len();
        used.extend_from_slice(inner);
        if disjoint_choice(cands, assign, i + 1, used) {
            return true;
        }
        used.truncate(mark);
    }
    false
}

/// A random query with every atom restricted to nonempty words.
pub fn epsilon_free_query(rng: &mut ChaCha8Rng, shape: &QueryShape) -> Crpq {
    loop {
        let q = random_crpq(rng, shape);
        let atoms: Option<Vec<Atom>> = q
            .atoms
            .iter()
            .map(|a| a.regex.nonempty_part().map(|r| Atom::new(a.source.clone(), r, a.target.clone())))
            .collect();
        if let Some(atoms) = atoms {
            return Crpq::new(q.free.clone(), atoms).with_vars(q.vars());
        }
    }
}
