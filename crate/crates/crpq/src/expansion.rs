//! Expansions of CRPQs, atom-injective expansions and the atom-related relation.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::GraphDb;
use crate::query::{Atom, Crpq};
use crate::regex::Regex;

pub type Word = Vec<String>;

/// A CQ obtained by choosing one word per atom and quotienting by the
/// equalities that empty words force.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expansion {
    /// Quotient CQ; its free tuple is the image of the query's free tuple.
    pub cq: Crpq,
    /// Chosen word per atom of the source query.
    pub words: Vec<Word>,
    /// Canonical renaming from pre-quotient variables to `cq` variables.
    pub phi: BTreeMap<String, String>,
    /// Per source atom, the `cq` variables along its path (`|w| + 1` entries).
    pub atom_paths: Vec<Vec<String>>,
    /// Unordered pairs `(a, b)` with `a < b` of distinct atom-related variables.
    pub atom_related: BTreeSet<(String, String)>,
}

/// Name of the `pos`-th internal variable on the path of atom `atom`.
pub fn internal_var(atom: usize, pos: usize) -> String {
    format!("{atom}.{pos}")
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a < b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != r {
            let n = self.parent[c];
            self.parent[c] = r;
            c = n;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Quotients a conjunction of single-letter atoms over `pre_vars` by the
/// classes of `uf`, naming each class by its smallest member.
fn quotient_parts(pre_vars: &[String], uf: &mut UnionFind) -> BTreeMap<String, String> {
    let mut class_name: BTreeMap<usize, String> = BTreeMap::new();
    for (i, v) in pre_vars.iter().enumerate() {
        let r = uf.find(i);
        let e = class_name.entry(r).or_insert_with(|| v.clone());
        if v < e {
            *e = v.clone();
        }
    }
    pre_vars.iter().enumerate().map(|(i, v)| (v.clone(), class_name[&uf.find(i)].clone())).collect()
}

impl Expansion {
    pub fn db(&self) -> GraphDb {
        self.cq.canonical_db().expect("expansions are CQs")
    }

    /// Node indices of the free tuple in `db()`.
    pub fn free_nodes(&self, g: &GraphDb) -> Vec<usize> {
        self.cq.free.iter().map(|v| g.node_id(v).expect("free variable is a node")).collect()
    }

    pub fn is_atom_related(&self, a: &str, b: &str) -> bool {
        a != b && self.atom_related.contains(&ordered(a, b))
    }

    /// Distinctness pairs for atom-injective homomorphism search.
    pub fn related_pairs(&self) -> Vec<(String, String)> {
        self.atom_related.iter().cloned().collect()
    }

    /// Identifies the variables of each block (blocks must not contain
    /// atom-related pairs). Unlisted variables stay singletons.
    pub fn quotient(&self, blocks: &[Vec<String>]) -> Result<Expansion> {
        let vars = self.cq.vars();
        let idx: BTreeMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let mut uf = UnionFind::new(vars.len());
        for b in blocks {
            for (i, x) in b.iter().enumerate() {
                let xi = *idx.get(x.as_str()).ok_or_else(|| Error::domain(format!("unknown variable {x}")))?;
                for y in &b[i + 1..] {
                    if self.is_atom_related(x, y) {
                        return Err(Error::domain(format!("cannot identify atom-related variables {x} and {y}")));
                    }
                    let yi = *idx.get(y.as_str()).ok_or_else(|| Error::domain(format!("unknown variable {y}")))?;
                    uf.union(xi, yi);
                }
            }
        }
        let rename = quotient_parts(&vars, &mut uf);
        let r = |v: &str| rename[v].clone();
        let cq = self.cq.rename(&r);
        let mut cq = dedup_atoms(cq);
        cq.name = self.cq.name.clone();
        let phi = self.phi.iter().map(|(k, v)| (k.clone(), r(v))).collect();
        let atom_paths: Vec<Vec<String>> = self.atom_paths.iter().map(|p| p.iter().map(|v| r(v)).collect()).collect();
        let atom_related = related_from_paths(&atom_paths);
        Ok(Expansion { cq, words: self.words.clone(), phi, atom_paths, atom_related })
    }
}

fn dedup_atoms(mut q: Crpq) -> Crpq {
    let mut seen = BTreeSet::new();
    q.atoms.retain(|a| seen.insert((a.source.clone(), a.regex.clone(), a.target.clone())));
    q
}

fn related_from_paths(paths: &[Vec<String>]) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    for p in paths {
        for (i, a) in p.iter().enumerate() {
            for b in &p[i + 1..] {
                if a != b {
                    out.insert(ordered(a, b));
                }
            }
        }
    }
    out
}

/// Builds the expansion of `q` for the given word per atom.
pub fn build_expansion(q: &Crpq, words: &[Word]) -> Result<Expansion> {
    if words.len() != q.atoms.len() {
        return Err(Error::domain(format!("{} words for {} atoms", words.len(), q.atoms.len())));
    }
    for (i, (a, w)) in q.atoms.iter().zip(words).enumerate() {
        if !a.nfa.accepts(w) {
            return Err(Error::domain(format!("word `{}` is not in the language of atom {i}", w.join(" "))));
        }
    }
    let mut pre_vars: Vec<String> = q.vars();
    let mut raw_paths: Vec<Vec<String>> = Vec::new();
    let mut edges: Vec<(String, String, String)> = Vec::new();
    for (i, (a, w)) in q.atoms.iter().zip(words).enumerate() {
        let mut path = vec![a.source.clone()];
        for j in 1..w.len() {
            let v = internal_var(i, j);
            pre_vars.push(v.clone());
            path.push(v);
        }
        if !w.is_empty() {
            path.push(a.target.clone());
            for (k, l) in w.iter().enumerate() {
                edges.push((path[k].clone(), l.clone(), path[k + 1].clone()));
            }
        }
        raw_paths.push(path);
    }
    let idx: BTreeMap<String, usize> = pre_vars.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
    let mut uf = UnionFind::new(pre_vars.len());
    for (a, w) in q.atoms.iter().zip(words) {
        if w.is_empty() {
            uf.union(idx[&a.source], idx[&a.target]);
        }
    }
    let phi = quotient_parts(&pre_vars, &mut uf);
    let r = |v: &str| phi[v].clone();
    let atoms: Vec<Atom> = edges.iter().map(|(s, l, t)| Atom::new(r(s), Regex::sym(l.clone()), r(t))).collect();
    let free: Vec<String> = q.free.iter().map(|v| r(v)).collect();
    let vars: BTreeSet<String> = phi.values().cloned().collect();
    let mut cq = dedup_atoms(Crpq::new(free, atoms).with_vars(vars));
    cq.name = q.name.clone();
    let atom_paths: Vec<Vec<String>> = raw_paths.iter().map(|p| p.iter().map(|v| r(v)).collect()).collect();
    let atom_related = related_from_paths(&atom_paths);
    Ok(Expansion { cq, words: words.to_vec(), phi, atom_paths, atom_related })
}

/// Lazy enumeration of expansions with every word of length at most
/// `max_len`, ordered by total word length and then lexicographically by
/// per-atom word rank (words are ranked length-lexicographically).
pub struct ExpansionIter<'q> {
    q: &'q Crpq,
    by_len: Vec<BTreeMap<usize, Vec<Word>>>,
    total: usize,
    max_total: usize,
    batch: std::vec::IntoIter<Vec<Word>>,
}

pub fn enumerate_expansions(q: &Crpq, max_len: usize) -> ExpansionIter<'_> {
    let by_len: Vec<BTreeMap<usize, Vec<Word>>> = q
        .atoms
        .iter()
        .map(|a| {
            let mut m: BTreeMap<usize, Vec<Word>> = BTreeMap::new();
            for w in a.nfa.words_up_to(max_len) {
                m.entry(w.len()).or_default().push(w);
            }
            m
        })
        .collect();
    let empty_atom = by_len.iter().any(|m| m.is_empty());
    let max_total =
        if empty_atom { 0 } else { by_len.iter().map(|m| m.keys().next_back().copied().unwrap_or(0)).sum() };
    let mut it = ExpansionIter { q, by_len, total: 0, max_total, batch: Vec::new().into_iter() };
    if !empty_atom {
        it.batch = it.make_batch(0).into_iter();
    }
    it
}

impl ExpansionIter<'_> {
    fn make_batch(&self, total: usize) -> Vec<Vec<Word>> {
        let mut out = Vec::new();
        let mut cur: Vec<Word> = Vec::new();
        self.compose(0, total, &mut cur, &mut out);
        out
    }

    fn compose(&self, atom: usize, remaining: usize, cur: &mut Vec<Word>, out: &mut Vec<Vec<Word>>) {
        if atom == self.by_len.len() {
            if remaining == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for (&len, words) in &self.by_len[atom] {
            if len > remaining {
                break;
            }
            for w in words {
                cur.push(w.clone());
                self.compose(atom + 1, remaining - len, cur, out);
                cur.pop();
            }
        }
    }
}

impl Iterator for ExpansionIter<'_> {
    type Item = Expansion;

    fn next(&mut self) -> Option<Expansion> {
        loop {
            if let Some(words) = self.batch.next() {
                return Some(build_expansion(self.q, &words).expect("enumerated words are accepted"));
            }
            if self.total >= self.max_total {
                return None;
            }
            self.total += 1;
            self.batch = self.make_batch(self.total).into_iter();
        }
    }
}

/// An expansion further quotiented by an admissible identification partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AinjExpansion {
    pub base: Expansion,
    /// Non-singleton blocks of base variables that were identified.
    pub blocks: Vec<Vec<String>>,
    pub expansion: Expansion,
}

/// All admissible partitions of the base variables as restricted-growth
/// strings, in lexicographic order of the strings.
pub fn admissible_partitions(base: &Expansion) -> Vec<Vec<Vec<String>>> {
    let vars = base.cq.vars();
    let n = vars.len();
    let conflict: Vec<Vec<bool>> =
        (0..n).map(|i| (0..n).map(|j| base.is_atom_related(&vars[i], &vars[j])).collect()).collect();
    let mut out = Vec::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    fn rec(
        i: usize,
        n: usize,
        conflict: &[Vec<bool>],
        blocks: &mut Vec<Vec<usize>>,
        vars: &[String],
        out: &mut Vec<Vec<Vec<String>>>,
    ) {
        if i == n {
            out.push(
                blocks.iter().filter(|b| b.len() > 1).map(|b| b.iter().map(|&k| vars[k].clone()).collect()).collect(),
            );
            return;
        }
        for b in 0..blocks.len() {
            if blocks[b].iter().all(|&k| !conflict[i][k]) {
                blocks[b].push(i);
                rec(i + 1, n, conflict, blocks, vars, out);
                blocks[b].pop();
            }
        }
        blocks.push(vec![i]);
        rec(i + 1, n, conflict, blocks, vars, out);
        blocks.pop();
    }
    rec(0, n, &conflict, &mut blocks, &vars, &mut out);
    out
}

/// All a-inj-expansions whose base words have length at most `max_len`.
pub fn enumerate_ainj_expansions(q: &Crpq, max_len: usize) -> impl Iterator<Item = AinjExpansion> + '_ {
    enumerate_expansions(q, max_len).flat_map(|base| {
        admissible_partitions(&base)
            .into_iter()
            .map(|blocks| {
                let expansion = base.quotient(&blocks).expect("admissible partition");
                AinjExpansion { base: base.clone(), blocks, expansion }
            })
            .collect::<Vec<_>>()
    })
}
