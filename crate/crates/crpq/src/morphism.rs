//! Homomorphism search from a CQ into a graph in four modes.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::GraphDb;
use crate::query::Crpq;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HomMode {
    Plain,
    /// Distinct variables go to distinct nodes.
    Injective,
    /// The listed variable pairs go to distinct nodes.
    AtomInjective(Vec<(String, String)>),
    /// The two endpoints of every non-loop atom go to distinct nodes.
    NonContracting,
}

/// Variable assignment into the nodes of a target graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mapping {
    pub images: BTreeMap<String, usize>,
}

impl Mapping {
    pub fn get(&self, v: &str) -> Option<usize> {
        self.images.get(v).copied()
    }

    pub fn render(&self, g: &GraphDb) -> String {
        let parts: Vec<String> = self.images.iter().map(|(v, &n)| format!("{v}->{}", g.node_name(n))).collect();
        format!("{{{}}}", parts.join(", "))
    }
}

struct Problem {
    vars: Vec<String>,
    /// `(source, label in target, target)` per atom; `None` labels never match.
    atoms: Vec<(usize, Option<usize>, usize)>,
    distinct: Vec<BTreeSet<usize>>,
}

fn build_problem(source: &Crpq, target: &GraphDb, mode: &HomMode) -> Result<Problem> {
    let vars = source.vars();
    let idx: BTreeMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    let mut atoms = Vec::new();
    for a in &source.atoms {
        let l = a.single_letter().ok_or_else(|| {
            Error::domain(format!("source is not a CQ: atom {} -[{}]-> {}", a.source, a.regex, a.target))
        })?;
        atoms.push((idx[a.source.as_str()], target.label_id(l), idx[a.target.as_str()]));
    }
    let n = vars.len();
    let mut distinct = vec![BTreeSet::new(); n];
    let mut add = |i: usize, j: usize| {
        if i != j {
            distinct[i].insert(j);
            distinct[j].insert(i);
        }
    };
    match mode {
        HomMode::Plain => {}
        HomMode::Injective => {
            for i in 0..n {
                for j in i + 1..n {
                    add(i, j);
                }
            }
        }
        HomMode::AtomInjective(pairs) => {
            for (x, y) in pairs {
                match (idx.get(x.as_str()), idx.get(y.as_str())) {
                    (Some(&i), Some(&j)) => add(i, j),
                    _ => return Err(Error::domain(format!("distinctness pair ({x},{y}) names unknown variables"))),
                }
            }
        }
        HomMode::NonContracting => {
            for &(s, _, t) in &atoms {
                add(s, t);
            }
        }
    }
    Ok(Problem { vars, atoms, distinct })
}

/// Complete backtracking search for a homomorphism from the CQ `source` into
/// `target`, optionally sending the free tuple to `anchor`.
pub fn find_hom(source: &Crpq, target: &GraphDb, anchor: Option<&[usize]>, mode: &HomMode) -> Result<Option<Mapping>> {
    let p = build_problem(source, target, mode)?;
    if p.atoms.iter().any(|a| a.1.is_none()) {
        return Ok(None);
    }
    let n = p.vars.len();
    let mut fixed: Vec<Option<usize>> = vec![None; n];
    if let Some(anchor) = anchor {
        if anchor.len() != source.free.len() {
            return Err(Error::domain("anchor arity differs from the free tuple"));
        }
        for (v, &node) in source.free.iter().zip(anchor) {
            let i = p.vars.iter().position(|x| x == v).expect("free variable is a variable");
            match fixed[i] {
                Some(prev) if prev != node => return Ok(None),
                _ => fixed[i] = Some(node),
            }
        }
    }
    let order = search_order(&p, &fixed);
    let mut assign = vec![usize::MAX; n];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, &(s, _, t)) in p.atoms.iter().enumerate() {
        incident[s].push(k);
        if t != s {
            incident[t].push(k);
        }
    }
    let mut pos_of = vec![0; n];
    for (k, &v) in order.iter().enumerate() {
        pos_of[v] = k;
    }
    let found = backtrack(&p, target, &order, &pos_of, &incident, &fixed, 0, &mut assign);
    Ok(found.then(|| Mapping { images: p.vars.iter().cloned().zip(assign.iter().copied()).collect() }))
}

fn search_order(p: &Problem, fixed: &[Option<usize>]) -> Vec<usize> {
    let n = p.vars.len();
    let mut degree = vec![0usize; n];
    let mut nbrs: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(s, _, t) in &p.atoms {
        degree[s] += 1;
        degree[t] += 1;
        nbrs[s].insert(t);
        nbrs[t].insert(s);
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| fixed[i].is_some()).collect();
    let mut placed: BTreeSet<usize> = order.iter().copied().collect();
    while order.len() < n {
        let best = (0..n)
            .filter(|i| !placed.contains(i))
            .max_by(|&a, &b| {
                let ca = nbrs[a].iter().filter(|x| placed.contains(x)).count();
                let cb = nbrs[b].iter().filter(|x| placed.contains(x)).count();
                (ca, degree[a]).cmp(&(cb, degree[b])).then_with(|| p.vars[b].cmp(&p.vars[a]))
            })
            .expect("some variable is unplaced");
        order.push(best);
        placed.insert(best);
    }
    order
}

#[allow(clippy::too_many_arguments)]
fn backtrack(
    p: &Problem,
    g: &GraphDb,
    order: &[usize],
    pos_of: &[usize],
    incident: &[Vec<usize>],
    fixed: &[Option<usize>],
    depth: usize,
    assign: &mut Vec<usize>,
) -> bool {
    if depth == order.len() {
        return true;
    }
    let v = order[depth];
    let candidates: Vec<usize> = match fixed[v] {
        Some(node) => vec![node],
        None => {
            // Candidates from one already-assigned neighbour when possible.
            let mut cands: Option<Vec<usize>> = None;
            for &k in &incident[v] {
                let (s, l, t) = p.atoms[k];
                let l = l.expect("labels checked");
                if s == v && t != v && pos_of[t] < depth {
                    cands = Some(g.in_edges(assign[t]).iter().filter(|e| e.0 == l).map(|e| e.1).collect());
                    break;
                }
                if t == v && s != v && pos_of[s] < depth {
                    cands = Some(g.out_edges(assign[s]).iter().filter(|e| e.0 == l).map(|e| e.1).collect());
                    break;
                }
            }
            cands.unwrap_or_else(|| (0..g.node_count()).collect())
        }
    };
    for c in candidates {
        if p.distinct[v].iter().any(|&w| pos_of[w] < depth && assign[w] == c) {
            continue;
        }
        assign[v] = c;
        let ok = incident[v].iter().all(|&k| {
            let (s, l, t) = p.atoms[k];
            let other = if s == v { t } else { s };
            if other != v && pos_of[other] > depth {
                return true;
            }
            g.has_edge(assign[s], l.expect("labels checked"), assign[t])
        });
        if ok && backtrack(p, g, order, pos_of, incident, fixed, depth + 1, assign) {
            return true;
        }
    }
    assign[v] = usize::MAX;
    false
}

/// True iff no atom with distinct endpoints is collapsed by `m`.
pub fn is_non_contracting(m: &Mapping, source: &Crpq) -> bool {
    source.atoms.iter().filter(|a| a.source != a.target).all(|a| m.get(&a.source) != m.get(&a.target))
}

/// Checks that `m` is a homomorphism satisfying `mode` (used to validate witnesses).
pub fn check_hom(source: &Crpq, target: &GraphDb, m: &Mapping, mode: &HomMode) -> Result<bool> {
    let p = build_problem(source, target, mode)?;
    let img: Vec<Option<usize>> = p.vars.iter().map(|v| m.get(v)).collect();
    if img.iter().any(Option::is_none) {
        return Ok(false);
    }
    let img: Vec<usize> = img.into_iter().flatten().collect();
    let edges_ok = p.atoms.iter().all(|&(s, l, t)| l.is_some_and(|l| target.has_edge(img[s], l, img[t])));
    let distinct_ok = (0..img.len()).all(|i| p.distinct[i].iter().all(|&j| img[i] != img[j]));
    Ok(edges_ok && distinct_ok)
}
