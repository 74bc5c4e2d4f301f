//! Exact containment under query-injective semantics. Every expansion of Q1
//! is summarised per atom by the partial runs of the joint Q2 automaton its
//! word carries (an abstraction), and every way of embedding an expansion of
//! Q2 injectively is summarised by a morphism type into a skeleton of Q1 in
//! which each atom is a path of length three. An abstraction is a
//! counterexample iff no morphism type is compatible with it.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::ops::Range;

use fixedbitset::FixedBitSet;

use crate::containment::{validate_witness, Verdict, Witness};
use crate::error::{Error, Result};
use crate::eval::{Limits, Semantics};
use crate::expansion::{build_expansion, Word};
use crate::nfa::Nfa;
use crate::query::{eliminate_epsilon, merge_chain_atoms, Atom, Crpq};
use crate::regex::Regex;

/// Cap on scan states explored per atom when computing achievable profiles.
pub const PROFILE_STATE_CAP: usize = 500_000;
/// Cap on morphism types enumerated per pair of disjuncts.
pub const MORPHISM_TYPE_CAP: usize = 2_000_000;
/// Cap on abstractions checked per left disjunct.
pub const ABSTRACTION_CAP: u64 = 5_000_000;

/// Disjoint union of the completed and co-completed automata of the Q2 atoms.
#[derive(Clone, Debug)]
pub struct JointNfa {
    pub nfa: Nfa,
    /// State range of each Q2 atom, in atom order.
    pub blocks: Vec<Range<usize>>,
}

impl JointNfa {
    pub fn build(atoms: &[Atom], alphabet: &BTreeSet<String>) -> Result<JointNfa> {
        let mut letters: BTreeSet<String> = alphabet.clone();
        for a in atoms {
            if a.nfa.accepts_epsilon() {
                return Err(Error::domain("joint automaton needs epsilon-free atoms"));
            }
            letters.extend(a.nfa.alphabet().iter().cloned());
        }
        let letters: Vec<String> = letters.into_iter().collect();
        let parts: Vec<Nfa> = atoms.iter().map(|a| a.nfa.complete_cocomplete(&letters)).collect();
        let total = parts.iter().map(Nfa::state_count).sum();
        let mut nfa = Nfa::new(letters, total);
        let mut blocks = Vec::new();
        let mut offset = 0;
        for p in &parts {
            for (s, a, t) in p.transitions() {
                let b = nfa.letter(&p.alphabet()[a]).expect("shared alphabet");
                nfa.add_transition(offset + s, b, offset + t);
            }
            for q in 0..p.state_count() {
                nfa.set_initial(offset + q, p.is_initial(q));
                nfa.set_final(offset + q, p.is_final(q));
            }
            blocks.push(offset..offset + p.state_count());
            offset += p.state_count();
        }
        Ok(JointNfa { nfa, blocks })
    }

    pub fn state_count(&self) -> usize {
        self.nfa.state_count()
    }

    pub fn block_of(&self, q: usize) -> usize {
        self.blocks.iter().position(|b| b.contains(&q)).expect("state belongs to a block")
    }

    pub fn initials(&self, block: usize) -> Vec<usize> {
        self.blocks[block].clone().filter(|&q| self.nfa.is_initial(q)).collect()
    }

    pub fn finals(&self, block: usize) -> Vec<usize> {
        self.blocks[block].clone().filter(|&q| self.nfa.is_final(q)).collect()
    }

    pub fn state_name(&self, q: usize) -> String {
        let b = self.block_of(q);
        format!("A{b}.{}", q - self.blocks[b].start)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Marker {
    /// A partial run from `q` to `q'` reads the whole word.
    FullRun(usize, usize),
    /// `w = u v`, `u, v` nonempty, `q` reaches a final state on `u` and an
    /// initial state reaches `q'` on `v`.
    Split(usize, usize),
    /// As `Split` with a nonempty unconstrained middle: `w = u s v`.
    SplitGap(usize, usize),
    /// `w = u s v` with `u, s, v` nonempty and a run from `q` to `q'` on `s`.
    Infix(usize, usize),
}

/// Marker set of one word, stored as four relations over joint states, plus
/// the word length capped at three.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Profile {
    n: usize,
    full: FixedBitSet,
    split: FixedBitSet,
    gap: FixedBitSet,
    infix: FixedBitSet,
    pub len_class: u8,
}

impl Profile {
    fn empty(n: usize, len_class: u8) -> Self {
        let z = FixedBitSet::with_capacity(n * n);
        Profile { n, full: z.clone(), split: z.clone(), gap: z.clone(), infix: z, len_class }
    }

    pub fn contains(&self, m: Marker) -> bool {
        let (set, q, r) = match m {
            Marker::FullRun(q, r) => (&self.full, q, r),
            Marker::Split(q, r) => (&self.split, q, r),
            Marker::SplitGap(q, r) => (&self.gap, q, r),
            Marker::Infix(q, r) => (&self.infix, q, r),
        };
        q < self.n && r < self.n && set.contains(q * self.n + r)
    }

    pub fn markers(&self) -> Vec<Marker> {
        let pairs = |s: &FixedBitSet| s.ones().map(|i| (i / self.n, i % self.n)).collect::<Vec<_>>();
        let mut out: Vec<Marker> = Vec::new();
        out.extend(pairs(&self.full).into_iter().map(|(q, r)| Marker::FullRun(q, r)));
        out.extend(pairs(&self.split).into_iter().map(|(q, r)| Marker::Split(q, r)));
        out.extend(pairs(&self.gap).into_iter().map(|(q, r)| Marker::SplitGap(q, r)));
        out.extend(pairs(&self.infix).into_iter().map(|(q, r)| Marker::Infix(q, r)));
        out
    }

    pub fn render(&self, joint: &JointNfa) -> String {
        let s = |q: usize| joint.state_name(q);
        let parts: Vec<String> = self
            .markers()
            .into_iter()
            .map(|m| match m {
                Marker::FullRun(q, r) => format!("<{}-{}>", s(q), s(r)),
                Marker::Split(q, r) => format!("<{}-|-{}>", s(q), s(r)),
                Marker::SplitGap(q, r) => format!("<{}-|..|-{}>", s(q), s(r)),
                Marker::Infix(q, r) => format!("<..{}-{}..>", s(q), s(r)),
            })
            .collect();
        format!("len>={} {{{}}}", self.len_class, parts.join(", "))
    }
}

type Rel = Vec<FixedBitSet>;

/// State of the left-to-right profile scan after reading a prefix `p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Scan {
    /// Run relation of `p`.
    r: Rel,
    /// Split pairs of `p`.
    t: Rel,
    /// States reaching a final state on a nonempty prefix of `p`.
    c: FixedBitSet,
    /// SplitGap pairs of `p`.
    d: Rel,
    /// Runs on nonempty suffixes of `p` that do not start at position 0.
    m: Rel,
    /// Infix pairs of `p`.
    n: Rel,
    len: u8,
}

impl Scan {
    fn start(n: usize) -> Scan {
        let empty = vec![FixedBitSet::with_capacity(n); n];
        let mut r = empty.clone();
        for (q, row) in r.iter_mut().enumerate() {
            row.insert(q);
        }
        Scan {
            r,
            t: empty.clone(),
            c: FixedBitSet::with_capacity(n),
            d: empty.clone(),
            m: empty.clone(),
            n: empty,
            len: 0,
        }
    }

    fn step(&self, joint: &Nfa, a: usize) -> Scan {
        let n = joint.state_count();
        let stepped = |rel: &Rel| -> Rel { rel.iter().map(|row| joint.step(row, a)).collect() };
        let from_initial = joint.step(joint.initial(), a);
        let nonempty = self.len >= 1;
        let mut r = stepped(&self.r);
        let mut t = stepped(&self.t);
        let mut d = stepped(&self.d);
        let mut m = stepped(&self.m);
        let mut n_rel = self.n.clone();
        let mut c = self.c.clone();
        for q in 0..n {
            n_rel[q].union_with(&self.m[q]);
            if self.c.contains(q) {
                d[q].union_with(&from_initial);
            }
            if nonempty {
                if !self.r[q].is_disjoint(joint.finals()) {
                    t[q].union_with(&from_initial);
                    c.insert(q);
                }
                for &s in joint.successors(q, a) {
                    m[q].insert(s);
                }
            }
        }
        r.shrink_to_fit();
        Scan { r, t, c, d, m, n: n_rel, len: (self.len + 1).min(3) }
    }

    fn profile(&self) -> Profile {
        let n = self.r.len();
        let flat = |rel: &Rel| {
            let mut s = FixedBitSet::with_capacity(n * n);
            for (q, row) in rel.iter().enumerate() {
                for r in row.ones() {
                    s.insert(q * n + r);
                }
            }
            s
        };
        Profile {
            n,
            full: flat(&self.r),
            split: flat(&self.t),
            gap: flat(&self.d),
            infix: flat(&self.n),
            len_class: self.len,
        }
    }
}

fn joint_letters<S: AsRef<str>>(joint: &JointNfa, w: &[S]) -> Result<Vec<usize>> {
    w.iter()
        .map(|l| {
            joint
                .nfa
                .letter(l.as_ref())
                .ok_or_else(|| Error::domain(format!("letter {} is outside the joint alphabet", l.as_ref())))
        })
        .collect()
}

/// Marker set of a nonempty word by a single left-to-right scan.
pub fn profile_of_word<S: AsRef<str>>(w: &[S], joint: &JointNfa) -> Result<Profile> {
    if w.is_empty() {
        return Err(Error::domain("profiles are defined for nonempty words"));
    }
    let mut scan = Scan::start(joint.state_count());
    for a in joint_letters(joint, w)? {
        scan = scan.step(&joint.nfa, a);
    }
    Ok(scan.profile())
}

/// Marker set of a nonempty word straight from the definitions, enumerating
/// every decomposition.
pub fn profile_by_definition<S: AsRef<str>>(w: &[S], joint: &JointNfa) -> Result<Profile> {
    if w.is_empty() {
        return Err(Error::domain("profiles are defined for nonempty words"));
    }
    let nfa = &joint.nfa;
    let n = nfa.state_count();
    let letters = joint_letters(joint, w)?;
    let run = |from: &FixedBitSet, part: &[usize]| part.iter().fold(from.clone(), |s, &a| nfa.step(&s, a));
    let single = |q: usize| {
        let mut s = nfa.empty_set();
        s.insert(q);
        s
    };
    let len = letters.len();
    let mut p = Profile::empty(n, len.min(3) as u8);
    for q in 0..n {
        let from_q = |i: usize, j: usize| run(&single(q), &letters[i..j]);
        for r in from_q(0, len).ones() {
            p.full.insert(q * n + r);
        }
        for i in 1..len {
            if !from_q(0, i).is_disjoint(nfa.finals()) {
                for r in run(nfa.initial(), &letters[i..]).ones() {
                    p.split.insert(q * n + r);
                }
                for j in i + 1..len {
                    for r in run(nfa.initial(), &letters[j..]).ones() {
                        p.gap.insert(q * n + r);
                    }
                }
            }
            for j in i + 1..len {
                for r in from_q(i, j).ones() {
                    p.infix.insert(q * n + r);
                }
            }
        }
    }
    Ok(p)
}

/// Every profile of a word of `atom`, each with a shortest witness word, by
/// breadth-first search over the scan states paired with subsets of `atom`.
pub fn achievable_profiles(atom: &Nfa, joint: &JointNfa, cap: usize) -> Result<Vec<(Profile, Word)>> {
    if atom.accepts_epsilon() {
        return Err(Error::domain("achievable profiles need an epsilon-free atom"));
    }
    let letters: Vec<(usize, usize)> = (0..atom.alphabet().len())
        .map(|a| joint_letters(joint, &[&atom.alphabet()[a]]).map(|j| (a, j[0])))
        .collect::<Result<_>>()?;
    let start = (Scan::start(joint.state_count()), atom.initial().clone());
    let mut index: HashMap<(Scan, FixedBitSet), usize> = HashMap::new();
    let mut nodes: Vec<(Scan, FixedBitSet)> = vec![start.clone()];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None];
    index.insert(start, 0);
    let mut found: HashMap<Profile, Word> = HashMap::new();
    let mut order: Vec<Profile> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        let (scan, set) = nodes[id].clone();
        if scan.len >= 1 && !set.is_disjoint(atom.finals()) {
            let p = scan.profile();
            if !found.contains_key(&p) {
                let mut word = Vec::new();
                let mut cur = id;
                while let Some((prev, a)) = parent[cur] {
                    word.push(atom.alphabet()[a].clone());
                    cur = prev;
                }
                word.reverse();
                found.insert(p.clone(), word);
                order.push(p);
            }
        }
        for &(a, j) in &letters {
            let next_set = atom.step(&set, a);
            if next_set.is_clear() || next_set.is_disjoint(&atom.coaccessible()) {
                continue;
            }
            let key = (scan.step(&joint.nfa, j), next_set);
            if !index.contains_key(&key) {
                if nodes.len() >= cap {
                    return Err(Error::resource(format!("profile search exceeded {cap} states")));
                }
                index.insert(key.clone(), nodes.len());
                nodes.push(key);
                parent.push(Some((id, a)));
                queue.push_back(nodes.len() - 1);
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|p| {
            let w = found.remove(&p).expect("recorded profile");
            (p, w)
        })
        .collect())
}

/// Choice of one achievable profile per atom of Q1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Abstraction {
    pub choice: Vec<usize>,
}

/// Cartesian product of per-atom profile lists in odometer order (first atom
/// varies fastest). A query without atoms has exactly one abstraction.
pub fn enumerate_abstractions(counts: &[usize]) -> impl Iterator<Item = Abstraction> + '_ {
    let mut next = if counts.contains(&0) { None } else { Some(vec![0usize; counts.len()]) };
    std::iter::from_fn(move || {
        let cur = next.take()?;
        let mut succ = cur.clone();
        let mut k = 0;
        next = loop {
            if k == succ.len() {
                break None;
            }
            succ[k] += 1;
            if succ[k] < counts[k] {
                break Some(succ);
            }
            succ[k] = 0;
            k += 1;
        };
        Some(Abstraction { choice: cur })
    })
}

/// Q1 with every atom replaced by a path of length three.
#[derive(Clone, Debug)]
pub struct Skeleton {
    pub vars: Vec<String>,
    /// Nodes `[source, first internal, second internal, target]` per atom.
    pub atoms: Vec<[usize; 4]>,
    pub free: Vec<usize>,
    out: Vec<Vec<(usize, usize)>>,
}

impl Skeleton {
    pub fn new(q1: &Crpq) -> Skeleton {
        let vars = q1.vars();
        let idx = |v: &str| vars.iter().position(|x| x == v).expect("atom variable");
        let nv = vars.len();
        let mut atoms = Vec::new();
        let mut out = vec![Vec::new(); nv + 2 * q1.atoms.len()];
        for (i, a) in q1.atoms.iter().enumerate() {
            let g = [idx(&a.source), nv + 2 * i, nv + 2 * i + 1, idx(&a.target)];
            for k in 0..3 {
                out[g[k]].push((3 * i + k, g[k + 1]));
            }
            atoms.push(g);
        }
        let free = q1.free.iter().map(|v| idx(v)).collect();
        Skeleton { vars, atoms, free, out }
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    pub fn is_var(&self, g: usize) -> bool {
        g < self.vars.len()
    }

    pub fn node_name(&self, g: usize) -> String {
        if self.is_var(g) {
            self.vars[g].clone()
        } else {
            let k = g - self.vars.len();
            format!("A{}.{}", k / 2, k % 2 + 1)
        }
    }

    fn edge_between(&self, s: usize, t: usize) -> usize {
        self.out[s].iter().find(|e| e.1 == t).expect("consecutive path nodes are adjacent").0
    }
}

/// An injective placement of Q2 into the skeleton: an image per Q2 variable
/// and a simple path (a simple cycle for loop atoms) per Q2 atom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MorphismType {
    pub images: Vec<usize>,
    pub paths: Vec<Vec<usize>>,
}

impl MorphismType {
    pub fn render(&self, q2: &Crpq, g: &Skeleton) -> String {
        let vars = q2.vars();
        let imgs: Vec<String> =
            vars.iter().zip(&self.images).map(|(v, &n)| format!("{v}->{}", g.node_name(n))).collect();
        let paths: Vec<String> =
            self.paths.iter().map(|p| p.iter().map(|&n| g.node_name(n)).collect::<Vec<_>>().join(" ")).collect();
        format!("{{{}}} paths [{}]", imgs.join(", "), paths.join("; "))
    }
}

struct TypeSearch<'a> {
    g: &'a Skeleton,
    order: Vec<usize>,
    /// Atoms routed once the variable at each order position is placed.
    routable: Vec<Vec<usize>>,
    ends: Vec<(usize, usize)>,
    forced: Vec<Option<usize>>,
    images: Vec<usize>,
    paths: Vec<Vec<usize>>,
    used_nodes: FixedBitSet,
    used_edges: FixedBitSet,
    out: Vec<MorphismType>,
    cap: usize,
}

impl TypeSearch<'_> {
    fn place(&mut self, k: usize) -> Result<()> {
        if k == self.order.len() {
            if self.out.len() >= self.cap {
                return Err(Error::resource(format!("more than {} morphism types", self.cap)));
            }
            self.out.push(MorphismType { images: self.images.clone(), paths: self.paths.clone() });
            return Ok(());
        }
        let v = self.order[k];
        let cands: Vec<usize> = match self.forced[v] {
            Some(n) => vec![n],
            None => (0..self.g.node_count()).collect(),
        };
        for c in cands {
            if self.used_nodes.contains(c) {
                continue;
            }
            self.used_nodes.insert(c);
            self.images[v] = c;
            self.route(k, 0)?;
            self.used_nodes.set(c, false);
        }
        Ok(())
    }

    fn route(&mut self, k: usize, j: usize) -> Result<()> {
        if j == self.routable[k].len() {
            return self.place(k + 1);
        }
        let atom = self.routable[k][j];
        let (s, t) = self.ends[atom];
        let (from, to) = (self.images[s], self.images[t]);
        let mut path = vec![from];
        self.extend_path(k, j, atom, to, &mut path)
    }

    fn extend_path(&mut self, k: usize, j: usize, atom: usize, to: usize, path: &mut Vec<usize>) -> Result<()> {
        let last = *path.last().expect("path starts at the source");
        for (e, next) in self.g.out[last].clone() {
            if self.used_edges.contains(e) {
                continue;
            }
            if next == to {
                self.used_edges.insert(e);
                path.push(next);
                self.paths[atom] = path.clone();
                self.route(k, j + 1)?;
                path.pop();
                self.used_edges.set(e, false);
            } else if !self.used_nodes.contains(next) {
                self.used_edges.insert(e);
                self.used_nodes.insert(next);
                path.push(next);
                self.extend_path(k, j, atom, to, path)?;
                path.pop();
                self.used_nodes.set(next, false);
                self.used_edges.set(e, false);
            }
        }
        Ok(())
    }
}

/// All morphism types from `q2` into the skeleton of `q1`, free variables
/// mapped positionally.
pub fn enumerate_morphism_types(q1: &Crpq, q2: &Crpq, cap: usize) -> Result<Vec<MorphismType>> {
    if q1.arity() != q2.arity() {
        return Err(Error::domain("arity mismatch"));
    }
    let g = Skeleton::new(q1);
    let vars = q2.vars();
    let idx = |v: &str| vars.iter().position(|x| x == v).expect("atom variable");
    let mut forced: Vec<Option<usize>> = vec![None; vars.len()];
    for (v, &node) in q2.free.iter().zip(&g.free) {
        let i = idx(v);
        match forced[i] {
            Some(prev) if prev != node => return Ok(Vec::new()),
            _ => forced[i] = Some(node),
        }
    }
    if forced.iter().flatten().collect::<BTreeSet<_>>().len() != forced.iter().flatten().count() {
        return Ok(Vec::new());
    }
    let ends: Vec<(usize, usize)> = q2.atoms.iter().map(|a| (idx(&a.source), idx(&a.target))).collect();
    // Free variables first, then by adjacency to placed variables.
    let mut order: Vec<usize> = (0..vars.len()).filter(|&i| forced[i].is_some()).collect();
    while order.len() < vars.len() {
        let next = (0..vars.len())
            .filter(|i| !order.contains(i))
            .max_by_key(|&i| {
                let linked = ends
                    .iter()
                    .filter(|&&(s, t)| (s == i && order.contains(&t)) || (t == i && order.contains(&s)))
                    .count();
                (linked, std::cmp::Reverse(i))
            })
            .expect("unplaced variable");
        order.push(next);
    }
    let pos: Vec<usize> = {
        let mut p = vec![0; vars.len()];
        for (k, &v) in order.iter().enumerate() {
            p[v] = k;
        }
        p
    };
    let mut routable = vec![Vec::new(); order.len()];
    for (a, &(s, t)) in ends.iter().enumerate() {
        routable[pos[s].max(pos[t])].push(a);
    }
    let mut search = TypeSearch {
        g: &g,
        order,
        routable,
        ends,
        forced,
        images: vec![usize::MAX; vars.len()],
        paths: vec![Vec::new(); q2.atoms.len()],
        used_nodes: FixedBitSet::with_capacity(g.node_count()),
        used_edges: FixedBitSet::with_capacity(3 * q1.atoms.len()),
        out: Vec::new(),
        cap,
    };
    search.place(0)?;
    Ok(search.out)
}

/// Where a state constraint comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StateSel {
    /// The state chosen for an internal path node.
    Lambda(usize),
    Initials(usize),
    Finals(usize),
    Any,
}

/// Condition on the profile of one Q1 atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Req {
    Full(StateSel, StateSel),
    Split(StateSel, StateSel),
    Gap(StateSel, StateSel),
    Infix(usize),
    MinLen(u8),
}

/// The conditions a morphism type imposes, with the block of every internal
/// node whose state is chosen.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct System {
    pub domains: Vec<usize>,
    pub reqs: Vec<(usize, Req)>,
}

/// Conditions of a morphism type, with Q2 atom `i` using joint block
/// `block_offset + i`. `None` for placements no injective embedding of a
/// normalized connected Q2 can take (three constrained parts on one atom).
pub fn requirements(mt: &MorphismType, g: &Skeleton, block_offset: usize) -> Option<System> {
    let mut lambda: HashMap<(usize, usize), usize> = HashMap::new();
    let mut domains = Vec::new();
    for (p, path) in mt.paths.iter().enumerate() {
        for (k, &node) in path.iter().enumerate().take(path.len() - 1).skip(1) {
            if g.is_var(node) {
                lambda.insert((p, k), domains.len());
                domains.push(block_offset + p);
            }
        }
    }
    let mut edge_user: HashMap<usize, (usize, usize)> = HashMap::new();
    for (p, path) in mt.paths.iter().enumerate() {
        for k in 0..path.len() - 1 {
            edge_user.insert(g.edge_between(path[k], path[k + 1]), (p, k));
        }
    }
    let var_nodes: BTreeSet<usize> = mt.images.iter().copied().collect();
    let start = |p: usize, k: usize| {
        if k == 0 {
            StateSel::Initials(block_offset + p)
        } else {
            StateSel::Lambda(lambda[&(p, k)])
        }
    };
    let end = |p: usize, k: usize| {
        if k == mt.paths[p].len() - 1 {
            StateSel::Finals(block_offset + p)
        } else {
            StateSel::Lambda(lambda[&(p, k)])
        }
    };
    let mut reqs = Vec::new();
    for (i, nodes) in g.atoms.iter().enumerate() {
        let used: Vec<Option<(usize, usize)>> = (0..3).map(|k| edge_user.get(&(3 * i + k)).copied()).collect();
        let left = used[0].map(|(p, k)| start(p, k));
        let right = used[2].map(|(p, k)| end(p, k + 1));
        let (v1, v2) = (var_nodes.contains(&nodes[1]), var_nodes.contains(&nodes[2]));
        let req = match (v1, v2) {
            (false, false) => match (left, right) {
                (None, None) => None,
                (Some(l), Some(r)) => Some(Req::Full(l, r)),
                _ => unreachable!("a path through an internal node uses all three edges"),
            },
            (true, false) | (false, true) => match (left, right) {
                (None, None) => Some(Req::MinLen(2)),
                (l, r) => Some(Req::Split(l.unwrap_or(StateSel::Any), r.unwrap_or(StateSel::Any))),
            },
            (true, true) => match (used[1], left, right) {
                (Some((p, _)), None, None) => Some(Req::Infix(block_offset + p)),
                (Some(_), _, _) => return None,
                (None, None, None) => Some(Req::MinLen(3)),
                (None, l, r) => Some(Req::Gap(l.unwrap_or(StateSel::Any), r.unwrap_or(StateSel::Any))),
            },
        };
        if let Some(r) = req {
            reqs.push((i, r));
        }
    }
    Some(System { domains, reqs })
}

fn selected_states(s: StateSel, joint: &JointNfa, lambda: &[usize]) -> Vec<usize> {
    match s {
        StateSel::Lambda(i) => vec![lambda[i]],
        StateSel::Initials(b) => joint.initials(b),
        StateSel::Finals(b) => joint.finals(b),
        StateSel::Any => (0..joint.state_count()).collect(),
    }
}

fn holds(req: &Req, p: &Profile, joint: &JointNfa, lambda: &[usize]) -> bool {
    let pair = |mk: fn(usize, usize) -> Marker, a: StateSel, b: StateSel| {
        let (xs, ys) = (selected_states(a, joint, lambda), selected_states(b, joint, lambda));
        xs.iter().any(|&x| ys.iter().any(|&y| p.contains(mk(x, y))))
    };
    match *req {
        Req::Full(a, b) => pair(Marker::FullRun, a, b),
        Req::Split(a, b) => pair(Marker::Split, a, b),
        Req::Gap(a, b) => pair(Marker::SplitGap, a, b),
        Req::Infix(blk) => pair(Marker::Infix, StateSel::Initials(blk), StateSel::Finals(blk)),
        Req::MinLen(k) => p.len_class >= k,
    }
}

fn max_lambda(req: &Req) -> Option<usize> {
    let l = |s: &StateSel| if let StateSel::Lambda(i) = s { Some(*i) } else { None };
    match req {
        Req::Full(a, b) | Req::Split(a, b) | Req::Gap(a, b) => l(a).max(l(b)),
        _ => None,
    }
}

/// True iff some choice of states for the internal nodes satisfies every
/// condition against the profiles of `abstraction`.
pub fn is_compatible(sys: &System, profiles: &[&Profile], joint: &JointNfa) -> bool {
    let n = sys.domains.len();
    let mut by_last: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for (r, (_, req)) in sys.reqs.iter().enumerate() {
        by_last[max_lambda(req).map_or(0, |i| i + 1)].push(r);
    }
    let ok = |r: usize, lambda: &[usize]| {
        let (atom, req) = &sys.reqs[r];
        holds(req, profiles[*atom], joint, lambda)
    };
    let mut lambda = vec![0usize; n];
    if !by_last[0].iter().all(|&r| ok(r, &lambda)) {
        return false;
    }
    fn rec(
        i: usize,
        sys: &System,
        joint: &JointNfa,
        by_last: &[Vec<usize>],
        lambda: &mut Vec<usize>,
        ok: &dyn Fn(usize, &[usize]) -> bool,
    ) -> bool {
        if i == sys.domains.len() {
            return true;
        }
        for q in joint.blocks[sys.domains[i]].clone() {
            lambda[i] = q;
            if by_last[i + 1].iter().all(|&r| ok(r, lambda)) && rec(i + 1, sys, joint, by_last, lambda, ok) {
                return true;
            }
        }
        false
    }
    rec(0, sys, joint, &by_last, &mut lambda, &ok)
}

/// Replaces `x -[L]-> y -[L']-> x` through a non-free `y` with no other atoms
/// by the loop `x -[L L']-> x`.
pub fn fold_two_cycles(q: &Crpq) -> Crpq {
    let mut cur = q.clone();
    'outer: loop {
        for y in cur.vars() {
            if cur.free.contains(&y) {
                continue;
            }
            let touching: Vec<usize> =
                (0..cur.atoms.len()).filter(|&i| cur.atoms[i].source == y || cur.atoms[i].target == y).collect();
            if touching.len() != 2 {
                continue;
            }
            let (i, o) = if cur.atoms[touching[0]].target == y {
                (touching[0], touching[1])
            } else {
                (touching[1], touching[0])
            };
            let (a, b) = (&cur.atoms[i], &cur.atoms[o]);
            if a.target != y || b.source != y || a.source == y || b.target != a.source {
                continue;
            }
            let x = a.source.clone();
            let merged = Atom::new(x.clone(), Regex::concat(a.regex.clone(), b.regex.clone()), x);
            let (first, second) = (i.min(o), i.max(o));
            cur.atoms[first] = merged;
            cur.atoms.remove(second);
            cur.vars.remove(&y);
            continue 'outer;
        }
        return cur;
    }
}

/// Chain merging and two-cycle folding to a fixpoint.
pub fn normalize_right(q: &Crpq) -> Crpq {
    let mut cur = q.clone();
    loop {
        let next = fold_two_cycles(&merge_chain_atoms(&cur));
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// One epsilon-free disjunct of Q1 with the original atoms it keeps. Atoms
/// listed in `fixed` were merged into a parallel single-letter edge and read
/// that letter; all other original atoms read the empty word.
#[derive(Clone)]
struct LeftDisjunct {
    q: Crpq,
    origin: Vec<usize>,
    fixed: Vec<(usize, Word)>,
    total: usize,
}

/// First pair of parallel atoms that share a single-letter word.
fn clashing_pair(q: &Crpq) -> Option<(usize, usize, BTreeSet<String>)> {
    for (i, a) in q.atoms.iter().enumerate() {
        for (j, b) in q.atoms.iter().enumerate().skip(i + 1) {
            if a.source != b.source || a.target != b.target {
                continue;
            }
            let common: BTreeSet<String> =
                a.regex.single_letters().intersection(&b.regex.single_letters()).cloned().collect();
            if !common.is_empty() {
                return Some((i, j, common));
            }
        }
    }
    None
}

/// Case split of a left disjunct until no two parallel atoms share a
/// single-letter word: a clashing atom reads either one letter or a word of
/// length at least two, and parallel atoms reading the same letter are one edge.
fn split_parallel_letters(d: LeftDisjunct, cap: usize, out: &mut Vec<LeftDisjunct>) -> Result<()> {
    let mut d = d;
    'dedup: loop {
        for i in 0..d.q.atoms.len() {
            for j in i + 1..d.q.atoms.len() {
                let (a, b) = (&d.q.atoms[i], &d.q.atoms[j]);
                if a.source == b.source && a.target == b.target && a.regex == b.regex {
                    if let Regex::Sym(c) = &a.regex {
                        let c = c.clone();
                        d.q.atoms.remove(j);
                        d.fixed.push((d.origin.remove(j), vec![c]));
                        continue 'dedup;
                    }
                }
            }
        }
        break;
    }
    let Some((i, j, _)) = clashing_pair(&d.q) else {
        if out.len() >= cap {
            return Err(Error::resource(format!("parallel-letter case split exceeds {cap} disjuncts")));
        }
        out.push(d);
        return Ok(());
    };
    let k = if matches!(d.q.atoms[i].regex, Regex::Sym(_)) { j } else { i };
    let atom = d.q.atoms[k].clone();
    let mut choices: Vec<Regex> = atom.regex.single_letters().into_iter().map(Regex::sym).collect();
    choices.extend(atom.regex.long_part());
    for r in choices {
        let mut next = d.clone();
        next.q.atoms[k] = Atom::new(atom.source.clone(), r, atom.target.clone());
        split_parallel_letters(next, cap, out)?;
    }
    Ok(())
}

/// The right disjunct together with every variant where parallel atoms
/// sharing a single-letter word are merged into one edge with that letter.
fn merge_parallel_letters(d: Crpq, cap: usize) -> Result<Vec<Crpq>> {
    let mut out = vec![d];
    let mut next = 0;
    while next < out.len() {
        let cur = out[next].clone();
        next += 1;
        for (i, a) in cur.atoms.iter().enumerate() {
            for (j, b) in cur.atoms.iter().enumerate().skip(i + 1) {
                if a.source != b.source || a.target != b.target {
                    continue;
                }
                for c in a.regex.single_letters().intersection(&b.regex.single_letters()) {
                    let mut atoms: Vec<Atom> = cur
                        .atoms
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != i && k != j)
                        .map(|(_, x)| x.clone())
                        .collect();
                    atoms.push(Atom::new(a.source.clone(), Regex::sym(c.clone()), a.target.clone()));
                    let v = normalize_right(&Crpq::new(cur.free.clone(), atoms).with_vars(cur.vars()));
                    if !out.contains(&v) {
                        if out.len() >= cap {
                            return Err(Error::resource(format!("parallel-letter merging exceeds {cap} disjuncts")));
                        }
                        out.push(v);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn left_disjuncts(q1: &Crpq, cap: usize) -> Result<Vec<LeftDisjunct>> {
    let nullable: Vec<usize> = (0..q1.atoms.len()).filter(|&i| q1.atoms[i].nfa.accepts_epsilon()).collect();
    if nullable.len() >= 63 || (1usize << nullable.len()) > cap {
        return Err(Error::resource(format!("epsilon elimination exceeds {cap} disjuncts")));
    }
    let vars = q1.vars();
    let mut out = Vec::new();
    'subsets: for mask in 0..(1usize << nullable.len()) {
        let dropped: BTreeSet<usize> =
            nullable.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &i)| i).collect();
        let mut class: BTreeMap<String, String> = vars.iter().map(|v| (v.clone(), v.clone())).collect();
        let find = |c: &BTreeMap<String, String>, v: &str| {
            let mut r = v.to_string();
            while c[&r] != r {
                r = c[&r].clone();
            }
            r
        };
        for &i in &dropped {
            let (a, b) = (find(&class, &q1.atoms[i].source), find(&class, &q1.atoms[i].target));
            if a != b {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                class.insert(hi, lo);
            }
        }
        let rename = |v: &str| find(&class, v);
        let mut atoms = Vec::new();
        let mut origin = Vec::new();
        for (i, a) in q1.atoms.iter().enumerate() {
            if dropped.contains(&i) {
                continue;
            }
            let regex = if a.nfa.accepts_epsilon() {
                match a.regex.nonempty_part() {
                    Some(r) => r,
                    None => continue 'subsets,
                }
            } else {
                a.regex.clone()
            };
            atoms.push(Atom::new(rename(&a.source), regex, rename(&a.target)));
            origin.push(i);
        }
        let free = q1.free.iter().map(|v| rename(v)).collect();
        let q = Crpq::new(free, atoms).with_vars(vars.iter().map(|v| rename(v)));
        split_parallel_letters(LeftDisjunct { q, origin, fixed: Vec::new(), total: q1.atoms.len() }, cap, &mut out)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QinjResult {
    Contained,
    NotContained {
        witness: Box<Witness>,
        abstraction: String,
    },
    /// A counterexample abstraction did not yield a validated counterexample
    /// (possible only for disconnected right queries).
    Inconclusive(String),
}

impl QinjResult {
    pub fn verdict(&self) -> Option<Verdict> {
        match self {
            QinjResult::Contained => Some(Verdict::Contained),
            QinjResult::NotContained { witness, .. } => Some(Verdict::NotContained(witness.clone())),
            _ => None,
        }
    }
}

impl fmt::Display for QinjResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QinjResult::Contained => f.write_str("contained"),
            QinjResult::NotContained { abstraction, .. } => {
                write!(f, "not contained; failing abstraction:\n{abstraction}")
            }
            QinjResult::Inconclusive(m) => write!(f, "inconclusive: {m}"),
        }
    }
}

/// Decides `q1 ⊆ q2` under query-injective semantics.
pub fn contains_qinj(q1: &Crpq, q2: &Crpq, limits: &Limits) -> Result<QinjResult> {
    if q1.arity() != q2.arity() {
        return Err(Error::domain(format!("arity mismatch: {} vs {}", q1.arity(), q2.arity())));
    }
    let lefts = left_disjuncts(q1, limits.disjunct_cap)?;
    let mut rights: Vec<Crpq> = Vec::new();
    for d in &eliminate_epsilon(q2, limits.disjunct_cap)?.disjuncts {
        for v in merge_parallel_letters(normalize_right(d), limits.disjunct_cap)? {
            if !rights.contains(&v) {
                rights.push(v);
            }
        }
    }
    let right_atoms: Vec<Atom> = rights.iter().flat_map(|d| d.atoms.iter().cloned()).collect();
    let alphabet: BTreeSet<String> = q1.alphabet().union(&q2.alphabet()).cloned().collect();
    let joint = JointNfa::build(&right_atoms, &alphabet)?;
    let all_connected = rights.iter().all(Crpq::is_connected);

    for left in &lefts {
        let g = Skeleton::new(&left.q);
        let mut systems: Vec<System> = Vec::new();
        let mut seen: HashSet<System> = HashSet::new();
        let mut offset = 0;
        for r in &rights {
            for mt in enumerate_morphism_types(&left.q, r, MORPHISM_TYPE_CAP)? {
                if let Some(sys) = requirements(&mt, &g, offset) {
                    if seen.insert(sys.clone()) {
                        systems.push(sys);
                    }
                }
            }
            offset += r.atoms.len();
        }
        let per_atom: Vec<Vec<(Profile, Word)>> = left
            .q
            .atoms
            .iter()
            .map(|a| achievable_profiles(&a.nfa, &joint, PROFILE_STATE_CAP))
            .collect::<Result<_>>()?;
        let counts: Vec<usize> = per_atom.iter().map(Vec::len).collect();
        for (n, abs) in enumerate_abstractions(&counts).enumerate() {
            if n as u64 >= ABSTRACTION_CAP {
                return Err(Error::resource(format!("more than {ABSTRACTION_CAP} abstractions")));
            }
            let profiles: Vec<&Profile> = abs.choice.iter().zip(&per_atom).map(|(&c, ps)| &ps[c].0).collect();
            if systems.iter().any(|s| is_compatible(s, &profiles, &joint)) {
                continue;
            }
            let dump = render_abstraction(&left.q, &profiles, &joint);
            let mut words: Vec<Word> = vec![Vec::new(); left.total];
            for (k, &orig) in left.origin.iter().enumerate() {
                words[orig] = per_atom[k][abs.choice[k]].1.clone();
            }
            for (orig, w) in &left.fixed {
                words[*orig] = w.clone();
            }
            let expansion = build_expansion(q1, &words)?;
            let witness = Witness { words, blocks: Vec::new(), expansion };
            if validate_witness(q1, q2, Semantics::QInj, &witness, limits)? {
                return Ok(QinjResult::NotContained { witness: Box::new(witness), abstraction: dump });
            }
            let why = if all_connected {
                "abstraction without a compatible morphism type has a matching expansion"
            } else {
                "disconnected right query: joint morphism types do not cover every embedding"
            };
            return Ok(QinjResult::Inconclusive(format!("{why}\n{dump}")));
        }
    }
    Ok(QinjResult::Contained)
}

/// Structured dump of an abstraction: one line per atom with its markers.
pub fn render_abstraction(q1: &Crpq, profiles: &[&Profile], joint: &JointNfa) -> String {
    q1.atoms
        .iter()
        .zip(profiles)
        .enumerate()
        .map(|(i, (a, p))| format!("atom {i} {} -[{}]-> {}: {}", a.source, a.regex, a.target, p.render(joint)))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Crpq {
        Crpq::parse(s).unwrap()
    }

    fn joint_for(regexes: &[&str], alphabet: &[&str]) -> JointNfa {
        let atoms: Vec<Atom> = regexes.iter().map(|r| Atom::new("x", Regex::parse(r).unwrap(), "y")).collect();
        JointNfa::build(&atoms, &alphabet.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn w(s: &str) -> Vec<String> {
        s.chars().map(|c| c.to_string()).collect()
    }

    fn all_words(alphabet: &[&str], max: usize) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        let mut layer: Vec<Vec<String>> = vec![Vec::new()];
        for _ in 0..max {
            let mut next = Vec::new();
            for p in &layer {
                for a in alphabet {
                    let mut x = p.clone();
                    x.push(a.to_string());
                    next.push(x);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    #[test]
    fn full_run_of_ab() {
        let j = joint_for(&["ab"], &["a", "b"]);
        let p = profile_of_word(&w("ab"), &j).unwrap();
        assert!(p.contains(Marker::FullRun(0, 2)));
        assert!(!p.contains(Marker::FullRun(0, 1)));
    }

    #[test]
    fn single_letter_has_no_splits() {
        let j = joint_for(&["ab", "b"], &["a", "b"]);
        let p = profile_of_word(&w("a"), &j).unwrap();
        assert!(p.markers().iter().all(|m| matches!(m, Marker::FullRun(..))));
    }

    #[test]
    fn internal_factor_gives_infix() {
        let j = joint_for(&["b"], &["a", "b"]);
        let p = profile_of_word(&w("aba"), &j).unwrap();
        assert!(p.contains(Marker::Infix(0, 1)));
    }

    #[test]
    fn empty_word_is_domain_error() {
        let j = joint_for(&["b"], &["a", "b"]);
        assert!(matches!(profile_of_word::<String>(&[], &j), Err(Error::Domain(_))));
    }

    #[test]
    fn scan_matches_definition() {
        for regs in [vec!["ab"], vec!["a^+ b", "b"], vec!["(ab)*a", "ba + b"]] {
            let j = joint_for(&regs, &["a", "b"]);
            for word in all_words(&["a", "b"], 6) {
                assert_eq!(
                    profile_of_word(&word, &j).unwrap(),
                    profile_by_definition(&word, &j).unwrap(),
                    "{regs:?} {word:?}"
                );
            }
        }
    }

    #[test]
    fn achievable_profiles_saturate() {
        let j = joint_for(&["a"], &["a"]);
        let atom = Nfa::from_regex(&Regex::parse("a^+").unwrap());
        let got = achievable_profiles(&atom, &j, PROFILE_STATE_CAP).unwrap();
        let by_words: HashSet<Profile> =
            (1..=8).map(|n| profile_of_word(&vec!["a".to_string(); n], &j).unwrap()).collect();
        let got_set: HashSet<Profile> = got.iter().map(|(p, _)| p.clone()).collect();
        assert_eq!(got_set, by_words);
        for (p, word) in &got {
            assert_eq!(&profile_of_word(word, &j).unwrap(), p);
        }
        let single = Nfa::from_regex(&Regex::parse("a").unwrap());
        let one = achievable_profiles(&single, &j, PROFILE_STATE_CAP).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].0.contains(Marker::FullRun(j.initials(0)[0], j.finals(0)[0])));
    }

    #[test]
    fn abstraction_product() {
        assert_eq!(enumerate_abstractions(&[2, 3]).count(), 6);
        assert_eq!(enumerate_abstractions(&[]).count(), 1);
        assert_eq!(enumerate_abstractions(&[2, 0]).count(), 0);
    }

    #[test]
    fn morphism_types_of_single_atom() {
        let q1 = q("Q(x,y) := x -[a]-> y");
        let types = enumerate_morphism_types(&q1, &q1, 100).unwrap();
        assert_eq!(types.len(), 1);
        assert_eq!(types[0].paths[0].len(), 4);
        let q2 = q("Q() := u -[a]-> v, v -[a]-> w, w -[a]-> t, t -[a]-> s");
        assert!(enumerate_morphism_types(&q("Q() := x -[a]-> y"), &q2, 100).unwrap().is_empty());
    }

    #[test]
    fn reference_pairs() {
        let limits = Limits::default();
        let r = contains_qinj(&q("Q() := x -[a]-> y, y -[b]-> z"), &q("Q() := x -[a b]-> y"), &limits).unwrap();
        assert_eq!(r, QinjResult::Contained);
        let r =
            contains_qinj(&q("Q() := x -[a]-> y, x -[b]-> y"), &q("Q() := x -[a]-> y, x' -[b]-> y'"), &limits).unwrap();
        assert!(matches!(r, QinjResult::NotContained { .. }));
    }

    #[test]
    fn plus_into_single_letter_boolean() {
        let limits = Limits::default();
        let r = contains_qinj(&q("Q() := x -[a^+]-> y"), &q("Q() := x -[a]-> y"), &limits).unwrap();
        assert_eq!(r, QinjResult::Contained);
        let r = contains_qinj(&q("Q(x,y) := x -[a^+]-> y"), &q("Q(x,y) := x -[a]-> y"), &limits).unwrap();
        let QinjResult::NotContained { witness, .. } = r else { panic!("expected a counterexample") };
        assert_eq!(witness.words, vec![w("aa")]);
    }

    #[test]
    fn two_cycles_fold_into_loops() {
        let f = fold_two_cycles(&q("Q() := x -[a]-> y, y -[b]-> x"));
        assert_eq!(f.atoms.len(), 1);
        assert!(f.atoms[0].is_loop());
        let kept = q("Q(x,y) := x -[a]-> y, y -[b]-> x");
        assert_eq!(fold_two_cycles(&kept), kept);
    }

    #[test]
    fn parallel_letters_share_one_edge() {
        let limits = Limits::default();
        let r = contains_qinj(&q("Q() := x -[a]-> y"), &q("Q() := x -[a]-> y, x -[a + b]-> y"), &limits).unwrap();
        assert_eq!(r, QinjResult::Contained);
        let r = contains_qinj(&q("Q() := x -[a + bb]-> y, x -[a]-> y"), &q("Q() := x -[bb]-> y"), &limits).unwrap();
        let QinjResult::NotContained { witness, .. } = r else { panic!("expected a counterexample") };
        assert_eq!(witness.words, vec![w("a"), w("a")]);
        let r = contains_qinj(&q("Q() := x -[a^+]-> y, x -[a]-> y"), &q("Q() := x -[a]-> y"), &limits).unwrap();
        assert_eq!(r, QinjResult::Contained);
        let r = contains_qinj(&q("Q() := x -[a^+]-> y, x -[a]-> y"), &q("Q() := x -[aa]-> y"), &limits).unwrap();
        assert!(matches!(r, QinjResult::NotContained { .. }));
        let r = contains_qinj(&q("Q() := x -[a+b]-> y, x -[a+b]-> y"), &q("Q() := x -[a]-> y, x -[b]-> y"), &limits)
            .unwrap();
        assert!(matches!(r, QinjResult::NotContained { .. }));
    }
}
