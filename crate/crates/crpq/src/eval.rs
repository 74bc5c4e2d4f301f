//! Evaluation of CRPQs over graphs under standard, atom-injective and
//! query-injective semantics.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::graph::GraphDb;
use crate::nfa::Nfa;
use crate::query::{eliminate_epsilon, Crpq, DEFAULT_DISJUNCT_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Semantics {
    St,
    AInj,
    QInj,
}

impl Semantics {
    pub const ALL: [Semantics; 3] = [Semantics::St, Semantics::AInj, Semantics::QInj];
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Semantics::St => "st",
            Semantics::AInj => "ainj",
            Semantics::QInj => "qinj",
        })
    }
}

impl FromStr for Semantics {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "st" => Ok(Semantics::St),
            "ainj" | "a-inj" => Ok(Semantics::AInj),
            "qinj" | "q-inj" => Ok(Semantics::QInj),
            _ => Err(Error::domain(format!("unknown semantics `{s}` (expected st, ainj or qinj)"))),
        }
    }
}

/// Resource caps shared by the evaluation and containment engines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Search steps allowed per evaluation call.
    pub step_budget: u64,
    /// Maximum number of disjuncts produced by epsilon elimination.
    pub disjunct_cap: usize,
}

pub const NODE_BUDGET_ENV: &str = "CRPQ_NODE_BUDGET";
pub const DISJUNCT_CAP_ENV: &str = "CRPQ_DISJUNCT_CAP";

impl Default for Limits {
    fn default() -> Self {
        Limits { step_budget: 50_000_000, disjunct_cap: DEFAULT_DISJUNCT_CAP }
    }
}

impl Limits {
    /// Defaults overridden by `CRPQ_NODE_BUDGET` and `CRPQ_DISJUNCT_CAP`.
    pub fn from_env() -> Result<Self> {
        let mut l = Limits::default();
        let read = |name: &str| -> Result<Option<u64>> {
            match std::env::var(name) {
                Ok(v) => v
                    .trim()
                    .parse::<u64>()
                    .map(Some)
                    .map_err(|_| Error::domain(format!("{name} must be a nonnegative integer, got `{v}`"))),
                Err(_) => Ok(None),
            }
        };
        if let Some(v) = read(NODE_BUDGET_ENV)? {
            l.step_budget = v;
        }
        if let Some(v) = read(DISJUNCT_CAP_ENV)? {
            l.disjunct_cap = v as usize;
        }
        Ok(l)
    }
}

/// Counts search steps against a cap.
#[derive(Debug)]
pub struct Budget {
    remaining: u64,
    cap: u64,
}

impl Budget {
    pub fn new(cap: u64) -> Self {
        Budget { remaining: cap, cap }
    }

    pub fn tick(&mut self) -> Result<()> {
        if self.remaining == 0 {
            return Err(Error::resource(format!("search exceeded the step budget of {}", self.cap)));
        }
        self.remaining -= 1;
        Ok(())
    }
}

/// A satisfying assignment: node images per variable (in `Crpq::vars()` order)
/// and, for injective semantics, one node sequence per atom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Match {
    pub images: Vec<usize>,
    pub paths: Vec<Vec<usize>>,
}

struct PAtom {
    s: usize,
    t: usize,
    fwd: Nfa,
    bwd: Nfa,
    fwd_map: Vec<Option<usize>>,
    bwd_map: Vec<Option<usize>>,
    fwd_co: FixedBitSet,
    bwd_co: FixedBitSet,
}

fn reversed(n: &Nfa) -> Nfa {
    let mut r = Nfa::new(n.alphabet().to_vec(), n.state_count());
    for (p, a, q) in n.transitions() {
        r.add_transition(q, a, p);
    }
    for q in 0..n.state_count() {
        r.set_initial(q, n.is_final(q));
        r.set_final(q, n.is_initial(q));
    }
    r
}

/// An epsilon-free query compiled against one graph.
pub struct Prepared<'g> {
    g: &'g GraphDb,
    vars: Vec<String>,
    free: Vec<usize>,
    atoms: Vec<PAtom>,
    reach_memo: HashMap<(usize, usize, bool), FixedBitSet>,
    simple_memo: HashMap<(usize, usize, bool), Vec<(usize, Vec<usize>)>>,
}

impl<'g> Prepared<'g> {
    pub fn new(q: &Crpq, g: &'g GraphDb) -> Result<Self> {
        if !q.is_epsilon_free() {
            return Err(Error::domain("query must be epsilon-free; apply eliminate_epsilon first"));
        }
        let vars = q.vars();
        let idx = |v: &str| vars.iter().position(|x| x == v).expect("atom variables are query variables");
        let label_map = |n: &Nfa| -> Vec<Option<usize>> { g.labels().iter().map(|l| n.letter(l)).collect() };
        let atoms = q
            .atoms
            .iter()
            .map(|a| {
                let fwd = a.nfa.clone();
                let bwd = reversed(&fwd);
                PAtom {
                    s: idx(&a.source),
                    t: idx(&a.target),
                    fwd_map: label_map(&fwd),
                    bwd_map: label_map(&bwd),
                    fwd_co: fwd.coaccessible(),
                    bwd_co: bwd.coaccessible(),
                    fwd,
                    bwd,
                }
            })
            .collect();
        let free = q.free.iter().map(|v| idx(v)).collect();
        Ok(Prepared { g, vars, free, atoms, reach_memo: HashMap::new(), simple_memo: HashMap::new() })
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Per-variable constraints sending the free tuple to `tuple`; `None` when a
    /// repeated free variable would need two different nodes.
    pub fn fixed_for(&self, tuple: &[usize]) -> Option<Vec<Option<usize>>> {
        fixed_from_tuple(self, tuple)
    }

    /// Nodes reachable from `u` by a path whose label is in the atom language
    /// (`backward` walks edges in reverse with the reversed automaton).
    fn reach(&mut self, a: usize, u: usize, backward: bool, budget: &mut Budget) -> Result<FixedBitSet> {
        if let Some(s) = self.reach_memo.get(&(a, u, backward)) {
            return Ok(s.clone());
        }
        let atom = &self.atoms[a];
        let (nfa, map) = if backward { (&atom.bwd, &atom.bwd_map) } else { (&atom.fwd, &atom.fwd_map) };
        let k = nfa.state_count();
        let n = self.g.node_count();
        let mut seen = FixedBitSet::with_capacity(n * k);
        let mut queue = VecDeque::new();
        for q in nfa.initial().ones() {
            seen.insert(u * k + q);
            queue.push_back((u, q));
        }
        // Initial states are never final in an epsilon-free automaton, so the
        // start pairs contribute only when revisited after reading a letter.
        let mut out = FixedBitSet::with_capacity(n);
        while let Some((v, q)) = queue.pop_front() {
            budget.tick()?;
            if nfa.is_final(q) {
                out.insert(v);
            }
            let edges = if backward { self.g.in_edges(v) } else { self.g.out_edges(v) };
            for &(l, w) in edges {
                if let Some(a) = map[l] {
                    for &q2 in nfa.successors(q, a) {
                        if !seen.contains(w * k + q2) {
                            seen.insert(w * k + q2);
                            queue.push_back((w, q2));
                        }
                    }
                }
            }
        }
        self.reach_memo.insert((a, u, backward), out.clone());
        Ok(out)
    }

    /// Simple paths (or simple cycles back to `u` for loop atoms) from `u`
    /// with label in the atom language: one witness node sequence per endpoint.
    fn simple_targets(
        &mut self,
        a: usize,
        u: usize,
        backward: bool,
        budget: &mut Budget,
    ) -> Result<Vec<(usize, Vec<usize>)>> {
        if let Some(s) = self.simple_memo.get(&(a, u, backward)) {
            return Ok(s.clone());
        }
        let is_loop = self.atoms[a].s == self.atoms[a].t;
        let mut found: Vec<Option<Vec<usize>>> = vec![None; self.g.node_count()];
        let mut path = vec![u];
        let mut on_path = FixedBitSet::with_capacity(self.g.node_count());
        on_path.insert(u);
        let atom = &self.atoms[a];
        let (nfa, map, co) =
            if backward { (&atom.bwd, &atom.bwd_map, &atom.bwd_co) } else { (&atom.fwd, &atom.fwd_map, &atom.fwd_co) };
        let start = nfa.initial().clone();
        let forbidden = FixedBitSet::with_capacity(self.g.node_count());
        let ctx = PathCtx { g: self.g, nfa, map, co, backward };
        let mut visit = |v: usize, p: &[usize]| -> bool {
            if (v == u) == is_loop && found[v].is_none() {
                found[v] = Some(p.to_vec());
            }
            false
        };
        ctx.dfs(u, &start, &mut path, &mut on_path, &forbidden, None, is_loop, budget, &mut visit)?;
        let out: Vec<(usize, Vec<usize>)> =
            found.into_iter().enumerate().filter_map(|(v, p)| p.map(|p| (v, orient(p, backward)))).collect();
        self.simple_memo.insert((a, u, backward), out.clone());
        Ok(out)
    }
}

fn orient(mut p: Vec<usize>, backward: bool) -> Vec<usize> {
    if backward {
        p.reverse();
    }
    p
}

struct PathCtx<'a> {
    g: &'a GraphDb,
    nfa: &'a Nfa,
    map: &'a [Option<usize>],
    co: &'a FixedBitSet,
    backward: bool,
}

impl PathCtx<'_> {
    /// Depth-first enumeration of simple paths from the last node of `path`.
    /// `visit(end, path)` is called for every accepted nonempty path; it
    /// returns true to stop. With `close`, only the cycle back to `path[0]` may
    /// revisit a node. `target` restricts accepted endpoints.
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        v: usize,
        states: &FixedBitSet,
        path: &mut Vec<usize>,
        on_path: &mut FixedBitSet,
        forbidden: &FixedBitSet,
        target: Option<usize>,
        close: bool,
        budget: &mut Budget,
        visit: &mut dyn FnMut(usize, &[usize]) -> bool,
    ) -> Result<bool> {
        let edges = if self.backward { self.g.in_edges(v) } else { self.g.out_edges(v) };
        for &(l, w) in edges {
            let Some(a) = self.map[l] else { continue };
            budget.tick()?;
            let next = self.nfa.step(states, a);
            if !next.ones().any(|q| self.co.contains(q)) {
                continue;
            }
            let accepting = next.ones().any(|q| self.nfa.is_final(q));
            if on_path.contains(w) {
                if close && w == path[0] && accepting {
                    path.push(w);
                    let stop = visit(w, path);
                    path.pop();
                    if stop {
                        return Ok(true);
                    }
                }
                continue;
            }
            if forbidden.contains(w) && target != Some(w) {
                continue;
            }
            path.push(w);
            on_path.insert(w);
            if accepting && !close && target.is_none_or(|t| t == w) && visit(w, path) {
                return Ok(true);
            }
            let descend = target != Some(w) && !forbidden.contains(w);
            if descend && self.dfs(w, &next, path, on_path, forbidden, target, close, budget, visit)? {
                return Ok(true);
            }
            on_path.set(w, false);
            path.pop();
        }
        Ok(false)
    }
}

/// Backtracking search for matches of one epsilon-free query.
pub struct Matcher<'p, 'g> {
    p: &'p mut Prepared<'g>,
    sem: Semantics,
}

impl<'p, 'g> Matcher<'p, 'g> {
    pub fn new(p: &'p mut Prepared<'g>, sem: Semantics) -> Self {
        Matcher { p, sem }
    }

    /// Calls `f` on matches extending `fixed` until it returns true.
    /// Returns whether `f` stopped the enumeration.
    pub fn for_each(
        &mut self,
        fixed: &[Option<usize>],
        budget: &mut Budget,
        f: &mut dyn FnMut(&Match) -> bool,
    ) -> Result<bool> {
        let nv = self.p.vars.len();
        assert_eq!(fixed.len(), nv, "one entry per variable");
        if self.sem == Semantics::QInj {
            let imgs: Vec<usize> = fixed.iter().flatten().copied().collect();
            if imgs.iter().collect::<BTreeSet<_>>().len() != imgs.len() {
                return Ok(false);
            }
        }
        let mut st = State {
            assign: fixed.to_vec(),
            paths: vec![Vec::new(); self.p.atoms.len()],
            done: vec![false; self.p.atoms.len()],
            used: FixedBitSet::with_capacity(self.p.g.node_count()),
        };
        for n in fixed.iter().flatten() {
            st.used.insert(*n);
        }
        self.step(&mut st, budget, f)
    }

    fn step(&mut self, st: &mut State, budget: &mut Budget, f: &mut dyn FnMut(&Match) -> bool) -> Result<bool> {
        budget.tick()?;
        let next = self.pick_atom(st);
        let Some(a) = next else {
            return self.finish_isolated(st, 0, budget, f);
        };
        let (s, t) = (self.p.atoms[a].s, self.p.atoms[a].t);
        match (st.assign[s], st.assign[t]) {
            (None, None) => {
                for u in 0..self.p.g.node_count() {
                    if self.sem == Semantics::QInj && st.used.contains(u) {
                        continue;
                    }
                    st.assign[s] = Some(u);
                    let qinj = self.sem == Semantics::QInj;
                    if qinj {
                        st.used.insert(u);
                    }
                    let stop = self.step(st, budget, f)?;
                    if qinj {
                        st.used.set(u, false);
                    }
                    st.assign[s] = None;
                    if stop {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            (Some(u), tv) => self.extend(st, a, u, tv, t, false, budget, f),
            (None, Some(v)) => self.extend(st, a, v, None, s, true, budget, f),
        }
    }

    /// Matches atom `a` starting from node `from` (walking backwards when
    /// `backward`), with the far endpoint variable `far` possibly fixed to `to`.
    #[allow(clippy::too_many_arguments)]
    fn extend(
        &mut self,
        st: &mut State,
        a: usize,
        from: usize,
        to: Option<usize>,
        far: usize,
        backward: bool,
        budget: &mut Budget,
        f: &mut dyn FnMut(&Match) -> bool,
    ) -> Result<bool> {
        let is_loop = self.p.atoms[a].s == self.p.atoms[a].t;
        match self.sem {
            Semantics::St => {
                let set = self.p.reach(a, from, backward, budget)?;
                let cands: Vec<usize> = match to {
                    Some(v) => set.contains(v).then_some(v).into_iter().collect(),
                    None => set.ones().collect(),
                };
                self.try_candidates(st, a, far, to.is_none(), cands.into_iter().map(|v| (v, Vec::new())), budget, f)
            }
            Semantics::AInj => {
                let targets = self.p.simple_targets(a, from, backward, budget)?;
                let cands: Vec<(usize, Vec<usize>)> = match to {
                    Some(v) => targets.into_iter().filter(|(w, _)| *w == v).collect(),
                    None => targets,
                };
                self.try_candidates(st, a, far, to.is_none(), cands.into_iter(), budget, f)
            }
            Semantics::QInj => {
                // Internal nodes avoid every variable image and every used internal node.
                let forbidden = st.used.clone();
                let atom = &self.p.atoms[a];
                let (nfa, map, co) = if backward {
                    (&atom.bwd, &atom.bwd_map, &atom.bwd_co)
                } else {
                    (&atom.fwd, &atom.fwd_map, &atom.fwd_co)
                };
                let ctx = PathCtx { g: self.p.g, nfa, map, co, backward };
                let start = nfa.initial().clone();
                let mut path = vec![from];
                let mut on_path = FixedBitSet::with_capacity(self.p.g.node_count());
                on_path.insert(from);
                let mut collected: Vec<(usize, Vec<usize>)> = Vec::new();
                let mut visit = |w: usize, p: &[usize]| -> bool {
                    let ok = match to {
                        Some(v) => w == v,
                        None => is_loop || !forbidden.contains(w),
                    };
                    if ok {
                        collected.push((w, p.to_vec()));
                    }
                    false
                };
                let target = if is_loop { None } else { to };
                ctx.dfs(from, &start, &mut path, &mut on_path, &forbidden, target, is_loop, budget, &mut visit)?;
                for (w, p) in collected {
                    let p = orient(p, backward);
                    let internal: Vec<usize> = p[1..p.len() - 1].to_vec();
                    for &n in &internal {
                        st.used.insert(n);
                    }
                    let fresh = to.is_none() && !is_loop;
                    if fresh {
                        st.assign[far] = Some(w);
                        st.used.insert(w);
                    }
                    st.paths[a] = p;
                    st.done[a] = true;
                    let stop = self.step(st, budget, f)?;
                    st.done[a] = false;
                    if fresh {
                        st.assign[far] = None;
                        st.used.set(w, false);
                    }
                    for &n in &internal {
                        st.used.set(n, false);
                    }
                    if stop {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn try_candidates(
        &mut self,
        st: &mut State,
        a: usize,
        far: usize,
        fresh: bool,
        cands: impl Iterator<Item = (usize, Vec<usize>)>,
        budget: &mut Budget,
        f: &mut dyn FnMut(&Match) -> bool,
    ) -> Result<bool> {
        for (v, path) in cands {
            if fresh {
                st.assign[far] = Some(v);
            }
            st.paths[a] = path;
            st.done[a] = true;
            let stop = self.step(st, budget, f)?;
            st.done[a] = false;
            if fresh {
                st.assign[far] = None;
            }
            if stop {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn pick_atom(&self, st: &State) -> Option<usize> {
        let mut best: Option<(usize, usize)> = None;
        for (i, a) in self.p.atoms.iter().enumerate() {
            if st.done[i] {
                continue;
            }
            let score = match (st.assign[a.s].is_some(), st.assign[a.t].is_some()) {
                (true, true) => 3,
                (true, false) => 2,
                (false, true) => 1,
                (false, false) => 0,
            };
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        best.map(|(i, _)| i)
    }

    fn finish_isolated(
        &mut self,
        st: &mut State,
        from: usize,
        budget: &mut Budget,
        f: &mut dyn FnMut(&Match) -> bool,
    ) -> Result<bool> {
        let Some(v) = (from..st.assign.len()).find(|&v| st.assign[v].is_none()) else {
            let m = Match {
                images: st.assign.iter().map(|x| x.expect("all variables assigned")).collect(),
                paths: st.paths.clone(),
            };
            return Ok(f(&m));
        };
        for n in 0..self.p.g.node_count() {
            budget.tick()?;
            if self.sem == Semantics::QInj && st.used.contains(n) {
                continue;
            }
            st.assign[v] = Some(n);
            let qinj = self.sem == Semantics::QInj;
            if qinj {
                st.used.insert(n);
            }
            let stop = self.finish_isolated(st, v + 1, budget, f)?;
            if qinj {
                st.used.set(n, false);
            }
            st.assign[v] = None;
            if stop {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

struct State {
    assign: Vec<Option<usize>>,
    paths: Vec<Vec<usize>>,
    done: Vec<bool>,
    /// Variable images and, under q-inj, internal nodes of chosen paths.
    used: FixedBitSet,
}

fn fixed_from_tuple(p: &Prepared<'_>, tuple: &[usize]) -> Option<Vec<Option<usize>>> {
    let mut fixed = vec![None; p.vars.len()];
    for (&v, &n) in p.free.iter().zip(tuple) {
        match fixed[v] {
            Some(m) if m != n => return None,
            _ => fixed[v] = Some(n),
        }
    }
    Some(fixed)
}

/// First match of an epsilon-free query sending its free tuple to `tuple`.
pub fn find_match(
    q: &Crpq,
    g: &GraphDb,
    tuple: &[usize],
    sem: Semantics,
    budget: &mut Budget,
) -> Result<Option<Match>> {
    let mut p = Prepared::new(q, g)?;
    let Some(fixed) = fixed_from_tuple(&p, tuple) else { return Ok(None) };
    let mut found = None;
    Matcher::new(&mut p, sem).for_each(&fixed, budget, &mut |m| {
        found = Some(m.clone());
        true
    })?;
    Ok(found)
}

/// Membership test `tuple ∈ q(g)` under `sem`.
pub fn eval_membership(q: &Crpq, g: &GraphDb, tuple: &[usize], sem: Semantics, limits: &Limits) -> Result<bool> {
    if tuple.len() != q.arity() {
        return Err(Error::domain(format!("tuple arity {} differs from query arity {}", tuple.len(), q.arity())));
    }
    if tuple.iter().any(|&n| n >= g.node_count()) {
        return Err(Error::domain("tuple mentions a node outside the graph"));
    }
    let union = eliminate_epsilon(q, limits.disjunct_cap)?;
    let mut budget = Budget::new(limits.step_budget);
    for d in &union.disjuncts {
        if find_match(d, g, tuple, sem, &mut budget)?.is_some() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Membership with the tuple given by node names.
pub fn eval_membership_named(q: &Crpq, g: &GraphDb, tuple: &[&str], sem: Semantics, limits: &Limits) -> Result<bool> {
    let mut ids = Vec::with_capacity(tuple.len());
    for n in tuple {
        match g.node_id(n) {
            Some(i) => ids.push(i),
            // A node absent from the graph can only be produced by a query with
            // no free variables bound to it, which is never the case.
            None => return Ok(false),
        }
    }
    eval_membership(q, g, &ids, sem, limits)
}

/// The full answer set, sorted lexicographically by node index.
pub fn evaluate(q: &Crpq, g: &GraphDb, sem: Semantics, limits: &Limits) -> Result<Vec<Vec<usize>>> {
    let union = eliminate_epsilon(q, limits.disjunct_cap)?;
    let mut budget = Budget::new(limits.step_budget);
    let mut out: BTreeSet<Vec<usize>> = BTreeSet::new();
    for d in &union.disjuncts {
        let mut p = Prepared::new(d, g)?;
        let mut fixed = vec![None; p.vars.len()];
        let mut tuple = Vec::new();
        extend_tuples(&mut p, sem, 0, &mut fixed, &mut tuple, &mut budget, &mut out)?;
    }
    Ok(out.into_iter().collect())
}

/// Fixes free positions one at a time, pruning prefixes that admit no match.
fn extend_tuples(
    p: &mut Prepared<'_>,
    sem: Semantics,
    pos: usize,
    fixed: &mut Vec<Option<usize>>,
    tuple: &mut Vec<usize>,
    budget: &mut Budget,
    out: &mut BTreeSet<Vec<usize>>,
) -> Result<()> {
    let exists = Matcher::new(p, sem).for_each(fixed, budget, &mut |_| true)?;
    if !exists {
        return Ok(());
    }
    if pos == p.free.len() {
        out.insert(tuple.clone());
        return Ok(());
    }
    let v = p.free[pos];
    let cands: Vec<usize> = match fixed[v] {
        Some(n) => vec![n],
        None => (0..p.g.node_count()).collect(),
    };
    let was = fixed[v];
    for n in cands {
        fixed[v] = Some(n);
        tuple.push(n);
        extend_tuples(p, sem, pos + 1, fixed, tuple, budget, out)?;
        tuple.pop();
    }
    fixed[v] = was;
    Ok(())
}

/// True iff some path from `u` to `v` has its label in the language of `n`.
pub fn st_reach(g: &GraphDb, u: usize, v: usize, n: &Nfa) -> bool {
    let map: Vec<Option<usize>> = g.labels().iter().map(|l| n.letter(l)).collect();
    let k = n.state_count();
    let mut seen = FixedBitSet::with_capacity(g.node_count() * k);
    let mut queue = VecDeque::new();
    for q in n.initial().ones() {
        seen.insert(u * k + q);
        queue.push_back((u, q));
    }
    while let Some((w, q)) = queue.pop_front() {
        if w == v && n.is_final(q) {
            return true;
        }
        for &(l, x) in g.out_edges(w) {
            if let Some(a) = map[l] {
                for &q2 in n.successors(q, a) {
                    if !seen.contains(x * k + q2) {
                        seen.insert(x * k + q2);
                        queue.push_back((x, q2));
                    }
                }
            }
        }
    }
    false
}

/// Renders a tuple of node indices as `(a,b)`.
pub fn render_tuple(g: &GraphDb, t: &[usize]) -> String {
    let names: Vec<&str> = t.iter().map(|&n| g.node_name(n)).collect();
    format!("({})", names.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regex::Regex;

    fn q(s: &str) -> Crpq {
        Crpq::parse(s).unwrap()
    }

    fn names(g: &GraphDb, r: &[Vec<usize>]) -> Vec<String> {
        r.iter().map(|t| render_tuple(g, t)).collect()
    }

    #[test]
    fn single_edge_all_semantics() {
        let g = GraphDb::from_edges([("u", "a", "v")]);
        for sem in Semantics::ALL {
            let r = evaluate(&q("Q(x,y) := x -[a]-> y"), &g, sem, &Limits::default()).unwrap();
            assert_eq!(names(&g, &r), vec!["(u,v)"]);
        }
    }

    #[test]
    fn parallel_pair_separates_qinj_from_ainj() {
        let g = q("Q() := x -[a]-> y, x -[b]-> y").canonical_db().unwrap();
        let q2 = q("Q() := x -[a]-> y, x' -[b]-> y'");
        let l = Limits::default();
        assert!(evaluate(&q2, &g, Semantics::QInj, &l).unwrap().is_empty());
        assert!(!evaluate(&q2, &g, Semantics::AInj, &l).unwrap().is_empty());
    }

    #[test]
    fn membership_examples() {
        let g = GraphDb::from_edges([("u", "a", "v")]);
        let l = Limits::default();
        let (u, v) = (g.node_id("u").unwrap(), g.node_id("v").unwrap());
        assert!(!eval_membership(&q("Q(x,y) := x -[a]-> y"), &g, &[v, u], Semantics::St, &l).unwrap());
        assert!(eval_membership(&q("Q() := x -[a]-> y"), &g, &[], Semantics::QInj, &l).unwrap());
        assert!(eval_membership(&q("Q() := x -[a]-> y"), &g, &[u], Semantics::St, &l).is_err());
        let path = GraphDb::from_edges([("x", "a", "y"), ("y", "b", "z")]);
        let ends = [path.node_id("x").unwrap(), path.node_id("z").unwrap()];
        assert!(eval_membership(&q("Q(x,y) := x -[ab]-> y"), &path, &ends, Semantics::QInj, &l).unwrap());
    }

    #[test]
    fn st_reach_examples() {
        let g = GraphDb::from_edges([("u", "a", "u"), ("v", "b", "w")]);
        let u = g.node_id("u").unwrap();
        assert!(st_reach(&g, u, u, &Nfa::from_regex(&Regex::parse("a*").unwrap())));
        assert!(st_reach(&g, u, u, &Nfa::from_regex(&Regex::parse("(aa)*").unwrap())));
        assert!(st_reach(&g, u, u, &Nfa::from_regex(&Regex::parse("(aa)^+").unwrap())));
        assert!(!st_reach(&g, u, g.node_id("w").unwrap(), &Nfa::from_regex(&Regex::parse("a*b").unwrap())));
    }

    #[test]
    fn cycle_query_hierarchy_is_strict() {
        // u -a-> m -b-> u with a c-loop at u.
        let g = GraphDb::from_edges([("u", "a", "m"), ("m", "b", "u"), ("u", "c", "u")]);
        let fig = q("Q(x,y) := x -[(ab)*]-> y, y -[c*]-> x");
        let l = Limits::default();
        let st = evaluate(&fig, &g, Semantics::St, &l).unwrap();
        let ai = evaluate(&fig, &g, Semantics::AInj, &l).unwrap();
        let qi = evaluate(&fig, &g, Semantics::QInj, &l).unwrap();
        assert!(qi.iter().all(|t| ai.contains(t)));
        assert!(ai.iter().all(|t| st.contains(t)));
        assert!(st.contains(&vec![g.node_id("u").unwrap(); 2]));
    }

    #[test]
    fn loop_atoms_need_simple_cycles() {
        let g = GraphDb::from_edges([("u", "a", "v"), ("v", "a", "u")]);
        let l = Limits::default();
        let lp = q("Q(x) := x -[aaaa]-> x");
        assert_eq!(evaluate(&lp, &g, Semantics::St, &l).unwrap().len(), 2);
        assert!(evaluate(&lp, &g, Semantics::AInj, &l).unwrap().is_empty());
        assert_eq!(evaluate(&q("Q(x) := x -[aa]-> x"), &g, Semantics::AInj, &l).unwrap().len(), 2);
    }

    #[test]
    fn budget_exhaustion_is_resource_error() {
        let g = GraphDb::from_edges([("u", "a", "v"), ("v", "a", "u")]);
        let l = Limits { step_budget: 3, ..Limits::default() };
        assert!(matches!(evaluate(&q("Q(x,y) := x -[a*]-> y"), &g, Semantics::St, &l), Err(Error::Resource(_))));
    }
}
