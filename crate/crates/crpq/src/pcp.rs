//! Compilation of a Post correspondence instance into a pair of Boolean
//! CRPQs such that the instance has a solution iff the first query is not
//! contained in the second under atom-injective semantics, together with the
//! structural well-formedness check on a-inj-expansions of the first query.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::containment::{ainj_counterexample_in, ContainOptions, RepairOutcome, Witness};
use crate::error::{Error, Result};
use crate::eval::{eval_membership, Semantics};
use crate::expansion::{admissible_partitions, build_expansion, AinjExpansion, Expansion, Word};
use crate::graph::GraphDb;
use crate::nfa::Nfa;
use crate::query::{eliminate_epsilon, Atom, Crpq, CrpqUnion};
use crate::regex::Regex;

pub const HASH: &str = "hash";
pub const HASH_INF: &str = "hashinf";
pub const BOX: &str = "box";
pub const DOL: &str = "dol";
pub const DOL_P: &str = "dolp";
pub const DOL_INF: &str = "dolinf";
pub const BLK: &str = "blk";
pub const BLK_P: &str = "blkp";

/// Marker symbols shared by every instance.
pub const MARKERS: [&str; 8] = [HASH, HASH_INF, BOX, DOL, DOL_P, DOL_INF, BLK, BLK_P];

pub fn hat(s: &str) -> String {
    format!("^{s}")
}

pub fn index_symbol(i: usize) -> String {
    format!("I{i}")
}

/// Atom positions in the generated left query.
pub const ATOM_INDEX: usize = 0;
pub const ATOM_HAT_WORD: usize = 1;
pub const ATOM_HAT_INDEX: usize = 2;
pub const ATOM_WORD: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PcpInstance {
    /// Pairs `(u_i, v_i)` of nonempty words; indices are 1-based externally.
    pub pairs: Vec<(Word, Word)>,
}

impl PcpInstance {
    pub fn new(pairs: &[(&str, &str)]) -> Result<Self> {
        let split = |s: &str| s.chars().map(|c| c.to_string()).collect::<Word>();
        let inst = PcpInstance { pairs: pairs.iter().map(|(u, v)| (split(u), split(v))).collect() };
        inst.validate()?;
        Ok(inst)
    }

    /// One pair per line, `u v`, words over lowercase letters; blank lines
    /// and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [u, v] = parts.as_slice() else {
                return Err(Error::syntax(n + 1, "expected two words `u v`"));
            };
            if !u.chars().chain(v.chars()).all(|c| c.is_ascii_lowercase()) {
                return Err(Error::syntax(n + 1, "words must use lowercase letters"));
            }
            pairs.push((*u, *v));
        }
        PcpInstance::new(&pairs)
    }

    fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::domain("an instance needs at least one pair"));
        }
        if self.pairs.iter().any(|(u, v)| u.is_empty() || v.is_empty()) {
            return Err(Error::domain("instance words must be nonempty"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        self.pairs.iter().flat_map(|(u, v)| u.iter().chain(v)).cloned().collect()
    }

    /// `U_i = a1 dol blk a2 dol blk .. ak dolp blkp`.
    pub fn u_word(&self, i: usize) -> Word {
        let u = &self.pairs[i - 1].0;
        let mut out = Vec::new();
        for (k, a) in u.iter().enumerate() {
            out.push(a.clone());
            let last = k + 1 == u.len();
            out.push((if last { DOL_P } else { DOL }).to_string());
            out.push((if last { BLK_P } else { BLK }).to_string());
        }
        out
    }

    /// `V_i = ^blkp ^dolp ^ak ^blk ^dol ^a(k-1) .. ^blk ^dol ^a1`.
    pub fn v_word(&self, i: usize) -> Word {
        let v = &self.pairs[i - 1].1;
        let mut out = Vec::new();
        for (k, a) in v.iter().rev().enumerate() {
            let first = k == 0;
            out.push(hat(if first { BLK_P } else { BLK }));
            out.push(hat(if first { DOL_P } else { DOL }));
            out.push(hat(a));
        }
        out
    }

    fn u_tilde(&self, i: usize) -> Word {
        let mut w = self.u_word(i);
        w.pop();
        w
    }

    fn v_tilde(&self, i: usize) -> Word {
        self.v_word(i)[1..].to_vec()
    }
}

impl fmt::Display for PcpInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (u, v) in &self.pairs {
            writeln!(f, "{} {}", u.concat(), v.concat())?;
        }
        Ok(())
    }
}

/// True iff the index sequence (1-based) yields equal concatenations.
pub fn check_solution(inst: &PcpInstance, s: &[usize]) -> Result<bool> {
    if s.is_empty() {
        return Err(Error::domain("a solution needs at least one index"));
    }
    if let Some(&bad) = s.iter().find(|&&i| i == 0 || i > inst.len()) {
        return Err(Error::domain(format!("index {bad} out of range 1..={}", inst.len())));
    }
    let u: Word = s.iter().flat_map(|&i| inst.pairs[i - 1].0.clone()).collect();
    let v: Word = s.iter().flat_map(|&i| inst.pairs[i - 1].1.clone()).collect();
    Ok(u == v)
}

/// All solutions with at most `max_len` indices, shortest first.
pub fn solutions_up_to(inst: &PcpInstance, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for p in &layer {
            for i in 1..=inst.len() {
                let mut s = p.clone();
                s.push(i);
                if check_solution(inst, &s).expect("indices in range") {
                    out.push(s.clone());
                }
                next.push(s);
            }
        }
        layer = next;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForbiddenKind {
    /// Forbidden as the label of a simple cycle.
    Cycle,
    /// Forbidden as the label of a simple path.
    Path,
}

#[derive(Clone, Debug)]
pub struct Forbidden {
    pub name: String,
    pub kind: ForbiddenKind,
    pub regex: Regex,
    pub nfa: Nfa,
}

impl Forbidden {
    fn new(name: &str, kind: ForbiddenKind, regex: Regex) -> Self {
        let nfa = Nfa::from_regex(&regex);
        Forbidden { name: name.to_string(), kind, regex, nfa }
    }
}

#[derive(Clone, Debug)]
pub struct ReductionOutput {
    pub instance: PcpInstance,
    pub q1: Crpq,
    pub q2: Crpq,
    /// The two-query form: a simple cycle in any cycle language or a simple
    /// path in any path language.
    pub union: CrpqUnion,
    /// The eight forbidden languages, cycle and path language per condition.
    pub forbidden: Vec<Forbidden>,
    /// The two padding languages of the single-query form.
    pub dummies: Vec<Forbidden>,
    pub alphabet: BTreeSet<String>,
}

fn syms<S: AsRef<str>>(names: &[S]) -> Regex {
    Regex::alt(names.iter().map(|s| Regex::sym(s.as_ref()))).expect("nonempty symbol class")
}

fn sum(parts: Vec<Option<Regex>>) -> Regex {
    Regex::alt(parts.into_iter().flatten()).expect("at least one summand")
}

fn cat(parts: Vec<Regex>) -> Regex {
    Regex::seq(parts)
}

fn s(x: &str) -> Regex {
    Regex::sym(x)
}

fn h(x: &str) -> Regex {
    Regex::sym(hat(x))
}

pub fn reduce(inst: &PcpInstance) -> ReductionOutput {
    let l = inst.len();
    let sigma: Vec<String> = inst.alphabet().into_iter().collect();
    let sigma_hat: Vec<String> = sigma.iter().map(|a| hat(a)).collect();
    let idx: Vec<String> = (1..=l).map(index_symbol).collect();
    let idx_hat: Vec<String> = idx.iter().map(|i| hat(i)).collect();
    let ii = || syms(&idx);
    let ii_h = || syms(&idx_hat);
    let sg = || syms(&sigma);
    let sg_h = || syms(&sigma_hat);
    let u_all = || Regex::alt((1..=l).map(|i| Regex::word(&inst.u_word(i)))).expect("l >= 1");
    let v_all = || Regex::alt((1..=l).map(|i| Regex::word(&inst.v_word(i)))).expect("l >= 1");
    let ut_all = || Regex::alt((1..=l).map(|i| Regex::word(&inst.u_tilde(i)))).expect("l >= 1");
    let vt_all = || Regex::alt((1..=l).map(|i| Regex::word(&inst.v_tilde(i)))).expect("l >= 1");
    let n_max = (1..=l).map(|i| inst.u_word(i).len()).max().expect("l >= 1");

    let l_i = Regex::plus(cat(vec![s(BOX), s(HASH), ii()]));
    let l_i_hat = Regex::plus(cat(vec![ii_h(), h(HASH), h(BOX)]));
    let l_a = Regex::plus(u_all());
    let l_a_hat = Regex::plus(v_all());
    let atoms = vec![
        Atom::new("y1", l_i, "x"),
        Atom::new("y2", l_a_hat, "x"),
        Atom::new("x", l_i_hat, "z1"),
        Atom::new("x", l_a, "z2"),
        Atom::new("x", s(BOX), "x'"),
        Atom::new("x", h(BLK), "x'"),
        Atom::new("x'", h(BOX), "x"),
        Atom::new("x'", s(BLK), "x"),
        Atom::new("y1'", s(HASH_INF), "y1"),
        Atom::new("y2'", h(DOL_INF), "y2"),
        Atom::new("z1", cat(vec![h(HASH_INF), h(HASH)]), "z1'"),
        Atom::new("z2", cat(vec![s(DOL_INF), s(DOL)]), "z2'"),
    ];
    let mut q1 = Crpq::new(Vec::new(), atoms);
    q1.name = "Q1".into();

    let pairs_ne = |a: &[String], b: &[String]| -> Option<Regex> {
        Regex::alt(a.iter().enumerate().flat_map(|(i, x)| {
            b.iter().enumerate().filter(move |(j, _)| *j != i).map(move |(_, y)| cat(vec![s(x), s(y)]))
        }))
    };
    let k_ii = sum(vec![
        Some(cat(vec![ii(), ii_h()])),
        Some(cat(vec![s(HASH_INF), ii_h()])),
        Some(cat(vec![ii(), h(HASH_INF)])),
    ]);
    let m_ii = sum(vec![
        pairs_ne(&idx, &idx_hat),
        Some(cat(vec![ii_h(), s(HASH)])),
        Some(cat(vec![h(HASH), ii()])),
        Some(cat(vec![s(HASH), ii(), ii_h(), h(HASH)])),
        Some(cat(vec![s(BOX), h(BOX)])),
        Some(cat(vec![s(HASH_INF), ii_h()])),
        Some(cat(vec![ii(), h(HASH_INF)])),
    ]);
    let k_ia =
        sum(vec![Some(cat(vec![ii(), sg()])), Some(cat(vec![s(HASH_INF), sg()])), Some(cat(vec![ii(), s(DOL_INF)]))]);
    let filler = || Regex::union(Regex::union(sg(), s(DOL)), s(BLK));
    let fillers = Regex::alt((1..=n_max).map(|n| Regex::seq(std::iter::repeat_with(filler).take(n)))).expect("n >= 1");
    let idx_then_other_u = Regex::alt((1..=l).flat_map(|i| {
        (1..=l).filter(move |&j| j != i).map(move |j| cat(vec![s(&index_symbol(i)), Regex::word(&inst.u_tilde(j))]))
    }));
    let m_ia = sum(vec![
        Some(cat(vec![Regex::union(Regex::union(Regex::union(sg(), s(DOL)), s(DOL_P)), s(BLK)), ii()])),
        Some(cat(vec![fillers, s(HASH)])),
        idx_then_other_u,
        Some(cat(vec![s(HASH), ii(), ut_all()])),
        Some(cat(vec![s(BOX), s(BLK_P)])),
        Some(cat(vec![s(HASH_INF), sg()])),
        Some(cat(vec![ii(), s(DOL_INF)])),
    ]);
    let k_ai = sum(vec![
        Some(cat(vec![sg_h(), ii_h()])),
        Some(cat(vec![h(DOL_INF), ii_h()])),
        Some(cat(vec![sg_h(), h(HASH_INF)])),
    ]);
    let other_v_then_idx = Regex::alt((1..=l).flat_map(|i| {
        (1..=l).filter(move |&j| j != i).map(move |j| cat(vec![Regex::word(&inst.v_tilde(j)), h(&index_symbol(i))]))
    }));
    let m_ai = sum(vec![
        Some(cat(vec![ii_h(), Regex::union(Regex::union(Regex::union(sg_h(), h(DOL)), h(DOL_P)), h(BLK))])),
        Some(cat(vec![h(HASH), sg_h()])),
        Some(cat(vec![ii_h(), h(HASH), Regex::union(Regex::union(sg_h(), h(DOL)), h(BLK))])),
        other_v_then_idx,
        Some(cat(vec![vt_all(), ii_h(), h(HASH)])),
        Some(cat(vec![h(BLK_P), h(BOX)])),
        Some(cat(vec![h(DOL_INF), ii_h()])),
        Some(cat(vec![sg_h(), h(HASH_INF)])),
    ]);
    let k_aa = sum(vec![
        Some(cat(vec![sg_h(), sg()])),
        Some(cat(vec![h(DOL_INF), sg()])),
        Some(cat(vec![sg_h(), s(DOL_INF)])),
    ]);
    let dols = || Regex::union(s(DOL), s(DOL_P));
    let dols_h = || Regex::union(h(DOL), h(DOL_P));
    let m_aa = sum(vec![
        pairs_ne(&sigma_hat, &sigma),
        Some(cat(vec![sg(), dols_h()])),
        Some(cat(vec![dols(), sg_h()])),
        Some(cat(vec![dols_h(), sg_h(), sg(), dols()])),
        Some(cat(vec![Regex::union(h(BLK), h(BLK_P)), Regex::union(s(BLK), s(BLK_P))])),
        Some(cat(vec![h(DOL_INF), sg()])),
        Some(cat(vec![sg_h(), s(DOL_INF)])),
    ]);
    let k_dummy = cat(vec![
        Regex::union(Regex::union(s(BOX), h(BLK)), h(BLK_P)),
        Regex::union(Regex::union(h(BOX), s(BLK)), s(BLK_P)),
    ]);
    let m_dummy = Regex::union(Regex::union(h(HASH), s(DOL)), s(DOL_P));
    let l_link = sum(vec![
        Some(Regex::Eps),
        Some(ii()),
        Some(cat(vec![s(HASH), ii()])),
        Some(cat(vec![h(HASH), ii()])),
        Some(cat(vec![s(BOX), s(HASH), ii()])),
        Some(s(HASH_INF)),
        Some(cat(vec![Regex::union(Regex::union(Regex::union(sg(), s(DOL)), s(DOL_P)), s(BLK)), ii()])),
        Some(sg_h()),
        Some(cat(vec![h(HASH), sg_h()])),
        Some(vt_all()),
        Some(cat(vec![h(BLK_P), vt_all()])),
        Some(h(DOL_INF)),
        Some(cat(vec![dols(), sg_h()])),
        Some(cat(vec![dols_h(), sg_h()])),
        Some(cat(vec![Regex::union(h(BLK), h(BLK_P)), dols_h(), sg_h()])),
    ]);

    use ForbiddenKind::{Cycle, Path};
    let forbidden = vec![
        Forbidden::new("K_I_Ihat", Cycle, k_ii),
        Forbidden::new("M_I_Ihat", Path, m_ii),
        Forbidden::new("K_I_a", Cycle, k_ia),
        Forbidden::new("M_I_a", Path, m_ia),
        Forbidden::new("K_ahat_Ihat", Cycle, k_ai),
        Forbidden::new("M_ahat_Ihat", Path, m_ai),
        Forbidden::new("K_ahat_a", Cycle, k_aa),
        Forbidden::new("M_ahat_a", Path, m_aa),
    ];
    let dummies = vec![Forbidden::new("K_dummy", Cycle, k_dummy), Forbidden::new("M_dummy", Path, m_dummy)];
    let of_kind = |k: ForbiddenKind| Regex::alt(forbidden.iter().filter(|f| f.kind == k).map(|f| f.regex.clone()));
    let k_cycle = of_kind(Cycle).expect("four cycle languages");
    let m_path = of_kind(Path).expect("four path languages");
    let dummy = |k: ForbiddenKind| dummies.iter().find(|f| f.kind == k).expect("one dummy per kind").regex.clone();
    let mut q2 = Crpq::new(
        Vec::new(),
        vec![
            Atom::new("x", Regex::union(k_cycle.clone(), dummy(Cycle)), "x"),
            Atom::new("y", l_link, "x"),
            Atom::new("y", Regex::union(m_path.clone(), dummy(Path)), "z"),
        ],
    );
    q2.name = "Q2".into();
    let union = CrpqUnion {
        disjuncts: vec![
            Crpq::new(Vec::new(), vec![Atom::new("x", k_cycle, "x")]),
            Crpq::new(Vec::new(), vec![Atom::new("y", m_path, "z")]),
        ],
    };
    let alphabet = q1.alphabet().union(&q2.alphabet()).cloned().collect();
    ReductionOutput { instance: inst.clone(), q1, q2, union, forbidden, dummies, alphabet }
}

impl ReductionOutput {
    /// Forbidden and padding languages, one per line: `name kind regex`.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for f in self.forbidden.iter().chain(&self.dummies) {
            let kind = match f.kind {
                ForbiddenKind::Cycle => "cycle",
                ForbiddenKind::Path => "path",
            };
            out.push_str(&format!("{} {kind} {}\n", f.name, f.regex));
        }
        out
    }

    /// Unhatted symbols: instance letters, index symbols and the markers.
    pub fn unhatted_symbols(&self) -> BTreeSet<String> {
        self.alphabet.iter().filter(|s| !s.starts_with('^')).cloned().collect()
    }
}

/// Equalities and distinctions a well-formed a-inj-expansion imposes on the
/// variables along the four main atom paths.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Constraints {
    pub equal: Vec<(String, String)>,
    pub distinct: Vec<(String, String)>,
}

fn index_of(sym: &str) -> Option<usize> {
    sym.strip_prefix('I')?.parse().ok()
}

/// Index sequence `i1..ik` read from `box hash I(ik) .. box hash I(i1)`.
fn read_index_word(w: &[String], l: usize) -> Option<Vec<usize>> {
    if w.is_empty() || !w.len().is_multiple_of(3) {
        return None;
    }
    let mut seq = Vec::new();
    for c in w.chunks(3) {
        if c[0] != BOX || c[1] != HASH {
            return None;
        }
        seq.push(index_of(&c[2]).filter(|&i| (1..=l).contains(&i))?);
    }
    seq.reverse();
    Some(seq)
}

/// Index sequence `i1..ik` read from `^I(i1) ^hash ^box .. ^I(ik) ^hash ^box`.
fn read_hat_index_word(w: &[String], l: usize) -> Option<Vec<usize>> {
    if w.is_empty() || !w.len().is_multiple_of(3) {
        return None;
    }
    let mut seq = Vec::new();
    for c in w.chunks(3) {
        if c[1] != hat(HASH) || c[2] != hat(BOX) {
            return None;
        }
        seq.push(index_of(c[0].strip_prefix('^')?).filter(|&i| (1..=l).contains(&i))?);
    }
    Some(seq)
}

/// Splits a word after every occurrence of `end`.
fn blocks_ending(w: &[String], end: &str) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for x in w {
        cur.push(x.clone());
        if x == end {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Splits a word before every occurrence of `start`.
fn blocks_starting(w: &[String], start: &str) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    for x in w {
        if x == start || out.is_empty() {
            out.push(Vec::new());
        }
        out.last_mut().expect("a block is open").push(x.clone());
    }
    out
}

/// The constraints of the four conditions for the given words and atom
/// paths, or `None` when the words do not have the required shapes.
pub fn constraints(inst: &PcpInstance, words: &[Word], paths: &[Vec<String>]) -> Option<Constraints> {
    let l = inst.len();
    let seq = read_index_word(&words[ATOM_INDEX], l)?;
    let seq_hat = read_hat_index_word(&words[ATOM_HAT_INDEX], l)?;
    if seq != seq_hat {
        return None;
    }
    let k = seq.len();
    let (p0, p1, p2, p3) = (&paths[ATOM_INDEX], &paths[ATOM_HAT_WORD], &paths[ATOM_HAT_INDEX], &paths[ATOM_WORD]);
    let mut c = Constraints::default();
    let eq = |c: &mut Constraints, a: &String, b: &String| c.equal.push((a.clone(), b.clone()));
    let ne = |c: &mut Constraints, a: &String, b: &String| c.distinct.push((a.clone(), b.clone()));
    // Nodes around block j (1-based) of the index word and the hatted index word.
    let s_i = |j: usize| &p0[3 * (k - j) + 1];
    let t_i = |j: usize| &p0[3 * (k - j) + 2];
    let r_i = |j: usize| &p0[3 * (k - j)];
    let t_ih = |j: usize| &p2[3 * (j - 1) + 1];
    let s_ih = |j: usize| &p2[3 * (j - 1) + 2];
    let r_ih = |j: usize| &p2[3 * (j - 1) + 3];

    for j in 1..=k {
        ne(&mut c, t_i(j), t_ih(j));
        eq(&mut c, s_i(j), s_ih(j));
        eq(&mut c, r_i(j), r_ih(j));
    }

    let u_blocks = blocks_ending(&words[ATOM_WORD], BLK_P);
    if u_blocks.len() != k || (1..=k).any(|j| u_blocks[j - 1] != inst.u_word(seq[j - 1])) {
        return None;
    }
    let mut off = 0;
    for (j, b) in (1..=k).zip(&u_blocks) {
        let end = off + b.len();
        for t in &p3[off + 1..end - 1] {
            ne(&mut c, t_i(j), t);
        }
        eq(&mut c, s_i(j), &p3[end - 1]);
        eq(&mut c, r_i(j), &p3[end]);
        off = end;
    }

    let v_blocks = blocks_starting(&words[ATOM_HAT_WORD], &hat(BLK_P));
    if v_blocks.len() != k || (0..k).any(|m| v_blocks[m] != inst.v_word(seq[k - m - 1])) {
        return None;
    }
    let mut start = 0;
    for (m, b) in v_blocks.iter().enumerate() {
        let j = k - m;
        let end = start + b.len();
        for t in &p1[start + 2..end] {
            ne(&mut c, t_ih(j), t);
        }
        eq(&mut c, &p1[start + 1], s_ih(j));
        eq(&mut c, &p1[start], r_ih(j));
        start = end;
    }

    let (wa, wa_hat) = (&words[ATOM_WORD], &words[ATOM_HAT_WORD]);
    if wa.len() != wa_hat.len() || wa.len() % 3 != 0 {
        return None;
    }
    let n = wa.len() / 3;
    for m in 0..n {
        if wa_hat[3 * m + 2] != hat(&wa[3 * (n - 1 - m)]) {
            return None;
        }
        let j = n - m;
        let p = j - 1;
        ne(&mut c, &p1[3 * m + 2], &p3[3 * p + 1]);
        eq(&mut c, &p1[3 * m + 1], &p3[3 * p + 2]);
        eq(&mut c, &p1[3 * m], &p3[3 * p + 3]);
    }
    Some(c)
}

fn check_is_expansion(f: &AinjExpansion, out: &ReductionOutput) -> Result<()> {
    let q1 = &out.q1;
    if f.base.words.len() != q1.atoms.len() || q1.atoms.iter().zip(&f.base.words).any(|(a, w)| !a.nfa.accepts(w)) {
        return Err(Error::domain("not an a-inj-expansion of the reduction's left query"));
    }
    Ok(())
}

/// True iff the expansion satisfies the word shapes and the equality and
/// distinctness clauses of all four conditions.
pub fn is_well_formed(f: &AinjExpansion, out: &ReductionOutput) -> Result<bool> {
    check_is_expansion(f, out)?;
    let Some(c) = constraints(&out.instance, &f.base.words, &f.expansion.atom_paths) else {
        return Ok(false);
    };
    Ok(c.equal.iter().all(|(a, b)| a == b) && c.distinct.iter().all(|(a, b)| a != b))
}

/// A simple cycle or simple path of the graph labelled in a forbidden language.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForbiddenHit {
    pub language: String,
    pub nodes: Vec<String>,
    pub label: Word,
}

/// First forbidden labelled simple cycle or path, by depth-first search
/// bounded by the longest word of each (finite) language.
pub fn find_forbidden(g: &GraphDb, languages: &[Forbidden]) -> Option<ForbiddenHit> {
    for f in languages {
        let max = f.nfa.longest_word().flatten().expect("forbidden languages are finite");
        let letter_map: Vec<Option<usize>> = g.labels().iter().map(|l| f.nfa.letter(l)).collect();
        for start in 0..g.node_count() {
            let mut nodes = vec![start];
            let mut label = Vec::new();
            if let Some(hit) = forbidden_dfs(g, f, &letter_map, max, f.nfa.initial().clone(), &mut nodes, &mut label) {
                return Some(ForbiddenHit {
                    language: f.name.clone(),
                    nodes: hit.iter().map(|&n| g.node_name(n).to_string()).collect(),
                    label: label.iter().map(|&l| g.label_name(l).to_string()).collect(),
                });
            }
        }
    }
    None
}

fn forbidden_dfs(
    g: &GraphDb,
    f: &Forbidden,
    letter_map: &[Option<usize>],
    max: usize,
    states: fixedbitset::FixedBitSet,
    nodes: &mut Vec<usize>,
    label: &mut Vec<usize>,
) -> Option<Vec<usize>> {
    if label.len() == max {
        return None;
    }
    let cur = *nodes.last().expect("path has a start");
    for &(l, t) in g.out_edges(cur) {
        let Some(a) = letter_map[l] else { continue };
        let next = f.nfa.step(&states, a);
        if next.is_clear() {
            continue;
        }
        let accepting = !next.is_disjoint(f.nfa.finals());
        let closes = t == nodes[0];
        let fresh = !nodes.contains(&t);
        label.push(l);
        match f.kind {
            ForbiddenKind::Cycle if closes && accepting => {
                let mut hit = nodes.clone();
                hit.push(t);
                return Some(hit);
            }
            ForbiddenKind::Path if fresh && accepting => {
                let mut hit = nodes.clone();
                hit.push(t);
                return Some(hit);
            }
            _ => {}
        }
        if fresh {
            nodes.push(t);
            if let Some(hit) = forbidden_dfs(g, f, letter_map, max, next, nodes, label) {
                return Some(hit);
            }
            nodes.pop();
        }
        label.pop();
    }
    None
}

/// True iff the expansion has no simple cycle labelled in a cycle language
/// and no simple path labelled in a path language.
pub fn forbidden_scan(f: &AinjExpansion, out: &ReductionOutput) -> bool {
    find_forbidden(&f.expansion.db(), &out.forbidden).is_none()
}

/// Words of the twelve atoms for an index sequence.
pub fn solution_words(inst: &PcpInstance, s: &[usize]) -> Vec<Word> {
    let mut w_i = Vec::new();
    for &i in s.iter().rev() {
        w_i.extend([BOX.to_string(), HASH.to_string(), index_symbol(i)]);
    }
    let mut w_i_hat = Vec::new();
    for &i in s {
        w_i_hat.extend([hat(&index_symbol(i)), hat(HASH), hat(BOX)]);
    }
    let w_a: Word = s.iter().flat_map(|&i| inst.u_word(i)).collect();
    let w_a_hat: Word = s.iter().rev().flat_map(|&i| inst.v_word(i)).collect();
    let one = |x: String| vec![x];
    vec![
        w_i,
        w_a_hat,
        w_i_hat,
        w_a,
        one(BOX.into()),
        one(hat(BLK)),
        one(hat(BOX)),
        one(BLK.into()),
        one(HASH_INF.into()),
        one(hat(DOL_INF)),
        vec![hat(HASH_INF), hat(HASH)],
        vec![DOL_INF.into(), DOL.into()],
    ]
}

/// True iff every proper prefix of the index sequence yields words of equal
/// length on both sides. The prescribed identifications of the four
/// conditions chain block boundaries of the two hatted and unhatted word
/// atoms together, so only such solutions have an admissible canonical
/// expansion.
pub fn is_balanced(inst: &PcpInstance, s: &[usize]) -> bool {
    let (mut lu, mut lv) = (0, 0);
    s.iter().all(|&i| {
        lu += inst.pairs[i - 1].0.len();
        lv += inst.pairs[i - 1].1.len();
        lu == lv
    })
}

/// Groups equality pairs into blocks (singletons dropped).
pub fn blocks_of_pairs(pairs: &[(String, String)]) -> Vec<Vec<String>> {
    let mut parent: BTreeMap<String, String> = BTreeMap::new();
    fn find(p: &mut BTreeMap<String, String>, x: &str) -> String {
        let mut r = x.to_string();
        while let Some(n) = p.get(&r).filter(|n| **n != r) {
            r = n.clone();
        }
        r
    }
    for (a, b) in pairs {
        parent.entry(a.clone()).or_insert_with(|| a.clone());
        parent.entry(b.clone()).or_insert_with(|| b.clone());
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent.insert(hi, lo);
        }
    }
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let keys: Vec<String> = parent.keys().cloned().collect();
    for k in keys {
        let r = find(&mut parent, &k);
        groups.entry(r).or_default().push(k);
    }
    groups.into_values().filter(|g| g.len() > 1).collect()
}

/// The canonical well-formed a-inj-expansion realising a solution.
pub fn solution_to_expansion(out: &ReductionOutput, s: &[usize]) -> Result<AinjExpansion> {
    if !check_solution(&out.instance, s)? {
        return Err(Error::domain("the index sequence is not a solution"));
    }
    let words = solution_words(&out.instance, s);
    let base = build_expansion(&out.q1, &words)?;
    let c = constraints(&out.instance, &words, &base.atom_paths)
        .ok_or_else(|| Error::Structural("solution words do not have the well-formed shapes".into()))?;
    let blocks = blocks_of_pairs(&c.equal);
    let expansion = base
        .quotient(&blocks)
        .map_err(|e| Error::Structural(format!("prescribed identifications are not admissible: {e}")))?;
    Ok(AinjExpansion { base, blocks, expansion })
}

/// The a-inj-expansion described by a containment witness for the reduction.
pub fn witness_expansion(out: &ReductionOutput, w: &Witness) -> Result<AinjExpansion> {
    let base = build_expansion(&out.q1, &w.words)?;
    let expansion = base.quotient(&w.blocks)?;
    Ok(AinjExpansion { base, blocks: w.blocks.clone(), expansion })
}

#[derive(Clone, Debug)]
pub enum BlockSearch {
    Counterexample(Box<AinjExpansion>),
    /// No counterexample among base expansions with at most this many blocks per main atom.
    NoneUpTo(usize),
    Capped,
}

fn sequences(l: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max {
        let mut next = Vec::new();
        for p in &layer {
            for i in 1..=l {
                let mut s = p.clone();
                s.push(i);
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Bounded a-inj counterexample search over base expansions whose four main
/// words consist of at most `max_blocks` index blocks each (independently
/// chosen), ordered by total block count.
pub fn search_index_blocks(out: &ReductionOutput, max_blocks: usize, opts: &ContainOptions) -> Result<BlockSearch> {
    let inst = &out.instance;
    let seqs = sequences(inst.len(), max_blocks);
    let q2u = eliminate_epsilon(&out.q2, opts.limits.disjunct_cap)?;
    let mut combos: Vec<[usize; 4]> = Vec::new();
    for a in 0..seqs.len() {
        for b in 0..seqs.len() {
            for c in 0..seqs.len() {
                for d in 0..seqs.len() {
                    combos.push([a, b, c, d]);
                }
            }
        }
    }
    combos.sort_by_key(|c| c.iter().map(|&i| seqs[i].len()).sum::<usize>());
    let mut capped = false;
    for c in combos {
        let mut words = solution_words(inst, &[1]);
        words[ATOM_INDEX] =
            seqs[c[0]].iter().rev().flat_map(|&i| [BOX.to_string(), HASH.to_string(), index_symbol(i)]).collect();
        words[ATOM_HAT_INDEX] = seqs[c[1]].iter().flat_map(|&i| [hat(&index_symbol(i)), hat(HASH), hat(BOX)]).collect();
        words[ATOM_WORD] = seqs[c[2]].iter().flat_map(|&i| inst.u_word(i)).collect();
        words[ATOM_HAT_WORD] = seqs[c[3]].iter().rev().flat_map(|&i| inst.v_word(i)).collect();
        let base = build_expansion(&out.q1, &words)?;
        match ainj_counterexample_in(&q2u, &base, opts)? {
            RepairOutcome::Counterexample(blocks) => {
                let expansion = base.quotient(&blocks)?;
                return Ok(BlockSearch::Counterexample(Box::new(AinjExpansion { base, blocks, expansion })));
            }
            RepairOutcome::NoCounterexample => {}
            RepairOutcome::Capped => capped = true,
        }
    }
    Ok(if capped { BlockSearch::Capped } else { BlockSearch::NoneUpTo(max_blocks) })
}

/// Agreement counts between the structural and the label-based
/// characterisations of well-formedness on sampled a-inj-expansions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClaimReport {
    pub checked: usize,
    pub well_formed: usize,
    /// No forbidden label found, yet not well-formed.
    pub clean_but_ill_formed: usize,
    /// Well-formed, yet a forbidden label occurs (caused by identifications
    /// beyond the prescribed ones).
    pub well_formed_but_hit: usize,
    /// The union form disagrees with the forbidden-label scan.
    pub union_mismatch: usize,
    /// The single right query disagrees with the union form.
    pub single_mismatch: usize,
    pub disagreements: Vec<String>,
}

/// Random admissible identification: repeatedly merges two random blocks
/// whose union has no atom-related pair.
pub fn random_partition(
    base: &Expansion,
    start: &[Vec<String>],
    merges: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<String>> {
    let vars = base.cq.vars();
    let pos: BTreeMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    let mut block: Vec<usize> = (0..vars.len()).collect();
    for b in start {
        let root = pos[b[0].as_str()];
        for v in b {
            block[pos[v.as_str()]] = root;
        }
    }
    for _ in 0..merges {
        let (i, j) = (rng.gen_range(0..vars.len()), rng.gen_range(0..vars.len()));
        let (bi, bj) = (block[i], block[j]);
        if bi == bj {
            continue;
        }
        let members = |b: usize| (0..vars.len()).filter(|&k| block[k] == b).collect::<Vec<_>>();
        let (mi, mj) = (members(bi), members(bj));
        let ok = mi.iter().all(|&x| mj.iter().all(|&y| !base.is_atom_related(&vars[x], &vars[y])));
        if ok {
            for b in block.iter_mut().filter(|b| **b == bj) {
                *b = bi;
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (k, &b) in block.iter().enumerate() {
        groups.entry(b).or_default().push(vars[k].clone());
    }
    groups.into_values().filter(|g| g.len() > 1).collect()
}

/// Samples a-inj-expansions of the left query around the canonical
/// expansions of the given solutions (dropping some prescribed
/// identifications and adding random ones) and compares `is_well_formed`
/// with `forbidden_scan`, the union form and the single right query.
pub fn claim_check(
    out: &ReductionOutput,
    solutions: &[Vec<usize>],
    samples: usize,
    seed: u64,
    opts: &ContainOptions,
) -> Result<ClaimReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bases: Vec<(Expansion, Vec<(String, String)>)> = Vec::new();
    for s in solutions {
        let words = solution_words(&out.instance, s);
        let base = build_expansion(&out.q1, &words)?;
        let c = constraints(&out.instance, &words, &base.atom_paths).expect("solution words are well shaped");
        bases.push((base, c.equal));
    }
    if bases.is_empty() {
        let words = solution_words(&out.instance, &[1]);
        let base = build_expansion(&out.q1, &words)?;
        let eq = constraints(&out.instance, &words, &base.atom_paths).map(|c| c.equal).unwrap_or_default();
        bases.push((base, eq));
    }
    let mut report = ClaimReport::default();
    for n in 0..samples {
        let (base, equal) = &bases[n % bases.len()];
        let mut kept: Vec<(String, String)> = equal.clone();
        kept.shuffle(&mut rng);
        let keep = match n % 4 {
            0 => kept.len(),
            1 => kept.len().saturating_sub(1),
            _ => rng.gen_range(0..=kept.len()),
        };
        kept.truncate(keep);
        let start = blocks_of_pairs(&kept);
        let start = if admissible(base, &start) { start } else { Vec::new() };
        let extra = if n % 4 == 0 { 0 } else { rng.gen_range(0..4) };
        let blocks = random_partition(base, &start, extra, &mut rng);
        let expansion = base.quotient(&blocks)?;
        let f = AinjExpansion { base: base.clone(), blocks, expansion };
        let wf = is_well_formed(&f, out)?;
        let scan = forbidden_scan(&f, out);
        let g = f.expansion.db();
        let union_hit = out
            .union
            .disjuncts
            .iter()
            .map(|d| eval_membership(d, &g, &[], Semantics::AInj, &opts.limits))
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .any(|b| b);
        let single_hit = eval_membership(&out.q2, &g, &[], Semantics::AInj, &opts.limits)?;
        report.checked += 1;
        report.well_formed += usize::from(wf);
        report.clean_but_ill_formed += usize::from(scan && !wf);
        report.well_formed_but_hit += usize::from(wf && !scan);
        report.union_mismatch += usize::from(scan == union_hit);
        report.single_mismatch += usize::from(union_hit != single_hit);
        if wf != scan || scan == union_hit || union_hit != single_hit {
            report.disagreements.push(format!(
                "blocks {:?}: well-formed {wf}, scan clean {scan}, union matches {union_hit}, single query matches {single_hit}",
                f.blocks
            ));
        }
    }
    Ok(report)
}

fn admissible(base: &Expansion, blocks: &[Vec<String>]) -> bool {
    blocks.iter().all(|b| b.iter().enumerate().all(|(i, x)| b[i + 1..].iter().all(|y| !base.is_atom_related(x, y))))
}

/// Every admissible partition of a base expansion, for exhaustive checks on
/// tiny instances.
pub fn all_partitions(base: &Expansion) -> Vec<Vec<Vec<String>>> {
    admissible_partitions(base)
}
