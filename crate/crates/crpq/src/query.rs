//! CRPQ representation, text format, classification and normalizations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, GraphDb};
use crate::nfa::Nfa;
use crate::regex::Regex;

#[derive(Clone, Debug)]
pub struct Atom {
    pub source: String,
    pub target: String,
    pub regex: Regex,
    pub nfa: Nfa,
}

impl PartialEq for Atom {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.target == other.target && self.regex == other.regex
    }
}

impl Eq for Atom {}

impl Atom {
    pub fn new(source: impl Into<String>, regex: Regex, target: impl Into<String>) -> Self {
        let nfa = Nfa::from_regex(&regex);
        Atom { source: source.into(), target: target.into(), regex, nfa }
    }

    pub fn is_loop(&self) -> bool {
        self.source == self.target
    }

    /// The letter `a` when the language is exactly `{a}`.
    pub fn single_letter(&self) -> Option<&str> {
        if self.nfa.longest_word() != Some(Some(1)) {
            return None;
        }
        let words = self.nfa.words_up_to_capped(1, 2).0;
        match words.as_slice() {
            [w] if w.len() == 1 => self.nfa.letter(&w[0]).map(|a| self.nfa.alphabet()[a].as_str()),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QueryClass {
    Cq,
    CrpqFin,
    Crpq,
}

impl fmt::Display for QueryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryClass::Cq => "CQ",
            QueryClass::CrpqFin => "CRPQfin",
            QueryClass::Crpq => "CRPQ",
        })
    }
}

/// A conjunctive regular path query `Q(free) := atoms`. The variable set is
/// explicit so that variables without atoms survive normalizations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Crpq {
    pub name: String,
    pub free: Vec<String>,
    pub atoms: Vec<Atom>,
    pub vars: BTreeSet<String>,
}

impl Crpq {
    pub fn new(free: Vec<String>, atoms: Vec<Atom>) -> Self {
        let mut vars: BTreeSet<String> = free.iter().cloned().collect();
        for a in &atoms {
            vars.insert(a.source.clone());
            vars.insert(a.target.clone());
        }
        Crpq { name: "Q".into(), free, atoms, vars }
    }

    pub fn with_vars(mut self, extra: impl IntoIterator<Item = String>) -> Self {
        self.vars.extend(extra);
        self
    }

    pub fn parse(text: &str) -> Result<Self> {
        QueryParser::new(text).query()
    }

    pub fn arity(&self) -> usize {
        self.free.len()
    }

    pub fn is_boolean(&self) -> bool {
        self.free.is_empty()
    }

    pub fn vars(&self) -> Vec<String> {
        self.vars.iter().cloned().collect()
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        self.atoms.iter().flat_map(|a| a.regex.alphabet()).collect()
    }

    pub fn classify(&self) -> QueryClass {
        if self.atoms.iter().all(|a| a.single_letter().is_some()) {
            QueryClass::Cq
        } else if self.atoms.iter().all(|a| a.regex.is_star_free()) {
            QueryClass::CrpqFin
        } else {
            QueryClass::Crpq
        }
    }

    pub fn is_epsilon_free(&self) -> bool {
        self.atoms.iter().all(|a| !a.nfa.accepts_epsilon())
    }

    /// Canonical database of a CQ: one node per variable, one edge per atom.
    pub fn canonical_db(&self) -> Result<GraphDb> {
        let mut b = GraphBuilder::new();
        for v in &self.vars {
            b.node(v.clone());
        }
        for a in &self.atoms {
            let l = a.single_letter().ok_or_else(|| {
                Error::domain(format!("atom {} -[{}]-> {} is not a single letter", a.source, a.regex, a.target))
            })?;
            b.edge(a.source.clone(), l, a.target.clone());
        }
        Ok(b.build())
    }

    /// Renames variables through `f` (which must be defined on every variable).
    pub fn rename(&self, f: &dyn Fn(&str) -> String) -> Crpq {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { source: f(&a.source), target: f(&a.target), regex: a.regex.clone(), nfa: a.nfa.clone() })
            .collect();
        Crpq {
            name: self.name.clone(),
            free: self.free.iter().map(|v| f(v)).collect(),
            atoms,
            vars: self.vars.iter().map(|v| f(v)).collect(),
        }
    }

    /// Connected components of the variable/atom graph. Each component carries
    /// the positions of the free tuple that it owns.
    pub fn components(&self) -> Vec<(Crpq, Vec<usize>)> {
        let vars = self.vars();
        let idx: BTreeMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let mut parent: Vec<usize> = (0..vars.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut c = x;
            while p[c] != r {
                let n = p[c];
                p[c] = r;
                c = n;
            }
            r
        }
        for a in &self.atoms {
            let (s, t) = (find(&mut parent, idx[a.source.as_str()]), find(&mut parent, idx[a.target.as_str()]));
            if s != t {
                parent[s.max(t)] = s.min(t);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..vars.len() {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        groups
            .values()
            .map(|members| {
                let set: BTreeSet<String> = members.iter().map(|&i| vars[i].clone()).collect();
                let positions: Vec<usize> = (0..self.free.len()).filter(|&i| set.contains(&self.free[i])).collect();
                let atoms: Vec<Atom> = self.atoms.iter().filter(|a| set.contains(&a.source)).cloned().collect();
                let free = positions.iter().map(|&i| self.free[i].clone()).collect();
                (Crpq { name: self.name.clone(), free, atoms, vars: set }, positions)
            })
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }
}

/// Finite union of CRPQs with a common arity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrpqUnion {
    pub disjuncts: Vec<Crpq>,
}

pub const DEFAULT_DISJUNCT_CAP: usize = 64;

/// Rewrites `q` into a union of epsilon-free CRPQs: an atom whose language
/// holds the empty word either keeps its nonempty words or is dropped with its
/// source variable replaced by its target.
pub fn eliminate_epsilon(q: &Crpq, cap: usize) -> Result<CrpqUnion> {
    let mut out: Vec<Crpq> = Vec::new();
    let mut stack = vec![q.clone()];
    while let Some(cur) = stack.pop() {
        let Some(i) = cur.atoms.iter().position(|a| a.nfa.accepts_epsilon()) else {
            if !out.contains(&cur) {
                out.push(cur);
                if out.len() > cap {
                    return Err(Error::resource(format!("epsilon elimination exceeds {cap} disjuncts")));
                }
            }
            continue;
        };
        let atom = cur.atoms[i].clone();
        let mut collapsed = cur.clone();
        collapsed.atoms.remove(i);
        let (from, to) = (atom.source.clone(), atom.target.clone());
        if from != to {
            collapsed = collapsed.rename(&|v: &str| if v == from { to.clone() } else { v.to_string() });
        }
        stack.push(collapsed);
        if let Some(r) = atom.regex.nonempty_part() {
            let mut kept = cur;
            kept.atoms[i] = Atom::new(atom.source, r, atom.target);
            stack.push(kept);
        }
    }
    Ok(CrpqUnion { disjuncts: out })
}

/// Replaces chains `x -[L]-> y -[L']-> x'` through a non-free variable `y`
/// of in- and out-degree one, with `x`, `y`, `x'` pairwise distinct, by
/// `x -[L L']-> x'`.
pub fn merge_chain_atoms(q: &Crpq) -> Crpq {
    let mut cur = q.clone();
    'outer: loop {
        for y in cur.vars() {
            if cur.free.contains(&y) {
                continue;
            }
            let ins: Vec<usize> = (0..cur.atoms.len()).filter(|&i| cur.atoms[i].target == y).collect();
            let outs: Vec<usize> = (0..cur.atoms.len()).filter(|&i| cur.atoms[i].source == y).collect();
            if ins.len() != 1 || outs.len() != 1 {
                continue;
            }
            let (i, o) = (ins[0], outs[0]);
            let (a, b) = (&cur.atoms[i], &cur.atoms[o]);
            if a.source == y || b.target == y || a.source == b.target {
                continue;
            }
            let merged = Atom::new(a.source.clone(), Regex::concat(a.regex.clone(), b.regex.clone()), b.target.clone());
            let (first, second) = (i.min(o), i.max(o));
            cur.atoms[first] = merged;
            cur.atoms.remove(second);
            cur.vars.remove(&y);
            continue 'outer;
        }
        return cur;
    }
}

impl fmt::Display for Crpq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) :=", self.name, self.free.join(","))?;
        let mut parts: Vec<String> =
            self.atoms.iter().map(|a| format!("{} -[{}]-> {}", a.source, a.regex, a.target)).collect();
        let used: BTreeSet<&String> = self.atoms.iter().flat_map(|a| [&a.source, &a.target]).collect();
        parts.extend(self.vars.iter().filter(|v| !used.contains(v) && !self.free.contains(v)).cloned());
        if !parts.is_empty() {
            write!(f, " {}", parts.join(", "))?;
        }
        Ok(())
    }
}

impl fmt::Display for CrpqUnion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.disjuncts {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

fn is_var_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '\'')
}

struct QueryParser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> QueryParser<'a> {
    fn new(text: &'a str) -> Self {
        QueryParser { text, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn expect(&mut self, lit: &str) -> Result<()> {
        self.skip_ws();
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            Ok(())
        } else {
            Err(Error::syntax(self.pos, format!("expected `{lit}`")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let len: usize = self.rest().chars().take_while(|c| is_var_char(*c)).map(char::len_utf8).sum();
        if len == 0 {
            return Err(Error::syntax(self.pos, "expected a variable name"));
        }
        let s = self.rest()[..len].to_string();
        self.pos += len;
        Ok(s)
    }

    fn query(&mut self) -> Result<Crpq> {
        let name = self.ident()?;
        self.expect("(")?;
        let mut free = Vec::new();
        self.skip_ws();
        if !self.rest().starts_with(')') {
            loop {
                free.push(self.ident()?);
                self.skip_ws();
                if self.rest().starts_with(',') {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(")")?;
        self.expect(":=")?;
        let mut atoms = Vec::new();
        let mut loose = Vec::new();
        self.skip_ws();
        if !self.rest().is_empty() {
            loop {
                let x = self.ident()?;
                self.skip_ws();
                if self.rest().starts_with("-[") {
                    self.pos += 2;
                    let start = self.pos;
                    let end = self.regex_end()?;
                    let regex = Regex::parse(&self.text[start..end]).map_err(|e| match e {
                        Error::Syntax { pos, msg } => Error::syntax(start + pos, msg),
                        other => other,
                    })?;
                    self.pos = end + 3;
                    let y = self.ident()?;
                    atoms.push(Atom::new(x, regex, y));
                } else {
                    loose.push(x);
                }
                self.skip_ws();
                if self.rest().starts_with(',') {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.skip_ws();
        if !self.rest().is_empty() {
            return Err(Error::syntax(self.pos, "unexpected trailing input"));
        }
        let mut q = Crpq::new(free, atoms).with_vars(loose);
        q.name = name;
        Ok(q)
    }

    /// Byte offset of the `]->` closing the current regex, skipping quotes.
    fn regex_end(&self) -> Result<usize> {
        let bytes = self.text.as_bytes();
        let mut i = self.pos;
        let mut quoted = false;
        while i < bytes.len() {
            match bytes[i] {
                b'\'' => quoted = !quoted,
                b']' if !quoted && self.text[i..].starts_with("]->") => return Ok(i),
                _ => {}
            }
            i += 1;
        }
        Err(Error::syntax(self.pos, "unterminated atom: expected `]->`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Crpq {
        Crpq::parse(s).unwrap()
    }

    #[test]
    fn parse_and_display_round_trip() {
        let a = q("Q(x,y) := x -[(ab)*]-> y, y -[c*]-> x");
        assert_eq!(a.atoms.len(), 2);
        assert_eq!(a.free, vec!["x", "y"]);
        assert_eq!(q(&a.to_string()), a);
        let b = q("Q() := z, x -['box' ^a]-> y");
        assert_eq!(b.vars.len(), 3);
        assert_eq!(q(&b.to_string()), b);
        assert_eq!(q("Q() :=").atoms.len(), 0);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Crpq::parse("Q(x) := x -[a]- y"), Err(Error::Syntax { .. })));
        assert!(matches!(Crpq::parse("Q(x) := x -[a+]-> y"), Err(Error::Syntax { pos: 14, .. })));
        assert!(matches!(Crpq::parse("Q(x) x -[a]-> y"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(q("Q() := x -[a]-> y, y -[b]-> z").classify(), QueryClass::Cq);
        assert_eq!(q("Q() := x -[ab+ba]-> y").classify(), QueryClass::CrpqFin);
        assert_eq!(q("Q() := x -[(ab)*]-> y").classify(), QueryClass::Crpq);
    }

    #[test]
    fn eliminate_epsilon_examples() {
        let plain = q("Q(x) := x -[a]-> y");
        assert_eq!(eliminate_epsilon(&plain, 64).unwrap().disjuncts, vec![plain]);
        let star = eliminate_epsilon(&q("Q() := x -[a*]-> y"), 64).unwrap();
        assert_eq!(star.disjuncts.len(), 2);
        assert!(star.disjuncts.iter().any(|d| d.atoms.is_empty()));
        assert!(star.disjuncts.iter().all(|d| d.is_epsilon_free()));
        let fig = eliminate_epsilon(&q("Q(x,y) := x -[(ab)*]-> y, y -[c*]-> x"), 64).unwrap();
        assert_eq!(fig.disjuncts.len(), 4);
        assert!(matches!(eliminate_epsilon(&q("Q() := x -[a*]-> y, y -[a*]-> z"), 3), Err(Error::Resource(_))));
    }

    #[test]
    fn merge_chain_examples() {
        let m = merge_chain_atoms(&q("Q() := x -[a]-> y, y -[b]-> z"));
        assert_eq!(m.atoms.len(), 1);
        assert_eq!(m.atoms[0].source, "x");
        assert_eq!(m.atoms[0].target, "z");
        assert!(m.atoms[0].nfa.accepts(&["a", "b"]));
        let cyc = q("Q() := x -[a]-> y, y -[b]-> x");
        assert_eq!(merge_chain_atoms(&cyc), cyc);
        assert_eq!(merge_chain_atoms(&m), m);
        let free = q("Q(y) := x -[a]-> y, y -[b]-> z");
        assert_eq!(merge_chain_atoms(&free), free);
    }

    #[test]
    fn components_split_free_positions() {
        let c = q("Q(x,z) := x -[a]-> y, z -[b]-> w").components();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].0.free, vec!["z"]);
        assert_eq!(c[0].1, vec![1]);
        assert_eq!(c[1].0.free, vec!["x"]);
        assert_eq!(c[1].1, vec![0]);
        assert_eq!(q("Q() := x -[a + bbb]-> y").classify(), QueryClass::CrpqFin);
    }

    #[test]
    fn canonical_db_requires_cq() {
        assert_eq!(q("Q() := x -[a]-> y, x -[b]-> y").canonical_db().unwrap().edges().len(), 2);
        assert!(q("Q() := x -[ab]-> y").canonical_db().is_err());
    }
}
