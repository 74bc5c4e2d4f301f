//! Epsilon-free nondeterministic automata over named symbols.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use fixedbitset::FixedBitSet;

use crate::regex::Regex;

/// Epsilon-free NFA. Letters are indices into the sorted `alphabet`;
/// `delta[state][letter]` lists successor states in increasing order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nfa {
    alphabet: Vec<String>,
    initial: FixedBitSet,
    finals: FixedBitSet,
    delta: Vec<Vec<Vec<usize>>>,
}

impl Nfa {
    pub fn new(alphabet: Vec<String>, states: usize) -> Self {
        let mut alphabet = alphabet;
        alphabet.sort();
        alphabet.dedup();
        let k = alphabet.len();
        Nfa {
            alphabet,
            initial: FixedBitSet::with_capacity(states),
            finals: FixedBitSet::with_capacity(states),
            delta: vec![vec![Vec::new(); k]; states],
        }
    }

    pub fn add_transition(&mut self, p: usize, a: usize, q: usize) {
        let list = &mut self.delta[p][a];
        if let Err(pos) = list.binary_search(&q) {
            list.insert(pos, q);
        }
    }

    pub fn set_initial(&mut self, q: usize, yes: bool) {
        self.initial.set(q, yes);
    }

    pub fn set_final(&mut self, q: usize, yes: bool) {
        self.finals.set(q, yes);
    }

    /// Glushkov (position) automaton: one state per symbol occurrence plus an
    /// initial state 0.
    pub fn from_regex(r: &Regex) -> Self {
        let alphabet: Vec<String> = r.alphabet().into_iter().collect();
        let mut positions: Vec<usize> = Vec::new();
        let info = glushkov(r, &alphabet, &mut positions);
        let n = positions.len() + 1;
        let mut nfa = Nfa::new(alphabet, n);
        nfa.initial.insert(0);
        if info.nullable {
            nfa.finals.insert(0);
        }
        for &p in &info.last {
            nfa.finals.insert(p + 1);
        }
        for &p in &info.first {
            nfa.add_transition(0, positions[p], p + 1);
        }
        for &(p, q) in &info.follow {
            nfa.add_transition(p + 1, positions[q], q + 1);
        }
        nfa
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn letter(&self, name: &str) -> Option<usize> {
        self.alphabet.binary_search_by(|s| s.as_str().cmp(name)).ok()
    }

    pub fn state_count(&self) -> usize {
        self.delta.len()
    }

    pub fn initial(&self) -> &FixedBitSet {
        &self.initial
    }

    pub fn finals(&self) -> &FixedBitSet {
        &self.finals
    }

    pub fn is_initial(&self, q: usize) -> bool {
        self.initial.contains(q)
    }

    pub fn is_final(&self, q: usize) -> bool {
        self.finals.contains(q)
    }

    pub fn successors(&self, q: usize, a: usize) -> &[usize] {
        &self.delta[q][a]
    }

    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.delta
            .iter()
            .enumerate()
            .flat_map(|(p, row)| row.iter().enumerate().flat_map(move |(a, ts)| ts.iter().map(move |&q| (p, a, q))))
    }

    pub fn accepts_epsilon(&self) -> bool {
        self.initial.intersection(&self.finals).next().is_some()
    }

    pub fn empty_set(&self) -> FixedBitSet {
        FixedBitSet::with_capacity(self.state_count())
    }

    pub fn step(&self, set: &FixedBitSet, a: usize) -> FixedBitSet {
        let mut out = self.empty_set();
        for p in set.ones() {
            for &q in &self.delta[p][a] {
                out.insert(q);
            }
        }
        out
    }

    /// States that reach `set` by reading letter `a`.
    pub fn step_back(&self, set: &FixedBitSet, a: usize) -> FixedBitSet {
        let mut out = self.empty_set();
        for p in 0..self.state_count() {
            if self.delta[p][a].iter().any(|q| set.contains(*q)) {
                out.insert(p);
            }
        }
        out
    }

    /// Runs the word from `start`; a symbol outside the alphabet yields the empty set.
    pub fn run_from<S: AsRef<str>>(&self, start: &FixedBitSet, word: &[S]) -> FixedBitSet {
        let mut cur = start.clone();
        for s in word {
            match self.letter(s.as_ref()) {
                Some(a) => cur = self.step(&cur, a),
                None => return self.empty_set(),
            }
            if cur.ones().next().is_none() {
                break;
            }
        }
        cur
    }

    pub fn accepts<S: AsRef<str>>(&self, word: &[S]) -> bool {
        let end = self.run_from(&self.initial, word);
        end.intersection(&self.finals).next().is_some()
    }

    /// States from which some final state is reachable.
    pub fn coaccessible(&self) -> FixedBitSet {
        let mut co = self.finals.clone();
        loop {
            let mut changed = false;
            for p in 0..self.state_count() {
                if !co.contains(p) && self.delta[p].iter().flatten().any(|q| co.contains(*q)) {
                    co.insert(p);
                    changed = true;
                }
            }
            if !changed {
                return co;
            }
        }
    }

    /// States reachable from an initial state.
    pub fn accessible(&self) -> FixedBitSet {
        let mut seen = self.initial.clone();
        let mut stack: Vec<usize> = seen.ones().collect();
        while let Some(p) = stack.pop() {
            for &q in self.delta[p].iter().flatten() {
                if !seen.contains(q) {
                    seen.insert(q);
                    stack.push(q);
                }
            }
        }
        seen
    }

    pub fn is_empty(&self) -> bool {
        self.accessible().intersection(&self.finals).next().is_none()
    }

    /// Length of the longest accepted word: `None` for an infinite language,
    /// `Some(None)` for the empty language.
    pub fn longest_word(&self) -> Option<Option<usize>> {
        let useful: FixedBitSet = {
            let mut u = self.accessible();
            u.intersect_with(&self.coaccessible());
            u
        };
        if useful.ones().next().is_none() {
            return Some(None);
        }
        // Longest path in the useful subgraph; a cycle means an infinite language.
        let n = self.state_count();
        let mut memo: Vec<Option<usize>> = vec![None; n];
        let mut on_stack = vec![false; n];
        fn longest(
            nfa: &Nfa,
            p: usize,
            useful: &FixedBitSet,
            memo: &mut Vec<Option<usize>>,
            on_stack: &mut Vec<bool>,
        ) -> Option<usize> {
            if let Some(v) = memo[p] {
                return Some(v);
            }
            if on_stack[p] {
                return None;
            }
            on_stack[p] = true;
            let mut best = 0;
            for &q in nfa.delta[p].iter().flatten() {
                if useful.contains(q) {
                    best = best.max(1 + longest(nfa, q, useful, memo, on_stack)?);
                }
            }
            on_stack[p] = false;
            memo[p] = Some(best);
            Some(best)
        }
        let mut best = 0;
        for i in self.initial.ones() {
            if useful.contains(i) {
                best = best.max(longest(self, i, &useful, &mut memo, &mut on_stack)?);
            }
        }
        Some(Some(best))
    }

    /// Same automaton over a larger alphabet (extra letters have no transitions).
    pub fn with_alphabet<S: AsRef<str>>(&self, extra: &[S]) -> Nfa {
        let mut names: BTreeSet<String> = self.alphabet.iter().cloned().collect();
        names.extend(extra.iter().map(|s| s.as_ref().to_string()));
        let alphabet: Vec<String> = names.into_iter().collect();
        let mut out = Nfa::new(alphabet, self.state_count());
        out.initial = self.initial.clone();
        out.finals = self.finals.clone();
        for (p, a, q) in self.transitions() {
            let b = out.letter(&self.alphabet[a]).expect("alphabet extended");
            out.add_transition(p, b, q);
        }
        out
    }

    /// Adds a non-accepting sink and a non-initial source so that every state
    /// has at least one outgoing and one incoming transition per letter.
    pub fn complete_cocomplete<S: AsRef<str>>(&self, alphabet: &[S]) -> Nfa {
        let base = self.with_alphabet(alphabet);
        let n = base.state_count();
        let k = base.alphabet.len();
        let needs_sink = (0..n).any(|p| (0..k).any(|a| base.delta[p][a].is_empty()));
        let mut has_in = vec![vec![false; k]; n];
        for (_, a, q) in base.transitions() {
            has_in[q][a] = true;
        }
        let needs_source = (0..n).any(|q| (0..k).any(|a| !has_in[q][a]));
        let sink = needs_sink.then_some(n);
        let source = needs_source.then_some(n + usize::from(needs_sink));
        let total = n + usize::from(needs_sink) + usize::from(needs_source);
        let mut out = Nfa::new(base.alphabet.clone(), total);
        out.initial = base.initial.clone();
        out.initial.grow(total);
        out.finals = base.finals.clone();
        out.finals.grow(total);
        for (p, a, q) in base.transitions() {
            out.add_transition(p, a, q);
        }
        for a in 0..k {
            if let Some(s) = sink {
                for p in 0..n {
                    if base.delta[p][a].is_empty() {
                        out.add_transition(p, a, s);
                    }
                }
                out.add_transition(s, a, s);
            }
            if let Some(src) = source {
                for q in 0..n {
                    if !has_in[q][a] {
                        out.add_transition(src, a, q);
                    }
                }
                out.add_transition(src, a, src);
            }
            if let (Some(src), Some(s)) = (source, sink) {
                out.add_transition(src, a, s);
            }
        }
        out
    }

    pub fn is_complete_cocomplete(&self) -> bool {
        let n = self.state_count();
        let k = self.alphabet.len();
        let mut has_in = vec![vec![false; k]; n];
        for (_, a, q) in self.transitions() {
            has_in[q][a] = true;
        }
        (0..n).all(|p| (0..k).all(|a| !self.delta[p][a].is_empty() && has_in[p][a]))
    }

    /// Accepted words of length at most `max_len`, in length-lexicographic order.
    pub fn words_up_to(&self, max_len: usize) -> Vec<Vec<String>> {
        self.words_up_to_capped(max_len, usize::MAX).0
    }

    /// As `words_up_to`, stopping after `cap` words; the flag reports truncation.
    pub fn words_up_to_capped(&self, max_len: usize, cap: usize) -> (Vec<Vec<String>>, bool) {
        let dist = self.distance_to_final();
        let mut out = Vec::new();
        let mut layer: Vec<(Vec<usize>, FixedBitSet)> = vec![(Vec::new(), self.initial.clone())];
        for len in 0..=max_len {
            let mut next = Vec::new();
            for (w, set) in &layer {
                if set.intersection(&self.finals).next().is_some() {
                    if out.len() >= cap {
                        return (out, true);
                    }
                    out.push(w.iter().map(|&a| self.alphabet[a].clone()).collect());
                }
                if len == max_len {
                    continue;
                }
                for a in 0..self.alphabet.len() {
                    let s = self.step(set, a);
                    let reachable = s.ones().any(|q| dist[q].is_some_and(|d| d + len < max_len));
                    if reachable {
                        let mut w2 = w.clone();
                        w2.push(a);
                        next.push((w2, s));
                    }
                }
            }
            layer = next;
            if layer.is_empty() {
                break;
            }
        }
        (out, false)
    }

    /// Shortest number of letters from each state to a final state.
    pub fn distance_to_final(&self) -> Vec<Option<usize>> {
        let n = self.state_count();
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (p, _, q) in self.transitions() {
            rev[q].push(p);
        }
        let mut dist = vec![None; n];
        let mut queue = VecDeque::new();
        for f in self.finals.ones() {
            dist[f] = Some(0);
            queue.push_back(f);
        }
        while let Some(q) = queue.pop_front() {
            let d = dist[q].expect("queued states have distances");
            for &p in &rev[q] {
                if dist[p].is_none() {
                    dist[p] = Some(d + 1);
                    queue.push_back(p);
                }
            }
        }
        dist
    }

    /// Shortest accepted word reading from `start` into a final state, if any.
    pub fn shortest_word_from(&self, start: &FixedBitSet) -> Option<Vec<String>> {
        let mut prev: HashMap<usize, (usize, usize)> = HashMap::new();
        let mut seen: HashSet<usize> = start.ones().collect();
        let mut queue: VecDeque<usize> = start.ones().collect();
        while let Some(p) = queue.pop_front() {
            if self.finals.contains(p) {
                let mut word = Vec::new();
                let mut cur = p;
                while let Some(&(from, a)) = prev.get(&cur) {
                    word.push(self.alphabet[a].clone());
                    cur = from;
                }
                word.reverse();
                return Some(word);
            }
            for a in 0..self.alphabet.len() {
                for &q in &self.delta[p][a] {
                    if seen.insert(q) {
                        prev.insert(q, (p, a));
                        queue.push_back(q);
                    }
                }
            }
        }
        None
    }
}

struct GlushkovInfo {
    nullable: bool,
    first: Vec<usize>,
    last: Vec<usize>,
    follow: Vec<(usize, usize)>,
}

fn glushkov(r: &Regex, alphabet: &[String], positions: &mut Vec<usize>) -> GlushkovInfo {
    match r {
        Regex::Eps => GlushkovInfo { nullable: true, first: vec![], last: vec![], follow: vec![] },
        Regex::Sym(s) => {
            let p = positions.len();
            positions.push(alphabet.binary_search(s).expect("symbol in alphabet"));
            GlushkovInfo { nullable: false, first: vec![p], last: vec![p], follow: vec![] }
        }
        Regex::Union(a, b) => {
            let x = glushkov(a, alphabet, positions);
            let y = glushkov(b, alphabet, positions);
            GlushkovInfo {
                nullable: x.nullable || y.nullable,
                first: [x.first, y.first].concat(),
                last: [x.last, y.last].concat(),
                follow: [x.follow, y.follow].concat(),
            }
        }
        Regex::Concat(a, b) => {
            let x = glushkov(a, alphabet, positions);
            let y = glushkov(b, alphabet, positions);
            let mut follow = [x.follow, y.follow].concat();
            for &l in &x.last {
                for &f in &y.first {
                    follow.push((l, f));
                }
            }
            let first = if x.nullable { [x.first.clone(), y.first.clone()].concat() } else { x.first };
            let last = if y.nullable { [x.last, y.last.clone()].concat() } else { y.last };
            GlushkovInfo { nullable: x.nullable && y.nullable, first, last, follow }
        }
        Regex::Plus(a) | Regex::Star(a) => {
            let x = glushkov(a, alphabet, positions);
            let mut follow = x.follow;
            for &l in &x.last {
                for &f in &x.first {
                    follow.push((l, f));
                }
            }
            GlushkovInfo { nullable: x.nullable || matches!(r, Regex::Star(_)), first: x.first, last: x.last, follow }
        }
    }
}

/// True iff no word is accepted by all automata simultaneously. Letters are
/// matched by name across the automata.
pub fn intersection_emptiness(nfas: &[&Nfa]) -> bool {
    intersection_witness(nfas).is_none()
}

/// A shortest word accepted by every automaton, found by breadth-first search
/// over the product state space.
pub fn intersection_witness(nfas: &[&Nfa]) -> Option<Vec<String>> {
    assert!(!nfas.is_empty(), "intersection of an empty family");
    let common: Vec<&String> = nfas[0].alphabet.iter().filter(|s| nfas.iter().all(|n| n.letter(s).is_some())).collect();
    let letters: Vec<Vec<usize>> = common.iter().map(|s| nfas.iter().map(|n| n.letter(s).unwrap()).collect()).collect();
    let mut starts: Vec<Vec<usize>> = vec![Vec::new()];
    for n in nfas {
        starts = starts
            .into_iter()
            .flat_map(|prefix| {
                n.initial.ones().map(move |i| {
                    let mut t = prefix.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    // Parent links: tuple -> (predecessor tuple, letter index into `common`).
    let mut parent: HashMap<Vec<usize>, Option<(Vec<usize>, usize)>> =
        starts.iter().map(|t| (t.clone(), None)).collect();
    let mut queue: VecDeque<Vec<usize>> = starts.into_iter().collect();
    while let Some(tuple) = queue.pop_front() {
        if tuple.iter().zip(nfas).all(|(&q, n)| n.is_final(q)) {
            let mut word = Vec::new();
            let mut cur = tuple;
            while let Some(Some((prev, c))) = parent.get(&cur) {
                word.push(common[*c].clone());
                cur = prev.clone();
            }
            word.reverse();
            return Some(word);
        }
        for (c, ids) in letters.iter().enumerate() {
            let mut succ: Vec<Vec<usize>> = vec![Vec::new()];
            for (k, n) in nfas.iter().enumerate() {
                let options = n.successors(tuple[k], ids[k]);
                succ = succ
                    .into_iter()
                    .flat_map(|prefix| {
                        options.iter().map(move |&q| {
                            let mut t = prefix.clone();
                            t.push(q);
                            t
                        })
                    })
                    .collect();
                if succ.is_empty() {
                    break;
                }
            }
            for t in succ {
                if !parent.contains_key(&t) {
                    parent.insert(t.clone(), Some((tuple.clone(), c)));
                    queue.push_back(t);
                }
            }
        }
    }
    None
}

/// Complete DFA for the complement of `nfa` over `alphabet` (subset construction).
pub fn complement_dfa(nfa: &Nfa, alphabet: &[String]) -> Nfa {
    let ext = nfa.with_alphabet(alphabet);
    let k = ext.alphabet.len();
    let mut index: HashMap<FixedBitSet, usize> = HashMap::new();
    let mut sets: Vec<FixedBitSet> = Vec::new();
    let mut trans: Vec<Vec<usize>> = Vec::new();
    index.insert(ext.initial.clone(), 0);
    sets.push(ext.initial.clone());
    let mut i = 0;
    while i < sets.len() {
        let mut row = Vec::with_capacity(k);
        for a in 0..k {
            let s = ext.step(&sets[i], a);
            let id = match index.get(&s) {
                Some(&id) => id,
                None => {
                    let id = sets.len();
                    index.insert(s.clone(), id);
                    sets.push(s);
                    id
                }
            };
            row.push(id);
        }
        trans.push(row);
        i += 1;
    }
    let mut out = Nfa::new(ext.alphabet.clone(), sets.len());
    out.initial.insert(0);
    for (id, s) in sets.iter().enumerate() {
        if s.intersection(&ext.finals).next().is_none() {
            out.finals.insert(id);
        }
        for a in 0..k {
            out.add_transition(id, a, trans[id][a]);
        }
    }
    out
}

/// Language equality via two product-emptiness checks against complements.
pub fn language_equal(a: &Nfa, b: &Nfa) -> bool {
    let alphabet: Vec<String> =
        a.alphabet.iter().chain(b.alphabet.iter()).cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let a2 = a.with_alphabet(&alphabet);
    let b2 = b.with_alphabet(&alphabet);
    intersection_emptiness(&[&a2, &complement_dfa(&b2, &alphabet)])
        && intersection_emptiness(&[&b2, &complement_dfa(&a2, &alphabet)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nfa(s: &str) -> Nfa {
        Nfa::from_regex(&Regex::parse(s).unwrap())
    }

    #[test]
    fn single_symbol_has_two_states() {
        let n = nfa("a");
        assert_eq!(n.state_count(), 2);
        assert!(n.accepts(&["a"]));
        assert!(!n.accepts::<&str>(&[]));
    }

    #[test]
    fn eps_has_one_state() {
        let n = nfa("eps");
        assert_eq!(n.state_count(), 1);
        assert!(n.is_initial(0) && n.is_final(0));
        assert!(n.accepts_epsilon());
    }

    #[test]
    fn star_of_concat_membership() {
        let n = nfa("(ab)*");
        let r = Regex::parse("(ab)*").unwrap();
        for w in [&["a", "b", "a", "b"][..], &["a", "b", "a"]] {
            assert_eq!(n.accepts(w), r.matches(w));
        }
        assert!(n.accepts(&["a", "b", "a", "b"]));
        assert!(!n.accepts(&["a", "b", "a"]));
    }

    #[test]
    fn completion_preserves_language_and_adds_sink() {
        let n = nfa("a");
        let c = n.complete_cocomplete(&["a", "b"]);
        assert!(c.is_complete_cocomplete());
        assert!(c.state_count() > n.state_count());
        assert!(language_equal(&n.with_alphabet(&["a", "b"]), &c));
        let b = c.letter("b").unwrap();
        assert!(c.step(c.initial(), b).ones().next().is_some());
    }

    #[test]
    fn completion_of_transitionless_nfa_adds_sink_and_source() {
        let n = nfa("eps");
        let c = n.complete_cocomplete(&["a"]);
        assert_eq!(c.state_count(), 3);
        assert!(c.is_complete_cocomplete());
        assert!(language_equal(&n.with_alphabet(&["a"]), &c));
    }

    #[test]
    fn complete_nfa_only_gains_source() {
        let n = nfa("a*");
        let c = n.complete_cocomplete(&["a"]);
        assert!(c.state_count() <= n.state_count() + 1);
        assert!(language_equal(&n, &c));
    }

    #[test]
    fn intersection_emptiness_examples() {
        assert!(!intersection_emptiness(&[&nfa("a")]));
        assert!(intersection_emptiness(&[&nfa("a*b"), &nfa("b*a")]));
        assert!(!intersection_emptiness(&[&nfa("a*b"), &nfa("(a+b)*")]));
        let empty = Nfa::new(vec!["a".into()], 1);
        assert!(intersection_emptiness(&[&nfa("a*"), &empty]));
        let w = intersection_witness(&[&nfa("(a+b)*b"), &nfa("a^+ b^+")]).unwrap();
        assert_eq!(w, vec!["a".to_string(), "b".into()]);
    }

    #[test]
    fn words_in_length_lex_order() {
        let n = nfa("(ab)*");
        let words = n.words_up_to(4);
        assert_eq!(
            words,
            vec![vec![], vec!["a".to_string(), "b".into()], vec!["a".into(), "b".into(), "a".into(), "b".into()]]
        );
        assert_eq!(nfa("a+b").words_up_to(1).len(), 2);
    }

    #[test]
    fn longest_word() {
        assert_eq!(nfa("ab+c").longest_word(), Some(Some(2)));
        assert_eq!(nfa("a*").longest_word(), None);
        assert_eq!(Nfa::new(vec![], 1).longest_word(), Some(None));
    }

    #[test]
    fn shortest_word() {
        let n = nfa("aa(b+ab)");
        assert_eq!(n.shortest_word_from(n.initial()).unwrap().len(), 3);
    }
}
