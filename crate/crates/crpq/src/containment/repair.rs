//! Counterexample search among the a-inj-expansions of one base expansion.
//!
//! Starting from the trivial partition, the search takes a match of Q2 in the
//! current quotient and branches over the admissible identifications of two
//! distinct nodes lying on one matched path. Any counterexample coarser than
//! the current partition must identify such a pair (otherwise the match stays
//! atom-injective), so the search is complete.

use std::collections::{BTreeMap, HashSet};

use fixedbitset::FixedBitSet;

use crate::error::Result;
use crate::eval::{Budget, Limits, Matcher, Prepared, Semantics};
use crate::expansion::Expansion;
use crate::query::CrpqUnion;

/// Matches sampled per partition when choosing the branching match.
const MATCH_SAMPLE: usize = 8;

pub struct RepairSearch<'a> {
    q2: &'a CrpqUnion,
    base: &'a Expansion,
    vars: Vec<String>,
    conflict: Vec<FixedBitSet>,
    visited: HashSet<Vec<usize>>,
    partitions_left: u64,
    capped: bool,
    limits: Limits,
}

pub enum RepairOutcome {
    /// Non-singleton blocks of a quotient that Q2 does not match.
    Counterexample(Vec<Vec<String>>),
    NoCounterexample,
    /// The partition budget ran out before the search finished.
    Capped,
}

impl<'a> RepairSearch<'a> {
    pub fn new(q2: &'a CrpqUnion, base: &'a Expansion, limits: Limits, max_partitions: u64) -> Self {
        let vars = base.cq.vars();
        let n = vars.len();
        let conflict = (0..n)
            .map(|i| {
                let mut b = FixedBitSet::with_capacity(n);
                for j in 0..n {
                    if base.is_atom_related(&vars[i], &vars[j]) {
                        b.insert(j);
                    }
                }
                b
            })
            .collect();
        RepairSearch {
            q2,
            base,
            vars,
            conflict,
            visited: HashSet::new(),
            partitions_left: max_partitions,
            capped: false,
            limits,
        }
    }

    pub fn run(&mut self) -> Result<RepairOutcome> {
        let start: Vec<usize> = (0..self.vars.len()).collect();
        Ok(match self.visit(start)? {
            Some(blocks) => RepairOutcome::Counterexample(blocks),
            None if self.capped => RepairOutcome::Capped,
            None => RepairOutcome::NoCounterexample,
        })
    }

    fn visit(&mut self, rgs: Vec<usize>) -> Result<Option<Vec<Vec<String>>>> {
        if !self.visited.insert(rgs.clone()) {
            return Ok(None);
        }
        if self.partitions_left == 0 {
            self.capped = true;
            return Ok(None);
        }
        self.partitions_left -= 1;
        let nblocks = rgs.iter().max().map_or(0, |m| m + 1);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); nblocks];
        for (v, &b) in rgs.iter().enumerate() {
            members[b].push(v);
        }
        let named: Vec<Vec<String>> =
            members.iter().filter(|m| m.len() > 1).map(|m| m.iter().map(|&v| self.vars[v].clone()).collect()).collect();
        let f = self.base.quotient(&named)?;
        let g = f.db();
        let tuple = f.free_nodes(&g);
        let by_name: BTreeMap<&str, usize> = members
            .iter()
            .enumerate()
            .map(|(b, m)| (m.iter().map(|&v| self.vars[v].as_str()).min().expect("blocks are nonempty"), b))
            .collect();
        let node_block: Vec<usize> = g.nodes().iter().map(|n| by_name[n.as_str()]).collect();
        let n = self.vars.len();
        let member_bits: Vec<FixedBitSet> = members
            .iter()
            .map(|m| {
                let mut b = FixedBitSet::with_capacity(n);
                m.iter().for_each(|&v| b.insert(v));
                b
            })
            .collect();
        let block_conflict: Vec<FixedBitSet> = members
            .iter()
            .map(|m| {
                let mut b = FixedBitSet::with_capacity(n);
                m.iter().for_each(|&v| b.union_with(&self.conflict[v]));
                b
            })
            .collect();
        let admissible = |a: usize, b: usize| block_conflict[a].is_disjoint(&member_bits[b]);

        let mut found_any = false;
        let mut best: Option<Vec<(usize, usize)>> = None;
        for d in &self.q2.disjuncts {
            let mut p = Prepared::new(d, &g)?;
            let Some(fixed) = p.fixed_for(&tuple) else { continue };
            let mut budget = Budget::new(self.limits.step_budget);
            let mut taken = 0;
            Matcher::new(&mut p, Semantics::AInj).for_each(&fixed, &mut budget, &mut |m| {
                found_any = true;
                let mut pairs: Vec<(usize, usize)> = Vec::new();
                for path in &m.paths {
                    let mut blocks: Vec<usize> = path.iter().map(|&node| node_block[node]).collect();
                    blocks.sort_unstable();
                    blocks.dedup();
                    for (i, &a) in blocks.iter().enumerate() {
                        for &b in &blocks[i + 1..] {
                            if admissible(a, b) && !pairs.contains(&(a, b)) {
                                pairs.push((a, b));
                            }
                        }
                    }
                }
                if best.as_ref().is_none_or(|b| pairs.len() < b.len()) {
                    best = Some(pairs);
                }
                taken += 1;
                taken >= MATCH_SAMPLE || best.as_ref().is_some_and(|b| b.is_empty())
            })?;
            if best.as_ref().is_some_and(|b| b.is_empty()) {
                break;
            }
        }
        if !found_any {
            return Ok(Some(named));
        }
        for (a, b) in best.unwrap_or_default() {
            let child = merged(&rgs, a, b);
            if let Some(r) = self.visit(child)? {
                return Ok(Some(r));
            }
        }
        Ok(None)
    }
}

/// Restricted-growth string after merging block `b` into block `a`.
fn merged(rgs: &[usize], a: usize, b: usize) -> Vec<usize> {
    let mut relabel: BTreeMap<usize, usize> = BTreeMap::new();
    rgs.iter()
        .map(|&x| {
            let x = if x == b { a } else { x };
            let next = relabel.len();
            *relabel.entry(x).or_insert(next)
        })
        .collect()
}
