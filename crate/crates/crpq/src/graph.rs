//! Edge-labeled directed graphs, paths and the simple-path predicates.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};

/// Finite edge-labeled directed graph. Nodes and labels are kept sorted so
/// that every enumeration over them is deterministic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphDb {
    nodes: Vec<String>,
    node_index: HashMap<String, usize>,
    labels: Vec<String>,
    label_index: HashMap<String, usize>,
    /// Sorted, deduplicated `(source, label, target)` triples.
    edges: Vec<(usize, usize, usize)>,
    out: Vec<Vec<(usize, usize)>>,
    inc: Vec<Vec<(usize, usize)>>,
}

#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    nodes: BTreeSet<String>,
    edges: BTreeSet<(String, String, String)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&mut self, n: impl Into<String>) -> &mut Self {
        self.nodes.insert(n.into());
        self
    }

    pub fn edge(&mut self, s: impl Into<String>, label: impl Into<String>, t: impl Into<String>) -> &mut Self {
        let (s, t) = (s.into(), t.into());
        self.nodes.insert(s.clone());
        self.nodes.insert(t.clone());
        self.edges.insert((s, label.into(), t));
        self
    }

    pub fn build(&self) -> GraphDb {
        let nodes: Vec<String> = self.nodes.iter().cloned().collect();
        let node_index: HashMap<String, usize> = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let labels: Vec<String> =
            self.edges.iter().map(|(_, l, _)| l.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let label_index: HashMap<String, usize> = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        let mut edges: Vec<(usize, usize, usize)> =
            self.edges.iter().map(|(s, l, t)| (node_index[s], label_index[l], node_index[t])).collect();
        edges.sort_unstable();
        edges.dedup();
        let mut out = vec![Vec::new(); nodes.len()];
        let mut inc = vec![Vec::new(); nodes.len()];
        for &(s, l, t) in &edges {
            out[s].push((l, t));
            inc[t].push((l, s));
        }
        GraphDb { nodes, node_index, labels, label_index, edges, out, inc }
    }
}

impl GraphDb {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::new()
    }

    pub fn from_edges<'a>(edges: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>) -> Self {
        let mut b = GraphBuilder::new();
        for (s, l, t) in edges {
            b.edge(s, l, t);
        }
        b.build()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_name(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    pub fn node_id(&self, name: &str) -> Option<usize> {
        self.node_index.get(name).copied()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_name(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn label_id(&self, name: &str) -> Option<usize> {
        self.label_index.get(name).copied()
    }

    /// Edges as `(source, label, target)` index triples, sorted.
    pub fn edges(&self) -> &[(usize, usize, usize)] {
        &self.edges
    }

    pub fn out_edges(&self, n: usize) -> &[(usize, usize)] {
        &self.out[n]
    }

    pub fn in_edges(&self, n: usize) -> &[(usize, usize)] {
        &self.inc[n]
    }

    pub fn has_edge(&self, s: usize, l: usize, t: usize) -> bool {
        self.edges.binary_search(&(s, l, t)).is_ok()
    }

    pub fn degree(&self, n: usize) -> usize {
        self.out[n].len() + self.inc[n].len()
    }

    /// Partition of the nodes under undirected reachability. Blocks are
    /// sorted node-index lists, ordered by their smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut comp = vec![usize::MAX; n];
        let mut blocks = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = blocks.len();
            let mut stack = vec![start];
            let mut block = Vec::new();
            comp[start] = id;
            while let Some(v) = stack.pop() {
                block.push(v);
                for &(_, w) in self.out[v].iter().chain(self.inc[v].iter()) {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        stack.push(w);
                    }
                }
            }
            block.sort_unstable();
            blocks.push(block);
        }
        blocks
    }

    /// Parses the line format `source label target`; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut b = GraphBuilder::new();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let trimmed = line.trim();
            if !trimmed.is_empty() && !trimmed.starts_with('#') {
                let parts: Vec<&str> = trimmed.split_whitespace().collect();
                match parts.as_slice() {
                    [s, l, t] => {
                        b.edge(*s, *l, *t);
                    }
                    [n] => {
                        b.node(*n);
                    }
                    _ => return Err(Error::syntax(offset, format!("expected `source label target`, got `{trimmed}`"))),
                }
            }
            offset += line.len();
        }
        Ok(b.build())
    }
}

impl fmt::Display for GraphDb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut touched = vec![false; self.nodes.len()];
        for &(s, l, t) in &self.edges {
            touched[s] = true;
            touched[t] = true;
            writeln!(f, "{} {} {}", self.nodes[s], self.labels[l], self.nodes[t])?;
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if !touched[i] {
                writeln!(f, "{n}")?;
            }
        }
        Ok(())
    }
}

/// A possibly empty sequence of chaining edges `(source, label, target)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Path {
    pub edges: Vec<(usize, usize, usize)>,
}

impl Path {
    pub fn new(edges: Vec<(usize, usize, usize)>) -> Self {
        Path { edges }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn source(&self) -> Option<usize> {
        self.edges.first().map(|e| e.0)
    }

    pub fn target(&self) -> Option<usize> {
        self.edges.last().map(|e| e.2)
    }

    pub fn label(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.1).collect()
    }

    /// Sequence of visited nodes `v0 .. vk`, empty for the empty path.
    pub fn node_sequence(&self) -> Result<Vec<usize>> {
        let mut seq = Vec::with_capacity(self.edges.len() + 1);
        for (i, &(s, _, t)) in self.edges.iter().enumerate() {
            if i == 0 {
                seq.push(s);
            } else if seq[seq.len() - 1] != s {
                return Err(Error::Structural(format!("edge {i} does not continue the path")));
            }
            seq.push(t);
        }
        Ok(seq)
    }

    /// Internal nodes: all visited nodes except the first and the last.
    pub fn internal_nodes(&self) -> Result<Vec<usize>> {
        let seq = self.node_sequence()?;
        Ok(if seq.len() <= 2 { Vec::new() } else { seq[1..seq.len() - 1].to_vec() })
    }

    pub fn concat(&self, other: &Path) -> Result<Path> {
        if let (Some(t), Some(s)) = (self.target(), other.source()) {
            if t != s {
                return Err(Error::Structural("paths do not chain".into()));
            }
        }
        let mut edges = self.edges.clone();
        edges.extend_from_slice(&other.edges);
        Ok(Path { edges })
    }
}

fn pairwise_distinct(nodes: &[usize]) -> bool {
    let mut seen = BTreeSet::new();
    nodes.iter().all(|n| seen.insert(*n))
}

pub fn is_simple_path(p: &Path) -> Result<bool> {
    let seq = p.node_sequence()?;
    Ok(pairwise_distinct(&seq))
}

pub fn is_simple_cycle(p: &Path) -> Result<bool> {
    if p.is_empty() {
        return Err(Error::domain("a cycle has at least one edge"));
    }
    let seq = p.node_sequence()?;
    Ok(seq[0] == seq[seq.len() - 1] && pairwise_distinct(&seq[..seq.len() - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> GraphDb {
        GraphDb::from_edges([("u", "a", "v"), ("v", "b", "u"), ("u", "c", "v"), ("v", "d", "u"), ("v", "b", "w")])
    }

    fn path(g: &GraphDb, steps: &[(&str, &str, &str)]) -> Path {
        Path::new(
            steps
                .iter()
                .map(|(s, l, t)| (g.node_id(s).unwrap(), g.label_id(l).unwrap(), g.node_id(t).unwrap()))
                .collect(),
        )
    }

    #[test]
    fn empty_path_is_simple() {
        assert!(is_simple_path(&Path::default()).unwrap());
    }

    #[test]
    fn returning_path_is_not_simple() {
        let g = g();
        assert!(!is_simple_path(&path(&g, &[("u", "a", "v"), ("v", "b", "u")])).unwrap());
    }

    #[test]
    fn distinct_nodes_path_is_simple() {
        let g = g();
        assert!(is_simple_path(&path(&g, &[("u", "a", "v"), ("v", "b", "w")])).unwrap());
    }

    #[test]
    fn non_chaining_path_is_structural_error() {
        let g = g();
        let p = path(&g, &[("u", "a", "v"), ("u", "a", "v")]);
        assert!(matches!(is_simple_path(&p), Err(Error::Structural(_))));
    }

    #[test]
    fn simple_cycle_cases() {
        let g = g();
        assert!(is_simple_cycle(&path(&g, &[("u", "a", "v"), ("v", "b", "u")])).unwrap());
        assert!(!is_simple_cycle(&path(&g, &[("u", "a", "v"), ("v", "b", "w")])).unwrap());
        let twice = path(&g, &[("u", "a", "v"), ("v", "b", "u"), ("u", "c", "v"), ("v", "d", "u")]);
        assert!(!is_simple_cycle(&twice).unwrap());
        assert!(matches!(is_simple_cycle(&Path::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn components() {
        assert!(GraphDb::builder().build().connected_components().is_empty());
        let two = GraphDb::from_edges([("a", "x", "b"), ("c", "x", "d")]);
        assert_eq!(two.connected_components().len(), 2);
        let tri = GraphDb::from_edges([("u", "x", "v"), ("v", "x", "w"), ("w", "x", "u")]);
        assert_eq!(tri.connected_components().len(), 1);
    }

    #[test]
    fn parse_and_dedup() {
        let g = GraphDb::parse("# comment\nu a v\nu a v\n\nv b w\nlonely\n").unwrap();
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.node_count(), 4);
        assert_eq!(GraphDb::parse(&g.to_string()).unwrap(), g);
        assert!(GraphDb::parse("u a").is_err());
    }
}
