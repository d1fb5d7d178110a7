//! Graph kernel: mixed graphs with four edge states, cycle detection on the
//! directed subgraph, and a deterministic topological sort.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use crate::{Error, Result};

/// State of one unordered vertex pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeState {
    Absent,
    Undirected,
    Directed { from: usize, to: usize },
    Bidirected,
}

/// Internal pair state; orientation is stored relative to (low, high).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairState {
    Absent,
    Undirected,
    LowToHigh,
    HighToLow,
    Bidirected,
}

/// Graph over `n` vertices where every unordered pair carries exactly one
/// [`EdgeState`]. Self-loops are impossible by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedGraph {
    n: usize,
    /// Upper-triangular pair states, row-major over pairs (a, b) with a < b.
    pairs: Vec<PairState>,
}

impl MixedGraph {
    pub fn new(n: usize) -> Self {
        Self { n, pairs: vec![PairState::Absent; n * n.saturating_sub(1) / 2] }
    }

    pub fn complete_undirected(n: usize) -> Self {
        Self { n, pairs: vec![PairState::Undirected; n * n.saturating_sub(1) / 2] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, a: usize, b: usize) -> usize {
        assert!(a != b, "self-loops are not representable");
        assert!(a < self.n && b < self.n, "vertex out of range");
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        // row lo starts after the triangle above it
        lo * (2 * self.n - lo - 1) / 2 + (hi - lo - 1)
    }

    pub fn edge_state(&self, a: usize, b: usize) -> EdgeState {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        match self.pairs[self.idx(a, b)] {
            PairState::Absent => EdgeState::Absent,
            PairState::Undirected => EdgeState::Undirected,
            PairState::LowToHigh => EdgeState::Directed { from: lo, to: hi },
            PairState::HighToLow => EdgeState::Directed { from: hi, to: lo },
            PairState::Bidirected => EdgeState::Bidirected,
        }
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.pairs[self.idx(a, b)] != PairState::Absent
    }

    pub fn has_directed(&self, from: usize, to: usize) -> bool {
        self.edge_state(from, to) == EdgeState::Directed { from, to }
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        let i = self.idx(a, b);
        self.pairs[i] = PairState::Absent;
    }

    pub fn set_undirected(&mut self, a: usize, b: usize) {
        let i = self.idx(a, b);
        self.pairs[i] = PairState::Undirected;
    }

    pub fn set_directed(&mut self, from: usize, to: usize) {
        let i = self.idx(from, to);
        self.pairs[i] = if from < to { PairState::LowToHigh } else { PairState::HighToLow };
    }

    pub fn set_bidirected(&mut self, a: usize, b: usize) {
        let i = self.idx(a, b);
        self.pairs[i] = PairState::Bidirected;
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.n).filter(|&w| w != v && self.is_adjacent(v, w)).collect()
    }

    /// Vertices adjacent to `a` or `b` under any edge state, excluding both.
    pub fn adjacency_beyond(&self, a: usize, b: usize) -> Result<Vec<usize>> {
        if a == b {
            return Err(Error::Argument(format!("adjacency_beyond needs distinct vertices, got {a}")));
        }
        Ok((0..self.n)
            .filter(|&v| v != a && v != b && (self.is_adjacent(v, a) || self.is_adjacent(v, b)))
            .collect())
    }

    /// Would committing `from -> to` close a cycle in the subgraph of
    /// currently Directed edges? Undirected and bidirected edges do not
    /// participate.
    pub fn would_create_cycle(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![to];
        seen[to] = true;
        while let Some(v) = stack.pop() {
            if v == from {
                return true;
            }
            for (w, visited) in seen.iter_mut().enumerate() {
                if !*visited && w != v && self.has_directed(v, w) {
                    *visited = true;
                    stack.push(w);
                }
            }
        }
        false
    }

    /// Maximum count of non-Absent incident edges over all vertices.
    pub fn max_degree(&self) -> usize {
        (0..self.n)
            .map(|v| (0..self.n).filter(|&w| w != v && self.is_adjacent(v, w)).count())
            .max()
            .unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.pairs.iter().filter(|&&p| p != PairState::Absent).count()
    }

    /// All present edges as (low, high, state), lexicographic by pair.
    pub fn edges(&self) -> Vec<(usize, usize, EdgeState)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                let s = self.edge_state(a, b);
                if s != EdgeState::Absent {
                    out.push((a, b, s));
                }
            }
        }
        out
    }
}

/// Directed acyclic graph stored as per-vertex parent sets.
/// Acyclicity is checked at construction and is an invariant thereafter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    parents: Vec<BTreeSet<usize>>,
}

impl Dag {
    pub fn new(parents: Vec<BTreeSet<usize>>) -> Result<Self> {
        let n = parents.len();
        for (i, set) in parents.iter().enumerate() {
            for &p in set {
                if p >= n {
                    return Err(Error::Argument(format!(
                        "parent id {p} of vertex {i} out of range (n = {n})"
                    )));
                }
                if p == i {
                    return Err(Error::Argument(format!("vertex {i} cannot be its own parent")));
                }
            }
        }
        if kahn(&parents).is_none() {
            return Err(Error::Argument("parent sets contain a directed cycle".into()));
        }
        Ok(Self { parents })
    }

    pub fn empty(n: usize) -> Self {
        Self { parents: vec![BTreeSet::new(); n] }
    }

    pub fn n(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self, i: usize) -> &BTreeSet<usize> {
        &self.parents[i]
    }

    pub fn parent_sets(&self) -> &[BTreeSet<usize>] {
        &self.parents
    }

    /// All edges as (parent, child), ascending.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(i, ps)| ps.iter().map(move |&p| (p, i)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(BTreeSet::len).sum()
    }
}

/// Smallest-id-first Kahn ordering; `None` when a cycle blocks completion.
fn kahn(parents: &[BTreeSet<usize>]) -> Option<Vec<usize>> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(BTreeSet::len).collect();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(i);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Topological order of `d`; among simultaneously available vertices the
/// lowest id comes first, so the result is unique and reproducible.
pub fn topo_sort(d: &Dag) -> Result<Vec<usize>> {
    kahn(&d.parents).ok_or_else(|| Error::Invariant("cycle in a supposed DAG".into()))
}
