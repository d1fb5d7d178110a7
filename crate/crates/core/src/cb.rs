//! The CB driver: skeleton refinement by conditional-independence tests of
//! increasing order, collider orientation, propagation of the Verma-Pearl
//! rules, score-guided resolution of leftover edges, and the K2 search over
//! the resulting ordering, iterated until the network score stops improving.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::num::NonZeroUsize;

use itertools::Itertools;

use crate::casedata::CaseDatabase;
use crate::citest::CiOracle;
use crate::graphs::{topo_sort, Dag, EdgeState, MixedGraph};
use crate::k2score::{k2, k2_constrained, log_g, log_network_score, K2Config, LogScore};
use crate::{Error, Result};

/// Separating sets recorded by skeleton refinement: pair {a,b} was removed
/// because a and b tested independent given S_ab.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SepsetTable {
    entries: BTreeMap<(usize, usize), BTreeSet<usize>>,
}

impl SepsetTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(a: usize, b: usize) -> (usize, usize) {
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn insert(&mut self, a: usize, b: usize, sepset: BTreeSet<usize>) {
        debug_assert!(!sepset.contains(&a) && !sepset.contains(&b));
        self.entries.insert(Self::key(a, b), sepset);
    }

    pub fn get(&self, a: usize, b: usize) -> Option<&BTreeSet<usize>> {
        self.entries.get(&Self::key(a, b))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// How the K2 phase is constrained by the orientation phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderingMode {
    /// Topological sort of the resolved DAG; K2 sees all predecessors.
    Total,
    /// K2 may only pick parents from each node's resolved parent set.
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnConfig {
    /// Significance level for the CI tests.
    pub alpha: f64,
    /// Skeleton degree bound u: while exceeded, the test order is raised
    /// without building a network.
    pub degree_bound: usize,
    /// Parent cap handed to K2; `None` is unbounded.
    pub max_parents: Option<NonZeroUsize>,
    pub ordering_mode: OrderingMode,
    /// Ceiling on the CI order; `None` means n − 2, the largest useful order.
    pub max_ord: Option<usize>,
    /// When true, edge resolution scores every undirected edge against the
    /// parent sets as they stood before any resolution commitments, instead
    /// of letting each commitment update the sets later edges see.
    pub frozen_resolve: bool,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            degree_bound: 15,
            max_parents: None,
            ordering_mode: OrderingMode::Total,
            max_ord: None,
            frozen_resolve: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    /// The latest network scored no better than the previous one.
    ScoreDropped,
    /// Every adjacent pair had too few shared neighbors to test at the
    /// current order; nothing left to refine.
    SkeletonExhausted,
    /// The CI order passed its ceiling.
    OrdCeiling,
}

/// One round of the learner loop. Rounds where the degree bound suppressed
/// network construction carry no score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub ord: usize,
    /// Edges remaining in the skeleton after refinement at this order.
    pub skeleton_edges: usize,
    pub log_score: Option<LogScore>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CBResult {
    /// The last accepted structure.
    pub dag: Dag,
    pub log_score: LogScore,
    pub iterations: Vec<IterationRecord>,
    pub termination: TerminationReason,
}

impl CBResult {
    /// Highest CI order reached, including degree-skipped rounds.
    pub fn max_ord_used(&self) -> usize {
        self.iterations.iter().map(|r| r.ord).max().unwrap_or(0)
    }

    /// Stable tab-separated trace: ord, skeleton edges, log-score, status.
    pub fn trace_tsv(&self) -> String {
        let mut out = String::new();
        for rec in &self.iterations {
            match rec.log_score {
                Some(score) => {
                    let status = if rec.accepted { "accepted" } else { "rejected" };
                    writeln!(out, "{}\t{}\t{:.6}\t{}", rec.ord, rec.skeleton_edges, score.value(), status)
                }
                None => writeln!(out, "{}\t{}\t-\tskipped", rec.ord, rec.skeleton_edges),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// One refinement pass at the given CI order.
///
/// Scans adjacent pairs (a, b) lexicographically; for each pair whose shared
/// neighborhood has at least `ord` vertices, tries every size-`ord` subset in
/// lexicographic order and removes the edge on the first independence
/// verdict, recording the separating set. Removals take effect immediately,
/// so later pairs see the thinner skeleton. Returns true when every pair
/// still adjacent has a neighborhood smaller than `ord` (nothing more to
/// test at this or any higher order).
pub fn refine_skeleton(
    g1: &mut MixedGraph,
    db: &CaseDatabase,
    sepsets: &mut SepsetTable,
    ord: usize,
    ci: &dyn CiOracle,
    alpha: f64,
) -> Result<bool> {
    let n = g1.n();
    debug_assert!(
        g1.edges().iter().all(|&(_, _, s)| s == EdgeState::Undirected),
        "refinement expects an undirected skeleton"
    );
    for a in 0..n {
        for b in a + 1..n {
            if !g1.is_adjacent(a, b) {
                continue;
            }
            let beyond = g1.adjacency_beyond(a, b)?;
            if beyond.len() < ord {
                continue;
            }
            for combo in beyond.iter().copied().combinations(ord) {
                let cond: BTreeSet<usize> = combo.into_iter().collect();
                if ci.independent(db, a, b, &cond, alpha)? {
                    g1.remove_edge(a, b);
                    sepsets.insert(a, b, cond);
                    break;
                }
            }
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            if g1.is_adjacent(a, b) && g1.adjacency_beyond(a, b)?.len() >= ord {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Directs `x` into `c` if the edge is still undirected and the orientation
/// closes no directed cycle; an edge already directed the other way becomes
/// bidirected (conflicting collider evidence).
fn point_at(g: &mut MixedGraph, x: usize, c: usize) {
    match g.edge_state(x, c) {
        EdgeState::Undirected => {
            if !g.would_create_cycle(x, c) {
                g.set_directed(x, c);
            }
        }
        EdgeState::Directed { from, to } if from == c && to == x => g.set_bidirected(x, c),
        _ => {}
    }
}

/// Collider orientation: for each non-adjacent pair (a, b) with a recorded
/// separating set, every common neighbor c outside S_ab gets a -> c and
/// b -> c, each attempt guarded independently.
pub fn orient_colliders(g: &mut MixedGraph, sepsets: &SepsetTable) {
    let n = g.n();
    for a in 0..n {
        for b in a + 1..n {
            if g.is_adjacent(a, b) {
                continue;
            }
            let Some(sepset) = sepsets.get(a, b) else {
                continue;
            };
            for c in 0..n {
                if c == a || c == b || sepset.contains(&c) {
                    continue;
                }
                if g.is_adjacent(a, c) && g.is_adjacent(b, c) {
                    point_at(g, a, c);
                    point_at(g, b, c);
                }
            }
        }
    }
}

/// Commits `from -> to` when that pair is still undirected and the
/// orientation is cycle-safe.
fn direct_if_safe(g: &mut MixedGraph, from: usize, to: usize) -> bool {
    if g.edge_state(from, to) == EdgeState::Undirected && !g.would_create_cycle(from, to) {
        g.set_directed(from, to);
        return true;
    }
    false
}

/// Applies the four Verma-Pearl orientation rules plus the bidirected-edge
/// rule to a fixpoint. Scan order is fixed (rule 1..4, then bidirected;
/// vertex tuples lexicographic) and every application is cycle-guarded, so
/// the outcome is deterministic.
pub fn propagate_orientations(g: &mut MixedGraph) {
    let n = g.n();
    loop {
        let mut changed = false;

        // Rule 1: a -> b, b - c, a and c non-adjacent  =>  b -> c
        for a in 0..n {
            for b in 0..n {
                if b == a || !g.has_directed(a, b) {
                    continue;
                }
                for c in 0..n {
                    if c != a && c != b && !g.is_adjacent(a, c) && direct_if_safe(g, b, c) {
                        changed = true;
                    }
                }
            }
        }

        // Rule 2: a -> b, b -> c, a - c  =>  a -> c
        for a in 0..n {
            for b in 0..n {
                if b == a || !g.has_directed(a, b) {
                    continue;
                }
                for c in 0..n {
                    if c != a && c != b && g.has_directed(b, c) && direct_if_safe(g, a, c) {
                        changed = true;
                    }
                }
            }
        }

        // Rule 3: a - b, b - c, b - d, a -> d, c -> d  =>  b -> d
        for a in 0..n {
            for b in 0..n {
                if b == a || g.edge_state(a, b) != EdgeState::Undirected {
                    continue;
                }
                for c in 0..n {
                    if c == a || c == b || g.edge_state(b, c) != EdgeState::Undirected {
                        continue;
                    }
                    for d in 0..n {
                        if d != a
                            && d != b
                            && d != c
                            && g.has_directed(a, d)
                            && g.has_directed(c, d)
                            && direct_if_safe(g, b, d)
                        {
                            changed = true;
                        }
                    }
                }
            }
        }

        // Rule 4: a - b, b - c, a - c, c - d, d -> a  =>  a -> b and c -> b
        for a in 0..n {
            for b in 0..n {
                if b == a || g.edge_state(a, b) != EdgeState::Undirected {
                    continue;
                }
                for c in 0..n {
                    if c == a
                        || c == b
                        || g.edge_state(b, c) != EdgeState::Undirected
                        || g.edge_state(a, c) != EdgeState::Undirected
                    {
                        continue;
                    }
                    for d in 0..n {
                        if d == a || d == b || d == c {
                            continue;
                        }
                        if g.edge_state(c, d) == EdgeState::Undirected && g.has_directed(d, a) {
                            if direct_if_safe(g, a, b) {
                                changed = true;
                            }
                            if direct_if_safe(g, c, b) {
                                changed = true;
                            }
                        }
                    }
                }
            }
        }

        // a -> b, b -> c, a <-> c  =>  a -> c
        for a in 0..n {
            for b in 0..n {
                if b == a || !g.has_directed(a, b) {
                    continue;
                }
                for c in 0..n {
                    if c != a
                        && c != b
                        && g.has_directed(b, c)
                        && g.edge_state(a, c) == EdgeState::Bidirected
                        && !g.would_create_cycle(a, c)
                    {
                        g.set_directed(a, c);
                        changed = true;
                    }
                }
            }
        }

        if !changed {
            break;
        }
    }
}

/// Parent sets read off the Directed edges only.
pub fn directed_parents(g: &MixedGraph) -> Vec<BTreeSet<usize>> {
    (0..g.n())
        .map(|i| (0..g.n()).filter(|&j| j != i && g.has_directed(j, i)).collect())
        .collect()
}

/// Resolves every edge left undirected or bidirected after propagation.
///
/// For edge {i, j} (i < j, lexicographic scan) the score of each orientation
/// is the product it influences: `i_val = g(i, π_i) · g(j, π_j ∪ {i})`
/// against `j_val = g(j, π_j) · g(i, π_i ∪ {j})`, in log space. The larger
/// one wins, an exact tie goes to the lower-id source, and an orientation
/// that would close a cycle against edges committed so far is reversed.
/// Each commitment updates the parent sets immediately unless `frozen` keeps
/// the scoring basis at the step-entry sets.
pub fn resolve_remaining(
    g: &MixedGraph,
    parents: Vec<BTreeSet<usize>>,
    db: &CaseDatabase,
    frozen: bool,
) -> Result<Dag> {
    let n = g.n();
    if parents.len() != n {
        return Err(Error::Argument(format!(
            "{} parent sets supplied for {} vertices",
            parents.len(),
            n
        )));
    }
    let frozen_base = frozen.then(|| parents.clone());
    let mut parents = parents;
    let mut work = g.clone();
    for i in 0..n {
        for j in i + 1..n {
            if !matches!(g.edge_state(i, j), EdgeState::Undirected | EdgeState::Bidirected) {
                continue;
            }
            let base = frozen_base.as_deref().unwrap_or(&parents);
            let joined = |set: &BTreeSet<usize>, v: usize| {
                let mut s = set.clone();
                s.insert(v);
                s
            };
            let i_val =
                log_g(db, i, &base[i])?.value() + log_g(db, j, &joined(&base[j], i))?.value();
            let j_val =
                log_g(db, j, &base[j])?.value() + log_g(db, i, &joined(&base[i], j))?.value();
            // tie prefers the lower-id source
            let (mut from, mut to) = if i_val >= j_val { (i, j) } else { (j, i) };
            if work.would_create_cycle(from, to) {
                std::mem::swap(&mut from, &mut to);
                if work.would_create_cycle(from, to) {
                    return Err(Error::Invariant(format!(
                        "both orientations of edge {from}-{to} close directed cycles"
                    )));
                }
            }
            work.set_directed(from, to);
            parents[to].insert(from);
        }
    }
    Dag::new(parents)
}

fn directed_part_is_acyclic(g: &MixedGraph) -> bool {
    let n = g.n();
    let mut indegree = vec![0usize; n];
    for a in 0..n {
        for (b, deg) in indegree.iter_mut().enumerate() {
            if a != b && g.has_directed(a, b) {
                *deg += 1;
            }
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut emitted = 0;
    while let Some(v) = ready.pop() {
        emitted += 1;
        for (w, deg) in indegree.iter_mut().enumerate() {
            if w != v && g.has_directed(v, w) {
                *deg -= 1;
                if *deg == 0 {
                    ready.push(w);
                }
            }
        }
    }
    emitted == n
}

/// Runs the full learner loop.
///
/// Starts from the complete undirected skeleton at CI order 0 with no
/// accepted network (log-score −∞, so the first construction is always
/// accepted). Each round refines the skeleton at the current order; when the
/// degree bound is exceeded, the order is raised without building a network.
/// Otherwise a working copy is oriented (colliders, then rule propagation),
/// leftover edges are resolved by score, and K2 runs over the implied
/// ordering (`Total`) or within the resolved parent sets (`Partial`). A
/// strictly better score is accepted and the order raised; anything else
/// stops the loop and the previous network is the answer.
///
/// When refinement exhausts the skeleton before any network exists (tiny n,
/// empty data), one network is built from the current skeleton so the result
/// always carries an honest score.
pub fn cb_learn(db: &CaseDatabase, cfg: &LearnConfig, ci: &dyn CiOracle) -> Result<CBResult> {
    let n = db.num_vars();
    if n == 0 {
        return Err(Error::Argument("cannot learn over zero variables".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::Argument(format!("alpha must lie in (0,1), got {}", cfg.alpha)));
    }
    if cfg.degree_bound == 0 {
        return Err(Error::Argument("degree bound must be positive".into()));
    }
    let ceiling = n.saturating_sub(2);
    let max_ord = match cfg.max_ord {
        Some(mo) if mo > ceiling => {
            return Err(Error::Argument(format!(
                "max CI order {mo} exceeds n-2 = {ceiling}"
            )));
        }
        Some(mo) => mo,
        None => ceiling,
    };
    let k2cfg = K2Config { max_parents: cfg.max_parents };

    let mut g1 = MixedGraph::complete_undirected(n);
    let mut sepsets = SepsetTable::new();
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut best: Option<(Dag, LogScore)> = None;
    let mut ord = 0usize;

    let termination = loop {
        if ord > max_ord {
            break TerminationReason::OrdCeiling;
        }
        let all_small = refine_skeleton(&mut g1, db, &mut sepsets, ord, ci, cfg.alpha)?;
        if all_small && best.is_some() {
            break TerminationReason::SkeletonExhausted;
        }
        if !all_small && g1.max_degree() > cfg.degree_bound {
            iterations.push(IterationRecord {
                ord,
                skeleton_edges: g1.edge_count(),
                log_score: None,
                accepted: false,
            });
            ord += 1;
            continue;
        }

        let mut g = g1.clone();
        orient_colliders(&mut g, &sepsets);
        debug_assert!(directed_part_is_acyclic(&g), "collider orientation broke acyclicity");
        propagate_orientations(&mut g);
        debug_assert!(directed_part_is_acyclic(&g), "rule propagation broke acyclicity");
        let resolved = resolve_remaining(&g, directed_parents(&g), db, cfg.frozen_resolve)?;
        let network = match cfg.ordering_mode {
            OrderingMode::Total => k2(db, &topo_sort(&resolved)?, k2cfg)?,
            OrderingMode::Partial => k2_constrained(db, resolved.parent_sets(), k2cfg)?,
        };
        let score = log_network_score(db, &network)?;

        let accepted = best.as_ref().is_none_or(|(_, old)| score.value() > old.value());
        iterations.push(IterationRecord {
            ord,
            skeleton_edges: g1.edge_count(),
            log_score: Some(score),
            accepted,
        });
        if !accepted {
            break TerminationReason::ScoreDropped;
        }
        best = Some((network, score));
        if all_small {
            break TerminationReason::SkeletonExhausted;
        }
        ord += 1;
    };

    let (dag, log_score) = match best {
        Some(pair) => pair,
        // every round up to the ceiling was degree-skipped; report the empty
        // structure with its true score rather than pretending otherwise
        None => {
            let d = Dag::empty(n);
            let s = log_network_score(db, &d)?;
            (d, s)
        }
    };
    Ok(CBResult { dag, log_score, iterations, termination })
}
