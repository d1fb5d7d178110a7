//! Shared oracles and generators for the integration tests.
//!
//! Everything here recomputes results from first principles — exact integer
//! factorials over raw case rows, path enumeration over raw edge lists — so
//! agreement with the library is evidence, not circularity.

#![allow(dead_code)]

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cbnet::casedata::{CaseDatabase, Variable};
use cbnet::graphs::Dag;

pub fn factorial(n: u64) -> BigUint {
    (1..=n).map(BigUint::from).product()
}

/// Natural log of an arbitrary-size positive integer, accurate to a few ulps:
/// take the leading 53 bits as the mantissa and add the shifted-out bit count
/// times ln 2.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    assert!(bits > 0, "ln of zero");
    if bits <= 53 {
        let v: u64 = x.try_into().expect("fits in u64");
        return (v as f64).ln();
    }
    let shift = bits - 53;
    let m: u64 = (x >> shift).try_into().expect("53 bits fit in u64");
    (m as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Exact marginal-likelihood contribution of one node given a parent set,
/// evaluated as a ratio of exact integer factorial products over the raw
/// case rows:
///
///   prod over parent configurations j of
///     (r-1)! * prod_k N_jk! / (N_j + r - 1)!
///
/// returned as a natural log. Shares no code with the library's scorer.
pub fn exact_log_g(cases: &[Vec<u32>], cards: &[usize], i: usize, parents: &BTreeSet<usize>) -> f64 {
    let r = cards[i] as u64;
    let mut groups: std::collections::BTreeMap<Vec<u32>, Vec<u64>> = std::collections::BTreeMap::new();
    for case in cases {
        let key: Vec<u32> = parents.iter().map(|&p| case[p]).collect();
        let counts = groups.entry(key).or_insert_with(|| vec![0; r as usize]);
        counts[case[i] as usize] += 1;
    }
    let mut num = BigUint::from(1u32);
    let mut den = BigUint::from(1u32);
    for counts in groups.values() {
        let n_j: u64 = counts.iter().sum();
        num *= factorial(r - 1);
        den *= factorial(n_j + r - 1);
        for &c in counts {
            num *= factorial(c);
        }
    }
    ln_big(&num) - ln_big(&den)
}

/// Exact log-score of a whole structure: sum of `exact_log_g` per node.
pub fn exact_log_network(cases: &[Vec<u32>], cards: &[usize], dag: &Dag) -> f64 {
    (0..dag.n()).map(|i| exact_log_g(cases, cards, i, dag.parents(i))).sum()
}

/// d-separation decided by brute force: enumerate every simple undirected
/// path between `a` and `b` and test each interior vertex against the
/// blocking rules (non-collider blocked when conditioned on; collider
/// blocked unless it or a descendant is conditioned on). Separated iff no
/// path survives.
pub fn dsep_by_paths(dag: &Dag, a: usize, b: usize, s: &BTreeSet<usize>) -> bool {
    let n = dag.n();
    let mut children = vec![BTreeSet::new(); n];
    let mut neighbors = vec![BTreeSet::new(); n];
    for (p, c) in dag.edges() {
        children[p].insert(c);
        neighbors[p].insert(c);
        neighbors[c].insert(p);
    }
    let mut desc = vec![BTreeSet::new(); n];
    for (start, out) in desc.iter_mut().enumerate() {
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                if out.insert(c) {
                    stack.push(c);
                }
            }
        }
    }

    struct Walk<'a> {
        target: usize,
        neighbors: &'a [BTreeSet<usize>],
        children: &'a [BTreeSet<usize>],
        desc: &'a [BTreeSet<usize>],
        s: &'a BTreeSet<usize>,
    }

    impl Walk<'_> {
        fn path_active(&self, path: &[usize]) -> bool {
            for pos in 1..path.len() - 1 {
                let (prev, w, next) = (path[pos - 1], path[pos], path[pos + 1]);
                let collider =
                    self.children[prev].contains(&w) && self.children[next].contains(&w);
                let active = if collider {
                    self.s.contains(&w) || self.desc[w].iter().any(|d| self.s.contains(d))
                } else {
                    !self.s.contains(&w)
                };
                if !active {
                    return false;
                }
            }
            true
        }

        fn any_active_path(&self, v: usize, path: &mut Vec<usize>, on_path: &mut [bool]) -> bool {
            if v == self.target {
                return self.path_active(path);
            }
            for &next in &self.neighbors[v] {
                if on_path[next] {
                    continue;
                }
                path.push(next);
                on_path[next] = true;
                let found = self.any_active_path(next, path, on_path);
                path.pop();
                on_path[next] = false;
                if found {
                    return true;
                }
            }
            false
        }
    }

    let walk = Walk { target: b, neighbors: &neighbors, children: &children, desc: &desc, s };
    let mut path = vec![a];
    let mut on_path = vec![false; n];
    on_path[a] = true;
    !walk.any_active_path(a, &mut path, &mut on_path)
}

/// Database named v0..v{n-1} over the given cardinalities.
pub fn db_from(cards: &[usize], cases: Vec<Vec<u32>>) -> CaseDatabase {
    let variables = cards
        .iter()
        .enumerate()
        .map(|(i, &c)| Variable { name: format!("v{i}"), cardinality: c })
        .collect();
    CaseDatabase::new(variables, cases).expect("generated cases are valid")
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random case rows: n variables with cardinalities drawn from
/// {2, 3}, m rows.
pub fn random_cases(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<usize>, Vec<Vec<u32>>) {
    let cards: Vec<usize> = (0..n).map(|_| rng.random_range(2..=3usize)).collect();
    let cases = (0..m)
        .map(|_| cards.iter().map(|&c| rng.random_range(0..c as u32)).collect())
        .collect();
    (cards, cases)
}

/// Random DAG on n vertices: a random topological permutation, then each
/// possible earlier-to-later edge kept with probability `edge_prob`, parents
/// per node capped at `max_in_degree` (extra candidates dropped at random).
pub fn random_dag(rng: &mut ChaCha8Rng, n: usize, max_in_degree: usize, edge_prob: f64) -> Dag {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut parents = vec![BTreeSet::new(); n];
    for pos in 1..n {
        let child = order[pos];
        let mut pool: Vec<usize> = order[..pos]
            .iter()
            .copied()
            .filter(|_| rng.random::<f64>() < edge_prob)
            .collect();
        while pool.len() > max_in_degree {
            let drop = rng.random_range(0..pool.len());
            pool.swap_remove(drop);
        }
        parents[child] = pool.into_iter().collect();
    }
    Dag::new(parents).expect("construction follows a topological order")
}

/// All subsets of a slice, in lexicographic order of the index mask.
pub fn subsets(items: &[usize]) -> Vec<BTreeSet<usize>> {
    let mut out = Vec::with_capacity(1 << items.len());
    for mask in 0u32..(1 << items.len()) {
        out.push(
            items
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &v)| v)
                .collect(),
        );
    }
    out
}
