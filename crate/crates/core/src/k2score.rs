//! The K2 Bayesian scoring metric in natural-log space and the greedy parent
//! search built on it.
//!
//! For node i with parent set π and r_i values, the family score is
//!
//! ```text
//!   g(i, π) = Π_j  (r_i − 1)! / (N_ij + r_i − 1)!  ×  Π_k N_ijk!
//! ```
//!
//! with j ranging over the parent instantiations observed in the data (an
//! unobserved instantiation contributes the factor 1) and N_ijk counting
//! cases with the j-th instantiation and target value k. Raw factorials are
//! astronomically large for realistic m, so everything runs on lnΓ:
//! `log_g = Σ_j [lnΓ(r_i) − lnΓ(N_ij + r_i) + Σ_k lnΓ(N_ijk + 1)]`.
//! The uniform structure prior is an additive constant and is dropped.

use std::collections::BTreeSet;
use std::num::NonZeroUsize;

use statrs::function::gamma::ln_gamma;

use crate::casedata::CaseDatabase;
use crate::graphs::Dag;
use crate::{Error, Result};

/// Natural-log score of a family or a whole network.
///
/// Always ≤ 0 (the underlying probability-like quantity is ≤ 1, with equality
/// exactly when m = 0) and finite for any legal input.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogScore(f64);

impl LogScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for LogScore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct K2Config {
    /// Cap on parents per node; `None` leaves the greedy search unbounded.
    pub max_parents: Option<NonZeroUsize>,
}

/// Log family score of `i` given `parents`.
pub fn log_g(db: &CaseDatabase, i: usize, parents: &BTreeSet<usize>) -> Result<LogScore> {
    let table = db.contingency(i, parents)?;
    let r = db.cardinality(i) as f64;
    let ln_gamma_r = ln_gamma(r);
    let mut sum = 0.0;
    for stratum in &table.strata {
        sum += ln_gamma_r - ln_gamma(f64::from(stratum.total) + r);
        for &count in &stratum.counts {
            sum += ln_gamma(f64::from(count) + 1.0);
        }
    }
    debug_assert!(sum <= 1e-9, "family score must not exceed 1: {sum}");
    Ok(LogScore(sum.min(0.0)))
}

/// Log score of a whole structure: Σ_i log_g(db, i, π_i).
pub fn log_network_score(db: &CaseDatabase, d: &Dag) -> Result<LogScore> {
    if d.n() != db.num_vars() {
        return Err(Error::Argument(format!(
            "structure has {} vertices but the database has {} variables",
            d.n(),
            db.num_vars()
        )));
    }
    let mut sum = 0.0;
    for i in 0..d.n() {
        sum += log_g(db, i, d.parents(i))?.value();
    }
    Ok(LogScore(sum))
}

/// Greedy K2 parent selection for one node.
///
/// Starting from the empty set, repeatedly adds the candidate from
/// `candidates` that maximizes `log_g`, but only while the best strictly
/// improves on the current score; ties go to the candidate listed first.
/// Score comparison is exact floating point (epsilon 0).
pub fn k2_parents(
    db: &CaseDatabase,
    i: usize,
    candidates: &[usize],
    cfg: K2Config,
) -> Result<BTreeSet<usize>> {
    let mut seen = BTreeSet::new();
    for &z in candidates {
        if z == i {
            return Err(Error::Argument(format!("variable {i} cannot be its own candidate parent")));
        }
        if !seen.insert(z) {
            return Err(Error::Argument(format!("duplicate candidate parent {z}")));
        }
    }
    let cap = cfg.max_parents.map_or(usize::MAX, NonZeroUsize::get);
    let mut parents = BTreeSet::new();
    let mut current = log_g(db, i, &parents)?;
    while parents.len() < cap {
        let mut best: Option<(usize, LogScore)> = None;
        for &z in candidates {
            if parents.contains(&z) {
                continue;
            }
            parents.insert(z);
            let score = log_g(db, i, &parents)?;
            parents.remove(&z);
            // strictly-greater keeps the earliest candidate on ties
            if best.is_none_or(|(_, s)| score.value() > s.value()) {
                best = Some((z, score));
            }
        }
        match best {
            Some((z, score)) if score.value() > current.value() => {
                parents.insert(z);
                current = score;
            }
            _ => break,
        }
    }
    Ok(parents)
}

/// K2 over a total ordering: each node may only draw parents from its
/// predecessors, so the result is acyclic by construction.
pub fn k2(db: &CaseDatabase, ordering: &[usize], cfg: K2Config) -> Result<Dag> {
    let n = db.num_vars();
    if ordering.len() != n {
        return Err(Error::Argument(format!(
            "ordering has {} entries, expected {}",
            ordering.len(),
            n
        )));
    }
    let mut seen = vec![false; n];
    for &v in ordering {
        if v >= n || seen[v] {
            return Err(Error::Argument("ordering is not a permutation of the variables".into()));
        }
        seen[v] = true;
    }
    let mut parents = vec![BTreeSet::new(); n];
    for (pos, &i) in ordering.iter().enumerate() {
        parents[i] = k2_parents(db, i, &ordering[..pos], cfg)?;
    }
    Dag::new(parents)
}

/// K2 restricted to explicit per-node candidate sets instead of a total
/// ordering. The union of allowed edges must be acyclic, which guarantees the
/// result is a DAG no matter which candidates the greedy step takes.
pub fn k2_constrained(
    db: &CaseDatabase,
    allowed: &[BTreeSet<usize>],
    cfg: K2Config,
) -> Result<Dag> {
    let n = db.num_vars();
    if allowed.len() != n {
        return Err(Error::Argument(format!(
            "{} candidate sets supplied, expected {}",
            allowed.len(),
            n
        )));
    }
    // validates ids, self-parents, and acyclicity of the candidate graph
    Dag::new(allowed.to_vec())
        .map_err(|_| Error::Argument("candidate parent sets must form an acyclic graph".into()))?;
    let mut parents = vec![BTreeSet::new(); n];
    for (i, slot) in parents.iter_mut().enumerate() {
        let candidates: Vec<usize> = allowed[i].iter().copied().collect();
        *slot = k2_parents(db, i, &candidates, cfg)?;
    }
    Dag::new(parents)
}
