//! Conditional-independence decisions: the Pearson chi-square test over
//! stratified contingency tables, and Pearl's d-separation criterion as a
//! drop-in oracle for testing the learner without data.

use std::collections::BTreeSet;

use statrs::function::gamma::gamma_ur;

use crate::casedata::CaseDatabase;
use crate::graphs::Dag;
use crate::{Error, Result};

/// Outcome of one conditional-independence test.
///
/// `independent` is `p_value > alpha` for the alpha of the issuing test;
/// zero degrees of freedom mean the data were degenerate and force
/// `independent = true`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndependenceVerdict {
    pub independent: bool,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pooled Pearson statistic over a list of two-way count tables, one per
/// conditioning stratum.
///
/// Per stratum: all-zero rows and columns are dropped; if at least a 2x2
/// table remains, it contributes `Σ (O − E)² / E` with `E = rowTotal ×
/// colTotal / total` and `(rows − 1)(cols − 1)` degrees of freedom.
/// Degenerate strata contribute nothing. No small-count correction is
/// applied, a known source of false dependence at small m.
pub fn chi_square_stat(tables: &[Vec<Vec<f64>>]) -> Result<(f64, usize)> {
    let mut statistic = 0.0;
    let mut dof = 0usize;
    for table in tables {
        let rows = table.len();
        let cols = table.first().map_or(0, Vec::len);
        for row in table {
            if row.len() != cols {
                return Err(Error::Argument("ragged contingency table".into()));
            }
            if row.iter().any(|&c| c < 0.0 || !c.is_finite()) {
                return Err(Error::Argument("negative or non-finite cell count".into()));
            }
        }
        let row_totals: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
        let col_totals: Vec<f64> =
            (0..cols).map(|c| table.iter().map(|r| r[c]).sum()).collect();
        let total: f64 = row_totals.iter().sum();
        let live_rows: Vec<usize> = (0..rows).filter(|&r| row_totals[r] > 0.0).collect();
        let live_cols: Vec<usize> = (0..cols).filter(|&c| col_totals[c] > 0.0).collect();
        if live_rows.len() < 2 || live_cols.len() < 2 {
            continue;
        }
        for &r in &live_rows {
            for &c in &live_cols {
                let expected = row_totals[r] * col_totals[c] / total;
                let diff = table[r][c] - expected;
                statistic += diff * diff / expected;
            }
        }
        dof += (live_rows.len() - 1) * (live_cols.len() - 1);
    }
    Ok((statistic, dof))
}

/// Upper tail of the chi-square distribution: Q(dof/2, statistic/2).
/// Zero degrees of freedom yield 1.
pub fn chi_square_pvalue(statistic: f64, dof: usize) -> f64 {
    if dof == 0 || statistic <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof as f64 / 2.0, statistic / 2.0)
}

/// Tests `a ⫫ b | s` on the data at significance level `alpha`.
pub fn ci_test(
    db: &CaseDatabase,
    a: usize,
    b: usize,
    s: &BTreeSet<usize>,
    alpha: f64,
) -> Result<IndependenceVerdict> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let counts = db.stratified_pair_counts(a, b, s)?;
    let tables: Vec<Vec<Vec<f64>>> = counts
        .iter()
        .map(|t| t.iter().map(|row| row.iter().map(|&c| f64::from(c)).collect()).collect())
        .collect();
    let (statistic, dof) = chi_square_stat(&tables)?;
    let p_value = chi_square_pvalue(statistic, dof);
    Ok(IndependenceVerdict { independent: p_value > alpha, statistic, dof, p_value })
}

/// Pearl's d-separation: are `a` and `b` separated given `s`?
///
/// Uses the moralized-ancestral-graph reduction: restrict to ancestors of
/// {a, b} ∪ s, marry parents, drop directions, delete s, and check
/// reachability. Equivalent to blocking every path (chain/fork blocked by a
/// conditioned midpoint, collider active only if it or a descendant is
/// conditioned).
pub fn d_separated(d: &Dag, a: usize, b: usize, s: &BTreeSet<usize>) -> bool {
    let n = d.n();
    assert!(a < n && b < n && a != b, "need two distinct vertices");
    assert!(!s.contains(&a) && !s.contains(&b), "conditioning set must exclude the pair");

    // ancestral closure of {a, b} ∪ s
    let mut ancestral = vec![false; n];
    let mut stack: Vec<usize> = s.iter().copied().chain([a, b]).collect();
    for &v in &stack {
        ancestral[v] = true;
    }
    while let Some(v) = stack.pop() {
        for &p in d.parents(v) {
            if !ancestral[p] {
                ancestral[p] = true;
                stack.push(p);
            }
        }
    }

    // moral graph on the ancestral set: child-parent plus parent-parent edges
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for v in 0..n {
        if !ancestral[v] {
            continue;
        }
        let ps: Vec<usize> = d.parents(v).iter().copied().collect();
        for &p in &ps {
            adj[v].insert(p);
            adj[p].insert(v);
        }
        for (x, &p) in ps.iter().enumerate() {
            for &q in &ps[x + 1..] {
                adj[p].insert(q);
                adj[q].insert(p);
            }
        }
    }

    // reachability avoiding s
    let mut seen = vec![false; n];
    let mut stack = vec![a];
    seen[a] = true;
    while let Some(v) = stack.pop() {
        if v == b {
            return false;
        }
        for &w in &adj[v] {
            if !seen[w] && !s.contains(&w) {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    true
}

/// A pluggable conditional-independence decision, so the learner can run
/// against real data (chi-square) or a known structure (d-separation).
pub trait CiOracle {
    fn independent(
        &self,
        db: &CaseDatabase,
        a: usize,
        b: usize,
        cond: &BTreeSet<usize>,
        alpha: f64,
    ) -> Result<bool>;
}

impl<F> CiOracle for F
where
    F: Fn(&CaseDatabase, usize, usize, &BTreeSet<usize>, f64) -> Result<bool>,
{
    fn independent(
        &self,
        db: &CaseDatabase,
        a: usize,
        b: usize,
        cond: &BTreeSet<usize>,
        alpha: f64,
    ) -> Result<bool> {
        self(db, a, b, cond, alpha)
    }
}

/// The data-driven oracle: chi-square verdicts at the given alpha.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChiSquareOracle;

impl CiOracle for ChiSquareOracle {
    fn independent(
        &self,
        db: &CaseDatabase,
        a: usize,
        b: usize,
        cond: &BTreeSet<usize>,
        alpha: f64,
    ) -> Result<bool> {
        Ok(ci_test(db, a, b, cond, alpha)?.independent)
    }
}

/// Structure-driven oracle: answers from d-separation on a fixed DAG,
/// ignoring the database and alpha entirely.
#[derive(Debug, Clone, Copy)]
pub struct DSepOracle<'a> {
    pub dag: &'a Dag,
}

impl CiOracle for DSepOracle<'_> {
    fn independent(
        &self,
        _db: &CaseDatabase,
        a: usize,
        b: usize,
        cond: &BTreeSet<usize>,
        _alpha: f64,
    ) -> Result<bool> {
        Ok(d_separated(self.dag, a, b, cond))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casedata::db;

    fn set(ids: &[usize]) -> BTreeSet<usize> {
        ids.iter().copied().collect()
    }

    fn dag(n: usize, edges: &[(usize, usize)]) -> Dag {
        let mut parents = vec![BTreeSet::new(); n];
        for &(p, c) in edges {
            parents[c].insert(p);
        }
        Dag::new(parents).unwrap()
    }

    #[test]
    fn statistic_zero_when_observed_equals_expected() {
        let (stat, dof) = chi_square_stat(&[vec![vec![5.0, 5.0], vec![5.0, 5.0]]]).unwrap();
        assert_eq!(stat, 0.0);
        assert_eq!(dof, 1);
    }

    #[test]
    fn statistic_of_perfect_diagonal() {
        // E = 5 in every cell, 4 cells x 25/5
        let (stat, dof) = chi_square_stat(&[vec![vec![10.0, 0.0], vec![0.0, 10.0]]]).unwrap();
        assert!((stat - 20.0).abs() < 1e-12);
        assert_eq!(dof, 1);
    }

    #[test]
    fn statistic_pools_across_strata() {
        let one = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (stat, dof) = chi_square_stat(&[one.clone(), one]).unwrap();
        assert!((stat - 4.0).abs() < 1e-12);
        assert_eq!(dof, 2);
    }

    #[test]
    fn statistic_drops_zero_rows_and_columns() {
        // live part is a 1x2 table: degenerate, contributes nothing
        let (stat, dof) =
            chi_square_stat(&[vec![vec![3.0, 4.0], vec![0.0, 0.0]]]).unwrap();
        assert_eq!((stat, dof), (0.0, 0));
    }

    #[test]
    fn statistic_rejects_negative_cells() {
        assert!(chi_square_stat(&[vec![vec![-1.0, 2.0], vec![1.0, 1.0]]]).is_err());
    }

    #[test]
    fn pvalue_edge_cases_and_tables() {
        assert_eq!(chi_square_pvalue(0.0, 1), 1.0);
        assert_eq!(chi_square_pvalue(5.0, 0), 1.0);
        // published chi-square upper-tail values
        assert!((chi_square_pvalue(20.0, 1) - 7.74e-6).abs() < 1e-7);
        assert!((chi_square_pvalue(2.706, 1) - 0.100).abs() < 2e-3);
        assert!((chi_square_pvalue(4.605, 2) - 0.100).abs() < 2e-3);
    }

    #[test]
    fn ci_test_flags_perfect_correlation() {
        let rows: Vec<Vec<u32>> = (0..20).map(|i| vec![u32::from(i >= 10); 2]).collect();
        let d = db(&[2, 2], &rows.iter().map(Vec::as_slice).collect::<Vec<_>>());
        let v = ci_test(&d, 0, 1, &set(&[]), 0.1).unwrap();
        assert!(!v.independent);
        assert!((v.statistic - 20.0).abs() < 1e-9);
        assert!(v.p_value < 1e-4);
    }

    #[test]
    fn ci_test_passes_balanced_table() {
        let mut rows = Vec::new();
        for a in 0..2u32 {
            for b in 0..2u32 {
                for _ in 0..5 {
                    rows.push(vec![a, b]);
                }
            }
        }
        let d = db(&[2, 2], &rows.iter().map(Vec::as_slice).collect::<Vec<_>>());
        let v = ci_test(&d, 0, 1, &set(&[]), 0.1).unwrap();
        assert!(v.independent);
        assert_eq!(v.p_value, 1.0);
    }

    #[test]
    fn ci_test_degenerate_strata_mean_independence() {
        // b copies a; conditioning on the copy makes each stratum constant
        let d = db(&[2, 2, 2], &[&[0, 0, 0], &[0, 0, 0], &[1, 1, 1], &[1, 1, 1]]);
        let v = ci_test(&d, 0, 1, &set(&[2]), 0.1).unwrap();
        assert_eq!(v.dof, 0);
        assert_eq!(v.statistic, 0.0);
        assert!(v.independent);
    }

    #[test]
    fn ci_test_is_symmetric() {
        let d = db(&[2, 3], &[&[0, 2], &[1, 0], &[0, 1], &[1, 2], &[0, 0]]);
        let x = ci_test(&d, 0, 1, &set(&[]), 0.1).unwrap();
        let y = ci_test(&d, 1, 0, &set(&[]), 0.1).unwrap();
        assert_eq!(x.independent, y.independent);
        assert!((x.statistic - y.statistic).abs() < 1e-12);
        assert_eq!(x.dof, y.dof);
    }

    #[test]
    fn ci_test_validates_alpha() {
        let d = db(&[2, 2], &[&[0, 0]]);
        assert!(ci_test(&d, 0, 1, &set(&[]), 0.0).is_err());
        assert!(ci_test(&d, 0, 1, &set(&[]), 1.0).is_err());
    }

    #[test]
    fn dsep_chain_blocked_by_midpoint() {
        let d = dag(3, &[(0, 2), (2, 1)]);
        assert!(d_separated(&d, 0, 1, &set(&[2])));
        assert!(!d_separated(&d, 0, 1, &set(&[])));
    }

    #[test]
    fn dsep_collider_inactive_when_unconditioned() {
        let d = dag(3, &[(0, 2), (1, 2)]);
        assert!(d_separated(&d, 0, 1, &set(&[])));
    }

    #[test]
    fn dsep_collider_activated_by_conditioning() {
        let d = dag(3, &[(0, 2), (1, 2)]);
        assert!(!d_separated(&d, 0, 1, &set(&[2])));
    }

    #[test]
    fn dsep_collider_activated_by_descendant() {
        // 0 -> 2 <- 1, 2 -> 3: conditioning on 3 opens the collider
        let d = dag(4, &[(0, 2), (1, 2), (2, 3)]);
        assert!(!d_separated(&d, 0, 1, &set(&[3])));
        assert!(d_separated(&d, 0, 1, &set(&[])));
    }
}
