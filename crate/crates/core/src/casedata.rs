//! Case databases: loading, validation, and the contingency statistics
//! consumed by scoring and independence testing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use std::sync::{Arc, Mutex};

use crate::{Error, Result};

/// One column of the database: display name plus domain size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
}

/// Declared cardinalities, parsed from one `name,cardinality` line per variable.
///
/// A schema can only raise a cardinality above the observed distinct-token
/// count; observing more tokens than declared is a schema error.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    entries: BTreeMap<String, usize>,
}

impl Schema {
    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let (name, card) = line.split_once(',').ok_or_else(|| {
                Error::Schema(format!("line {}: expected name,cardinality", idx + 1))
            })?;
            if name.is_empty() {
                return Err(Error::Schema(format!("line {}: empty variable name", idx + 1)));
            }
            let card: usize = card.trim().parse().map_err(|_| {
                Error::Schema(format!("line {}: bad cardinality {:?}", idx + 1, card))
            })?;
            if entries.insert(name.to_string(), card).is_some() {
                return Err(Error::Schema(format!("duplicate variable {:?}", name)));
            }
        }
        Ok(Self { entries })
    }

    pub fn declare(&mut self, name: &str, cardinality: usize) {
        self.entries.insert(name.to_string(), cardinality);
    }

    pub fn declared(&self, name: &str) -> Option<usize> {
        self.entries.get(name).copied()
    }

    fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// One observed parent instantiation with its per-target-value counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratum {
    /// Values of the parent variables, in ascending parent-id order.
    pub parent_values: Vec<u32>,
    /// counts[k] = number of cases where the target takes value k.
    pub counts: Vec<u32>,
    pub total: u32,
}

/// Counts of a target variable stratified by a parent set.
///
/// Only observed parent instantiations appear, in lexicographic order of the
/// instantiation tuple. `Σ_strata total = m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub target: usize,
    /// Ascending variable ids.
    pub parents: Vec<usize>,
    pub strata: Vec<Stratum>,
}

#[derive(Default)]
struct Memo {
    tables: HashMap<(usize, Vec<usize>), Arc<ContingencyTable>>,
    strata_held: usize,
}

/// Stop memoizing once the cache holds this many strata in total. The memo is
/// invisible: results are always defined by the full scan.
const MEMO_STRATA_BUDGET: usize = 1 << 21;

/// Cells above which stratified counting falls back from a dense mixed-radix
/// array to a map keyed by instantiation tuple.
const DENSE_CELL_LIMIT: usize = 1 << 22;

/// Immutable table of `m` complete discrete cases over `n` variables.
///
/// Values are stored as 0-based indices into each variable's domain. The
/// database is safe for concurrent reads; counting operations are pure
/// functions of the cases.
pub struct CaseDatabase {
    variables: Vec<Variable>,
    /// Row-major, `m * n` entries; `values[case * n + var]`.
    values: Vec<u32>,
    num_cases: usize,
    memo: Mutex<Memo>,
}

impl std::fmt::Debug for CaseDatabase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CaseDatabase")
            .field("variables", &self.variables)
            .field("num_cases", &self.num_cases)
            .finish_non_exhaustive()
    }
}

impl CaseDatabase {
    pub fn new(variables: Vec<Variable>, cases: Vec<Vec<u32>>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::Argument("a database needs at least one variable".into()));
        }
        let mut seen = BTreeSet::new();
        for v in &variables {
            if v.name.is_empty() {
                return Err(Error::Argument("empty variable name".into()));
            }
            if !seen.insert(v.name.as_str()) {
                return Err(Error::Argument(format!("duplicate variable name {:?}", v.name)));
            }
            if v.cardinality < 2 {
                return Err(Error::Argument(format!(
                    "variable {:?} has cardinality {}; every variable needs at least 2 values",
                    v.name, v.cardinality
                )));
            }
        }
        let n = variables.len();
        let mut values = Vec::with_capacity(cases.len() * n);
        for (row_no, row) in cases.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Format(format!(
                    "row {}: has {} fields, expected {}",
                    row_no + 1,
                    row.len(),
                    n
                )));
            }
            for (v, var) in row.iter().zip(&variables) {
                if *v as usize >= var.cardinality {
                    return Err(Error::Argument(format!(
                        "row {}: value {} out of range for variable {:?} (cardinality {})",
                        row_no + 1,
                        v,
                        var.name,
                        var.cardinality
                    )));
                }
            }
            values.extend_from_slice(row);
        }
        Ok(Self { variables, values, num_cases: cases.len(), memo: Mutex::default() })
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_cases(&self) -> usize {
        self.num_cases
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn name(&self, i: usize) -> &str {
        &self.variables[i].name
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.variables[i].cardinality
    }

    #[inline]
    pub fn value(&self, case: usize, var: usize) -> u32 {
        self.values[case * self.variables.len() + var]
    }

    fn check_var(&self, i: usize) -> Result<()> {
        if i >= self.variables.len() {
            return Err(Error::Argument(format!(
                "variable id {} out of range (n = {})",
                i,
                self.variables.len()
            )));
        }
        Ok(())
    }

    /// Counts of `target` stratified by every observed instantiation of
    /// `parents`. Results are memoized per (target, parent set).
    pub fn contingency(&self, target: usize, parents: &BTreeSet<usize>) -> Result<Arc<ContingencyTable>> {
        self.check_var(target)?;
        for &p in parents {
            self.check_var(p)?;
        }
        if parents.contains(&target) {
            return Err(Error::Argument(format!(
                "variable {} cannot be conditioned on itself",
                target
            )));
        }
        let key: Vec<usize> = parents.iter().copied().collect();
        if let Some(t) = self.memo.lock().unwrap().tables.get(&(target, key.clone())) {
            return Ok(Arc::clone(t));
        }
        let r = self.cardinality(target);
        let groups = self.group_counts(&key, r, |case| self.value(case, target) as usize);
        let strata = groups
            .into_iter()
            .map(|(parent_values, counts)| {
                let total = counts.iter().sum();
                Stratum { parent_values, counts, total }
            })
            .collect();
        let table = Arc::new(ContingencyTable { target, parents: key.clone(), strata });

        let mut memo = self.memo.lock().unwrap();
        if memo.strata_held + table.strata.len() <= MEMO_STRATA_BUDGET {
            memo.strata_held += table.strata.len();
            memo.tables.insert((target, key), Arc::clone(&table));
        }
        Ok(table)
    }

    /// One `r_a x r_b` count table per observed instantiation of `cond`,
    /// in lexicographic instantiation order. Feeds the chi-square test.
    pub fn stratified_pair_counts(
        &self,
        a: usize,
        b: usize,
        cond: &BTreeSet<usize>,
    ) -> Result<Vec<Vec<Vec<u32>>>> {
        self.check_var(a)?;
        self.check_var(b)?;
        for &c in cond {
            self.check_var(c)?;
        }
        if a == b || cond.contains(&a) || cond.contains(&b) {
            return Err(Error::Argument(format!(
                "pair counts need disjoint arguments; got a={}, b={}, cond={:?}",
                a, b, cond
            )));
        }
        let by: Vec<usize> = cond.iter().copied().collect();
        let ra = self.cardinality(a);
        let rb = self.cardinality(b);
        let groups = self.group_counts(&by, ra * rb, |case| {
            self.value(case, a) as usize * rb + self.value(case, b) as usize
        });
        Ok(groups
            .into_iter()
            .map(|(_, cells)| cells.chunks(rb).map(<[u32]>::to_vec).collect())
            .collect())
    }

    /// Groups the cases by the instantiation of `by` (ascending ids) and
    /// tallies `cells`-wide count rows, `cell(case)` giving the within-group
    /// index. Only observed instantiations are returned, lexicographically.
    fn group_counts(
        &self,
        by: &[usize],
        cells: usize,
        cell: impl Fn(usize) -> usize,
    ) -> Vec<(Vec<u32>, Vec<u32>)> {
        let dims: Vec<usize> = by.iter().map(|&p| self.cardinality(p)).collect();
        let dense_size = dims
            .iter()
            .try_fold(cells, |acc, &d| acc.checked_mul(d))
            .filter(|&total| total <= DENSE_CELL_LIMIT);

        if let Some(total) = dense_size {
            let mut counts = vec![0u32; total];
            for case in 0..self.num_cases {
                let mut idx = 0usize;
                for (&p, &d) in by.iter().zip(&dims) {
                    idx = idx * d + self.value(case, p) as usize;
                }
                counts[idx * cells + cell(case)] += 1;
            }
            let q = total / cells;
            (0..q)
                .filter(|&j| counts[j * cells..(j + 1) * cells].iter().any(|&c| c > 0))
                .map(|j| (decode_mixed_radix(j, &dims), counts[j * cells..(j + 1) * cells].to_vec()))
                .collect()
        } else {
            let mut map: BTreeMap<Vec<u32>, Vec<u32>> = BTreeMap::new();
            for case in 0..self.num_cases {
                let inst: Vec<u32> = by.iter().map(|&p| self.value(case, p)).collect();
                map.entry(inst).or_insert_with(|| vec![0; cells])[cell(case)] += 1;
            }
            map.into_iter().collect()
        }
    }
}

/// Inverse of the mixed-radix index: first dimension is most significant.
fn decode_mixed_radix(mut idx: usize, dims: &[usize]) -> Vec<u32> {
    let mut out = vec![0u32; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = (idx % d) as u32;
        idx /= d;
    }
    out
}

/// Reads the CSV case format: first row variable names, then one case per row.
///
/// Token-to-index mapping is the lexicographic rank of the token among that
/// column's distinct tokens, so shuffling the case rows cannot change the
/// encoding. A schema may raise a column's cardinality above the observed
/// distinct-token count; it can never lower it.
pub fn load_cases(reader: impl BufRead, schema: Option<&Schema>) -> Result<CaseDatabase> {
    let mut lines = Vec::new();
    for line in reader.lines() {
        let line = line?;
        lines.push(line.trim_end_matches('\r').to_string());
    }
    let Some(header) = lines.first() else {
        return Err(Error::Format("empty case file".into()));
    };
    let names: Vec<&str> = header.split(',').collect();
    let mut seen = BTreeSet::new();
    for name in &names {
        if name.is_empty() {
            return Err(Error::Format("empty variable name in header".into()));
        }
        if !seen.insert(*name) {
            return Err(Error::Format(format!("duplicate variable name {:?} in header", name)));
        }
    }
    if let Some(schema) = schema {
        for s in schema.names() {
            if !seen.contains(s) {
                return Err(Error::Schema(format!(
                    "schema declares unknown variable {:?}",
                    s
                )));
            }
        }
    }

    let n = names.len();
    let mut rows: Vec<Vec<&str>> = Vec::with_capacity(lines.len().saturating_sub(1));
    for (row_no, line) in lines[1..].iter().enumerate() {
        let tokens: Vec<&str> = line.split(',').collect();
        if tokens.len() != n {
            return Err(Error::Format(format!(
                "row {}: has {} fields, expected {}",
                row_no + 1,
                tokens.len(),
                n
            )));
        }
        rows.push(tokens);
    }

    let mut variables = Vec::with_capacity(n);
    let mut ranks: Vec<BTreeMap<&str, u32>> = Vec::with_capacity(n);
    for (col, name) in names.iter().enumerate() {
        let distinct: BTreeSet<&str> = rows.iter().map(|row| row[col]).collect();
        let observed = distinct.len();
        let cardinality = match schema.and_then(|s| s.declared(name)) {
            Some(declared) if declared < observed => {
                return Err(Error::Schema(format!(
                    "variable {:?}: {} distinct tokens observed but schema declares {}",
                    name, observed, declared
                )));
            }
            Some(declared) => declared,
            None => observed,
        };
        if cardinality < 2 {
            return Err(Error::Format(format!(
                "variable {:?} has {} distinct value(s); drop the column or declare its cardinality in a schema",
                name, observed
            )));
        }
        ranks.push(distinct.iter().enumerate().map(|(k, &t)| (t, k as u32)).collect());
        variables.push(Variable { name: (*name).to_string(), cardinality });
    }

    let cases = rows
        .iter()
        .map(|row| row.iter().zip(&ranks).map(|(t, rank)| rank[t]).collect())
        .collect();
    CaseDatabase::new(variables, cases)
}

/// Builds a database named v0..v{n-1} from explicit value rows. Test helper
/// shared by the sibling modules' unit tests.
#[cfg(test)]
pub(crate) fn db(cards: &[usize], cases: &[&[u32]]) -> CaseDatabase {
    let variables = cards
        .iter()
        .enumerate()
        .map(|(i, &c)| Variable { name: format!("v{i}"), cardinality: c })
        .collect();
    CaseDatabase::new(variables, cases.iter().map(|r| r.to_vec()).collect()).unwrap()
}
