//! Experiment support: ground-truth networks with CPTs, forward sampling,
//! structural comparison of learned against gold structures, and network
//! file I/O. Bundles the 37-node ALARM structure (with synthetic CPTs; the
//! original case databases are not distributed) and a 7-segment-display
//! network in the spirit of the classic LED example.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::casedata::{CaseDatabase, Variable};
use crate::graphs::{topo_sort, Dag};
use crate::{Error, Result};

/// A Bayesian network: structure, value tokens per node, and CPTs.
///
/// CPT rows are indexed by the mixed-radix number of the parent values with
/// parents sorted ascending by id and the lowest-id parent as the most
/// significant digit. This indexing is part of the file format.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    names: Vec<String>,
    values: Vec<Vec<String>>,
    dag: Dag,
    cpts: Vec<Vec<Vec<f64>>>,
}

impl BayesNet {
    pub fn new(
        names: Vec<String>,
        values: Vec<Vec<String>>,
        dag: Dag,
        cpts: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let n = dag.n();
        if names.len() != n || values.len() != n || cpts.len() != n {
            return Err(Error::Argument(format!(
                "inconsistent sizes: {} names, {} value lists, {} CPTs for {} vertices",
                names.len(),
                values.len(),
                cpts.len(),
                n
            )));
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if name.is_empty() || !seen.insert(name.as_str()) {
                return Err(Error::Argument(format!("empty or duplicate node name {name:?}")));
            }
        }
        for (i, vals) in values.iter().enumerate() {
            if vals.len() < 2 {
                return Err(Error::Argument(format!(
                    "node {:?} needs at least 2 values",
                    names[i]
                )));
            }
            let distinct: BTreeSet<&str> = vals.iter().map(String::as_str).collect();
            if distinct.len() != vals.len() {
                return Err(Error::Argument(format!("node {:?} has duplicate values", names[i])));
            }
        }
        for i in 0..n {
            let r = values[i].len();
            let rows: usize = dag.parents(i).iter().map(|&p| values[p].len()).product();
            if cpts[i].len() != rows {
                return Err(Error::Argument(format!(
                    "node {:?}: CPT has {} rows, expected {}",
                    names[i],
                    cpts[i].len(),
                    rows
                )));
            }
            for (j, row) in cpts[i].iter().enumerate() {
                if row.len() != r {
                    return Err(Error::Argument(format!(
                        "node {:?}: CPT row {} has {} entries, expected {}",
                        names[i],
                        j,
                        row.len(),
                        r
                    )));
                }
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(Error::Argument(format!(
                        "node {:?}: CPT row {} has probabilities outside [0,1]",
                        names[i], j
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Argument(format!(
                        "node {:?}: CPT row {} sums to {} instead of 1",
                        names[i], j, sum
                    )));
                }
            }
        }
        Ok(Self { names, values, dag, cpts })
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn values(&self, i: usize) -> &[String] {
        &self.values[i]
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.values[i].len()
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cpt(&self, i: usize) -> &[Vec<f64>] {
        &self.cpts[i]
    }

    /// CPT row holding `P(node i | parent values in case)`.
    pub(crate) fn cpt_row_index(&self, i: usize, case: &[u32]) -> usize {
        let mut idx = 0usize;
        for &p in self.dag.parents(i) {
            idx = idx * self.values[p].len() + case[p] as usize;
        }
        idx
    }

    fn variables(&self) -> Vec<Variable> {
        self.names
            .iter()
            .zip(&self.values)
            .map(|(name, vals)| Variable { name: name.clone(), cardinality: vals.len() })
            .collect()
    }
}

fn draw_index(row: &[f64], u: f64) -> u32 {
    let mut acc = 0.0;
    for (k, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return k as u32;
        }
    }
    (row.len() - 1) as u32
}

/// Samples `m` complete cases by visiting nodes in topological order and
/// drawing each value from its CPT row via inverse CDF.
///
/// The generator is ChaCha8 seeded with `seed`: a documented, portable
/// stream, so a published seed reproduces the database on any platform.
pub fn forward_sample(bn: &BayesNet, m: usize, seed: u64) -> Result<CaseDatabase> {
    let order = topo_sort(bn.dag())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = bn.n();
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let mut case = vec![0u32; n];
        for &i in &order {
            let row = &bn.cpts[i][bn.cpt_row_index(i, &case)];
            case[i] = draw_index(row, rng.random::<f64>());
        }
        rows.push(case);
    }
    CaseDatabase::new(bn.variables(), rows)
}

/// Writes a sampled database in the CSV case format using the network's
/// value tokens.
pub fn save_cases_csv(bn: &BayesNet, db: &CaseDatabase, mut sink: impl Write) -> Result<()> {
    if db.num_vars() != bn.n()
        || (0..bn.n()).any(|i| db.name(i) != bn.name(i) || db.cardinality(i) != bn.cardinality(i))
    {
        return Err(Error::Argument("database does not match the network's variables".into()));
    }
    writeln!(sink, "{}", bn.names.join(","))?;
    for case in 0..db.num_cases() {
        let row: Vec<&str> = (0..bn.n())
            .map(|i| bn.values[i][db.value(case, i) as usize].as_str())
            .collect();
        writeln!(sink, "{}", row.join(","))?;
    }
    Ok(())
}

/// Edge-level comparison of a learned structure against a gold one,
/// the way structure-recovery results are usually reported.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuralDiff {
    /// Gold edges present with the same orientation.
    pub correct: usize,
    /// Gold edges absent from the learned structure entirely.
    pub missing: Vec<(usize, usize)>,
    /// Learned edges whose unordered pair is unconnected in gold.
    pub extra: Vec<(usize, usize)>,
    /// Gold edges present but pointing the other way.
    pub reversed: Vec<(usize, usize)>,
}

pub fn structural_diff(learned: &Dag, gold: &Dag) -> Result<StructuralDiff> {
    if learned.n() != gold.n() {
        return Err(Error::Argument(format!(
            "structures have {} and {} vertices",
            learned.n(),
            gold.n()
        )));
    }
    let mut diff = StructuralDiff { correct: 0, missing: Vec::new(), extra: Vec::new(), reversed: Vec::new() };
    for (p, c) in gold.edges() {
        if learned.parents(c).contains(&p) {
            diff.correct += 1;
        } else if learned.parents(p).contains(&c) {
            diff.reversed.push((p, c));
        } else {
            diff.missing.push((p, c));
        }
    }
    for (p, c) in learned.edges() {
        if !gold.parents(c).contains(&p) && !gold.parents(p).contains(&c) {
            diff.extra.push((p, c));
        }
    }
    Ok(diff)
}

#[derive(Serialize, Deserialize)]
struct NodeFile {
    name: String,
    values: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    nodes: Vec<NodeFile>,
    edges: Vec<(String, String)>,
    cpts: BTreeMap<String, Vec<Vec<f64>>>,
}

/// Reads the JSON network format. CPT rows are validated here (row counts,
/// lengths, probability ranges, unit sums) so malformed files fail with a
/// message naming the node and row.
pub fn load_network(mut source: impl Read) -> Result<BayesNet> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let file: NetworkFile =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("network JSON: {e}")))?;

    let names: Vec<String> = file.nodes.iter().map(|n| n.name.clone()).collect();
    let mut index = BTreeMap::new();
    for (i, name) in names.iter().enumerate() {
        if index.insert(name.clone(), i).is_some() {
            return Err(Error::Format(format!("duplicate node {name:?}")));
        }
    }
    let mut parents = vec![BTreeSet::new(); names.len()];
    for (p, c) in &file.edges {
        let (&pi, &ci) = match (index.get(p), index.get(c)) {
            (Some(pi), Some(ci)) => (pi, ci),
            _ => {
                return Err(Error::Format(format!("edge {p:?} -> {c:?} references an unknown node")));
            }
        };
        parents[ci].insert(pi);
    }
    let dag = Dag::new(parents).map_err(|e| Error::Format(format!("edge list: {e}")))?;

    for key in file.cpts.keys() {
        if !index.contains_key(key) {
            return Err(Error::Format(format!("CPT for unknown node {key:?}")));
        }
    }
    let mut cpts = Vec::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        let table = file
            .cpts
            .get(name)
            .ok_or_else(|| Error::Format(format!("missing CPT for node {name:?}")))?;
        let expected_rows: usize =
            dag.parents(i).iter().map(|&p| file.nodes[p].values.len()).product();
        if table.len() != expected_rows {
            return Err(Error::Format(format!(
                "node {:?}: CPT has {} rows, expected {}",
                name,
                table.len(),
                expected_rows
            )));
        }
        for (j, row) in table.iter().enumerate() {
            if row.len() != file.nodes[i].values.len() {
                return Err(Error::Format(format!(
                    "node {name:?}: CPT row {j} has the wrong width"
                )));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Format(format!(
                    "node {name:?}: CPT row {j} is not a probability distribution (sum {sum})"
                )));
            }
        }
        cpts.push(table.clone());
    }
    let values = file.nodes.into_iter().map(|n| n.values).collect();
    BayesNet::new(names, values, dag, cpts)
        .map_err(|e| Error::Format(format!("network file: {e}")))
}

/// Writes the JSON network format; node order, edge order, and CPT key
/// order are all deterministic, so saving is reproducible byte for byte.
pub fn save_network(bn: &BayesNet, mut sink: impl Write) -> Result<()> {
    let nodes: Vec<NodeFile> = bn
        .names
        .iter()
        .zip(&bn.values)
        .map(|(name, values)| NodeFile { name: name.clone(), values: values.clone() })
        .collect();
    let edges: Vec<(String, String)> = bn
        .dag
        .edges()
        .into_iter()
        .map(|(p, c)| (bn.names[p].clone(), bn.names[c].clone()))
        .collect();
    let cpts: BTreeMap<String, Vec<Vec<f64>>> = bn
        .names
        .iter()
        .zip(&bn.cpts)
        .map(|(name, table)| (name.clone(), table.clone()))
        .collect();
    let file = NetworkFile { nodes, edges, cpts };
    serde_json::to_writer_pretty(&mut sink, &file)
        .map_err(|e| Error::Format(format!("serializing network: {e}")))?;
    writeln!(sink)?;
    Ok(())
}

/// Synthetic CPTs with one dominant value per row: value
/// `(node + Σ parent digits) mod r` gets `strength`, the rest split the
/// remainder evenly. Rows therefore change with every parent value, giving
/// strong, non-cancelling dependencies along every edge.
fn shifted_cpts(dag: &Dag, cards: &[usize], strength: f64) -> Vec<Vec<Vec<f64>>> {
    (0..dag.n())
        .map(|i| {
            let r = cards[i];
            let parent_cards: Vec<usize> =
                dag.parents(i).iter().map(|&p| cards[p]).collect();
            let rows: usize = parent_cards.iter().product();
            (0..rows)
                .map(|row| {
                    // decode the mixed-radix row back into parent digits
                    let mut digits_sum = 0usize;
                    let mut rest = row;
                    for &card in parent_cards.iter().rev() {
                        digits_sum += rest % card;
                        rest /= card;
                    }
                    let dominant = (i + digits_sum) % r;
                    let spread = (1.0 - strength) / (r as f64 - 1.0);
                    (0..r).map(|k| if k == dominant { strength } else { spread }).collect()
                })
                .collect()
        })
        .collect()
}

fn build_network(layout: &[(&str, &[&str], &[&str])]) -> BayesNet {
    let names: Vec<String> = layout.iter().map(|(n, _, _)| (*n).to_string()).collect();
    let index: BTreeMap<&str, usize> =
        layout.iter().enumerate().map(|(i, (n, _, _))| (*n, i)).collect();
    let values: Vec<Vec<String>> = layout
        .iter()
        .map(|(_, vals, _)| vals.iter().map(|v| (*v).to_string()).collect())
        .collect();
    let mut parents = vec![BTreeSet::new(); layout.len()];
    for (i, (_, _, ps)) in layout.iter().enumerate() {
        for p in *ps {
            parents[i].insert(index[p]);
        }
    }
    let dag = Dag::new(parents).expect("bundled structure is acyclic");
    let cards: Vec<usize> = values.iter().map(Vec::len).collect();
    let cpts = shifted_cpts(&dag, &cards, 0.8);
    BayesNet::new(names, values, dag, cpts).expect("bundled network is valid")
}

const T3: &[&str] = &["low", "normal", "high"];
const T4: &[&str] = &["zero", "low", "normal", "high"];
const TF: &[&str] = &["true", "false"];

/// The 37-node, 46-edge ALARM monitoring structure with synthetic CPTs
/// (dominant value 0.8 per row). The structure is the published one; the
/// probabilities are not, so experiments on it are "ALARM-structure,
/// resampled", not reruns of the original study.
pub fn alarm() -> BayesNet {
    let layout: &[(&str, &[&str], &[&str])] = &[
        ("HISTORY", TF, &["LVFAILURE"]),
        ("CVP", T3, &["LVEDVOLUME"]),
        ("PCWP", T3, &["LVEDVOLUME"]),
        ("HYPOVOLEMIA", TF, &[]),
        ("LVEDVOLUME", T3, &["HYPOVOLEMIA", "LVFAILURE"]),
        ("LVFAILURE", TF, &[]),
        ("STROKEVOLUME", T3, &["HYPOVOLEMIA", "LVFAILURE"]),
        ("ERRLOWOUTPUT", TF, &[]),
        ("HRBP", T3, &["ERRLOWOUTPUT", "HR"]),
        ("HREKG", T3, &["ERRCAUTER", "HR"]),
        ("ERRCAUTER", TF, &[]),
        ("HRSAT", T3, &["ERRCAUTER", "HR"]),
        ("INSUFFANESTH", TF, &[]),
        ("ANAPHYLAXIS", TF, &[]),
        ("TPR", T3, &["ANAPHYLAXIS"]),
        ("EXPCO2", T4, &["ARTCO2", "VENTLUNG"]),
        ("KINKEDTUBE", TF, &[]),
        ("MINVOL", T4, &["INTUBATION", "VENTLUNG"]),
        ("FIO2", &["low", "normal"], &[]),
        ("PVSAT", T3, &["FIO2", "VENTALV"]),
        ("SAO2", T3, &["PVSAT", "SHUNT"]),
        ("PAP", T3, &["PULMEMBOLUS"]),
        ("PULMEMBOLUS", TF, &[]),
        ("SHUNT", &["normal", "high"], &["INTUBATION", "PULMEMBOLUS"]),
        ("INTUBATION", &["normal", "esophageal", "onesided"], &[]),
        ("PRESS", T4, &["INTUBATION", "KINKEDTUBE", "VENTTUBE"]),
        ("DISCONNECT", TF, &[]),
        ("MINVOLSET", T3, &[]),
        ("VENTMACH", T4, &["MINVOLSET"]),
        ("VENTTUBE", T4, &["DISCONNECT", "VENTMACH"]),
        ("VENTLUNG", T4, &["INTUBATION", "KINKEDTUBE", "VENTTUBE"]),
        ("VENTALV", T4, &["INTUBATION", "VENTLUNG"]),
        ("ARTCO2", T3, &["VENTALV"]),
        ("CATECHOL", &["normal", "high"], &["ARTCO2", "INSUFFANESTH", "SAO2", "TPR"]),
        ("HR", T3, &["CATECHOL"]),
        ("CO", T3, &["HR", "STROKEVOLUME"]),
        ("BP", T3, &["CO", "TPR"]),
    ];
    build_network(layout)
}

/// A 7-segment-display network: a 10-valued digit feeding seven binary
/// segments, each lit with probability 0.9 when the digit uses it and 0.1
/// otherwise. A stand-in in the spirit of the classic LED example, not the
/// original.
pub fn led() -> BayesNet {
    const PATTERNS: [[u8; 7]; 10] = [
        [1, 1, 1, 1, 1, 1, 0],
        [0, 1, 1, 0, 0, 0, 0],
        [1, 1, 0, 1, 1, 0, 1],
        [1, 1, 1, 1, 0, 0, 1],
        [0, 1, 1, 0, 0, 1, 1],
        [1, 0, 1, 1, 0, 1, 1],
        [1, 0, 1, 1, 1, 1, 1],
        [1, 1, 1, 0, 0, 0, 0],
        [1, 1, 1, 1, 1, 1, 1],
        [1, 1, 1, 1, 0, 1, 1],
    ];
    let mut names = vec!["digit".to_string()];
    let mut values = vec![(0..10).map(|d| d.to_string()).collect::<Vec<_>>()];
    let mut parents = vec![BTreeSet::new()];
    let mut cpts = vec![vec![vec![0.1; 10]]];
    for seg in 1..=7usize {
        names.push(format!("seg{seg}"));
        values.push(vec!["off".to_string(), "on".to_string()]);
        parents.push([0usize].into_iter().collect());
        let table: Vec<Vec<f64>> = PATTERNS
            .iter()
            .map(|pattern| {
                let p_on = if pattern[seg - 1] == 1 { 0.9 } else { 0.1 };
                vec![1.0 - p_on, p_on]
            })
            .collect();
        cpts.push(table);
    }
    let dag = Dag::new(parents).expect("star structure is acyclic");
    BayesNet::new(names, values, dag, cpts).expect("bundled network is valid")
}
