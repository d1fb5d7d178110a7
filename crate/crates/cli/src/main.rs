//! Command-line front end over the learning library: learn structures from
//! case data, sample case databases from network files, compare structures,
//! and score a structure against data.
//!
//! Exit status: 0 success, 1 file/format problems, 2 bad arguments,
//! 3 internal invariant violations.

use std::fs::File;
use std::io::{BufReader, Read};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cbnet::casedata::{load_cases, CaseDatabase, Schema};
use cbnet::cb::{cb_learn, LearnConfig, OrderingMode, TerminationReason};
use cbnet::citest::ChiSquareOracle;
use cbnet::dot::{dag_to_dot, parse_dot, DotEdgeKind, DotGraph};
use cbnet::geneval::{forward_sample, load_network, save_cases_csv, structural_diff};
use cbnet::graphs::Dag;
use cbnet::k2score::log_network_score;
use cbnet::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cbnet",
    version,
    about = "Learn Bayesian-network structures from complete discrete case databases"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Topological order of the resolved graph; search sees all predecessors
    Total,
    /// Search restricted to each node's resolved parent set
    Partial,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a structure from a CSV case database and emit it as DOT
    Learn {
        /// CSV case database (header row of variable names)
        #[arg(long)]
        data: PathBuf,
        /// Schema file, one `name,cardinality` line per variable, for value
        /// ranges beyond those observed in the data
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Significance level for the independence tests, in (0, 1)
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Skeleton degree bound: while exceeded, the test order rises
        /// without building a network
        #[arg(long, default_value_t = 15)]
        max_degree: usize,
        /// Cap on parents per node during search [default: unbounded]
        #[arg(long)]
        max_parents: Option<NonZeroUsize>,
        /// How the resolved graph constrains the scoring search
        #[arg(long, value_enum, default_value_t = Mode::Total)]
        mode: Mode,
        /// Ceiling on the independence-test order [default: n - 2]
        #[arg(long)]
        max_ord: Option<usize>,
        /// Print the per-round trace (tab-separated) after the summary
        #[arg(long)]
        trace: bool,
        /// Write the DOT structure here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a case database from a network JSON file
    Sample {
        /// Network JSON file (nodes, edges, CPTs)
        #[arg(long)]
        net: PathBuf,
        /// Number of cases to draw
        #[arg(long)]
        cases: usize,
        /// Random seed; the same seed reproduces the database exactly
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the CSV here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a learned DOT structure against a gold DOT structure
    Compare {
        /// Structure under evaluation
        #[arg(long)]
        learned: PathBuf,
        /// Reference structure; the report is phrased against its edges
        #[arg(long)]
        gold: PathBuf,
    },
    /// Score a DOT structure against a CSV case database
    Score {
        /// CSV case database (header row of variable names)
        #[arg(long)]
        data: PathBuf,
        /// Schema file, one `name,cardinality` line per variable
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Structure whose log marginal-likelihood score to print
        #[arg(long)]
        learned: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Argument(_) => 2,
                Error::Invariant(_) => 3,
                _ => 1,
            })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Learn {
            data,
            schema,
            alpha,
            max_degree,
            max_parents,
            mode,
            max_ord,
            trace,
            out,
        } => {
            let db = read_db(&data, schema.as_deref())?;
            let cfg = LearnConfig {
                alpha,
                degree_bound: max_degree,
                max_parents,
                ordering_mode: match mode {
                    Mode::Total => OrderingMode::Total,
                    Mode::Partial => OrderingMode::Partial,
                },
                max_ord,
                frozen_resolve: false,
            };
            let result = cb_learn(&db, &cfg, &ChiSquareOracle)?;
            let dot = dag_to_dot(&result.dag, &db.names());
            match out {
                Some(path) => std::fs::write(path, dot)?,
                None => print!("{dot}"),
            }
            println!("log-score {}", result.log_score);
            println!("max-ord {}", result.max_ord_used());
            println!(
                "termination {}",
                match result.termination {
                    TerminationReason::ScoreDropped => "score-dropped",
                    TerminationReason::SkeletonExhausted => "skeleton-exhausted",
                    TerminationReason::OrdCeiling => "ord-ceiling",
                }
            );
            println!("iterations {}", result.iterations.len());
            if trace {
                print!("{}", result.trace_tsv());
            }
            Ok(())
        }
        Command::Sample { net, cases, seed, out } => {
            let bn = load_network(BufReader::new(File::open(net)?))?;
            let db = forward_sample(&bn, cases, seed)?;
            match out {
                Some(path) => save_cases_csv(&bn, &db, File::create(path)?),
                None => {
                    let stdout = std::io::stdout();
                    save_cases_csv(&bn, &db, stdout.lock())
                }
            }
        }
        Command::Compare { learned, gold } => {
            let gold_graph = read_dot(&gold)?;
            let names = gold_graph.names.clone();
            let gold_dag = dag_in_namespace(&gold_graph, &names)?;
            let learned_dag = dag_in_namespace(&read_dot(&learned)?, &names)?;
            let diff = structural_diff(&learned_dag, &gold_dag)?;
            println!("gold edges {}", gold_dag.edge_count());
            println!("correct {}", diff.correct);
            println!("missing {}", diff.missing.len());
            println!("reversed {}", diff.reversed.len());
            println!("extra {}", diff.extra.len());
            for &(p, c) in &diff.missing {
                println!("  missing {} -> {}", names[p], names[c]);
            }
            for &(p, c) in &diff.reversed {
                println!("  reversed {} -> {}", names[p], names[c]);
            }
            for &(p, c) in &diff.extra {
                println!("  extra {} -> {}", names[p], names[c]);
            }
            Ok(())
        }
        Command::Score { data, schema, learned } => {
            let db = read_db(&data, schema.as_deref())?;
            let dag = dag_in_namespace(&read_dot(&learned)?, &db.names())?;
            println!("log-score {}", log_network_score(&db, &dag)?);
            Ok(())
        }
    }
}

fn read_db(data: &Path, schema: Option<&Path>) -> Result<CaseDatabase> {
    let schema = match schema {
        Some(path) => Some(Schema::parse(BufReader::new(File::open(path)?))?),
        None => None,
    };
    load_cases(BufReader::new(File::open(data)?), schema.as_ref())
}

fn read_dot(path: &Path) -> Result<DotGraph> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_dot(&text)
}

/// Re-index a parsed DOT structure into the vertex order of `names`,
/// requiring the same node set and only directed edges.
fn dag_in_namespace(dg: &DotGraph, names: &[String]) -> Result<Dag> {
    let mut index = std::collections::BTreeMap::new();
    for (i, name) in names.iter().enumerate() {
        index.insert(name.as_str(), i);
    }
    for name in &dg.names {
        if !index.contains_key(name.as_str()) {
            return Err(Error::Format(format!("structure declares unexpected node {name:?}")));
        }
    }
    if dg.names.len() != names.len() {
        let declared: std::collections::BTreeSet<&str> =
            dg.names.iter().map(String::as_str).collect();
        let missing: Vec<&str> =
            names.iter().map(String::as_str).filter(|n| !declared.contains(n)).collect();
        return Err(Error::Format(format!("structure is missing nodes {missing:?}")));
    }
    let mut parents = vec![std::collections::BTreeSet::new(); names.len()];
    for &(from, to, kind) in &dg.edges {
        if kind != DotEdgeKind::Directed {
            return Err(Error::Format(format!(
                "edge {} -> {} is not directed; expected a DAG",
                dg.names[from], dg.names[to]
            )));
        }
        parents[index[dg.names[to].as_str()]].insert(index[dg.names[from].as_str()]);
    }
    Dag::new(parents).map_err(|e| Error::Format(format!("structure is not a DAG: {e}")))
}
