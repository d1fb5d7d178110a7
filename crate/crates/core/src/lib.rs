//! Bayesian network structure learning from complete discrete case databases.
//!
//! The pipeline is the CB two-phase learner: a constraint-based phase runs
//! chi-square conditional-independence tests of increasing order to prune a
//! skeleton and orient edges, yielding a node ordering; a Bayesian phase runs
//! the K2 greedy parent search under that ordering. The loop raises the test
//! order until the network score stops improving.
//!
//! Supporting pieces: case-database loading and contingency counting
//! ([`casedata`]), mixed graphs and DAGs ([`graphs`]), the K2 scoring metric
//! ([`k2score`]), independence tests and a d-separation oracle ([`citest`]),
//! the learner loop itself ([`cb`]), and network I/O plus a forward sampler
//! and structural comparison for end-to-end evaluation ([`geneval`]).

pub mod casedata;
pub mod cb;
pub mod citest;
pub mod dot;
mod error;
pub mod geneval;
pub mod graphs;
pub mod k2score;

pub use error::{Error, Result};
