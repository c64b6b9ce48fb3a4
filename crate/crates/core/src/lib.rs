//! All-uses data-flow test generation for a Solidity subset.
//!
//! The pipeline runs source text through [`frontend`] (tokenize, parse,
//! resolve types), builds per-function control-flow graphs in [`cfg`],
//! extracts def-use test targets in [`dataflow`], executes functions under
//! instrumentation in [`interp`], and searches for covering inputs with the
//! genetic algorithm in [`ga`]. [`Program`] bundles these steps for one entry
//! function and [`experiment`] compares search strategies over a corpus.

pub mod cfg;
pub mod coverage;
pub mod dataflow;
pub mod experiment;
pub mod frontend;
pub mod ga;
pub mod interp;
pub mod program;
pub mod types;
pub mod value;

pub use coverage::PairSet;
pub use dataflow::{DefUsePair, DupSets, RequireSite, VariableInfo};
pub use ga::{Approach, FitnessMode, GaConfig, RunReport};
pub use interp::{CoverageRecord, Termination, TestCase};
pub use program::{LoadError, Program};
pub use types::{IntType, Ty};
pub use value::Value;
