//! Fixtures shared by the criterion benchmarks.

use std::path::PathBuf;

use dfgen_core::frontend::ParseOptions;
use dfgen_core::{IntType, Program, TestCase, Value};

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

pub fn source(name: &str) -> String {
    std::fs::read_to_string(corpus_path(name)).expect("corpus file is readable")
}

pub fn program(name: &str) -> Program {
    Program::from_path(&corpus_path(name), None, ParseOptions::default())
        .expect("corpus file loads")
}

/// A fixed, mid-range input for every parameter of `program`'s entry.
pub fn sample_case(program: &Program) -> TestCase {
    TestCase::new(
        program
            .signature()
            .into_iter()
            .map(|ty: IntType| Value::from_u64(ty, 0x2a))
            .collect(),
    )
}
