use std::path::PathBuf;

use dfgen_core::frontend::{ParseOptions, StatementId};
use dfgen_core::interp::{ExecOptions, FaultReason};
use dfgen_core::{IntType, Program, Termination, TestCase, Value};

fn corpus(name: &str) -> Program {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name);
    Program::from_path(&path, None, ParseOptions::default()).unwrap()
}

fn covers(p: &Program, covered: &dfgen_core::PairSet, var: &str, def: u32, use_: u32) -> bool {
    let i = p
        .dups
        .index_of("add", var, StatementId(def), StatementId(use_))
        .unwrap();
    covered.contains(i)
}

fn u16s(a: u64, b: u64) -> TestCase {
    TestCase::new(vec![
        Value::from_u64(IntType::uint(16), a),
        Value::from_u64(IntType::uint(16), b),
    ])
}

#[test]
fn overflowing_sum_stops_at_guard() {
    let p = corpus("safe_add.sol");
    let rec = p
        .executor
        .execute(&p.entry, &u16s(40_000, 30_000), ExecOptions::default())
        .unwrap();
    assert_eq!(
        rec.terminated_by,
        Termination::RequireFailed {
            function: "add".into(),
            node: StatementId(8)
        }
    );
    assert!(covers(&p, &rec.covered, "a2", 2, 8));
    assert!(covers(&p, &rec.covered, "b2", 3, 8));
    assert!(!covers(&p, &rec.covered, "a1", 1, 9));
    assert!(!covers(&p, &rec.covered, "b1", 1, 9));
}

#[test]
fn in_range_sum_passes_guard() {
    let p = corpus("safe_add.sol");
    let rec = p
        .executor
        .execute(&p.entry, &u16s(65_000, 535), ExecOptions::default())
        .unwrap();
    assert_eq!(rec.terminated_by, Termination::NormalEnd);
    assert!(covers(&p, &rec.covered, "a1", 1, 9));
    assert!(covers(&p, &rec.covered, "b1", 1, 9));
}

#[test]
fn zero_operand_takes_early_return() {
    let p = corpus("safe_add.sol");
    let rec = p
        .executor
        .execute(&p.entry, &u16s(0, 9), ExecOptions::default())
        .unwrap();
    assert_eq!(rec.terminated_by, Termination::NormalEnd);
    assert!(covers(&p, &rec.covered, "a1", 1, 5));
    assert!(rec
        .covered
        .iter()
        .all(|i| !p.dups.pairs[i].is_require_related));
}

#[test]
fn uint_arithmetic_wraps() {
    let src = "contract W { function f(uint8 a) public returns (uint8) { uint8 b = a + 200; return b; } }";
    let p = Program::from_source(src, "w", None, ParseOptions::default()).unwrap();
    let tc = TestCase::new(vec![Value::from_u64(IntType::uint(8), 100)]);
    let rec = p
        .executor
        .execute(&p.entry, &tc, ExecOptions::default())
        .unwrap();
    assert_eq!(
        rec.return_value,
        Some(Value::from_u64(IntType::uint(8), 44))
    );
}

#[test]
fn signed_division_by_zero_faults() {
    let src = "contract D { function f(int8 a, int8 b) public returns (int8) { int8 q = a / b; return q; } }";
    let p = Program::from_source(src, "d", None, ParseOptions::default()).unwrap();
    let tc = TestCase::new(vec![
        Value::from_i128(IntType::int(8), -7),
        Value::from_i128(IntType::int(8), 0),
    ]);
    let rec = p
        .executor
        .execute(&p.entry, &tc, ExecOptions::default())
        .unwrap();
    assert!(matches!(
        rec.terminated_by,
        Termination::Fault {
            reason: FaultReason::DivisionByZero,
            ..
        }
    ));
}
