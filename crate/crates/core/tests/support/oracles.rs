//! Independent coverage oracles over the 4-bit fixtures in `corpus/narrow`:
//! a replay of the executed node trace and a path enumeration bounded to two
//! iterations per loop. Neither shares code with the analysis or the
//! interpreter.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use dfgen_core::cfg::{Cfg, NodeId, NodeKind, NodeOp};
use dfgen_core::frontend::{Expr, ExprKind, ParseOptions};
use dfgen_core::interp::{ExecOptions, TestCase, TraceEntry};
use dfgen_core::{IntType, PairSet, Program, Value};
use ruint::aliases::U256;

pub type Pair = (String, String, u32, u32);

pub const NARROW: [&str; 3] = ["safe_add4.sol", "loop4.sol", "calls4.sol"];

pub fn load(name: &str) -> Program {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus/narrow")
        .join(name);
    Program::from_path(
        &path,
        None,
        ParseOptions {
            allow_narrow_widths: true,
        },
    )
    .unwrap()
}

pub fn all_inputs(sig: &[IntType]) -> Vec<TestCase> {
    let total: u32 = sig.iter().map(|t| t.width_bits as u32).sum();
    (0u64..1 << total)
        .map(|mut code| {
            let values = sig
                .iter()
                .map(|t| {
                    let w = t.width_bits as u32;
                    let v = Value::from_bits(*t, U256::from(code & ((1 << w) - 1)));
                    code >>= w;
                    v
                })
                .collect();
            TestCase::new(values)
        })
        .collect()
}

fn vars_of(e: &Expr, out: &mut Vec<String>) {
    match &e.kind {
        ExprKind::Var(v) => {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        ExprKind::Cast(_, a) | ExprKind::Unary(_, a) => vars_of(a, out),
        ExprKind::Binary(_, a, b) => {
            vars_of(a, out);
            vars_of(b, out);
        }
        ExprKind::IntLit(_) | ExprKind::BoolLit(_) => {}
    }
}

fn reads(op: &NodeOp) -> Vec<String> {
    let mut out = Vec::new();
    match op {
        NodeOp::Declare { init: e, .. }
        | NodeOp::Assign { value: e, .. }
        | NodeOp::Branch { cond: e }
        | NodeOp::Loop { cond: e }
        | NodeOp::Require { cond: e }
        | NodeOp::Return { value: Some(e) } => vars_of(e, &mut out),
        NodeOp::Call { args, .. } => args.iter().for_each(|a| vars_of(a, &mut out)),
        _ => {}
    }
    out
}

/// Variables written by `op`, except call results.
fn writes(cfg: &Cfg, function: &str, op: &NodeOp) -> Vec<String> {
    match op {
        NodeOp::Entry => {
            let f = cfg.function(function).unwrap();
            f.state_vars
                .iter()
                .map(|s| s.decl.name.clone())
                .chain(f.params.iter().map(|p| p.name.clone()))
                .collect()
        }
        NodeOp::Declare { name, .. } | NodeOp::Assign { target: name, .. } => vec![name.clone()],
        _ => Vec::new(),
    }
}

fn stmt_id(cfg: &Cfg, n: NodeId) -> Option<u32> {
    match cfg.node(n).kind {
        NodeKind::Stmt(id) => Some(id.0),
        _ => None,
    }
}

/// Pairs exercised by an executed node sequence.
pub fn replay(cfg: &Cfg, trace: &[TraceEntry]) -> BTreeSet<Pair> {
    struct Frame {
        function: String,
        last: HashMap<String, u32>,
        pending: Option<(u32, Option<String>)>,
    }
    let mut stack: Vec<Frame> = Vec::new();
    let mut out = BTreeSet::new();
    for entry in trace {
        match entry.node {
            NodeKind::Start => stack.push(Frame {
                function: entry.function.clone(),
                last: HashMap::new(),
                pending: None,
            }),
            NodeKind::End => {
                stack.pop();
                if let Some(caller) = stack.last_mut() {
                    if let Some((site, Some(target))) = caller.pending.take() {
                        caller.last.insert(target, site);
                    }
                }
            }
            NodeKind::Stmt(id) => {
                let frame = stack.last_mut().unwrap();
                assert_eq!(frame.function, entry.function);
                let op = &cfg.node(cfg.stmt_node(&entry.function, id).unwrap()).op;
                for v in reads(op) {
                    if let Some(&d) = frame.last.get(&v) {
                        out.insert((frame.function.clone(), v, d, id.0));
                    }
                }
                for v in writes(cfg, &entry.function, op) {
                    frame.last.insert(v, id.0);
                }
                if let NodeOp::Call { target, .. } = op {
                    frame.pending = Some((id.0, target.as_ref().map(|t| t.name.clone())));
                }
            }
        }
    }
    out
}

/// Pairs along every Start-to-End path that takes each arc at most twice.
pub fn bounded_paths(cfg: &Cfg) -> BTreeSet<Pair> {
    fn walk(
        cfg: &Cfg,
        function: &str,
        n: NodeId,
        last: &HashMap<String, u32>,
        arc_uses: &mut HashMap<(usize, usize), u32>,
        out: &mut BTreeSet<Pair>,
    ) {
        let node = cfg.node(n);
        let mut last = last.clone();
        if let Some(id) = stmt_id(cfg, n) {
            for v in reads(&node.op) {
                if let Some(&d) = last.get(&v) {
                    out.insert((function.to_string(), v, d, id));
                }
            }
            for v in writes(cfg, function, &node.op) {
                last.insert(v, id);
            }
            if let NodeOp::Call {
                target: Some(t), ..
            } = &node.op
            {
                last.insert(t.name.clone(), id);
            }
        }
        for e in cfg
            .edges
            .iter()
            .filter(|e| e.tail == n && e.label.is_intraprocedural())
        {
            let key = (e.tail.0, e.head.0);
            let used = arc_uses.entry(key).or_insert(0);
            if *used >= 2 {
                continue;
            }
            *used += 1;
            walk(cfg, function, e.head, &last, arc_uses, out);
            *arc_uses.get_mut(&key).unwrap() -= 1;
        }
    }
    let mut out = BTreeSet::new();
    for f in &cfg.functions {
        walk(
            cfg,
            &f.name,
            f.start,
            &HashMap::new(),
            &mut HashMap::new(),
            &mut out,
        );
    }
    out
}

pub fn as_pairs(program: &Program, set: &PairSet) -> BTreeSet<Pair> {
    set.iter()
        .map(|i| {
            let p = &program.dups.pairs[i];
            (
                p.function.clone(),
                p.variable.clone(),
                p.def_node.0,
                p.use_node.0,
            )
        })
        .collect()
}

pub struct Exhaustive {
    pub program: Program,
    pub union: BTreeSet<Pair>,
    pub per_input: Vec<(TestCase, PairSet)>,
}

pub fn exhaust(name: &str) -> Exhaustive {
    let program = load(name);
    let opts = ExecOptions {
        record_trace: true,
        ..Default::default()
    };
    let mut union = BTreeSet::new();
    let mut per_input = Vec::new();
    for tc in all_inputs(&program.signature()) {
        let rec = program.executor.execute(&program.entry, &tc, opts).unwrap();
        let covered = as_pairs(&program, &rec.covered);
        let replayed = replay(&program.cfg, &rec.executed_nodes);
        assert_eq!(covered, replayed, "{name} on {tc}");
        assert_eq!(rec.unmatched_pairs, 0, "{name} on {tc}");
        union.extend(covered);
        per_input.push((tc, rec.covered));
    }
    Exhaustive {
        program,
        union,
        per_input,
    }
}

/// Checks that the static pair set is exactly the exhaustive dynamic union
/// plus the pairs only the bounded-path enumeration reaches; returns those.
pub fn infeasible_pairs(ex: &Exhaustive, name: &str) -> BTreeSet<Pair> {
    let static_pairs = as_pairs(&ex.program, &(0..ex.program.dups.n()).collect());
    let bounded = bounded_paths(&ex.program.cfg);
    assert!(
        ex.union.is_subset(&bounded),
        "{name}: executed pair missing from path enumeration"
    );
    let infeasible: BTreeSet<Pair> = bounded.difference(&ex.union).cloned().collect();
    let expected: BTreeSet<Pair> = ex.union.union(&infeasible).cloned().collect();
    assert_eq!(static_pairs, expected, "{name}");
    infeasible
}
