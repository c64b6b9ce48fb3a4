//! Instrumented execution of a function on concrete inputs.
//!
//! Integers wrap modulo `2^width` (no overflow revert). Whenever a statement
//! node executes, every variable it reads is matched against that
//! variable's most recent definition in the current frame, and the
//! resulting def-use pair is marked covered. Calls run the callee in a
//! fresh frame; contract state is shared across frames for the duration of
//! one execution and reset between executions.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::cfg::{Cfg, EdgeLabel, NodeId, NodeKind, NodeOp};
use crate::coverage::PairSet;
use crate::dataflow::{node_defs, DupSets};
use crate::frontend::{BinOp, Expr, ExprKind, StatementId, UnOp};
use crate::types::{IntType, Ty};
use crate::value::Value;

pub const DEFAULT_STEP_LIMIT: u64 = 100_000;
pub const MAX_CALL_DEPTH: usize = 64;

/// Concrete arguments for the entry function, in parameter order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TestCase {
    pub values: Vec<Value>,
}

impl TestCase {
    pub fn new(values: Vec<Value>) -> TestCase {
        TestCase { values }
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Result of evaluating an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RtValue {
    Int(Value),
    Bool(bool),
}

impl RtValue {
    fn int(self) -> Value {
        match self {
            RtValue::Int(v) => v,
            RtValue::Bool(_) => unreachable!("type-checked: integer expected"),
        }
    }

    fn bool(self) -> bool {
        match self {
            RtValue::Bool(b) => b,
            RtValue::Int(_) => unreachable!("type-checked: bool expected"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultReason {
    DivisionByZero,
    StepLimit,
    RecursionLimit,
}

impl fmt::Display for FaultReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultReason::DivisionByZero => "division by zero",
            FaultReason::StepLimit => "step limit exceeded",
            FaultReason::RecursionLimit => "call depth limit exceeded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    NormalEnd,
    RequireFailed {
        function: String,
        node: StatementId,
    },
    Fault {
        function: String,
        node: StatementId,
        reason: FaultReason,
    },
}

/// One executed node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub function: String,
    pub node: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageRecord {
    pub covered: PairSet,
    pub terminated_by: Termination,
    /// Empty unless tracing was requested.
    pub executed_nodes: Vec<TraceEntry>,
    /// Statement nodes executed.
    pub steps: u64,
    pub return_value: Option<Value>,
    /// Observed pairs absent from the static pair set; zero for a sound analysis.
    pub unmatched_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SetupError {
    #[error("no function named `{0}`")]
    UnknownFunction(String),
    #[error("`{function}` takes {expected} argument(s), test case has {found}")]
    Arity {
        function: String,
        expected: usize,
        found: usize,
    },
    #[error("argument {index} of `{function}` must be {expected}, test case has {found}")]
    ArgumentType {
        function: String,
        index: usize,
        expected: IntType,
        found: IntType,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct ExecOptions {
    pub step_limit: u64,
    pub record_trace: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            step_limit: DEFAULT_STEP_LIMIT,
            record_trace: false,
        }
    }
}

// ---------------------------------------------------------------------------
// compiled form

#[derive(Debug, Clone, Copy)]
enum Loc {
    Local(usize),
    Storage(usize),
}

#[derive(Debug, Clone)]
enum CExpr {
    Const(RtValue),
    Var(Loc, IntType),
    Cast(IntType, Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
    Neg(Box<CExpr>),
    Not(Box<CExpr>),
}

#[derive(Debug, Clone)]
enum COp {
    Start,
    End,
    Entry,
    Set {
        slot: usize,
        value: CExpr,
    },
    Branch {
        cond: CExpr,
    },
    Require {
        cond: CExpr,
    },
    Return {
        value: Option<CExpr>,
    },
    Call {
        callee: usize,
        args: Vec<CExpr>,
        target: Option<usize>,
    },
}

#[derive(Debug, Clone)]
struct CNode {
    kind: NodeKind,
    op: COp,
    /// (slot, candidate (def node, pair index) list) per variable read.
    uses: Vec<(usize, Vec<(u32, usize)>)>,
    fall: Option<usize>,
    on_true: Option<usize>,
    on_false: Option<usize>,
}

#[derive(Debug, Clone)]
struct CFunction {
    name: String,
    start: usize,
    end: usize,
    nodes: HashMap<usize, CNode>,
    slot_types: Vec<IntType>,
    slot_storage: Vec<Option<usize>>,
    params: Vec<usize>,
    param_types: Vec<IntType>,
    /// Slots of contract state variables (defined at the entry node).
    state_slots: Vec<usize>,
    contract: usize,
}

/// Precompiled program ready for repeated execution.
#[derive(Debug, Clone)]
pub struct Executor {
    functions: Vec<CFunction>,
    /// Per contract: initial storage values.
    storage_init: Vec<Vec<Value>>,
    pair_count: usize,
}

fn compile_expr(e: &Expr, lookup: &dyn Fn(&str) -> (Loc, IntType)) -> CExpr {
    let ty = e.ty;
    match &e.kind {
        ExprKind::IntLit(digits) => {
            let t = ty.and_then(Ty::as_int).unwrap_or(IntType::UINT256);
            CExpr::Const(RtValue::Int(
                Value::parse_decimal(t, digits).expect("literal checked by resolver"),
            ))
        }
        ExprKind::BoolLit(b) => CExpr::Const(RtValue::Bool(*b)),
        ExprKind::Var(name) => {
            let (loc, t) = lookup(name);
            CExpr::Var(loc, t)
        }
        ExprKind::Cast(t, inner) => CExpr::Cast(*t, Box::new(compile_expr(inner, lookup))),
        ExprKind::Binary(op, l, r) => CExpr::Bin(
            *op,
            Box::new(compile_expr(l, lookup)),
            Box::new(compile_expr(r, lookup)),
        ),
        ExprKind::Unary(UnOp::Neg, inner) => {
            // literal typed by its context
            let mut c = compile_expr(inner, lookup);
            if let (CExpr::Const(RtValue::Int(v)), Some(Ty::Int(t))) = (&c, ty) {
                c = CExpr::Const(RtValue::Int(v.cast(t)));
            }
            CExpr::Neg(Box::new(c))
        }
        ExprKind::Unary(UnOp::Not, inner) => CExpr::Not(Box::new(compile_expr(inner, lookup))),
    }
}

enum Storage<'a> {
    Slots(&'a [Option<Value>], &'a [Value]),
}

fn eval(e: &CExpr, env: &Storage) -> Result<RtValue, FaultReason> {
    Ok(match e {
        CExpr::Const(v) => *v,
        CExpr::Var(loc, t) => {
            let Storage::Slots(locals, storage) = env;
            let v = match loc {
                Loc::Local(s) => locals[*s],
                Loc::Storage(s) => Some(storage[*s]),
            };
            RtValue::Int(v.unwrap_or_else(|| Value::zero(*t)))
        }
        CExpr::Cast(t, inner) => RtValue::Int(eval(inner, env)?.int().cast(*t)),
        CExpr::Neg(inner) => RtValue::Int(eval(inner, env)?.int().wrapping_neg()),
        CExpr::Not(inner) => RtValue::Bool(!eval(inner, env)?.bool()),
        CExpr::Bin(BinOp::And, l, r) => RtValue::Bool(eval(l, env)?.bool() && eval(r, env)?.bool()),
        CExpr::Bin(BinOp::Or, l, r) => RtValue::Bool(eval(l, env)?.bool() || eval(r, env)?.bool()),
        CExpr::Bin(op, l, r) => {
            let a = eval(l, env)?;
            let b = eval(r, env)?;
            match (a, b) {
                (RtValue::Bool(x), RtValue::Bool(y)) => RtValue::Bool(match op {
                    BinOp::Eq => x == y,
                    BinOp::Ne => x != y,
                    _ => unreachable!("type-checked boolean operator"),
                }),
                (RtValue::Int(x), RtValue::Int(y)) => match op {
                    BinOp::Add => RtValue::Int(x.wrapping_add(&y)),
                    BinOp::Sub => RtValue::Int(x.wrapping_sub(&y)),
                    BinOp::Mul => RtValue::Int(x.wrapping_mul(&y)),
                    BinOp::Div => {
                        RtValue::Int(x.checked_div(&y).ok_or(FaultReason::DivisionByZero)?)
                    }
                    BinOp::Rem => {
                        RtValue::Int(x.checked_rem(&y).ok_or(FaultReason::DivisionByZero)?)
                    }
                    BinOp::Lt => RtValue::Bool(x.compare(&y).is_lt()),
                    BinOp::Le => RtValue::Bool(x.compare(&y).is_le()),
                    BinOp::Gt => RtValue::Bool(x.compare(&y).is_gt()),
                    BinOp::Ge => RtValue::Bool(x.compare(&y).is_ge()),
                    BinOp::Eq => RtValue::Bool(x == y),
                    BinOp::Ne => RtValue::Bool(x != y),
                    BinOp::And | BinOp::Or => unreachable!(),
                },
                _ => unreachable!("type-checked operands"),
            }
        }
    })
}

/// Evaluates a resolved expression against named values.
pub fn eval_expression(expr: &Expr, env: &HashMap<String, Value>) -> Result<RtValue, FaultReason> {
    let names: Vec<&String> = env.keys().collect();
    let locals: Vec<Option<Value>> = names.iter().map(|n| Some(env[*n])).collect();
    let lookup = |name: &str| {
        let slot = names
            .iter()
            .position(|n| *n == name)
            .unwrap_or_else(|| panic!("unbound variable `{name}`"));
        (Loc::Local(slot), env[name].ty())
    };
    let compiled = compile_expr(expr, &lookup);
    eval(&compiled, &Storage::Slots(&locals, &[]))
}

impl Executor {
    /// Compiles every function of `cfg`. Covered pairs are reported as
    /// indices into `dups.pairs`.
    pub fn new(cfg: &Cfg, dups: &DupSets) -> Executor {
        let mut contracts: Vec<String> = Vec::new();
        let mut storage_init: Vec<Vec<Value>> = Vec::new();
        for f in &cfg.functions {
            if !contracts.contains(&f.contract) {
                contracts.push(f.contract.clone());
                let init = f
                    .state_vars
                    .iter()
                    .map(|sv| match &sv.init {
                        Some(e) => eval(
                            &compile_expr(e, &|_| unreachable!("constant initializer")),
                            &Storage::Slots(&[], &[]),
                        )
                        .map(RtValue::int)
                        .unwrap_or_else(|_| Value::zero(sv.decl.ty)),
                        None => Value::zero(sv.decl.ty),
                    })
                    .collect();
                storage_init.push(init);
            }
        }

        // (function, variable, use) -> [(def, pair index)]
        type PairIndex<'a> = HashMap<(&'a str, &'a str, u32), Vec<(u32, usize)>>;
        let mut pair_index: PairIndex = HashMap::new();
        for (i, p) in dups.pairs.iter().enumerate() {
            pair_index
                .entry((&p.function, &p.variable, p.use_node.0))
                .or_default()
                .push((p.def_node.0, i));
        }

        let functions = cfg
            .functions
            .iter()
            .map(|f| {
                let contract = contracts.iter().position(|c| *c == f.contract).unwrap();
                let mut slots: HashMap<String, usize> = HashMap::new();
                let mut slot_types = Vec::new();
                let mut slot_storage = Vec::new();
                let mut add = |name: &str, ty: IntType, storage: Option<usize>| -> usize {
                    *slots.entry(name.to_string()).or_insert_with(|| {
                        slot_types.push(ty);
                        slot_storage.push(storage);
                        slot_types.len() - 1
                    })
                };
                let state_slots: Vec<usize> = f
                    .state_vars
                    .iter()
                    .enumerate()
                    .map(|(i, sv)| add(&sv.decl.name, sv.decl.ty, Some(i)))
                    .collect();
                let params: Vec<usize> =
                    f.params.iter().map(|p| add(&p.name, p.ty, None)).collect();
                for &n in &f.stmt_nodes {
                    match &cfg.node(n).op {
                        NodeOp::Declare { name, ty, .. } => {
                            add(name, *ty, None);
                        }
                        NodeOp::Call {
                            target: Some(t),
                            callee,
                            ..
                        } => {
                            if let Some(ty) = t
                                .declared
                                .or_else(|| cfg.function(callee).and_then(|c| c.returns))
                            {
                                add(&t.name, ty, None);
                            }
                        }
                        _ => {}
                    }
                }
                let lookup = |name: &str| {
                    let s = slots[name];
                    let loc = match slot_storage[s] {
                        Some(i) => Loc::Storage(i),
                        None => Loc::Local(s),
                    };
                    (loc, slot_types[s])
                };

                let mut nodes = HashMap::new();
                for n in f.start.0..=f.end.0 {
                    let node = cfg.node(NodeId(n));
                    let op = match &node.op {
                        NodeOp::Start => COp::Start,
                        NodeOp::End => COp::End,
                        NodeOp::Entry => COp::Entry,
                        NodeOp::Declare {
                            name, init: value, ..
                        }
                        | NodeOp::Assign {
                            target: name,
                            value,
                        } => COp::Set {
                            slot: slots[name.as_str()],
                            value: compile_expr(value, &lookup),
                        },
                        NodeOp::Branch { cond } | NodeOp::Loop { cond } => COp::Branch {
                            cond: compile_expr(cond, &lookup),
                        },
                        NodeOp::Require { cond } => COp::Require {
                            cond: compile_expr(cond, &lookup),
                        },
                        NodeOp::Return { value } => COp::Return {
                            value: value.as_ref().map(|v| compile_expr(v, &lookup)),
                        },
                        NodeOp::Call {
                            callee,
                            args,
                            target,
                        } => COp::Call {
                            callee: cfg.function_index(callee).expect("callee checked by cfg"),
                            args: args.iter().map(|a| compile_expr(a, &lookup)).collect(),
                            target: target.as_ref().map(|t| slots[t.name.as_str()]),
                        },
                    };
                    let uses = match node.kind {
                        NodeKind::Stmt(id) => node
                            .op
                            .uses()
                            .iter()
                            .map(|v| {
                                let cands = pair_index
                                    .get(&(f.name.as_str(), v.as_str(), id.0))
                                    .cloned()
                                    .unwrap_or_default();
                                (slots[v.as_str()], cands)
                            })
                            .collect(),
                        _ => Vec::new(),
                    };
                    let succ = |label| cfg.successor(NodeId(n), label).map(|h| h.0);
                    nodes.insert(
                        n,
                        CNode {
                            kind: node.kind,
                            op,
                            uses,
                            fall: succ(EdgeLabel::FallThrough),
                            on_true: succ(EdgeLabel::CondTrue),
                            on_false: succ(EdgeLabel::CondFalse),
                        },
                    );
                }
                debug_assert_eq!(
                    f.entry_id.map(|_| node_defs(&NodeOp::Entry, f).len()),
                    f.entry_id.map(|_| params.len() + state_slots.len())
                );
                CFunction {
                    name: f.name.clone(),
                    start: f.start.0,
                    end: f.end.0,
                    nodes,
                    slot_types,
                    slot_storage,
                    param_types: f.signature(),
                    params,
                    state_slots,
                    contract,
                }
            })
            .collect();

        Executor {
            functions,
            storage_init,
            pair_count: dups.pairs.len(),
        }
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    pub fn signature(&self, function: &str) -> Option<&[IntType]> {
        self.function_index(function)
            .map(|i| self.functions[i].param_types.as_slice())
    }

    pub fn validate(&self, entry: &str, tc: &TestCase) -> Result<usize, SetupError> {
        let fi = self
            .function_index(entry)
            .ok_or_else(|| SetupError::UnknownFunction(entry.to_string()))?;
        let f = &self.functions[fi];
        if f.param_types.len() != tc.values.len() {
            return Err(SetupError::Arity {
                function: entry.to_string(),
                expected: f.param_types.len(),
                found: tc.values.len(),
            });
        }
        for (index, (expected, v)) in f.param_types.iter().zip(&tc.values).enumerate() {
            if *expected != v.ty() {
                return Err(SetupError::ArgumentType {
                    function: entry.to_string(),
                    index,
                    expected: *expected,
                    found: v.ty(),
                });
            }
        }
        Ok(fi)
    }

    pub fn execute(
        &self,
        entry: &str,
        tc: &TestCase,
        opts: ExecOptions,
    ) -> Result<CoverageRecord, SetupError> {
        let fi = self.validate(entry, tc)?;
        Ok(self.run(fi, &tc.values, opts))
    }

    fn run(&self, entry: usize, args: &[Value], opts: ExecOptions) -> CoverageRecord {
        struct Frame {
            func: usize,
            locals: Vec<Option<Value>>,
            last_def: Vec<Option<u32>>,
            args: Vec<Value>,
            ret: Option<Value>,
            /// Caller node to resume at, with the slot receiving the result.
            resume: Option<(usize, Option<usize>)>,
        }
        let new_frame = |func: usize, args: Vec<Value>, resume| {
            let n = self.functions[func].slot_types.len();
            Frame {
                func,
                locals: vec![None; n],
                last_def: vec![None; n],
                args,
                ret: None,
                resume,
            }
        };

        let mut storage = self.storage_init.clone();
        let mut covered = PairSet::new(self.pair_count);
        let mut unmatched = 0;
        let mut trace = Vec::new();
        let mut steps = 0u64;
        let mut stack = vec![new_frame(entry, args.to_vec(), None)];
        let mut cur = self.functions[entry].start;

        let termination = loop {
            let frame = stack.last_mut().unwrap();
            let f = &self.functions[frame.func];
            let node = &f.nodes[&cur];
            let stmt = match node.kind {
                NodeKind::Stmt(id) => Some(id),
                _ => None,
            };
            if let Some(id) = stmt {
                if steps >= opts.step_limit {
                    break Termination::Fault {
                        function: f.name.clone(),
                        node: id,
                        reason: FaultReason::StepLimit,
                    };
                }
                steps += 1;
            }
            if opts.record_trace {
                trace.push(TraceEntry {
                    function: f.name.clone(),
                    node: node.kind,
                });
            }
            for (slot, cands) in &node.uses {
                if let Some(d) = frame.last_def[*slot] {
                    match cands.iter().find(|(def, _)| *def == d) {
                        Some((_, idx)) => {
                            covered.insert(*idx);
                        }
                        None => unmatched += 1,
                    }
                }
            }
            let fault = |reason| Termination::Fault {
                function: f.name.clone(),
                node: stmt.unwrap(),
                reason,
            };
            let contract = f.contract;

            macro_rules! value_of {
                ($e:expr) => {
                    match eval($e, &Storage::Slots(&frame.locals, &storage[contract])) {
                        Ok(v) => v,
                        Err(reason) => break fault(reason),
                    }
                };
            }

            cur = match &node.op {
                COp::Start => node.fall.unwrap(),
                COp::Entry => {
                    let id = stmt.unwrap().0;
                    for (i, &slot) in f.params.iter().enumerate() {
                        frame.locals[slot] = Some(frame.args[i]);
                        frame.last_def[slot] = Some(id);
                    }
                    for &slot in &f.state_slots {
                        frame.last_def[slot] = Some(id);
                    }
                    node.fall.unwrap()
                }
                COp::Set { slot, value } => {
                    let v = value_of!(value).int();
                    match f.slot_storage[*slot] {
                        Some(s) => storage[contract][s] = v,
                        None => frame.locals[*slot] = Some(v),
                    }
                    frame.last_def[*slot] = Some(stmt.unwrap().0);
                    node.fall.unwrap()
                }
                COp::Branch { cond } => {
                    if value_of!(cond).bool() {
                        node.on_true.unwrap()
                    } else {
                        node.on_false.unwrap()
                    }
                }
                COp::Require { cond } => {
                    if value_of!(cond).bool() {
                        node.on_true.unwrap()
                    } else {
                        if opts.record_trace {
                            trace.push(TraceEntry {
                                function: f.name.clone(),
                                node: NodeKind::End,
                            });
                        }
                        break Termination::RequireFailed {
                            function: f.name.clone(),
                            node: stmt.unwrap(),
                        };
                    }
                }
                COp::Return { value } => {
                    if let Some(v) = value {
                        frame.ret = Some(value_of!(v).int());
                    }
                    f.end
                }
                COp::Call {
                    callee,
                    args,
                    target,
                } => {
                    let env = Storage::Slots(&frame.locals, &storage[contract]);
                    let vals: Result<Vec<Value>, FaultReason> = args
                        .iter()
                        .map(|a| eval(a, &env).map(RtValue::int))
                        .collect();
                    let vals = match vals {
                        Ok(v) => v,
                        Err(reason) => break fault(reason),
                    };
                    if stack.len() >= MAX_CALL_DEPTH {
                        break fault(FaultReason::RecursionLimit);
                    }
                    let start = self.functions[*callee].start;
                    stack.push(new_frame(*callee, vals, Some((cur, *target))));
                    start
                }
                COp::End => {
                    let done = stack.pop().unwrap();
                    match (done.resume, stack.last_mut()) {
                        (Some((site, target)), Some(caller)) => {
                            let cf = &self.functions[caller.func];
                            let site_node = &cf.nodes[&site];
                            if let (Some(slot), NodeKind::Stmt(id)) = (target, site_node.kind) {
                                let v =
                                    done.ret.unwrap_or_else(|| Value::zero(cf.slot_types[slot]));
                                match cf.slot_storage[slot] {
                                    Some(s) => storage[cf.contract][s] = v,
                                    None => caller.locals[slot] = Some(v),
                                }
                                caller.last_def[slot] = Some(id.0);
                            }
                            site_node.fall.unwrap()
                        }
                        _ => {
                            return CoverageRecord {
                                covered,
                                terminated_by: Termination::NormalEnd,
                                executed_nodes: trace,
                                steps,
                                return_value: done.ret,
                                unmatched_pairs: unmatched,
                            };
                        }
                    }
                }
            };
        };
        CoverageRecord {
            covered,
            terminated_by: termination,
            executed_nodes: trace,
            steps,
            return_value: None,
            unmatched_pairs: unmatched,
        }
    }
}

/// One-shot execution: compiles `cfg` and runs `entry` on `tc`.
pub fn execute_function(
    cfg: &Cfg,
    dups: &DupSets,
    entry: &str,
    tc: &TestCase,
    step_limit: u64,
) -> Result<CoverageRecord, SetupError> {
    Executor::new(cfg, dups).execute(
        entry,
        tc,
        ExecOptions {
            step_limit,
            record_trace: true,
        },
    )
}
