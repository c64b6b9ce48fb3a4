//! Test-target extraction for the all-uses criterion.
//!
//! Three passes over a resolved unit and its graph: the variable table,
//! the list of `require` sites, and the def-use pairs. A pair `(v, d, u)`
//! exists when the definition of `v` at node `d` reaches a use of `v` at
//! node `u` along a definition-clear path. Analysis is intraprocedural and
//! works at node granularity: a predicate use in a condition is a use at
//! the condition's node.
//!
//! Pairs whose use is a `require` condition, or whose use node can only be
//! reached after passing some `require`, are flagged as require-related.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::cfg::{Cfg, EdgeLabel, FunctionCfg, NodeId, NodeKind, NodeOp};
use crate::frontend::{walk_statements, CallTarget, SourceUnit, StatementId, StmtKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VariableInfo {
    pub name: String,
    /// 0 = uint, 1 = int.
    pub type_flag: u8,
    pub width_bits: u16,
    /// `None` for contract state variables.
    pub owning_function: Option<String>,
    pub is_parameter: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequireSite {
    pub function: String,
    pub node: StatementId,
    pub condition_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DefUsePair {
    pub function: String,
    pub variable: String,
    pub def_node: StatementId,
    pub use_node: StatementId,
    pub is_require_related: bool,
}

impl DefUsePair {
    pub fn new(function: &str, variable: &str, def: u32, use_: u32) -> DefUsePair {
        DefUsePair {
            function: function.to_string(),
            variable: variable.to_string(),
            def_node: StatementId(def),
            use_node: StatementId(use_),
            is_require_related: false,
        }
    }

    /// Identity ignoring the require flag.
    pub fn key(&self) -> (&str, &str, StatementId, StatementId) {
        (&self.function, &self.variable, self.def_node, self.use_node)
    }
}

impl fmt::Display for DefUsePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.variable, self.def_node, self.use_node)
    }
}

/// The N_dup universe, each pair flagged when it also belongs to R_dup.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DupSets {
    pub pairs: Vec<DefUsePair>,
}

impl DupSets {
    /// Number of pairs (N).
    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    /// Number of require-related pairs (M).
    pub fn m(&self) -> usize {
        self.pairs.iter().filter(|p| p.is_require_related).count()
    }

    pub fn require_related(&self) -> impl Iterator<Item = &DefUsePair> {
        self.pairs.iter().filter(|p| p.is_require_related)
    }

    pub fn index_of(
        &self,
        function: &str,
        variable: &str,
        def: StatementId,
        use_: StatementId,
    ) -> Option<usize> {
        self.pairs
            .iter()
            .position(|p| p.key() == (function, variable, def, use_))
    }

    /// Pairs belonging to the listed functions only.
    pub fn restricted_to(&self, functions: &[String]) -> DupSets {
        DupSets {
            pairs: self
                .pairs
                .iter()
                .filter(|p| functions.contains(&p.function))
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("node {node} in `{function}` reads `{variable}` before any definition reaches it")]
    Uninitialized {
        function: String,
        variable: String,
        node: StatementId,
    },
}

/// One row per declared variable: per contract, state variables first, then
/// each function's parameters and locals in source order.
pub fn extract_variables(unit: &SourceUnit) -> Vec<VariableInfo> {
    let mut out = Vec::new();
    for c in &unit.contracts {
        for sv in &c.state_vars {
            out.push(VariableInfo {
                name: sv.decl.name.clone(),
                type_flag: sv.decl.ty.type_flag(),
                width_bits: sv.decl.ty.width_bits,
                owning_function: None,
                is_parameter: false,
            });
        }
        for f in &c.functions {
            for p in &f.params {
                out.push(VariableInfo {
                    name: p.name.clone(),
                    type_flag: p.ty.type_flag(),
                    width_bits: p.ty.width_bits,
                    owning_function: Some(f.name.clone()),
                    is_parameter: true,
                });
            }
            walk_statements(&f.body, &mut |s| {
                let decl = match &s.kind {
                    StmtKind::VarDeclInit { decl, .. } => Some((decl.name.clone(), decl.ty)),
                    StmtKind::Call {
                        target:
                            Some(CallTarget {
                                name,
                                declared: Some(ty),
                            }),
                        ..
                    } => Some((name.clone(), *ty)),
                    _ => None,
                };
                if let Some((name, ty)) = decl {
                    out.push(VariableInfo {
                        name,
                        type_flag: ty.type_flag(),
                        width_bits: ty.width_bits,
                        owning_function: Some(f.name.clone()),
                        is_parameter: false,
                    });
                }
            });
        }
    }
    out
}

/// Every `require` node, ordered by function then node.
pub fn find_requires(cfg: &Cfg) -> Vec<RequireSite> {
    let mut out = Vec::new();
    for f in &cfg.functions {
        for &n in &f.stmt_nodes {
            let node = cfg.node(n);
            if let (NodeOp::Require { .. }, NodeKind::Stmt(id)) = (&node.op, node.kind) {
                out.push(RequireSite {
                    function: f.name.clone(),
                    node: id,
                    condition_text: node.text.trim_end_matches(';').to_string(),
                });
            }
        }
    }
    out
}

/// Variables defined by a node.
pub fn node_defs(op: &NodeOp, f: &FunctionCfg) -> Vec<String> {
    match op {
        NodeOp::Entry => f
            .params
            .iter()
            .map(|p| p.name.clone())
            .chain(f.state_vars.iter().map(|s| s.decl.name.clone()))
            .collect(),
        NodeOp::Declare { name, .. } | NodeOp::Assign { target: name, .. } => vec![name.clone()],
        NodeOp::Call {
            target: Some(t), ..
        } => vec![t.name.clone()],
        _ => Vec::new(),
    }
}

type Def = (String, StatementId);

fn stmt_id(cfg: &Cfg, n: NodeId) -> Option<StatementId> {
    match cfg.node(n).kind {
        NodeKind::Stmt(id) => Some(id),
        _ => None,
    }
}

/// Reaching definitions at the entry of each node of `f`, solved with a
/// worklist seeded in `order`. The fixpoint does not depend on the order.
pub(crate) fn reaching_definitions(
    cfg: &Cfg,
    f: &FunctionCfg,
    order: &[NodeId],
) -> HashMap<NodeId, BTreeSet<Def>> {
    let nodes: Vec<NodeId> = (f.start.0..=f.end.0).map(NodeId).collect();
    let mut gen: HashMap<NodeId, Vec<Def>> = HashMap::new();
    for &n in &nodes {
        let id = stmt_id(cfg, n);
        let defs = node_defs(&cfg.node(n).op, f);
        gen.insert(
            n,
            defs.into_iter()
                .filter_map(|v| id.map(|id| (v, id)))
                .collect(),
        );
    }
    let mut reach_in: HashMap<NodeId, BTreeSet<Def>> =
        nodes.iter().map(|&n| (n, BTreeSet::new())).collect();
    let mut reach_out: HashMap<NodeId, BTreeSet<Def>> =
        nodes.iter().map(|&n| (n, BTreeSet::new())).collect();

    // Unreachable nodes contribute nothing.
    let reachable = cfg.reachable_from(f.start, None);
    let mut work: std::collections::VecDeque<NodeId> =
        order.iter().copied().filter(|n| reachable[n.0]).collect();
    let mut queued: BTreeSet<NodeId> = work.iter().copied().collect();
    while let Some(n) = work.pop_front() {
        queued.remove(&n);
        let mut inset = BTreeSet::new();
        for e in cfg
            .in_edges(n)
            .filter(|e| e.label.is_intraprocedural() && reachable[e.tail.0])
        {
            inset.extend(reach_out[&e.tail].iter().cloned());
        }
        let g = &gen[&n];
        let mut outset: BTreeSet<Def> = inset
            .iter()
            .filter(|(v, _)| !g.iter().any(|(gv, _)| gv == v))
            .cloned()
            .collect();
        outset.extend(g.iter().cloned());
        reach_in.insert(n, inset);
        if outset != reach_out[&n] {
            reach_out.insert(n, outset);
            for e in cfg.out_edges(n).filter(|e| e.label.is_intraprocedural()) {
                if queued.insert(e.head) {
                    work.push_back(e.head);
                }
            }
        }
    }
    reach_in
}

/// All def-use pairs of the program, unflagged. Pairs are ordered by
/// function, then variable (in variable-table order), then def and use node.
pub fn compute_dups(cfg: &Cfg, vars: &[VariableInfo]) -> Result<DupSets, AnalysisError> {
    let mut pairs = Vec::new();
    for (fi, f) in cfg.functions.iter().enumerate() {
        let order: Vec<NodeId> = (f.start.0..=f.end.0).map(NodeId).collect();
        pairs.extend(function_pairs(cfg, f, &order)?.into_iter().map(|p| (fi, p)));
    }
    let rank = |p: &DefUsePair| {
        vars.iter()
            .position(|v| {
                v.name == p.variable
                    && (v.owning_function.as_deref() == Some(&p.function)
                        || v.owning_function.is_none())
            })
            .unwrap_or(usize::MAX)
    };
    pairs.sort_by(|(fa, a), (fb, b)| {
        (fa, rank(a), &a.variable, a.def_node, a.use_node).cmp(&(
            fb,
            rank(b),
            &b.variable,
            b.def_node,
            b.use_node,
        ))
    });
    Ok(DupSets {
        pairs: pairs.into_iter().map(|(_, p)| p).collect(),
    })
}

pub(crate) fn function_pairs(
    cfg: &Cfg,
    f: &FunctionCfg,
    order: &[NodeId],
) -> Result<Vec<DefUsePair>, AnalysisError> {
    let reach_in = reaching_definitions(cfg, f, order);
    let reachable = cfg.reachable_from(f.start, None);
    let mut out = Vec::new();
    for &n in &f.stmt_nodes {
        if !reachable[n.0] {
            continue;
        }
        let Some(use_id) = stmt_id(cfg, n) else {
            continue;
        };
        for v in cfg.node(n).op.uses() {
            let defs: Vec<StatementId> = reach_in[&n]
                .iter()
                .filter(|(dv, _)| *dv == v)
                .map(|(_, d)| *d)
                .collect();
            if defs.is_empty() {
                return Err(AnalysisError::Uninitialized {
                    function: f.name.clone(),
                    variable: v,
                    node: use_id,
                });
            }
            for d in defs {
                out.push(DefUsePair {
                    function: f.name.clone(),
                    variable: v.clone(),
                    def_node: d,
                    use_node: use_id,
                    is_require_related: false,
                });
            }
        }
    }
    Ok(out)
}

/// Flags pairs used at a `require` node or whose use node is only reachable
/// through the true arc of some `require` in the same function.
pub fn classify_rdups(mut dups: DupSets, requires: &[RequireSite], cfg: &Cfg) -> DupSets {
    // (function, node) -> true when gated behind a require or is one
    let mut gated: BTreeMap<(String, StatementId), bool> = BTreeMap::new();
    for site in requires {
        let Some(f) = cfg.function(&site.function) else {
            continue;
        };
        let Some(rnode) = cfg.stmt_node(&site.function, site.node) else {
            continue;
        };
        gated.insert((f.name.clone(), site.node), true);
        let Some(true_arc) = cfg
            .out_edges(rnode)
            .find(|e| e.label == EdgeLabel::CondTrue)
            .copied()
        else {
            continue;
        };
        let all = cfg.reachable_from(f.start, None);
        let without = cfg.reachable_from(f.start, Some(&true_arc));
        for &n in &f.stmt_nodes {
            if all[n.0] && !without[n.0] {
                if let Some(id) = stmt_id(cfg, n) {
                    gated.insert((f.name.clone(), id), true);
                }
            }
        }
    }
    for p in &mut dups.pairs {
        p.is_require_related = gated.contains_key(&(p.function.clone(), p.use_node));
    }
    dups
}

/// Variable table, require sites and flagged pairs in one call.
pub fn analyze(
    unit: &SourceUnit,
    cfg: &Cfg,
) -> Result<(Vec<VariableInfo>, Vec<RequireSite>, DupSets), AnalysisError> {
    let vars = extract_variables(unit);
    let requires = find_requires(cfg);
    let dups = classify_rdups(compute_dups(cfg, &vars)?, &requires, cfg);
    Ok((vars, requires, dups))
}
