//! Statement-level control-flow graphs.
//!
//! Each function gets its own sub-graph with a Start node, an End node and
//! one node per statement (plus an entry node binding parameters when the
//! function has any). `require` is a two-way branch whose false arc goes to
//! the function's End. Call sites get a Call arc to the callee's Start and a
//! Return arc from the callee's End.

use std::collections::{HashMap, VecDeque};
use std::fmt::{self, Write};

use serde::Serialize;

use crate::frontend::{
    statement_text, CallTarget, Expr, SourceUnit, Span, StateVar, Statement, StatementId, StmtKind,
    VarDecl,
};
use crate::types::IntType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Start,
    End,
    Stmt(StatementId),
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::Start => f.write_str("start"),
            NodeKind::End => f.write_str("end"),
            NodeKind::Stmt(id) => id.fmt(f),
        }
    }
}

impl Serialize for NodeKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            NodeKind::Stmt(id) => s.serialize_u32(id.0),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

/// What a node does when executed.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeOp {
    Start,
    End,
    /// Binds parameters and contract state.
    Entry,
    Declare {
        name: String,
        ty: IntType,
        init: Expr,
    },
    Assign {
        target: String,
        value: Expr,
    },
    Branch {
        cond: Expr,
    },
    Loop {
        cond: Expr,
    },
    Require {
        cond: Expr,
    },
    Return {
        value: Option<Expr>,
    },
    Call {
        callee: String,
        args: Vec<Expr>,
        target: Option<CallTarget>,
    },
}

impl NodeOp {
    fn from_statement(s: &Statement) -> NodeOp {
        match &s.kind {
            StmtKind::VarDeclInit { decl, init } => NodeOp::Declare {
                name: decl.name.clone(),
                ty: decl.ty,
                init: init.clone(),
            },
            StmtKind::Assign { target, value } => NodeOp::Assign {
                target: target.clone(),
                value: value.clone(),
            },
            StmtKind::If { cond, .. } => NodeOp::Branch { cond: cond.clone() },
            StmtKind::While { cond, .. } => NodeOp::Loop { cond: cond.clone() },
            StmtKind::Require { cond } => NodeOp::Require { cond: cond.clone() },
            StmtKind::Return { value } => NodeOp::Return {
                value: value.clone(),
            },
            StmtKind::Call {
                callee,
                args,
                target,
            } => NodeOp::Call {
                callee: callee.clone(),
                args: args.clone(),
                target: target.clone(),
            },
        }
    }

    /// Expressions evaluated by the node, in evaluation order.
    pub fn expressions(&self) -> Vec<&Expr> {
        match self {
            NodeOp::Start | NodeOp::End | NodeOp::Entry | NodeOp::Return { value: None } => {
                Vec::new()
            }
            NodeOp::Declare { init: e, .. }
            | NodeOp::Assign { value: e, .. }
            | NodeOp::Branch { cond: e }
            | NodeOp::Loop { cond: e }
            | NodeOp::Require { cond: e }
            | NodeOp::Return { value: Some(e) } => vec![e],
            NodeOp::Call { args, .. } => args.iter().collect(),
        }
    }

    /// Variables read by the node, first occurrence order, no duplicates.
    pub fn uses(&self) -> Vec<String> {
        let mut refs = Vec::new();
        for e in self.expressions() {
            e.var_refs(&mut refs);
        }
        let mut out: Vec<String> = Vec::new();
        for r in refs {
            if !out.iter().any(|o| o == r) {
                out.push(r.to_string());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfgNode {
    pub id: NodeId,
    pub function: String,
    pub kind: NodeKind,
    pub op: NodeOp,
    /// Source text shown in labels and reports.
    pub text: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EdgeLabel {
    FallThrough,
    CondTrue,
    CondFalse,
    Call,
    Return,
}

impl EdgeLabel {
    /// Arcs that stay inside one function.
    pub fn is_intraprocedural(self) -> bool {
        !matches!(self, EdgeLabel::Call | EdgeLabel::Return)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CfgEdge {
    pub tail: NodeId,
    pub head: NodeId,
    pub label: EdgeLabel,
}

/// Per-function view of the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionCfg {
    pub name: String,
    pub contract: String,
    pub start: NodeId,
    pub end: NodeId,
    pub params: Vec<VarDecl>,
    pub returns: Option<IntType>,
    pub state_vars: Vec<StateVar>,
    pub entry_id: Option<StatementId>,
    /// Statement nodes ordered by statement id.
    pub stmt_nodes: Vec<NodeId>,
}

impl FunctionCfg {
    pub fn signature(&self) -> Vec<IntType> {
        self.params.iter().map(|p| p.ty).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CfgWarning {
    EmptyBody { function: String },
    Unreachable { function: String, node: StatementId },
}

impl fmt::Display for CfgWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CfgWarning::EmptyBody { function } => {
                write!(f, "function `{function}` has an empty body")
            }
            CfgWarning::Unreachable { function, node } => {
                write!(f, "statement {node} in `{function}` is unreachable")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CfgError {
    #[error("{span}: call to undefined function `{callee}`")]
    UnknownCallee { callee: String, span: Span },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cfg {
    pub nodes: Vec<CfgNode>,
    pub edges: Vec<CfgEdge>,
    pub entry_function: String,
    pub functions: Vec<FunctionCfg>,
    pub warnings: Vec<CfgWarning>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

impl Cfg {
    pub fn node(&self, id: NodeId) -> &CfgNode {
        &self.nodes[id.0]
    }

    pub fn function(&self, name: &str) -> Option<&FunctionCfg> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &CfgEdge> {
        self.out_edges[id.0].iter().map(|&i| &self.edges[i])
    }

    pub fn in_edges(&self, id: NodeId) -> impl Iterator<Item = &CfgEdge> {
        self.in_edges[id.0].iter().map(|&i| &self.edges[i])
    }

    /// Head of the unique out-arc with `label`, if any.
    pub fn successor(&self, id: NodeId, label: EdgeLabel) -> Option<NodeId> {
        self.out_edges(id)
            .find(|e| e.label == label)
            .map(|e| e.head)
    }

    /// Node of statement `stmt` in `function`.
    pub fn stmt_node(&self, function: &str, stmt: StatementId) -> Option<NodeId> {
        let f = self.function(function)?;
        f.stmt_nodes
            .iter()
            .copied()
            .find(|&n| self.node(n).kind == NodeKind::Stmt(stmt))
    }

    /// Nodes reachable from `from` along intraprocedural arcs, optionally
    /// ignoring one arc.
    pub fn reachable_from(&self, from: NodeId, skip: Option<&CfgEdge>) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([from]);
        seen[from.0] = true;
        while let Some(n) = queue.pop_front() {
            for e in self.out_edges(n) {
                if !e.label.is_intraprocedural() || Some(e) == skip {
                    continue;
                }
                if !seen[e.head.0] {
                    seen[e.head.0] = true;
                    queue.push_back(e.head);
                }
            }
        }
        seen
    }

    /// Functions reachable from `entry` through call arcs, `entry` first.
    pub fn call_closure(&self, entry: &str) -> Vec<String> {
        let mut out = vec![entry.to_string()];
        let mut i = 0;
        while i < out.len() {
            if let Some(f) = self.function(&out[i]) {
                for &n in &f.stmt_nodes {
                    if let NodeOp::Call { callee, .. } = &self.node(n).op {
                        if !out.contains(callee) {
                            out.push(callee.clone());
                        }
                    }
                }
            }
            i += 1;
        }
        out
    }
}

struct Builder {
    nodes: Vec<CfgNode>,
    edges: Vec<CfgEdge>,
    by_stmt: HashMap<(String, StatementId), NodeId>,
}

impl Builder {
    fn add_node(
        &mut self,
        function: &str,
        kind: NodeKind,
        op: NodeOp,
        text: String,
        span: Span,
    ) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(CfgNode {
            id,
            function: function.to_string(),
            kind,
            op,
            text,
            span,
        });
        if let NodeKind::Stmt(sid) = kind {
            self.by_stmt.insert((function.to_string(), sid), id);
        }
        id
    }

    fn edge(&mut self, tail: NodeId, head: NodeId, label: EdgeLabel) {
        self.edges.push(CfgEdge { tail, head, label });
    }

    fn add_statement_nodes(&mut self, function: &str, stmts: &[Statement]) {
        for s in stmts {
            self.add_node(
                function,
                NodeKind::Stmt(s.id),
                NodeOp::from_statement(s),
                statement_text(s),
                s.span,
            );
            match &s.kind {
                StmtKind::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    self.add_statement_nodes(function, then_branch);
                    self.add_statement_nodes(function, else_branch);
                }
                StmtKind::While { body, .. } => self.add_statement_nodes(function, body),
                _ => {}
            }
        }
    }

    /// Wires `stmts` so that control leaves the block at `follow`; returns
    /// the block's first node (or `follow` for an empty block).
    fn lower(
        &mut self,
        function: &str,
        stmts: &[Statement],
        follow: NodeId,
        end: NodeId,
        calls: &mut Vec<(NodeId, String, Span)>,
    ) -> NodeId {
        let mut next = follow;
        for s in stmts.iter().rev() {
            let node = self.by_stmt[&(function.to_string(), s.id)];
            match &s.kind {
                StmtKind::VarDeclInit { .. } | StmtKind::Assign { .. } => {
                    self.edge(node, next, EdgeLabel::FallThrough)
                }
                StmtKind::Call { callee, .. } => {
                    self.edge(node, next, EdgeLabel::FallThrough);
                    calls.push((node, callee.clone(), s.span));
                }
                StmtKind::Return { .. } => self.edge(node, end, EdgeLabel::FallThrough),
                StmtKind::Require { .. } => {
                    self.edge(node, next, EdgeLabel::CondTrue);
                    self.edge(node, end, EdgeLabel::CondFalse);
                }
                StmtKind::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    let t = self.lower(function, then_branch, next, end, calls);
                    let f = self.lower(function, else_branch, next, end, calls);
                    self.edge(node, t, EdgeLabel::CondTrue);
                    self.edge(node, f, EdgeLabel::CondFalse);
                }
                StmtKind::While { body, .. } => {
                    let b = self.lower(function, body, node, end, calls);
                    self.edge(node, b, EdgeLabel::CondTrue);
                    self.edge(node, next, EdgeLabel::CondFalse);
                }
            }
            next = node;
        }
        next
    }
}

fn label_rank(l: EdgeLabel) -> u8 {
    l as u8
}

/// Builds the graph for every function in a type-resolved unit. The first
/// function of the first contract is recorded as the entry function.
pub fn build_cfg(unit: &SourceUnit) -> Result<Cfg, CfgError> {
    let mut b = Builder {
        nodes: Vec::new(),
        edges: Vec::new(),
        by_stmt: HashMap::new(),
    };
    let mut functions = Vec::new();
    let mut warnings = Vec::new();

    for (contract, f) in unit.functions() {
        let start = b.add_node(
            &f.name,
            NodeKind::Start,
            NodeOp::Start,
            format!("{}: start", f.name),
            f.span,
        );
        if let Some(entry) = f.entry_id {
            let params: Vec<String> = f
                .params
                .iter()
                .map(|p| format!("{} {}", p.ty, p.name))
                .collect();
            let text = format!("function {}({})", f.name, params.join(", "));
            b.add_node(&f.name, NodeKind::Stmt(entry), NodeOp::Entry, text, f.span);
        }
        b.add_statement_nodes(&f.name, &f.body);
        let end = b.add_node(
            &f.name,
            NodeKind::End,
            NodeOp::End,
            format!("{}: end", f.name),
            f.span,
        );
        let stmt_nodes = (start.0 + 1..end.0).map(NodeId).collect();
        functions.push(FunctionCfg {
            name: f.name.clone(),
            contract: contract.name.clone(),
            start,
            end,
            params: f.params.clone(),
            returns: f.returns,
            state_vars: contract.state_vars.clone(),
            entry_id: f.entry_id,
            stmt_nodes,
        });
    }

    let mut calls = Vec::new();
    for ((_, f), fc) in unit.functions().zip(&functions) {
        if f.body.is_empty() {
            warnings.push(CfgWarning::EmptyBody {
                function: f.name.clone(),
            });
        }
        let body_entry = b.lower(&f.name, &f.body, fc.end, fc.end, &mut calls);
        match f.entry_id {
            Some(entry) => {
                let entry_node = b.by_stmt[&(f.name.clone(), entry)];
                b.edge(fc.start, entry_node, EdgeLabel::FallThrough);
                b.edge(entry_node, body_entry, EdgeLabel::FallThrough);
            }
            None => b.edge(fc.start, body_entry, EdgeLabel::FallThrough),
        }
    }
    for (site, callee, span) in calls {
        let Some(target) = functions.iter().find(|f| f.name == callee) else {
            return Err(CfgError::UnknownCallee { callee, span });
        };
        b.edge(site, target.start, EdgeLabel::Call);
        b.edge(target.end, site, EdgeLabel::Return);
    }

    let mut edges = b.edges;
    edges.sort_by_key(|e| (e.tail, label_rank(e.label), e.head));
    edges.dedup();
    let mut out_edges = vec![Vec::new(); b.nodes.len()];
    let mut in_edges = vec![Vec::new(); b.nodes.len()];
    for (i, e) in edges.iter().enumerate() {
        out_edges[e.tail.0].push(i);
        in_edges[e.head.0].push(i);
    }

    let entry_function = functions
        .first()
        .map(|f| f.name.clone())
        .unwrap_or_default();
    let mut cfg = Cfg {
        nodes: b.nodes,
        edges,
        entry_function,
        functions,
        warnings: Vec::new(),
        out_edges,
        in_edges,
    };

    for f in &cfg.functions {
        let seen = cfg.reachable_from(f.start, None);
        for &n in &f.stmt_nodes {
            if let (false, NodeKind::Stmt(id)) = (seen[n.0], cfg.node(n).kind) {
                warnings.push(CfgWarning::Unreachable {
                    function: f.name.clone(),
                    node: id,
                });
            }
        }
    }
    cfg.warnings = warnings;
    Ok(cfg)
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering. Output depends only on the graph, so identical input
/// yields identical text.
pub fn cfg_to_dot(cfg: &Cfg) -> String {
    let mut out = String::from("digraph cfg {\n    node [shape=box, fontname=\"monospace\"];\n");
    for (i, f) in cfg.functions.iter().enumerate() {
        let _ = writeln!(out, "    subgraph cluster_{i} {{");
        let _ = writeln!(out, "        label=\"{}\";", dot_escape(&f.name));
        for n in (f.start.0..=f.end.0).map(|n| cfg.node(NodeId(n))) {
            let (label, shape) = match n.kind {
                NodeKind::Start | NodeKind::End => (n.text.clone(), "ellipse"),
                NodeKind::Stmt(id) => (format!("{}#{}: {}", f.name, id, n.text), "box"),
            };
            let _ = writeln!(
                out,
                "        n{} [label=\"{}\", shape={}];",
                n.id.0,
                dot_escape(&label),
                shape
            );
        }
        out.push_str("    }\n");
    }
    for e in &cfg.edges {
        match e.label {
            EdgeLabel::FallThrough => {
                let _ = writeln!(out, "    n{} -> n{};", e.tail.0, e.head.0);
            }
            label => {
                let style = if label.is_intraprocedural() {
                    ""
                } else {
                    ", style=dashed"
                };
                let _ = writeln!(
                    out,
                    "    n{} -> n{} [label=\"{:?}\"{}];",
                    e.tail.0, e.head.0, label, style
                );
            }
        }
    }
    out.push_str("}\n");
    out
}
