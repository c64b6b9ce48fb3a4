//! Syntax tree for the contract language.

use std::fmt;

use serde::Serialize;

use super::lexer::Span;
use crate::types::{IntType, Ty};

/// Per-function statement number. When a function has an entry node
/// (parameters or contract state to bind) it owns id 1 and body statements
/// start at 2; otherwise the body starts at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct StatementId(pub u32);

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceUnit {
    pub source_name: String,
    pub contracts: Vec<ContractDef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractDef {
    pub name: String,
    pub state_vars: Vec<StateVar>,
    pub functions: Vec<FunctionDef>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub ty: IntType,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVar {
    pub decl: VarDecl,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<VarDecl>,
    pub returns: Option<IntType>,
    pub modifiers: Vec<String>,
    /// Id of the node binding parameters and state variables, if any.
    pub entry_id: Option<StatementId>,
    pub body: Vec<Statement>,
    pub span: Span,
}

impl FunctionDef {
    /// Highest statement id in the function (0 for an empty function).
    pub fn last_id(&self) -> u32 {
        let mut last = self.entry_id.map_or(0, |id| id.0);
        walk_statements(&self.body, &mut |s| last = last.max(s.id.0));
        last
    }

    pub fn signature(&self) -> Vec<IntType> {
        self.params.iter().map(|p| p.ty).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub id: StatementId,
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallTarget {
    pub name: String,
    /// Present when the call result initialises a new local.
    pub declared: Option<IntType>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    VarDeclInit {
        decl: VarDecl,
        init: Expr,
    },
    Assign {
        target: String,
        value: Expr,
    },
    If {
        cond: Expr,
        then_branch: Vec<Statement>,
        else_branch: Vec<Statement>,
    },
    While {
        cond: Expr,
        body: Vec<Statement>,
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem
        )
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
    /// Filled in by type resolution.
    pub ty: Option<Ty>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    IntLit(String),
    BoolLit(bool),
    Var(String),
    Cast(IntType, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Expr {
        Expr {
            kind,
            span,
            ty: None,
        }
    }

    /// Variable references in left-to-right order, duplicates included.
    pub fn var_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match &self.kind {
            ExprKind::IntLit(_) | ExprKind::BoolLit(_) => {}
            ExprKind::Var(name) => out.push(name),
            ExprKind::Cast(_, inner) | ExprKind::Unary(_, inner) => inner.var_refs(out),
            ExprKind::Binary(_, l, r) => {
                l.var_refs(out);
                r.var_refs(out);
            }
        }
    }

    fn erase_spans(&mut self) {
        self.span = Span::default();
        match &mut self.kind {
            ExprKind::Cast(_, inner) | ExprKind::Unary(_, inner) => inner.erase_spans(),
            ExprKind::Binary(_, l, r) => {
                l.erase_spans();
                r.erase_spans();
            }
            _ => {}
        }
    }
}

/// Pre-order walk over a statement tree.
pub fn walk_statements<'a>(stmts: &'a [Statement], f: &mut dyn FnMut(&'a Statement)) {
    for s in stmts {
        f(s);
        match &s.kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                walk_statements(then_branch, f);
                walk_statements(else_branch, f);
            }
            StmtKind::While { body, .. } => walk_statements(body, f),
            _ => {}
        }
    }
}

fn erase_stmt_spans(stmts: &mut [Statement]) {
    for s in stmts {
        s.span = Span::default();
        match &mut s.kind {
            StmtKind::VarDeclInit { decl, init } => {
                decl.span = Span::default();
                init.erase_spans();
            }
            StmtKind::Assign { value, .. } => value.erase_spans(),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                cond.erase_spans();
                erase_stmt_spans(then_branch);
                erase_stmt_spans(else_branch);
            }
            StmtKind::While { cond, body } => {
                cond.erase_spans();
                erase_stmt_spans(body);
            }
            StmtKind::Require { cond } => cond.erase_spans(),
            StmtKind::Return { value } => {
                if let Some(v) = value {
                    v.erase_spans();
                }
            }
            StmtKind::Call { args, .. } => args.iter_mut().for_each(Expr::erase_spans),
        }
    }
}

impl SourceUnit {
    /// Copy with every source position reset, for structural comparison.
    pub fn without_spans(&self) -> SourceUnit {
        let mut unit = self.clone();
        for c in &mut unit.contracts {
            c.span = Span::default();
            for sv in &mut c.state_vars {
                sv.decl.span = Span::default();
                if let Some(init) = &mut sv.init {
                    init.erase_spans();
                }
            }
            for f in &mut c.functions {
                f.span = Span::default();
                f.params.iter_mut().for_each(|p| p.span = Span::default());
                erase_stmt_spans(&mut f.body);
            }
        }
        unit
    }

    pub fn functions(&self) -> impl Iterator<Item = (&ContractDef, &FunctionDef)> {
        self.contracts
            .iter()
            .flat_map(|c| c.functions.iter().map(move |f| (c, f)))
    }

    pub fn find_function(&self, name: &str) -> Option<(&ContractDef, &FunctionDef)> {
        self.functions().find(|(_, f)| f.name == name)
    }
}
