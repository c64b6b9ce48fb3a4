//! Name and type resolution.
//!
//! Locals are function-scoped: a declaration is visible from its position
//! to the end of the function, regardless of block nesting. Redeclaring any
//! visible name (state variable, parameter or earlier local) is an error.

use std::collections::{HashMap, HashSet};
use std::fmt;

use ruint::aliases::U256;

use super::ast::*;
use super::lexer::Span;
use crate::types::{IntType, Ty};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeErrorKind {
    UnknownIdentifier(String),
    UseBeforeDeclaration(String),
    Redeclaration(String),
    DuplicateContract(String),
    DuplicateFunction(String),
    Mismatch {
        expected: String,
        found: String,
    },
    OperandTypes {
        op: &'static str,
        left: String,
        right: String,
    },
    LiteralOutOfRange {
        literal: String,
        ty: IntType,
    },
    UnsignedNegation(IntType),
    UnknownFunction(String),
    Arity {
        callee: String,
        expected: usize,
        found: usize,
    },
    NoReturnValue(String),
    ReturnValue {
        function: String,
        expected: Option<IntType>,
    },
    NonConstantInitializer(String),
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeErrorKind::UnknownIdentifier(n) => write!(f, "unknown identifier `{n}`"),
            TypeErrorKind::UseBeforeDeclaration(n) => {
                write!(f, "`{n}` used before its declaration")
            }
            TypeErrorKind::Redeclaration(n) => write!(f, "`{n}` is already declared"),
            TypeErrorKind::DuplicateContract(n) => {
                write!(f, "contract `{n}` is defined more than once")
            }
            TypeErrorKind::DuplicateFunction(n) => {
                write!(f, "function `{n}` is defined more than once")
            }
            TypeErrorKind::Mismatch { expected, found } => {
                write!(f, "expected {expected}, found {found}")
            }
            TypeErrorKind::OperandTypes { op, left, right } => {
                write!(f, "operator `{op}` cannot combine {left} and {right} (an explicit cast is required)")
            }
            TypeErrorKind::LiteralOutOfRange { literal, ty } => {
                write!(f, "literal {literal} does not fit in {ty}")
            }
            TypeErrorKind::UnsignedNegation(ty) => write!(f, "unary `-` is not defined for {ty}"),
            TypeErrorKind::UnknownFunction(n) => write!(f, "call to unknown function `{n}`"),
            TypeErrorKind::Arity {
                callee,
                expected,
                found,
            } => {
                write!(
                    f,
                    "`{callee}` takes {expected} argument(s) but {found} were supplied"
                )
            }
            TypeErrorKind::NoReturnValue(n) => write!(f, "`{n}` does not return a value"),
            TypeErrorKind::ReturnValue {
                function,
                expected: Some(ty),
            } => {
                write!(f, "`{function}` must return a value of type {ty}")
            }
            TypeErrorKind::ReturnValue {
                function,
                expected: None,
            } => {
                write!(f, "`{function}` does not declare a return type")
            }
            TypeErrorKind::NonConstantInitializer(n) => {
                write!(f, "initializer of state variable `{n}` must be a constant")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {kind}")]
pub struct TypeError {
    pub span: Span,
    pub kind: TypeErrorKind,
}

type TResult<T> = Result<T, TypeError>;

fn err<T>(span: Span, kind: TypeErrorKind) -> TResult<T> {
    Err(TypeError { span, kind })
}

#[derive(Clone)]
struct FnSig {
    params: Vec<IntType>,
    returns: Option<IntType>,
}

/// Annotates every expression with its type and validates names, arity and
/// operand types.
pub fn resolve_types(mut unit: SourceUnit) -> TResult<SourceUnit> {
    let mut contract_names = HashSet::new();
    let mut function_names = HashSet::new();
    for c in &unit.contracts {
        if !contract_names.insert(c.name.clone()) {
            return err(c.span, TypeErrorKind::DuplicateContract(c.name.clone()));
        }
        // Function identity is the bare name across the whole unit.
        for f in &c.functions {
            if !function_names.insert(f.name.clone()) {
                return err(f.span, TypeErrorKind::DuplicateFunction(f.name.clone()));
            }
        }
    }

    for c in &mut unit.contracts {
        let sigs: HashMap<String, FnSig> = c
            .functions
            .iter()
            .map(|f| {
                (
                    f.name.clone(),
                    FnSig {
                        params: f.signature(),
                        returns: f.returns,
                    },
                )
            })
            .collect();

        let mut state: HashMap<String, IntType> = HashMap::new();
        for sv in &mut c.state_vars {
            if state.contains_key(&sv.decl.name) {
                return err(
                    sv.decl.span,
                    TypeErrorKind::Redeclaration(sv.decl.name.clone()),
                );
            }
            if let Some(init) = &mut sv.init {
                let mut refs = Vec::new();
                init.var_refs(&mut refs);
                if !refs.is_empty() {
                    return err(
                        init.span,
                        TypeErrorKind::NonConstantInitializer(sv.decl.name.clone()),
                    );
                }
                let empty = Scope {
                    vars: HashMap::new(),
                    declared_later: HashSet::new(),
                };
                empty.check(init, Some(Ty::Int(sv.decl.ty)))?;
            }
            state.insert(sv.decl.name.clone(), sv.decl.ty);
        }

        for f in &mut c.functions {
            let mut declared_later = HashSet::new();
            walk_statements(&f.body, &mut |s| {
                if let Some(name) = declared_name(s) {
                    declared_later.insert(name.to_string());
                }
            });
            let mut scope = Scope {
                vars: state.clone(),
                declared_later,
            };
            for p in &f.params {
                scope.declare(&p.name, p.ty, p.span)?;
            }
            let ctx = FnCtx {
                name: f.name.clone(),
                returns: f.returns,
                sigs: &sigs,
            };
            scope.check_block(&mut f.body, &ctx)?;
        }
    }
    Ok(unit)
}

fn declared_name(s: &Statement) -> Option<&str> {
    match &s.kind {
        StmtKind::VarDeclInit { decl, .. } => Some(&decl.name),
        StmtKind::Call {
            target:
                Some(CallTarget {
                    name,
                    declared: Some(_),
                }),
            ..
        } => Some(name),
        _ => None,
    }
}

struct FnCtx<'a> {
    name: String,
    returns: Option<IntType>,
    sigs: &'a HashMap<String, FnSig>,
}

struct Scope {
    vars: HashMap<String, IntType>,
    declared_later: HashSet<String>,
}

fn describe(ty: Option<Ty>) -> String {
    match ty {
        Some(t) => t.to_string(),
        None => "no value".to_string(),
    }
}

fn is_constant(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::IntLit(_) | ExprKind::BoolLit(_) => true,
        ExprKind::Var(_) | ExprKind::Cast(..) => false,
        ExprKind::Unary(_, inner) => is_constant(inner),
        ExprKind::Binary(_, l, r) => is_constant(l) && is_constant(r),
    }
}

fn literal_fits(digits: &str, ty: IntType, negated: bool) -> bool {
    let Ok(v) = U256::from_str_radix(digits, 10) else {
        return false;
    };
    let w = ty.width_bits as usize;
    if !ty.signed {
        return w == 256 || v < (U256::from(1u8) << w);
    }
    let half = U256::from(1u8) << (w - 1);
    if negated {
        v <= half
    } else {
        v < half
    }
}

impl Scope {
    fn declare(&mut self, name: &str, ty: IntType, span: Span) -> TResult<()> {
        if self.vars.contains_key(name) {
            return err(span, TypeErrorKind::Redeclaration(name.to_string()));
        }
        self.vars.insert(name.to_string(), ty);
        Ok(())
    }

    fn lookup(&self, name: &str, span: Span) -> TResult<IntType> {
        match self.vars.get(name) {
            Some(t) => Ok(*t),
            None if self.declared_later.contains(name) => {
                err(span, TypeErrorKind::UseBeforeDeclaration(name.to_string()))
            }
            None => err(span, TypeErrorKind::UnknownIdentifier(name.to_string())),
        }
    }

    fn check_block(&mut self, stmts: &mut [Statement], ctx: &FnCtx) -> TResult<()> {
        for s in stmts {
            self.check_stmt(s, ctx)?;
        }
        Ok(())
    }

    fn check_stmt(&mut self, s: &mut Statement, ctx: &FnCtx) -> TResult<()> {
        match &mut s.kind {
            StmtKind::VarDeclInit { decl, init } => {
                self.check(init, Some(Ty::Int(decl.ty)))?;
                self.declare(&decl.name, decl.ty, decl.span)?;
            }
            StmtKind::Assign { target, value } => {
                let ty = self.lookup(target, s.span)?;
                self.check(value, Some(Ty::Int(ty)))?;
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.check(cond, Some(Ty::Bool))?;
                self.check_block(then_branch, ctx)?;
                self.check_block(else_branch, ctx)?;
            }
            StmtKind::While { cond, body } => {
                self.check(cond, Some(Ty::Bool))?;
                self.check_block(body, ctx)?;
            }
            StmtKind::Require { cond } => {
                self.check(cond, Some(Ty::Bool))?;
            }
            StmtKind::Return { value } => match (value, ctx.returns) {
                (Some(v), Some(ty)) => {
                    self.check(v, Some(Ty::Int(ty)))?;
                }
                (Some(v), None) => {
                    return err(
                        v.span,
                        TypeErrorKind::ReturnValue {
                            function: ctx.name.clone(),
                            expected: None,
                        },
                    )
                }
                (None, _) => {}
            },
            StmtKind::Call {
                callee,
                args,
                target,
            } => {
                let Some(sig) = ctx.sigs.get(callee.as_str()) else {
                    return err(s.span, TypeErrorKind::UnknownFunction(callee.clone()));
                };
                if sig.params.len() != args.len() {
                    return err(
                        s.span,
                        TypeErrorKind::Arity {
                            callee: callee.clone(),
                            expected: sig.params.len(),
                            found: args.len(),
                        },
                    );
                }
                for (arg, ty) in args.iter_mut().zip(&sig.params) {
                    self.check(arg, Some(Ty::Int(*ty)))?;
                }
                if let Some(t) = target {
                    let Some(ret) = sig.returns else {
                        return err(s.span, TypeErrorKind::NoReturnValue(callee.clone()));
                    };
                    let target_ty = match t.declared {
                        Some(ty) => {
                            self.declare(&t.name, ty, s.span)?;
                            ty
                        }
                        None => self.lookup(&t.name, s.span)?,
                    };
                    if target_ty != ret {
                        return err(
                            s.span,
                            TypeErrorKind::Mismatch {
                                expected: target_ty.to_string(),
                                found: ret.to_string(),
                            },
                        );
                    }
                }
            }
        }
        Ok(())
    }

    fn check(&self, e: &mut Expr, expected: Option<Ty>) -> TResult<Ty> {
        let span = e.span;
        let ty = match &mut e.kind {
            ExprKind::IntLit(digits) => {
                let ty = match expected {
                    Some(Ty::Int(t)) => t,
                    Some(Ty::Bool) => {
                        return err(
                            span,
                            TypeErrorKind::Mismatch {
                                expected: "bool".into(),
                                found: format!("literal {digits}"),
                            },
                        )
                    }
                    None => IntType::UINT256,
                };
                if !literal_fits(digits, ty, false) {
                    return err(
                        span,
                        TypeErrorKind::LiteralOutOfRange {
                            literal: digits.clone(),
                            ty,
                        },
                    );
                }
                Ty::Int(ty)
            }
            ExprKind::BoolLit(_) => Ty::Bool,
            ExprKind::Var(name) => Ty::Int(self.lookup(name, span)?),
            ExprKind::Cast(target, inner) => {
                let target = *target;
                if is_constant(inner) {
                    self.check(inner, Some(Ty::Int(target)))?;
                } else {
                    let found = self.check(inner, None)?;
                    if found == Ty::Bool {
                        return err(
                            inner.span,
                            TypeErrorKind::Mismatch {
                                expected: "integer".into(),
                                found: "bool".into(),
                            },
                        );
                    }
                }
                Ty::Int(target)
            }
            ExprKind::Unary(UnOp::Not, inner) => {
                self.check(inner, Some(Ty::Bool))?;
                Ty::Bool
            }
            ExprKind::Unary(UnOp::Neg, inner) => {
                let want = match expected {
                    Some(Ty::Int(t)) => Some(t),
                    Some(Ty::Bool) => {
                        return err(
                            span,
                            TypeErrorKind::Mismatch {
                                expected: "bool".into(),
                                found: "integer".into(),
                            },
                        )
                    }
                    None if is_constant(inner) => Some(IntType {
                        signed: true,
                        width_bits: 256,
                    }),
                    None => None,
                };
                let ty = if let (ExprKind::IntLit(digits), Some(t)) = (&inner.kind, want) {
                    if !t.signed {
                        return err(span, TypeErrorKind::UnsignedNegation(t));
                    }
                    if !literal_fits(digits, t, true) {
                        return err(
                            span,
                            TypeErrorKind::LiteralOutOfRange {
                                literal: format!("-{digits}"),
                                ty: t,
                            },
                        );
                    }
                    inner.ty = Some(Ty::Int(t));
                    t
                } else {
                    match self.check(inner, want.map(Ty::Int))? {
                        Ty::Int(t) if t.signed => t,
                        Ty::Int(t) => return err(span, TypeErrorKind::UnsignedNegation(t)),
                        Ty::Bool => {
                            return err(
                                span,
                                TypeErrorKind::Mismatch {
                                    expected: "integer".into(),
                                    found: "bool".into(),
                                },
                            )
                        }
                    }
                };
                Ty::Int(ty)
            }
            ExprKind::Binary(op, l, r) => {
                let op = *op;
                if op.is_logical() {
                    self.check(l, Some(Ty::Bool))?;
                    self.check(r, Some(Ty::Bool))?;
                    Ty::Bool
                } else {
                    let operand_hint = if op.is_arithmetic() { expected } else { None };
                    let (lt, rt) = if is_constant(l) && !is_constant(r) {
                        let rt = self.check(r, operand_hint)?;
                        (self.operand(l, rt, op, true)?, rt)
                    } else {
                        let lt = self.check(l, operand_hint)?;
                        (lt, self.operand(r, lt, op, false)?)
                    };
                    if op.is_arithmetic() && (lt == Ty::Bool || rt == Ty::Bool) {
                        return err(
                            span,
                            TypeErrorKind::OperandTypes {
                                op: op.symbol(),
                                left: lt.to_string(),
                                right: rt.to_string(),
                            },
                        );
                    }
                    if op.is_comparison() && !matches!(op, BinOp::Eq | BinOp::Ne) && lt == Ty::Bool
                    {
                        return err(
                            span,
                            TypeErrorKind::OperandTypes {
                                op: op.symbol(),
                                left: lt.to_string(),
                                right: rt.to_string(),
                            },
                        );
                    }
                    if op.is_arithmetic() {
                        lt
                    } else {
                        Ty::Bool
                    }
                }
            }
        };
        if let Some(exp) = expected {
            if exp != ty {
                return err(
                    span,
                    TypeErrorKind::Mismatch {
                        expected: exp.to_string(),
                        found: describe(Some(ty)),
                    },
                );
            }
        }
        e.ty = Some(ty);
        Ok(ty)
    }

    /// Checks the second operand of a binary operator against the first.
    fn operand(&self, e: &mut Expr, other: Ty, op: BinOp, other_is_right: bool) -> TResult<Ty> {
        match self.check(e, Some(other)) {
            Ok(t) => Ok(t),
            Err(TypeError {
                kind: TypeErrorKind::Mismatch { .. },
                ..
            }) => {
                let found = self
                    .check(e, None)
                    .map(|t| t.to_string())
                    .unwrap_or_else(|_| "?".into());
                let (left, right) = if other_is_right {
                    (found, other.to_string())
                } else {
                    (other.to_string(), found)
                };
                err(
                    e.span,
                    TypeErrorKind::OperandTypes {
                        op: op.symbol(),
                        left,
                        right,
                    },
                )
            }
            Err(other_err) => Err(other_err),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{lexer::tokenize, parser::parse_source};

    fn resolve(src: &str) -> TResult<SourceUnit> {
        resolve_types(parse_source(&tokenize(src).unwrap(), "t.sol").unwrap())
    }

    fn kind(src: &str) -> TypeErrorKind {
        resolve(src).unwrap_err().kind
    }

    fn first_stmt(unit: &SourceUnit) -> &Statement {
        &unit.contracts[0].functions[0].body[0]
    }

    #[test]
    fn cast_has_target_type() {
        let unit =
            resolve("contract C { function add(uint16 a1) { uint32 a2 = uint32(a1); } }").unwrap();
        let StmtKind::VarDeclInit { init, .. } = &first_stmt(&unit).kind else {
            panic!()
        };
        assert_eq!(init.ty, Some(Ty::Int(IntType::uint(32))));
        let ExprKind::Cast(_, inner) = &init.kind else {
            panic!()
        };
        assert_eq!(inner.ty, Some(Ty::Int(IntType::uint(16))));
    }

    #[test]
    fn literal_adopts_context() {
        let unit =
            resolve("contract C { function f(uint32 a2) { require(a2 <= 65535); } }").unwrap();
        let StmtKind::Require { cond } = &first_stmt(&unit).kind else {
            panic!()
        };
        let ExprKind::Binary(_, _, rhs) = &cond.kind else {
            panic!()
        };
        assert_eq!(rhs.ty, Some(Ty::Int(IntType::uint(32))));
        // unconstrained literals default to uint256
        let unit = resolve("contract C { function f() { require(1 < 2); } }").unwrap();
        let StmtKind::Require { cond } = &first_stmt(&unit).kind else {
            panic!()
        };
        let ExprKind::Binary(_, lhs, _) = &cond.kind else {
            panic!()
        };
        assert_eq!(lhs.ty, Some(Ty::Int(IntType::UINT256)));
    }

    #[test]
    fn bool_int_mixing() {
        assert!(matches!(
            kind("contract C { function f(uint8 x) { x = x + true; } }"),
            TypeErrorKind::OperandTypes { .. }
        ));
        assert!(matches!(
            kind("contract C { function f(uint8 x) { require(x); } }"),
            TypeErrorKind::Mismatch { .. }
        ));
    }

    #[test]
    fn width_change_needs_cast() {
        assert!(matches!(
            kind("contract C { function f(uint8 x, uint16 y) { y = x + y; } }"),
            TypeErrorKind::OperandTypes { .. } | TypeErrorKind::Mismatch { .. }
        ));
        assert!(
            resolve("contract C { function f(uint8 x, uint16 y) { y = uint16(x) + y; } }").is_ok()
        );
    }

    #[test]
    fn name_errors() {
        assert_eq!(
            kind("contract C { function f() { uint8 y = z; } }"),
            TypeErrorKind::UnknownIdentifier("z".into())
        );
        assert_eq!(
            kind("contract C { function f() { uint8 y = z; uint8 z = 1; } }"),
            TypeErrorKind::UseBeforeDeclaration("z".into())
        );
        assert_eq!(
            kind("contract C { function f(uint8 x) { if (x > 1) { uint8 x = 2; } } }"),
            TypeErrorKind::Redeclaration("x".into())
        );
    }

    #[test]
    fn function_scoped_locals() {
        assert!(resolve(
            "contract C { function f(uint8 x) { if (x > 1) { uint8 s = 2; } s = 3; } }"
        )
        .is_ok());
    }

    #[test]
    fn call_checks() {
        let base =
            "contract C { function g(uint8 a) returns (uint8) { return a; } function h() {} ";
        assert!(resolve(&format!("{base} function f(uint8 x) {{ x = g(x); }} }}")).is_ok());
        assert!(matches!(
            kind(&format!("{base} function f(uint8 x) {{ g(x, x); }} }}")),
            TypeErrorKind::Arity {
                expected: 1,
                found: 2,
                ..
            }
        ));
        assert!(matches!(
            kind(&format!("{base} function f(uint8 x) {{ x = h(); }} }}")),
            TypeErrorKind::NoReturnValue(_)
        ));
        assert!(matches!(
            kind(&format!("{base} function f() {{ k(); }} }}")),
            TypeErrorKind::UnknownFunction(_)
        ));
    }

    #[test]
    fn literal_ranges() {
        assert!(matches!(
            kind("contract C { function f(uint8 x) { x = 256; } }"),
            TypeErrorKind::LiteralOutOfRange { .. }
        ));
        assert!(resolve("contract C { function f(int8 x) { x = -128; } }").is_ok());
        assert!(matches!(
            kind("contract C { function f(int8 x) { x = 128; } }"),
            TypeErrorKind::LiteralOutOfRange { .. }
        ));
        assert!(matches!(
            kind("contract C { function f(uint8 x) { x = -1; } }"),
            TypeErrorKind::UnsignedNegation(_)
        ));
    }

    #[test]
    fn return_checks() {
        assert!(matches!(
            kind("contract C { function f(uint8 x) { return x; } }"),
            TypeErrorKind::ReturnValue { expected: None, .. }
        ));
        assert!(
            resolve("contract C { function f(uint8 x) returns (uint8) { return x; } }").is_ok()
        );
    }

    #[test]
    fn every_expression_is_typed() {
        let unit = resolve(
            "contract C { function f(int16 a, uint8 b) { if (!(a < -3) && b % 2 == 0) { a = -a * int16(b); } } }",
        )
        .unwrap();
        fn all_typed(e: &Expr) -> bool {
            e.ty.is_some()
                && match &e.kind {
                    ExprKind::Cast(_, i) | ExprKind::Unary(_, i) => all_typed(i),
                    ExprKind::Binary(_, l, r) => all_typed(l) && all_typed(r),
                    _ => true,
                }
        }
        walk_statements(
            &unit.contracts[0].functions[0].body,
            &mut |s| match &s.kind {
                StmtKind::If { cond, .. } => assert!(all_typed(cond)),
                StmtKind::Assign { value, .. } => assert!(all_typed(value)),
                _ => {}
            },
        );
    }
}
