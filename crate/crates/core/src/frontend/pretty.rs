//! Source rendering of a syntax tree. Re-parsing the output yields the same
//! tree (modulo source positions).

use std::fmt::Write;

use super::ast::*;

pub fn pretty_print(unit: &SourceUnit) -> String {
    let mut out = String::new();
    for (i, c) in unit.contracts.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "contract {} {{", c.name);
        for sv in &c.state_vars {
            let _ = write!(out, "    {} {}", sv.decl.ty, sv.decl.name);
            if let Some(init) = &sv.init {
                let _ = write!(out, " = {}", expr_text(init));
            }
            out.push_str(";\n");
        }
        for f in &c.functions {
            let params: Vec<String> = f
                .params
                .iter()
                .map(|p| format!("{} {}", p.ty, p.name))
                .collect();
            let _ = write!(out, "    function {}({})", f.name, params.join(", "));
            for m in &f.modifiers {
                let _ = write!(out, " {m}");
            }
            if let Some(r) = f.returns {
                let _ = write!(out, " returns ({r})");
            }
            out.push_str(" {\n");
            block(&mut out, &f.body, 2);
            out.push_str("    }\n");
        }
        out.push_str("}\n");
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn block(out: &mut String, stmts: &[Statement], depth: usize) {
    for s in stmts {
        indent(out, depth);
        match &s.kind {
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let _ = writeln!(out, "if ({}) {{", expr_text(cond));
                block(out, then_branch, depth + 1);
                indent(out, depth);
                if else_branch.is_empty() {
                    out.push_str("}\n");
                } else {
                    out.push_str("} else {\n");
                    block(out, else_branch, depth + 1);
                    indent(out, depth);
                    out.push_str("}\n");
                }
            }
            StmtKind::While { cond, body } => {
                let _ = writeln!(out, "while ({}) {{", expr_text(cond));
                block(out, body, depth + 1);
                indent(out, depth);
                out.push_str("}\n");
            }
            _ => {
                out.push_str(&simple_statement_text(s));
                out.push('\n');
            }
        }
    }
}

/// Single-line text of a statement; compound statements show only their head.
pub fn statement_text(s: &Statement) -> String {
    match &s.kind {
        StmtKind::If { cond, .. } => format!("if ({})", expr_text(cond)),
        StmtKind::While { cond, .. } => format!("while ({})", expr_text(cond)),
        _ => simple_statement_text(s),
    }
}

fn simple_statement_text(s: &Statement) -> String {
    match &s.kind {
        StmtKind::VarDeclInit { decl, init } => {
            format!("{} {} = {};", decl.ty, decl.name, expr_text(init))
        }
        StmtKind::Assign { target, value } => format!("{target} = {};", expr_text(value)),
        StmtKind::Require { cond } => format!("require({});", expr_text(cond)),
        StmtKind::Return { value: None } => "return;".to_string(),
        StmtKind::Return { value: Some(v) } => format!("return {};", expr_text(v)),
        StmtKind::Call {
            callee,
            args,
            target,
        } => {
            let args: Vec<String> = args.iter().map(expr_text).collect();
            let call = format!("{callee}({})", args.join(", "));
            match target {
                None => format!("{call};"),
                Some(CallTarget {
                    name,
                    declared: None,
                }) => format!("{name} = {call};"),
                Some(CallTarget {
                    name,
                    declared: Some(ty),
                }) => format!("{ty} {name} = {call};"),
            }
        }
        StmtKind::If { .. } | StmtKind::While { .. } => unreachable!("compound statement"),
    }
}

/// Expression text with the minimum parentheses needed to re-parse it.
pub fn expr_text(e: &Expr) -> String {
    match &e.kind {
        ExprKind::IntLit(d) => d.clone(),
        ExprKind::BoolLit(b) => b.to_string(),
        ExprKind::Var(n) => n.clone(),
        ExprKind::Cast(ty, inner) => format!("{ty}({})", expr_text(inner)),
        ExprKind::Unary(op, inner) => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
            };
            match inner.kind {
                ExprKind::Binary(..) | ExprKind::Unary(..) => {
                    format!("{sym}({})", expr_text(inner))
                }
                _ => format!("{sym}{}", expr_text(inner)),
            }
        }
        ExprKind::Binary(op, l, r) => {
            let prec = precedence(*op);
            let left = match l.kind {
                ExprKind::Binary(lop, ..) if precedence(lop) < prec => {
                    format!("({})", expr_text(l))
                }
                _ => expr_text(l),
            };
            // operators are left-associative
            let right = match r.kind {
                ExprKind::Binary(rop, ..) if precedence(rop) <= prec => {
                    format!("({})", expr_text(r))
                }
                _ => expr_text(r),
            };
            format!("{left} {} {right}", op.symbol())
        }
    }
}

fn precedence(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 0,
        BinOp::And => 1,
        BinOp::Eq | BinOp::Ne => 2,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
        BinOp::Add | BinOp::Sub => 4,
        BinOp::Mul | BinOp::Div | BinOp::Rem => 5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_source, tokenize};

    fn parse(src: &str) -> SourceUnit {
        parse_source(&tokenize(src).unwrap(), "t.sol").unwrap()
    }

    #[test]
    fn minimal_parentheses() {
        let unit = parse("contract C { function f(uint8 a, uint8 b) { require(a + b <= 255); a = (a - (b - 1)) * (a + 1); } }");
        let body = &unit.contracts[0].functions[0].body;
        assert_eq!(statement_text(&body[0]), "require(a + b <= 255);");
        assert_eq!(statement_text(&body[1]), "a = (a - (b - 1)) * (a + 1);");
    }

    #[test]
    fn round_trip_is_stable() {
        let src = "contract C {
            uint8 s = 3;
            function g(int8 x) public returns (int8) { return -(-x); }
            function f(int8 a, uint16 b) public {
                for (uint16 i = 0; i < b; i++) { if (!(a < -3) || a == 0) { a = g(a); } else { a -= 1; } }
                int8 z = g(a);
                require(b % 2 == 0 && uint8(b) != s);
                while (true) { return; }
            }
        }";
        let once = parse(src);
        let twice = parse(&pretty_print(&once));
        assert_eq!(once.without_spans(), twice.without_spans());
        assert_eq!(pretty_print(&once), pretty_print(&twice));
    }
}
