//! Recursive-descent parser producing a [`SourceUnit`] with numbered statements.

use super::ast::*;
use super::lexer::{Span, SpannedToken, Token};
use crate::types::IntType;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{span}: expected {expected}, found {found}")]
pub struct ParseError {
    pub span: Span,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept integer widths that are not multiples of 8 (e.g. `uint4`).
    pub allow_narrow_widths: bool,
}

pub fn parse_source(tokens: &[SpannedToken], source_name: &str) -> Result<SourceUnit, ParseError> {
    parse_source_with(tokens, source_name, ParseOptions::default())
}

pub fn parse_source_with(
    tokens: &[SpannedToken],
    source_name: &str,
    options: ParseOptions,
) -> Result<SourceUnit, ParseError> {
    let mut p = Parser {
        tokens,
        pos: 0,
        options,
    };
    let mut contracts = Vec::new();
    while p.peek() != &Token::Eof {
        contracts.push(p.contract()?);
    }
    if contracts.is_empty() {
        return Err(p.error("`contract`"));
    }
    Ok(SourceUnit {
        source_name: source_name.to_string(),
        contracts,
    })
}

struct Parser<'a> {
    tokens: &'a [SpannedToken],
    pos: usize,
    options: ParseOptions,
}

type PResult<T> = Result<T, ParseError>;

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)].token
    }

    fn peek_at(&self, ahead: usize) -> &Token {
        &self.tokens[(self.pos + ahead).min(self.tokens.len() - 1)].token
    }

    fn span(&self) -> Span {
        self.tokens[self.pos.min(self.tokens.len() - 1)].span
    }

    fn bump(&mut self) -> &Token {
        let i = self.pos.min(self.tokens.len() - 1);
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        &self.tokens[i].token
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError {
            span: self.span(),
            expected: expected.to_string(),
            found: self.peek().to_string(),
        }
    }

    fn expect(&mut self, tok: Token) -> PResult<Span> {
        if *self.peek() == tok {
            let span = self.span();
            self.bump();
            Ok(span)
        } else {
            Err(self.error(&format!("`{tok}`")))
        }
    }

    fn eat(&mut self, tok: &Token) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Token::Ident(name) => {
                self.bump();
                Ok(name)
            }
            _ => Err(self.error("identifier")),
        }
    }

    fn int_type(&mut self) -> PResult<IntType> {
        match *self.peek() {
            Token::IntTy { signed, width } => {
                let ty = if self.options.allow_narrow_widths {
                    IntType::narrow(signed, width)
                } else {
                    IntType::new(signed, width)
                };
                match ty {
                    Some(ty) => {
                        self.bump();
                        Ok(ty)
                    }
                    None => Err(self.error("integer type with a width that is a multiple of 8")),
                }
            }
            _ => Err(self.error("integer type")),
        }
    }

    fn modifiers(&mut self) -> Vec<String> {
        let mut out = Vec::new();
        while let Token::Modifier(m) = self.peek().clone() {
            self.bump();
            out.push(m);
        }
        out
    }

    fn contract(&mut self) -> PResult<ContractDef> {
        let span = self.expect(Token::Contract)?;
        let name = self.ident()?;
        self.expect(Token::LBrace)?;
        let mut state_vars = Vec::new();
        let mut functions = Vec::new();
        loop {
            match self.peek() {
                Token::RBrace => {
                    self.bump();
                    break;
                }
                Token::Function => functions.push(self.function()?),
                Token::IntTy { .. } => {
                    let decl_span = self.span();
                    let ty = self.int_type()?;
                    self.modifiers();
                    let var_name = self.ident()?;
                    let init = if self.eat(&Token::Assign) {
                        Some(self.expr()?)
                    } else {
                        None
                    };
                    self.expect(Token::Semi)?;
                    state_vars.push(StateVar {
                        decl: VarDecl {
                            name: var_name,
                            ty,
                            span: decl_span,
                        },
                        init,
                    });
                }
                _ => return Err(self.error("`function`, state variable or `}`")),
            }
        }
        let has_state = !state_vars.is_empty();
        for f in &mut functions {
            number_function(f, has_state);
        }
        Ok(ContractDef {
            name,
            state_vars,
            functions,
            span,
        })
    }

    fn function(&mut self) -> PResult<FunctionDef> {
        let span = self.expect(Token::Function)?;
        let name = self.ident()?;
        self.expect(Token::LParen)?;
        let mut params = Vec::new();
        if self.peek() != &Token::RParen {
            loop {
                let pspan = self.span();
                let ty = self.int_type()?;
                let pname = self.ident()?;
                params.push(VarDecl {
                    name: pname,
                    ty,
                    span: pspan,
                });
                if !self.eat(&Token::Comma) {
                    break;
                }
            }
        }
        self.expect(Token::RParen)?;
        let mut modifiers = self.modifiers();
        let returns = if self.eat(&Token::Returns) {
            self.expect(Token::LParen)?;
            let ty = self.int_type()?;
            if matches!(self.peek(), Token::Ident(_)) {
                return Err(self.error("`)` (named return values are not supported)"));
            }
            self.expect(Token::RParen)?;
            modifiers.extend(self.modifiers());
            Some(ty)
        } else {
            None
        };
        let body = self.block()?;
        Ok(FunctionDef {
            name,
            params,
            returns,
            modifiers,
            entry_id: None,
            body,
            span,
        })
    }

    fn block(&mut self) -> PResult<Vec<Statement>> {
        self.expect(Token::LBrace)?;
        let mut out = Vec::new();
        while !self.eat(&Token::RBrace) {
            if self.peek() == &Token::Eof {
                return Err(self.error("`}`"));
            }
            self.statement(&mut out)?;
        }
        Ok(out)
    }

    /// A braced block or a single statement.
    fn body(&mut self) -> PResult<Vec<Statement>> {
        if self.peek() == &Token::LBrace {
            self.block()
        } else {
            let mut out = Vec::new();
            self.statement(&mut out)?;
            Ok(out)
        }
    }

    fn stmt(kind: StmtKind, span: Span) -> Statement {
        Statement {
            id: StatementId(0),
            kind,
            span,
        }
    }

    /// Parses one statement, appending to `out`. Nested blocks and `for`
    /// loops may append more than one statement.
    fn statement(&mut self, out: &mut Vec<Statement>) -> PResult<()> {
        let span = self.span();
        match self.peek().clone() {
            Token::LBrace => out.extend(self.block()?),
            Token::If => {
                self.bump();
                self.expect(Token::LParen)?;
                let cond = self.expr()?;
                self.expect(Token::RParen)?;
                let then_branch = self.body()?;
                let else_branch = if self.eat(&Token::Else) {
                    self.body()?
                } else {
                    Vec::new()
                };
                out.push(Self::stmt(
                    StmtKind::If {
                        cond,
                        then_branch,
                        else_branch,
                    },
                    span,
                ));
            }
            Token::While => {
                self.bump();
                self.expect(Token::LParen)?;
                let cond = self.expr()?;
                self.expect(Token::RParen)?;
                let body = self.body()?;
                out.push(Self::stmt(StmtKind::While { cond, body }, span));
            }
            Token::For => {
                self.bump();
                self.expect(Token::LParen)?;
                if self.peek() != &Token::Semi {
                    self.simple_statement(out)?;
                }
                self.expect(Token::Semi)?;
                let cond = if self.peek() == &Token::Semi {
                    Expr::new(ExprKind::BoolLit(true), self.span())
                } else {
                    self.expr()?
                };
                self.expect(Token::Semi)?;
                let mut step = Vec::new();
                if self.peek() != &Token::RParen {
                    self.simple_statement(&mut step)?;
                }
                self.expect(Token::RParen)?;
                let mut body = self.body()?;
                body.extend(step);
                out.push(Self::stmt(StmtKind::While { cond, body }, span));
            }
            Token::Require => {
                self.bump();
                self.expect(Token::LParen)?;
                let cond = self.expr()?;
                self.expect(Token::RParen)?;
                self.expect(Token::Semi)?;
                out.push(Self::stmt(StmtKind::Require { cond }, span));
            }
            Token::Return => {
                self.bump();
                let value = if self.peek() == &Token::Semi {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(Token::Semi)?;
                out.push(Self::stmt(StmtKind::Return { value }, span));
            }
            _ => {
                self.simple_statement(out)?;
                self.expect(Token::Semi)?;
            }
        }
        Ok(())
    }

    /// Declarations, assignments and calls (no trailing `;`).
    fn simple_statement(&mut self, out: &mut Vec<Statement>) -> PResult<()> {
        let span = self.span();
        match self.peek().clone() {
            Token::IntTy { .. } if !matches!(self.peek_at(1), Token::LParen) => {
                let ty = self.int_type()?;
                let name = self.ident()?;
                let decl = VarDecl {
                    name: name.clone(),
                    ty,
                    span,
                };
                if !self.eat(&Token::Assign) {
                    // Solidity zero-initialises locals declared without a value.
                    let init = Expr::new(ExprKind::IntLit("0".into()), span);
                    out.push(Self::stmt(StmtKind::VarDeclInit { decl, init }, span));
                    return Ok(());
                }
                if let Some((callee, args)) = self.try_call()? {
                    let target = Some(CallTarget {
                        name,
                        declared: Some(ty),
                    });
                    out.push(Self::stmt(
                        StmtKind::Call {
                            callee,
                            args,
                            target,
                        },
                        span,
                    ));
                } else {
                    let init = self.expr()?;
                    out.push(Self::stmt(StmtKind::VarDeclInit { decl, init }, span));
                }
            }
            Token::Ident(name) => {
                if let Some((callee, args)) = self.try_call()? {
                    out.push(Self::stmt(
                        StmtKind::Call {
                            callee,
                            args,
                            target: None,
                        },
                        span,
                    ));
                    return Ok(());
                }
                self.bump();
                let op_span = self.span();
                let var = || Expr::new(ExprKind::Var(name.clone()), span);
                let one = || Expr::new(ExprKind::IntLit("1".into()), op_span);
                let op = self.peek().clone();
                if !matches!(
                    op,
                    Token::Assign
                        | Token::PlusAssign
                        | Token::MinusAssign
                        | Token::PlusPlus
                        | Token::MinusMinus
                ) {
                    return Err(self.error("assignment operator or `(`"));
                }
                self.bump();
                let value = match op {
                    Token::Assign => {
                        if let Some((callee, args)) = self.try_call()? {
                            let target = Some(CallTarget {
                                name,
                                declared: None,
                            });
                            out.push(Self::stmt(
                                StmtKind::Call {
                                    callee,
                                    args,
                                    target,
                                },
                                span,
                            ));
                            return Ok(());
                        }
                        self.expr()?
                    }
                    Token::PlusAssign => {
                        let rhs = self.expr()?;
                        Expr::new(
                            ExprKind::Binary(BinOp::Add, Box::new(var()), Box::new(rhs)),
                            op_span,
                        )
                    }
                    Token::MinusAssign => {
                        let rhs = self.expr()?;
                        Expr::new(
                            ExprKind::Binary(BinOp::Sub, Box::new(var()), Box::new(rhs)),
                            op_span,
                        )
                    }
                    Token::PlusPlus => Expr::new(
                        ExprKind::Binary(BinOp::Add, Box::new(var()), Box::new(one())),
                        op_span,
                    ),
                    Token::MinusMinus => Expr::new(
                        ExprKind::Binary(BinOp::Sub, Box::new(var()), Box::new(one())),
                        op_span,
                    ),
                    _ => unreachable!(),
                };
                out.push(Self::stmt(
                    StmtKind::Assign {
                        target: name,
                        value,
                    },
                    span,
                ));
            }
            _ => return Err(self.error("statement")),
        }
        Ok(())
    }

    /// `ident(args)` at the current position, if present.
    fn try_call(&mut self) -> PResult<Option<(String, Vec<Expr>)>> {
        let (Token::Ident(callee), Token::LParen) = (self.peek().clone(), self.peek_at(1)) else {
            return Ok(None);
        };
        self.bump();
        self.bump();
        let mut args = Vec::new();
        if self.peek() != &Token::RParen {
            loop {
                args.push(self.expr()?);
                if !self.eat(&Token::Comma) {
                    break;
                }
            }
        }
        self.expect(Token::RParen)?;
        Ok(Some((callee, args)))
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: &[&[(Token, BinOp)]] = &[
            &[(Token::OrOr, BinOp::Or)],
            &[(Token::AndAnd, BinOp::And)],
            &[(Token::EqEq, BinOp::Eq), (Token::Ne, BinOp::Ne)],
            &[
                (Token::Lt, BinOp::Lt),
                (Token::Le, BinOp::Le),
                (Token::Gt, BinOp::Gt),
                (Token::Ge, BinOp::Ge),
            ],
            &[(Token::Plus, BinOp::Add), (Token::Minus, BinOp::Sub)],
            &[
                (Token::Star, BinOp::Mul),
                (Token::Slash, BinOp::Div),
                (Token::Percent, BinOp::Rem),
            ],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        'outer: loop {
            for (tok, op) in LEVELS[level] {
                if self.peek() == tok {
                    let span = self.span();
                    self.bump();
                    let rhs = self.binary(level + 1)?;
                    lhs = Expr::new(ExprKind::Binary(*op, Box::new(lhs), Box::new(rhs)), span);
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let op = match self.peek() {
            Token::Minus => UnOp::Neg,
            Token::Bang => UnOp::Not,
            _ => return self.primary(),
        };
        self.bump();
        let inner = self.unary()?;
        Ok(Expr::new(ExprKind::Unary(op, Box::new(inner)), span))
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Token::Lit(digits) => {
                self.bump();
                Ok(Expr::new(ExprKind::IntLit(digits), span))
            }
            Token::True | Token::False => {
                let b = self.bump() == &Token::True;
                Ok(Expr::new(ExprKind::BoolLit(b), span))
            }
            Token::Ident(name) => {
                if self.peek_at(1) == &Token::LParen {
                    return Err(self.error("operand (function calls must be whole statements)"));
                }
                self.bump();
                Ok(Expr::new(ExprKind::Var(name), span))
            }
            Token::IntTy { .. } => {
                let ty = self.int_type()?;
                self.expect(Token::LParen)?;
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(Expr::new(ExprKind::Cast(ty, Box::new(inner)), span))
            }
            Token::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            _ => Err(self.error("expression")),
        }
    }
}

fn number_statements(stmts: &mut [Statement], next: &mut u32) {
    for s in stmts {
        s.id = StatementId(*next);
        *next += 1;
        match &mut s.kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                number_statements(then_branch, next);
                number_statements(else_branch, next);
            }
            StmtKind::While { body, .. } => number_statements(body, next),
            _ => {}
        }
    }
}

/// Assigns pre-order statement ids. Id 1 goes to the entry node when the
/// function binds parameters or contract state.
pub(crate) fn number_function(f: &mut FunctionDef, has_state: bool) {
    let mut next = 1;
    f.entry_id = if !f.params.is_empty() || has_state {
        next = 2;
        Some(StatementId(1))
    } else {
        None
    };
    number_statements(&mut f.body, &mut next);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::lexer::tokenize;

    fn parse(src: &str) -> Result<SourceUnit, ParseError> {
        parse_source(&tokenize(src).unwrap(), "test.sol")
    }

    #[test]
    fn empty_function_body() {
        let unit = parse("contract C { function f() public {} }").unwrap();
        let f = &unit.contracts[0].functions[0];
        assert!(f.body.is_empty());
        assert_eq!(f.entry_id, None);
        assert_eq!(f.last_id(), 0);
    }

    #[test]
    fn unbalanced_condition() {
        let err = parse("contract C { function f(uint8 x) { if (x").unwrap_err();
        assert_eq!(err.expected, "`)`");
        assert_eq!(err.found, "end of input");
    }

    #[test]
    fn preorder_numbering_with_entry_node() {
        let unit = parse(
            "contract C { function f(uint8 x) {
                uint8 y = x;
                if (y > 1) { y = 1; } else { y = 2; y = 3; }
                while (y < 9) { y = y + 1; }
                return;
            } }",
        )
        .unwrap();
        let f = &unit.contracts[0].functions[0];
        assert_eq!(f.entry_id, Some(StatementId(1)));
        let mut ids = Vec::new();
        walk_statements(&f.body, &mut |s| ids.push(s.id.0));
        assert_eq!(ids, (2..=9).collect::<Vec<_>>());
    }

    #[test]
    fn for_loop_desugars_to_while() {
        let unit =
            parse("contract C { function f() { for (uint8 i = 0; i < 3; i++) { } } }").unwrap();
        let body = &unit.contracts[0].functions[0].body;
        assert_eq!(body.len(), 2);
        assert!(matches!(body[0].kind, StmtKind::VarDeclInit { .. }));
        let StmtKind::While { body: inner, .. } = &body[1].kind else {
            panic!()
        };
        assert!(matches!(&inner[0].kind, StmtKind::Assign { target, .. } if target == "i"));
    }

    #[test]
    fn call_statements() {
        let unit = parse(
            "contract C {
                function g(uint8 a) returns (uint8) { return a; }
                function f(uint8 x) { g(x); x = g(x); uint8 y = g(1); }
            }",
        )
        .unwrap();
        let body = &unit.contracts[0].functions[1].body;
        assert!(matches!(&body[0].kind, StmtKind::Call { target: None, .. }));
        assert!(matches!(
            &body[1].kind,
            StmtKind::Call {
                target: Some(CallTarget { declared: None, .. }),
                ..
            }
        ));
        assert!(matches!(
            &body[2].kind,
            StmtKind::Call {
                target: Some(CallTarget {
                    declared: Some(_),
                    ..
                }),
                ..
            }
        ));
    }

    #[test]
    fn nested_call_rejected() {
        let err = parse("contract C { function f(uint8 x) { x = 1 + g(x); } }").unwrap_err();
        assert!(err.expected.contains("whole statements"));
    }

    #[test]
    fn narrow_widths_need_opt_in() {
        let src = "contract C { function f(uint4 x) {} }";
        assert!(parse(src).is_err());
        let opts = ParseOptions {
            allow_narrow_widths: true,
        };
        assert!(parse_source_with(&tokenize(src).unwrap(), "t", opts).is_ok());
    }

    #[test]
    fn precedence() {
        let unit = parse(
            "contract C { function f(uint8 a) { require(a + 1 * 2 <= 3 || a == 0 && a != 1); } }",
        )
        .unwrap();
        let StmtKind::Require { cond } = &unit.contracts[0].functions[0].body[0].kind else {
            panic!()
        };
        let ExprKind::Binary(BinOp::Or, lhs, rhs) = &cond.kind else {
            panic!()
        };
        assert!(matches!(lhs.kind, ExprKind::Binary(BinOp::Le, _, _)));
        assert!(matches!(rhs.kind, ExprKind::Binary(BinOp::And, _, _)));
    }

    #[test]
    fn no_contract_is_an_error() {
        assert!(parse("").is_err());
    }
}
