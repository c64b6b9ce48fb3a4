//! Tokenizer, parser and type resolution for the contract language.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod resolve;

pub use ast::*;
pub use lexer::{tokenize, LexError, Span, SpannedToken, Token};
pub use parser::{parse_source, parse_source_with, ParseError, ParseOptions};
pub use pretty::{expr_text, pretty_print, statement_text};
pub use resolve::{resolve_types, TypeError, TypeErrorKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrontendError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

impl FrontendError {
    pub fn span(&self) -> Span {
        match self {
            FrontendError::Lex(e) => e.span(),
            FrontendError::Parse(e) => e.span,
            FrontendError::Type(e) => e.span,
        }
    }
}

/// Tokenizes, parses and resolves `source` in one step.
pub fn load_source(
    source: &str,
    source_name: &str,
    options: ParseOptions,
) -> Result<SourceUnit, FrontendError> {
    let tokens = tokenize(source)?;
    let unit = parse_source_with(&tokens, source_name, options)?;
    Ok(resolve_types(unit)?)
}
