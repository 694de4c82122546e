//! Lexing, parsing and name resolution.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod resolve;

use alloc::string::String;
use thiserror::Error;

pub use ast::*;
pub use lexer::{tokenize, LexError, Token, TokenKind};
pub use parser::{parse, parse_expr, parse_type, ParseError};
pub use pretty::{print_decl, print_expr, print_program, print_type};
pub use resolve::{resolve_names, ResolveError};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FrontendError {
    #[error("lexical error at {0}")]
    Lex(#[from] LexError),
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("name error: {0}")]
    Resolve(#[from] ResolveError),
}

impl FrontendError {
    pub fn span(&self) -> Span {
        match self {
            FrontendError::Lex(e) => e.span,
            FrontendError::Parse(e) => e.span,
            FrontendError::Resolve(e) => e.span(),
        }
    }

    /// Stable identifier for machine-readable diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            FrontendError::Lex(_) => "E-LEX",
            FrontendError::Parse(_) => "E-PARSE",
            FrontendError::Resolve(ResolveError::Unbound { .. }) => "E-UNBOUND",
            FrontendError::Resolve(ResolveError::Duplicate { .. }) => "E-DUPLICATE",
        }
    }

    pub fn message(&self) -> String {
        use alloc::string::ToString;
        self.to_string()
    }
}

/// tokenize → parse → resolve.
pub fn parse_program(source: &str) -> Result<Program, FrontendError> {
    let tokens = tokenize(source)?;
    let program = parse(&tokens)?;
    Ok(resolve_names(program)?)
}
