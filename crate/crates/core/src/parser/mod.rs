//! Lexer, parser and pretty-printer for `.rudi` rule files.

pub mod ast;
mod lexer;
mod parse;
pub(crate) mod pretty;

use std::fmt;

pub use ast::*;
pub use lexer::{tokenize, StrSegment, Token, TokenKind};
pub use pretty::{pretty_expr, pretty_module};

/// Syntax error with a 1-based position and the set of tokens that would
/// have been accepted there.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)?;
        match self.expected.as_slice() {
            [] => Ok(()),
            [one] => write!(f, ", expected {one}"),
            many => write!(f, ", expected one of {}", many.join(", ")),
        }
    }
}

/// Parses one module. `name` is the module name used by `import`.
pub fn parse_module(name: &str, text: &str) -> Result<ModuleAst, ParseError> {
    let toks = tokenize(text)?;
    parse::Parser::new(text, toks).module(name)
}

/// Parses a standalone expression (used for DA literals on the wire and in
/// scripts).
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    let mut p = parse::Parser::new(text, toks);
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

#[cfg(test)]
mod tests;
