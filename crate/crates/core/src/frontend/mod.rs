//! Concrete syntax and desugaring.
//!
//! [`compile_source`] runs the whole pipeline: parse, index expansion,
//! `foreach` expansion, `allsynch` desugaring and lowering to a
//! [`ChorProgram`](crate::chor::ChorProgram).

pub mod allsynch;
pub mod annotate;
pub mod expand;
mod lexer;
pub mod lower;
pub mod parser;
pub mod pretty;
pub mod surface;

use std::fmt;

use thiserror::Error;

use crate::expr::EvalError;

pub use allsynch::desugar_allsynch;
pub use annotate::{auto_annotate, AnnotationScheme};
pub use expand::{expand_foreach, expand_indices};
pub use lower::{compile_source, lower};
pub use parser::{parse, parse_expr};
pub use pretty::pretty;

/// Syntax error at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub found: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: expected ", self.line, self.col)?;
        match self.expected.as_slice() {
            [one] => write!(f, "{one}")?,
            many => write!(f, "one of {}", many.join(", "))?,
        }
        write!(f, "; found {}", self.found)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrontendError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("index {index} is outside family `{family}` of size {size}")]
    IndexOutOfFamily { family: String, index: i64, size: usize },
    #[error("{0}")]
    NonStaticIndex(String),
    #[error("unsupported template: {0}")]
    UnsupportedTemplate(String),
    #[error("branches of the interaction indexed by `{0}` continue differently")]
    TemplateBranchesDiverge(String),
    #[error("`{0}` is not a declared family")]
    UnknownFamily(String),
    #[error("index `{0}` is not bound")]
    UnboundIndex(String),
    #[error("constant `{name}`: {source}")]
    Const { name: String, source: EvalError },
    #[error("{0} remains after expansion")]
    Unexpanded(String),
    #[error("{0}")]
    BadDeclaration(String),
}
