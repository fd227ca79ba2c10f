//! STL syntax in positive normal form, predicate functions, the text parser
//! and required-time analysis.

pub mod formula;
pub mod geometry;
pub mod horizon;
pub mod parser;

use thiserror::Error;

pub use formula::{Evaluator, Formula, Interval, Orientation, PredicateFunction, PredicateKind};
pub use geometry::{Halfspace, Region};
pub use horizon::required_times;
pub use parser::parse_spec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("dimension error at {line}:{col}: {msg}")]
    Dimension {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("negation is not allowed (positive normal form) at {line}:{col}")]
    NegationRejected { line: usize, col: usize },
    #[error("interval starting at {a} is unbounded and no signal domain clips it")]
    UnboundedHorizon { a: u64 },
    #[error("interval [{a},{b}] has a > b")]
    InvalidInterval { a: u64, b: u64 },
    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),
}
