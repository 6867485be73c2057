//! Error and diagnostic types shared across the crate.

use std::fmt;

use thiserror::Error;

/// Source location (1-based line and column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Self {
        Pos { line, col }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Lexical error with source location.
#[derive(Debug, Clone, Error)]
#[error("lexical error at {pos}: {message}")]
pub struct LexError {
    pub pos: Pos,
    pub message: String,
}

/// Parse error with source location.
#[derive(Debug, Clone, Error)]
#[error("parse error at {pos}: {message}")]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

impl ParseError {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        ParseError {
            pos,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => f.write_str("error"),
            Severity::Warning => f.write_str("warning"),
        }
    }
}

/// A single validation finding. Validation collects every violation
/// instead of aborting on the first one.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub severity: Severity,
    pub pos: Pos,
    pub message: String,
}

impl Diagnostic {
    pub fn error(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            pos,
            message: message.into(),
        }
    }

    pub fn warning(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            pos,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.pos, self.severity, self.message)
    }
}

/// Runtime evaluation failure.
#[derive(Debug, Clone, Error)]
pub enum EvalError {
    #[error("unbound identifier `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("comparison of complex value with nonzero imaginary part")]
    ComplexComparison,
    #[error("boolean value used in arithmetic")]
    BoolInArithmetic,
    #[error("abs is not differentiable at 0 (sign(0) undefined)")]
    SignAtZero,
    #[error("rnd(...) is only available in assignment expressions of a running model")]
    RngUnavailable,
    #[error("unknown distribution `{0}`")]
    UnknownDistribution(String),
    #[error("cannot store {got} into `{target}` (declared {want})")]
    TypeMismatch {
        target: String,
        want: &'static str,
        got: &'static str,
    },
    #[error("{0}")]
    Domain(String),
}

/// Differentiation failure.
#[derive(Debug, Clone, Error)]
pub enum DiffError {
    #[error("`{0}` is not differentiable; round/disc/rnd may appear only in assignment expressions, never in NLEs/WLSEs/ECs")]
    NonDifferentiable(&'static str),
    #[error("expression is not conjugate-normalized (conj around a non-atom)")]
    NotNormalized,
}

/// Solver failure distinct from plain non-convergence.
#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error("singular matrix: pivot below threshold in row {row}")]
    Singular { row: usize },
    #[error("singular Jacobian at iteration {iteration} (pivot row {row})")]
    SingularJacobian { iteration: usize, row: usize },
    #[error("system is not square: {equations} equations, {unknowns} unknowns")]
    NotSquare { equations: usize, unknowns: usize },
    #[error("unobservable estimation problem: singular augmented matrix in {block} block")]
    Unobservable { block: &'static str },
    #[error("equation {index}: {source}")]
    Eval {
        index: usize,
        #[source]
        source: EvalError,
    },
}

/// Top-level error for library entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("model validation failed with {} error(s)", .0.iter().filter(|d| d.severity == Severity::Error).count())]
    Validation(Vec<Diagnostic>),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("{0}")]
    Run(String),
    #[error("case file error: {0}")]
    Case(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
