//! Open-box symbolic solver for steady-state power-network computation.
//!
//! Model files declare variables, parameters and nonlinear equations in
//! symbolic form; the library parses them, derives sparse Jacobians
//! symbolically (in real variables or via Wirtinger calculus in complex
//! variables) and solves power flow with Newton-Raphson or state estimation
//! with equality-constrained weighted least squares. A MATPOWER case
//! converter emits equivalent model files in polar, rectangular or complex
//! form.

pub mod ast;
pub mod engine;
pub mod env;
pub mod error;
pub mod eval;
pub mod expr;
pub mod lexer;
pub mod matpower;
pub mod newton;
pub mod parser;
pub mod printer;
pub mod report;
pub mod sparse;
pub mod symbolic;
pub mod system;
pub mod validate;
pub mod value;
pub mod wls;

pub use ast::{Domain, ModelDocument, ModelType, ReportLevel};
pub use env::{Env, RngStream};
pub use error::{Diagnostic, Error, Result, Severity};
pub use eval::{evaluate, evaluate_sampling};
pub use expr::Expr;
pub use lexer::tokenize;
pub use parser::{parse_expression, parse_expression_str, parse_model, parse_source};
pub use printer::{pretty_print, print_expr};
pub use symbolic::{diff_real, diff_wirtinger, jacobian_structure, normalize_conj, WirtVar};
pub use validate::validate_document;
