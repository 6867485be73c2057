//! Compiled equation systems shared by the Newton and Gauss-Newton solvers.
//!
//! Equations are conj-normalized and differentiated once at compile time;
//! the cached symbolic partials are re-evaluated numerically per iteration.

use num_complex::Complex64;

use crate::ast::Domain;
use crate::env::Env;
use crate::error::{DiffError, EvalError, SolveError};
use crate::eval::evaluate;
use crate::expr::Expr;
use crate::printer::print_expr;
use crate::sparse::Scalar;
use crate::symbolic::{normalize_conj, WirtVar};
use crate::value::Value;

/// One unknown slot. In the complex domain the slots come in interleaved
/// pairs (v, conj v); only the primary (non-conj) slot is stored in the
/// environment, the conj slot is always the exact conjugate of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownSlot {
    pub name: String,
    pub conj: bool,
}

impl UnknownSlot {
    pub fn label(&self) -> String {
        if self.conj {
            format!("conj({})", self.name)
        } else {
            self.name.clone()
        }
    }
}

/// A single compiled equation: residual = lhs - rhs, with cached symbolic
/// partials for every unknown occurring in it.
#[derive(Debug, Clone)]
pub struct CompiledEq {
    pub residual: Expr,
    /// (column in the unknown ordering, symbolic partial derivative).
    pub partials: Vec<(usize, Expr)>,
    /// Printed equation text for reports.
    pub text: String,
}

/// Build the unknown ordering for a variable list: plain slots in the real
/// domain, interleaved (v, conj v) pairs in the complex domain.
pub fn unknown_slots(names: &[(String, bool)], domain: Domain) -> Vec<UnknownSlot> {
    let mut slots = Vec::new();
    for (name, conj_pair) in names {
        slots.push(UnknownSlot {
            name: name.clone(),
            conj: false,
        });
        if domain == Domain::Complex && *conj_pair {
            slots.push(UnknownSlot {
                name: name.clone(),
                conj: true,
            });
        }
    }
    slots
}

/// Compile one equation against an unknown ordering: conj-normalize (in the
/// complex domain), scan occurrences and differentiate.
pub fn compile_equation(
    lhs: &Expr,
    rhs: Option<&Expr>,
    unknowns: &[UnknownSlot],
    domain: Domain,
    is_complex_ident: &dyn Fn(&str) -> bool,
) -> Result<CompiledEq, DiffError> {
    let text = match rhs {
        Some(r) => format!("{} = {}", print_expr(lhs), print_expr(r)),
        None => print_expr(lhs),
    };
    let raw = match rhs {
        Some(r) => Expr::sub(lhs.clone(), r.clone()),
        None => lhs.clone(),
    };
    let residual = match domain {
        Domain::Complex => normalize_conj(&raw, is_complex_ident),
        Domain::Real => crate::expr::simplify(&raw),
    };
    let wirt: Vec<WirtVar> = unknowns
        .iter()
        .map(|u| WirtVar {
            name: u.name.clone(),
            conj: u.conj,
        })
        .collect();
    let structure = crate::symbolic::jacobian_structure(std::slice::from_ref(&residual), &wirt)?;
    let partials = structure.entries.into_iter().next().unwrap_or_default();
    Ok(CompiledEq {
        residual,
        partials,
        text,
    })
}

/// One arm of a conditional equation site.
#[derive(Debug, Clone)]
pub struct CondArm {
    /// `None` marks the default/else arm.
    pub guard: Option<Expr>,
    pub eqs: Vec<CompiledEq>,
}

/// A conditional site in an equations group: exactly one arm is live per
/// iteration, chosen by evaluating the guards against the current env.
#[derive(Debug, Clone)]
pub struct CondSite {
    pub arms: Vec<CondArm>,
    pub rows: usize,
}

impl CondSite {
    /// Evaluate guards in order; the first true guard wins, otherwise the
    /// default arm.
    pub fn select(&self, env: &Env) -> Result<usize, EvalError> {
        let mut default = None;
        for (i, arm) in self.arms.iter().enumerate() {
            match &arm.guard {
                Some(g) => {
                    if evaluate(g, env)?.as_bool()? {
                        return Ok(i);
                    }
                }
                None => default = Some(i),
            }
        }
        default.ok_or_else(|| {
            EvalError::Domain("no switch case matched and no default arm is present".into())
        })
    }
}

#[derive(Debug, Clone)]
pub enum EqSite {
    Plain(CompiledEq),
    Conditional(CondSite),
}

impl EqSite {
    pub fn rows(&self) -> usize {
        match self {
            EqSite::Plain(_) => 1,
            EqSite::Conditional(site) => site.rows,
        }
    }
}

/// Numeric scalar bridge: extract a typed solver scalar from an evaluated
/// value.
pub trait SystemScalar: Scalar {
    fn from_value(v: Value) -> Result<Self, EvalError>;
    fn into_value(self) -> Value;
}

impl SystemScalar for f64 {
    fn from_value(v: Value) -> Result<Self, EvalError> {
        v.as_real()
    }
    fn into_value(self) -> Value {
        Value::Real(self)
    }
}

impl SystemScalar for Complex64 {
    fn from_value(v: Value) -> Result<Self, EvalError> {
        v.as_complex()
    }
    fn into_value(self) -> Value {
        Value::Complex(self)
    }
}

/// Evaluate an expression to a solver scalar, tagging failures with the
/// equation index.
pub fn eval_scalar<T: SystemScalar>(expr: &Expr, env: &Env, index: usize) -> Result<T, SolveError> {
    let v = evaluate(expr, env).map_err(|source| SolveError::Eval { index, source })?;
    T::from_value(v).map_err(|source| SolveError::Eval { index, source })
}
