//! Symbolic differentiation in real variables or via Wirtinger calculus in
//! complex variables, plus conjugate normalization, static scalar-type
//! inference and sparse Jacobian structure extraction.

use std::collections::HashMap;

use crate::ast::Domain;
use crate::error::{DiffError, EvalError};
use crate::expr::{simplify, BinOp, Expr, Func};
use crate::value::ScalarType;

// ----------------------------------------------------------------------
// Static type inference
// ----------------------------------------------------------------------

/// Infer the static scalar type of an expression. Identifiers must already
/// be typed in `types`; a miss is a forward reference and an error.
pub fn infer_type(
    expr: &Expr,
    types: &HashMap<String, ScalarType>,
    domain: Domain,
) -> Result<ScalarType, EvalError> {
    Ok(match expr {
        Expr::Const(v) => v.scalar_type(),
        Expr::Ident(name) => *types
            .get(name)
            .ok_or_else(|| EvalError::Unbound(name.clone()))?,
        Expr::Neg(a) => infer_type(a, types, domain)?,
        Expr::Conj(a) => infer_type(a, types, domain)?,
        Expr::Call(f, args) => match f {
            Func::Abs | Func::Real | Func::Imag | Func::Round | Func::Disc | Func::Sign => {
                for a in args {
                    infer_type(a, types, domain)?;
                }
                ScalarType::Real
            }
            Func::Rnd => match domain {
                Domain::Complex => ScalarType::Complex,
                Domain::Real => ScalarType::Real,
            },
            _ => infer_type(&args[0], types, domain)?.join(ScalarType::Real),
        },
        Expr::Bin(op, a, b) => {
            let ta = infer_type(a, types, domain)?;
            let tb = infer_type(b, types, domain)?;
            if op.is_comparison() {
                ScalarType::Bool
            } else {
                let t = ta.join(tb);
                // Division and exponentiation leave the integers.
                if matches!(op, BinOp::Div | BinOp::Pow) {
                    t.join(ScalarType::Real)
                } else {
                    t
                }
            }
        }
    })
}

// ----------------------------------------------------------------------
// Conjugate normalization
// ----------------------------------------------------------------------

/// Push conjugations down to atoms: conj distributes over sums, products,
/// quotients and (real-coefficient) analytic functions; conj(conj(v)) = v;
/// conj of a real-typed identifier is the identifier itself. The result
/// contains `Conj` only directly around complex identifiers.
///
/// In the same pass, `abs`, `real` and `imag` of complex subexpressions are
/// rewritten into conj arithmetic so equations containing them stay
/// differentiable:
///   abs(u)  -> sqrt(u * conj(u))
///   real(u) -> (u + conj(u)) / 2
///   imag(u) -> (u - conj(u)) / 2i
pub fn normalize_conj(expr: &Expr, is_complex_ident: &dyn Fn(&str) -> bool) -> Expr {
    let normalized = push_conj(expr, false, is_complex_ident);
    simplify(&normalized)
}

fn push_conj(expr: &Expr, conj: bool, is_cplx: &dyn Fn(&str) -> bool) -> Expr {
    match expr {
        Expr::Const(v) => {
            if conj {
                match v.conj() {
                    Ok(c) => Expr::Const(c),
                    Err(_) => Expr::Const(*v),
                }
            } else {
                Expr::Const(*v)
            }
        }
        Expr::Ident(name) => {
            if conj && is_cplx(name) {
                Expr::conj(Expr::Ident(name.clone()))
            } else {
                Expr::Ident(name.clone())
            }
        }
        Expr::Neg(a) => Expr::neg(push_conj(a, conj, is_cplx)),
        Expr::Conj(a) => push_conj(a, !conj, is_cplx),
        Expr::Bin(op, a, b) if !op.is_comparison() => Expr::bin(
            *op,
            push_conj(a, conj, is_cplx),
            push_conj(b, conj, is_cplx),
        ),
        // Guards are never conjugated; normalize their operands as-is.
        Expr::Bin(op, a, b) => Expr::bin(
            *op,
            push_conj(a, false, is_cplx),
            push_conj(b, false, is_cplx),
        ),
        Expr::Call(f, args) => {
            match f {
                // Real-valued builtins over complex arguments become conj
                // arithmetic; an outer conj on a real value is dropped.
                Func::Abs => {
                    let u = push_conj(&args[0], false, is_cplx);
                    let cu = push_conj(&args[0], true, is_cplx);
                    if u == cu {
                        // Argument is real-typed: keep plain abs.
                        Expr::call(Func::Abs, vec![u])
                    } else {
                        Expr::call(Func::Sqrt, vec![Expr::mul(u, cu)])
                    }
                }
                Func::Real => {
                    let u = push_conj(&args[0], false, is_cplx);
                    let cu = push_conj(&args[0], true, is_cplx);
                    if u == cu {
                        u
                    } else {
                        Expr::div(Expr::add(u, cu), Expr::real(2.0))
                    }
                }
                Func::Imag => {
                    let u = push_conj(&args[0], false, is_cplx);
                    let cu = push_conj(&args[0], true, is_cplx);
                    if u == cu {
                        Expr::real(0.0)
                    } else {
                        Expr::div(Expr::sub(u, cu), Expr::complex(0.0, 2.0))
                    }
                }
                // Stochastic/non-smooth builtins are real-valued here too;
                // conj passes through without touching the arguments.
                Func::Round | Func::Disc | Func::Rnd | Func::Sign => Expr::Call(
                    *f,
                    args.iter().map(|a| push_conj(a, false, is_cplx)).collect(),
                ),
                // Analytic functions with real coefficients commute with
                // conjugation: conj(f(z)) = f(conj(z)).
                _ => Expr::Call(
                    *f,
                    args.iter().map(|a| push_conj(a, conj, is_cplx)).collect(),
                ),
            }
        }
    }
}

// ----------------------------------------------------------------------
// Differentiation
// ----------------------------------------------------------------------

/// An unknown for Wirtinger differentiation: the variable itself or its
/// conjugate partner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WirtVar {
    pub name: String,
    pub conj: bool,
}

impl WirtVar {
    pub fn plain(name: impl Into<String>) -> Self {
        WirtVar {
            name: name.into(),
            conj: false,
        }
    }

    pub fn conjugate(name: impl Into<String>) -> Self {
        WirtVar {
            name: name.into(),
            conj: true,
        }
    }
}

/// Differentiate a real-domain expression with respect to `var`.
/// Non-smooth or stochastic builtins (round/disc/rnd) are rejected.
pub fn diff_real(expr: &Expr, var: &str) -> Result<Expr, DiffError> {
    let d = diff(expr, &WirtVar::plain(var))?;
    Ok(simplify(&d))
}

/// Wirtinger derivative: `v` and `conj(v)` are formally independent, so
/// d v/d v = 1, d conj(v)/d v = 0 and vice versa. The expression must be
/// conjugate-normalized first.
pub fn diff_wirtinger(expr: &Expr, wrt: &WirtVar) -> Result<Expr, DiffError> {
    let d = diff(expr, wrt)?;
    Ok(simplify(&d))
}

fn diff(expr: &Expr, wrt: &WirtVar) -> Result<Expr, DiffError> {
    Ok(match expr {
        Expr::Const(_) => Expr::real(0.0),
        Expr::Ident(name) => {
            if !wrt.conj && *name == wrt.name {
                Expr::real(1.0)
            } else {
                Expr::real(0.0)
            }
        }
        Expr::Conj(inner) => match inner.as_ref() {
            Expr::Ident(name) => {
                if wrt.conj && *name == wrt.name {
                    Expr::real(1.0)
                } else {
                    Expr::real(0.0)
                }
            }
            _ => return Err(DiffError::NotNormalized),
        },
        Expr::Neg(a) => Expr::neg(diff(a, wrt)?),
        Expr::Bin(op, a, b) => {
            let da = || diff(a, wrt);
            let db = || diff(b, wrt);
            match op {
                BinOp::Add => Expr::add(da()?, db()?),
                BinOp::Sub => Expr::sub(da()?, db()?),
                BinOp::Mul => Expr::add(
                    Expr::mul(da()?, (**b).clone()),
                    Expr::mul((**a).clone(), db()?),
                ),
                BinOp::Div => Expr::div(
                    Expr::sub(
                        Expr::mul(da()?, (**b).clone()),
                        Expr::mul((**a).clone(), db()?),
                    ),
                    Expr::pow((**b).clone(), Expr::real(2.0)),
                ),
                BinOp::Pow => {
                    let u = (**a).clone();
                    let v = (**b).clone();
                    match (&u, &v) {
                        // Constant exponent: c*u^(c-1)*u'.
                        (_, Expr::Const(_)) => Expr::mul(
                            Expr::mul(
                                v.clone(),
                                Expr::pow(u.clone(), Expr::sub(v.clone(), Expr::real(1.0))),
                            ),
                            da()?,
                        ),
                        // Constant base: c^v * ln(c) * v'.
                        (Expr::Const(_), _) => Expr::mul(
                            Expr::mul(
                                Expr::pow(u.clone(), v.clone()),
                                Expr::call(Func::Log, vec![u.clone()]),
                            ),
                            db()?,
                        ),
                        // General case: u^v * (v'*ln(u) + v*u'/u).
                        _ => Expr::mul(
                            Expr::pow(u.clone(), v.clone()),
                            Expr::add(
                                Expr::mul(db()?, Expr::call(Func::Log, vec![u.clone()])),
                                Expr::div(Expr::mul(v.clone(), da()?), u.clone()),
                            ),
                        ),
                    }
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    return Err(DiffError::NonDifferentiable("comparison"))
                }
            }
        }
        Expr::Call(f, args) => {
            let u = args[0].clone();
            let du = diff(&args[0], wrt)?;
            match f {
                Func::Sin => Expr::mul(Expr::call(Func::Cos, vec![u]), du),
                Func::Cos => Expr::neg(Expr::mul(Expr::call(Func::Sin, vec![u]), du)),
                Func::Tan => Expr::div(
                    du,
                    Expr::pow(Expr::call(Func::Cos, vec![u]), Expr::real(2.0)),
                ),
                Func::Asin => Expr::div(
                    du,
                    Expr::call(
                        Func::Sqrt,
                        vec![Expr::sub(Expr::real(1.0), Expr::pow(u, Expr::real(2.0)))],
                    ),
                ),
                Func::Acos => Expr::neg(Expr::div(
                    du,
                    Expr::call(
                        Func::Sqrt,
                        vec![Expr::sub(Expr::real(1.0), Expr::pow(u, Expr::real(2.0)))],
                    ),
                )),
                Func::Atan => Expr::div(
                    du,
                    Expr::add(Expr::real(1.0), Expr::pow(u, Expr::real(2.0))),
                ),
                Func::Sqrt => Expr::div(
                    du,
                    Expr::mul(Expr::real(2.0), Expr::call(Func::Sqrt, vec![u])),
                ),
                Func::Exp => Expr::mul(Expr::call(Func::Exp, vec![u]), du),
                Func::Log => Expr::div(du, u),
                // d|u| = sign(u)*u'; evaluation errors at u = 0.
                Func::Abs => Expr::mul(Expr::call(Func::Sign, vec![u]), du),
                Func::Real => du,
                Func::Imag => Expr::real(0.0),
                Func::Sign => Expr::real(0.0),
                Func::Round => return Err(DiffError::NonDifferentiable("round")),
                Func::Disc => return Err(DiffError::NonDifferentiable("disc")),
                Func::Rnd => return Err(DiffError::NonDifferentiable("rnd")),
            }
        }
    })
}

// ----------------------------------------------------------------------
// Jacobian structure
// ----------------------------------------------------------------------

/// Symbolic sparse Jacobian: one entry per (equation, unknown) pair where
/// the unknown actually occurs in the equation after conj-normalization.
#[derive(Debug, Clone)]
pub struct JacobianStructure {
    pub rows: usize,
    pub cols: usize,
    /// Per row: (column, symbolic partial), columns ascending.
    pub entries: Vec<Vec<(usize, Expr)>>,
}

impl JacobianStructure {
    pub fn nnz(&self) -> usize {
        self.entries.iter().map(|r| r.len()).sum()
    }

    /// Sparsity pattern as (row, col) pairs, row-major.
    pub fn pattern(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.nnz());
        for (i, row) in self.entries.iter().enumerate() {
            for (j, _) in row {
                out.push((i, *j));
            }
        }
        out
    }
}

/// Build the symbolic Jacobian of `equations` with respect to `unknowns`.
/// Entries exist exactly where the unknown occurs in the equation; they are
/// differentiated once here and re-evaluated numerically per iteration.
pub fn jacobian_structure(
    equations: &[Expr],
    unknowns: &[WirtVar],
) -> Result<JacobianStructure, DiffError> {
    let col_of: HashMap<(&str, bool), usize> = unknowns
        .iter()
        .enumerate()
        .map(|(j, u)| ((u.name.as_str(), u.conj), j))
        .collect();
    let mut entries = Vec::with_capacity(equations.len());
    for eq in equations {
        let mut cols: Vec<usize> = Vec::new();
        eq.visit_idents(&mut |name, under_conj| {
            if let Some(&j) = col_of.get(&(name, under_conj)) {
                if !cols.contains(&j) {
                    cols.push(j);
                }
            }
        });
        cols.sort_unstable();
        let mut row = Vec::with_capacity(cols.len());
        for j in cols {
            let d = diff_wirtinger(eq, &unknowns[j])?;
            row.push((j, d));
        }
        entries.push(row);
    }
    Ok(JacobianStructure {
        rows: equations.len(),
        cols: unknowns.len(),
        entries,
    })
}
