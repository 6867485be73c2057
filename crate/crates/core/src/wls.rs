//! Gauss-Newton weighted least-squares state estimation via the normal
//! equations, with optional equality constraints handled through Lagrange
//! multipliers.
//!
//! Per iteration, with H the measurement Jacobian, C the constraint
//! Jacobian, W = diag(w), r = z - h(x) and c = -g(x), the augmented system
//!
//! ```text
//! [ H'WH  C' ] [dx]   [ H'W r ]
//! [ C     0  ] [mu] = [   c   ]
//! ```
//!
//! is solved and x updated by dx until the step inf-norm drops to eps. In
//! the complex domain the transposes are conjugate transposes and the
//! Wirtinger Jacobians are paired with conjugacy enforcement exactly as in
//! the Newton solver. Reported multipliers are sign-flipped so that
//! H'W r + C' lambda vanishes at a KKT point.

use num_complex::Complex64;

use crate::ast::Domain;
use crate::env::Env;
use crate::error::{Error, EvalError, SolveError};
use crate::eval::evaluate;
use crate::sparse::{linear_solve, Triplets};
use crate::system::{eval_scalar, CompiledEq, SystemScalar, UnknownSlot};
use crate::value::Value;

/// Weight of a measurement: a literal or a parameter reference, resolved
/// against the env at solve time.
#[derive(Debug, Clone)]
pub enum Weight {
    Const(f64),
    Param(String),
}

impl Weight {
    pub fn resolve(&self, env: &Env) -> Result<f64, EvalError> {
        let w = match self {
            Weight::Const(w) => *w,
            Weight::Param(name) => env.value(name)?.as_real()?,
        };
        if w <= 0.0 || !w.is_finite() {
            return Err(EvalError::Domain(format!(
                "measurement weight must be a positive real, got {w}"
            )));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone)]
pub struct Measurement {
    pub eq: CompiledEq,
    pub weight: Weight,
}

/// A compiled estimation problem.
#[derive(Debug, Clone)]
pub struct WlsSystem {
    pub unknowns: Vec<UnknownSlot>,
    pub measurements: Vec<Measurement>,
    pub constraints: Vec<CompiledEq>,
    pub domain: Domain,
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub converged: bool,
    pub iterations: usize,
    /// Step inf-norm of the last iteration.
    pub step_norm: f64,
    /// Final state, conjugate slots materialized.
    pub state: Vec<(String, Value)>,
    /// Lagrange multipliers (sign convention: H'W r + C' lambda = 0).
    pub multipliers: Vec<Value>,
    /// Per-measurement residuals r_i = z_i - h_i(x) at the solution.
    pub residuals: Vec<Value>,
    /// Weighted residual sum J(x) = sum w_i |r_i|^2.
    pub weighted_sum: f64,
    /// Largest equality-constraint residual magnitude at the solution.
    pub constraint_norm: f64,
    /// KKT stationarity norm ||H'W r + C' lambda||_inf at the solution.
    pub kkt_norm: f64,
    pub trace: Vec<f64>,
}

pub fn gauss_newton_wls(
    system: &WlsSystem,
    env: &mut Env,
    opts: &crate::newton::SolveOptions,
    iter_hook: &mut dyn FnMut(&mut Env, usize) -> Result<(), Error>,
) -> Result<EstimateResult, Error> {
    match system.domain {
        Domain::Real => wls_loop::<f64>(system, env, opts, iter_hook),
        Domain::Complex => wls_loop::<Complex64>(system, env, opts, iter_hook),
    }
}

struct LinearizedWls<T> {
    /// Dense measurement Jacobian rows (m x n), kept sparse per row.
    h_rows: Vec<Vec<(usize, T)>>,
    /// Constraint Jacobian rows (c x n).
    c_rows: Vec<Vec<(usize, T)>>,
    /// r = z - h(x) = -residual.
    r: Vec<T>,
    /// c = -g(x).
    c: Vec<T>,
    weights: Vec<f64>,
}

fn linearize<T: SystemScalar>(
    system: &WlsSystem,
    env: &Env,
) -> Result<LinearizedWls<T>, SolveError> {
    let mut h_rows = Vec::with_capacity(system.measurements.len());
    let mut r = Vec::with_capacity(system.measurements.len());
    let mut weights = Vec::with_capacity(system.measurements.len());
    for (i, m) in system.measurements.iter().enumerate() {
        let weight = m
            .weight
            .resolve(env)
            .map_err(|source| SolveError::Eval { index: i, source })?;
        weights.push(weight);
        r.push(-eval_scalar::<T>(&m.eq.residual, env, i)?);
        let mut row = Vec::with_capacity(m.eq.partials.len());
        for (j, partial) in &m.eq.partials {
            row.push((*j, eval_scalar::<T>(partial, env, i)?));
        }
        h_rows.push(row);
    }
    let mut c_rows = Vec::with_capacity(system.constraints.len());
    let mut c = Vec::with_capacity(system.constraints.len());
    for (i, g) in system.constraints.iter().enumerate() {
        c.push(-eval_scalar::<T>(&g.residual, env, i)?);
        let mut row = Vec::with_capacity(g.partials.len());
        for (j, partial) in &g.partials {
            row.push((*j, eval_scalar::<T>(partial, env, i)?));
        }
        c_rows.push(row);
    }
    Ok(LinearizedWls {
        h_rows,
        c_rows,
        r,
        c,
        weights,
    })
}

/// Gain block H'WH plus constraint borders, assembled as triplets.
fn augmented_system<T: SystemScalar>(lin: &LinearizedWls<T>, n: usize) -> (Triplets<T>, Vec<T>) {
    let ncons = lin.c_rows.len();
    let dim = n + ncons;
    let mut a = Triplets::new(dim, dim);
    let mut rhs = vec![T::zero(); dim];
    // H'WH and H'W r, accumulated row by row (rank-one contributions).
    for (row, (&w, r_i)) in lin.h_rows.iter().zip(lin.weights.iter().zip(&lin.r)) {
        for &(j, hj) in row {
            let wh = hj.conj_s();
            for &(k, hk) in row {
                // (H'WH)[j,k] += conj(H[i,j]) * w * H[i,k]
                a.push(j, k, wh * scale(hk, w));
            }
            rhs[j] = rhs[j] + wh * scale(*r_i, w);
        }
    }
    // Borders C and C', and the constraint right-hand side.
    for (i, row) in lin.c_rows.iter().enumerate() {
        for &(j, cj) in row {
            a.push(n + i, j, cj);
            a.push(j, n + i, cj.conj_s());
        }
        rhs[n + i] = lin.c[i];
    }
    (a, rhs)
}

fn scale<T: SystemScalar>(x: T, w: f64) -> T {
    let wv = T::from_value(Value::Real(w)).expect("real weight");
    wv * x
}

fn wls_loop<T: SystemScalar>(
    system: &WlsSystem,
    env: &mut Env,
    opts: &crate::newton::SolveOptions,
    iter_hook: &mut dyn FnMut(&mut Env, usize) -> Result<(), Error>,
) -> Result<EstimateResult, Error> {
    let n = system.unknowns.len();
    let mut iterations = 0;
    let mut trace = Vec::new();

    let (converged, step_norm, multipliers) = loop {
        let lin = linearize::<T>(system, env)?;
        let (a, rhs) = augmented_system(&lin, n);
        let sol = linear_solve(&a.to_csc(), &rhs).map_err(|e| match e {
            SolveError::Singular { row } => SolveError::Unobservable {
                block: if row < n { "gain" } else { "constraint" },
            },
            other => other,
        })?;
        // Step over primary slots only; conjugate slots mirror them.
        let step_norm = system
            .unknowns
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.conj)
            .map(|(j, _)| {
                let m = sol[j].modulus();
                if m.is_nan() {
                    f64::INFINITY
                } else {
                    m
                }
            })
            .fold(0.0f64, f64::max);
        if opts.trace {
            trace.push(step_norm);
        }
        // Sign flip so that H'W r + C' lambda = 0 at stationarity.
        let multipliers: Vec<T> = sol[n..].iter().map(|m| -*m).collect();
        for (j, slot) in system.unknowns.iter().enumerate() {
            if slot.conj {
                continue;
            }
            let cur = T::from_value(env.value(&slot.name)?)
                .map_err(|source| SolveError::Eval { index: j, source })?;
            env.set(&slot.name, (cur + sol[j]).into_value())?;
        }
        iterations += 1;
        iter_hook(env, iterations)?;
        if step_norm <= opts.eps {
            break (true, step_norm, multipliers);
        }
        if iterations >= opts.max_iter {
            break (false, step_norm, multipliers);
        }
    };

    // Final diagnostics at the converged (or last) state.
    let lin = linearize::<T>(system, env)?;
    let weighted_sum = lin
        .r
        .iter()
        .zip(&lin.weights)
        .map(|(r, w)| w * r.modulus() * r.modulus())
        .sum();
    let constraint_norm = lin.c.iter().map(|c| c.modulus()).fold(0.0f64, f64::max);
    let kkt = {
        let mut g = vec![T::zero(); n];
        for (row, (&w, r_i)) in lin.h_rows.iter().zip(lin.weights.iter().zip(&lin.r)) {
            for &(j, hj) in row {
                g[j] = g[j] + hj.conj_s() * scale(*r_i, w);
            }
        }
        for (i, row) in lin.c_rows.iter().enumerate() {
            for &(j, cj) in row {
                g[j] = g[j] + cj.conj_s() * multipliers[i];
            }
        }
        g.iter().map(|x| x.modulus()).fold(0.0f64, f64::max)
    };

    // Convergence additionally demands feasibility: every equality
    // constraint satisfied to eps at the final state.
    let converged = converged && constraint_norm <= opts.eps;

    let state = crate::newton::materialize_unknowns(&system.unknowns, env)?;
    Ok(EstimateResult {
        converged,
        iterations,
        step_norm,
        state,
        multipliers: multipliers.into_iter().map(|m| m.into_value()).collect(),
        residuals: lin.r.iter().map(|r| r.into_value()).collect(),
        weighted_sum,
        constraint_norm,
        kkt_norm: kkt,
        trace,
    })
}

/// Per-measurement residual table: (equation text, weight, residual,
/// weighted squared residual), plus the total J(x).
pub fn residual_report(
    result: &EstimateResult,
    system: &WlsSystem,
    env: &Env,
) -> Result<(Vec<(String, f64, Value, f64)>, f64), Error> {
    let mut rows = Vec::with_capacity(system.measurements.len());
    for (m, r) in system.measurements.iter().zip(&result.residuals) {
        let w = m.weight.resolve(env)?;
        let mag = match r {
            Value::Complex(z) => z.norm(),
            other => other.as_real()?.abs(),
        };
        rows.push((m.eq.text.clone(), w, *r, w * mag * mag));
    }
    Ok((rows, result.weighted_sum))
}

/// Convenience: evaluate an equation residual as a plain value (used by
/// reports and tests).
pub fn residual_value(eq: &CompiledEq, env: &Env) -> Result<Value, EvalError> {
    evaluate(&eq.residual, env)
}
