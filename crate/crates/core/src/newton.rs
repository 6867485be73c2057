//! Sparse Newton-Raphson for square nonlinear systems in real or complex
//! (conjugate-paired) unknowns.
//!
//! Guards of conditional equation sites are re-evaluated every iteration, so
//! arms may switch mid-solve. In the complex domain only the primary slot of
//! each (v, conj v) pair lives in the environment; conjugate slots are
//! derived from it, which enforces exact (bitwise) conjugacy at every
//! iterate.

use num_complex::Complex64;

use crate::ast::Domain;
use crate::env::Env;
use crate::error::{Error, SolveError};
use crate::sparse::{linear_solve, Triplets};
use crate::system::{eval_scalar, CompiledEq, EqSite, SystemScalar, UnknownSlot};
use crate::value::Value;

/// A compiled square nonlinear system.
#[derive(Debug, Clone)]
pub struct NlSystem {
    pub unknowns: Vec<UnknownSlot>,
    pub sites: Vec<EqSite>,
    pub domain: Domain,
}

impl NlSystem {
    pub fn rows(&self) -> usize {
        self.sites.iter().map(|s| s.rows()).sum()
    }

    /// Active arm index per conditional site under the current env.
    pub fn select_arms(&self, env: &Env) -> Result<Vec<usize>, SolveError> {
        let mut arms = Vec::new();
        for (i, site) in self.sites.iter().enumerate() {
            if let EqSite::Conditional(c) = site {
                let a = c
                    .select(env)
                    .map_err(|source| SolveError::Eval { index: i, source })?;
                arms.push(a);
            }
        }
        Ok(arms)
    }

    /// The live equations under an arm selection, in row order.
    pub fn active_rows<'a>(&'a self, arms: &[usize]) -> Vec<&'a CompiledEq> {
        let mut rows = Vec::with_capacity(self.rows());
        let mut ai = 0;
        for site in &self.sites {
            match site {
                EqSite::Plain(eq) => rows.push(eq),
                EqSite::Conditional(c) => {
                    let arm = &c.arms[arms[ai]];
                    ai += 1;
                    rows.extend(arm.eqs.iter());
                }
            }
        }
        rows
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub eps: f64,
    pub max_iter: usize,
    /// Record per-iteration residual norms and arm selections.
    pub trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eps: 1e-6,
            max_iter: 100,
            trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub residual_norm: f64,
    pub arms: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub converged: bool,
    pub iterations: usize,
    /// Residual inf-norm at the final iterate.
    pub residual_norm: f64,
    /// Final unknowns, conjugate slots materialized.
    pub unknowns: Vec<(String, Value)>,
    pub trace: Vec<IterationRecord>,
    /// Arm selection at the final iterate.
    pub final_arms: Vec<usize>,
    /// Set when a non-converged run kept flipping conditional arms.
    pub arm_oscillation: bool,
    pub jacobian_dim: usize,
    pub jacobian_nnz: usize,
}

/// Evaluate residual vector and numeric Jacobian for the active arms.
/// Returns row-major residuals and triplets for the sparse Jacobian.
pub fn assemble<T: SystemScalar>(
    rows: &[&CompiledEq],
    n: usize,
    env: &Env,
) -> Result<(Vec<T>, Triplets<T>), SolveError> {
    let mut r = Vec::with_capacity(rows.len());
    let mut jac = Triplets::new(rows.len(), n);
    for (i, eq) in rows.iter().enumerate() {
        r.push(eval_scalar::<T>(&eq.residual, env, i)?);
        for (j, partial) in &eq.partials {
            jac.push(i, *j, eval_scalar::<T>(partial, env, i)?);
        }
    }
    Ok((r, jac))
}

fn inf_norm<T: SystemScalar>(v: &[T]) -> f64 {
    // NaN reads as infinity so a diverged iterate can never pass as
    // converged (f64::max would otherwise discard the NaN).
    v.iter()
        .map(|x| {
            let m = x.modulus();
            if m.is_nan() {
                f64::INFINITY
            } else {
                m
            }
        })
        .fold(0.0f64, f64::max)
}

/// Newton iteration: x <- x - J^-1 r until the residual inf-norm is at most
/// `eps`. `iter_hook` runs after every iteration (IterPostP assignments).
pub fn newton_solve(
    system: &NlSystem,
    env: &mut Env,
    opts: &SolveOptions,
    iter_hook: &mut dyn FnMut(&mut Env, usize) -> Result<(), Error>,
) -> Result<SolveResult, Error> {
    let n = system.unknowns.len();
    let rows = system.rows();
    if rows != n {
        return Err(SolveError::NotSquare {
            equations: rows,
            unknowns: n,
        }
        .into());
    }
    match system.domain {
        Domain::Real => newton_loop::<f64>(system, env, opts, iter_hook),
        Domain::Complex => newton_loop::<Complex64>(system, env, opts, iter_hook),
    }
}

fn newton_loop<T: SystemScalar>(
    system: &NlSystem,
    env: &mut Env,
    opts: &SolveOptions,
    iter_hook: &mut dyn FnMut(&mut Env, usize) -> Result<(), Error>,
) -> Result<SolveResult, Error> {
    let n = system.unknowns.len();
    let mut trace = Vec::new();
    let mut arm_history: Vec<Vec<usize>> = Vec::new();
    let mut iterations = 0;

    let (converged, residual_norm, final_arms, jac_nnz) = loop {
        let arms = system.select_arms(env)?;
        let rows = system.active_rows(&arms);
        let (r, jac) = assemble::<T>(&rows, n, env)?;
        let residual_norm = inf_norm(&r);
        if opts.trace {
            trace.push(IterationRecord {
                residual_norm,
                arms: arms.clone(),
            });
        }
        arm_history.push(arms.clone());
        if residual_norm <= opts.eps {
            break (true, residual_norm, arms, jac.nnz());
        }
        if iterations >= opts.max_iter {
            break (false, residual_norm, arms, jac.nnz());
        }
        let neg_r: Vec<T> = r.iter().map(|x| -*x).collect();
        let delta = linear_solve(&jac.to_csc(), &neg_r).map_err(|e| match e {
            SolveError::Singular { row } => SolveError::SingularJacobian {
                iteration: iterations,
                row,
            },
            other => other,
        })?;
        // Apply the step to primary slots; conjugate slots follow exactly.
        for (j, slot) in system.unknowns.iter().enumerate() {
            if slot.conj {
                continue;
            }
            let current = env
                .value(&slot.name)
                .map_err(|source| SolveError::Eval { index: j, source })?;
            let cur =
                T::from_value(current).map_err(|source| SolveError::Eval { index: j, source })?;
            let next = cur + delta[j];
            env.set(&slot.name, next.into_value())
                .map_err(|source| SolveError::Eval { index: j, source })?;
        }
        iterations += 1;
        iter_hook(env, iterations)?;
    };

    // Oscillation marker: a non-converged run whose arm selection was still
    // changing near the end.
    let arm_oscillation = !converged
        && arm_history.len() >= 2
        && arm_history.windows(2).rev().take(3).any(|w| w[0] != w[1]);

    let unknowns = materialize_unknowns(&system.unknowns, env)?;
    Ok(SolveResult {
        converged,
        iterations,
        residual_norm,
        unknowns,
        trace,
        final_arms,
        arm_oscillation,
        jacobian_dim: n,
        jacobian_nnz: jac_nnz,
    })
}

/// Final unknown vector with conjugate slots filled in from their primaries.
pub fn materialize_unknowns(
    slots: &[UnknownSlot],
    env: &Env,
) -> Result<Vec<(String, Value)>, Error> {
    let mut out = Vec::with_capacity(slots.len());
    for slot in slots {
        let v = env.value(&slot.name)?;
        let v = if slot.conj { v.conj()? } else { v };
        out.push((slot.label(), v));
    }
    Ok(out)
}
