//! Expression evaluation over an environment.
//!
//! The pure entry point [`evaluate`] rejects `rnd(...)`; the engine uses
//! [`evaluate_sampling`] for assignment expressions, which draws from the
//! run's random stream.

use num_complex::Complex64;

use crate::env::{sample, Env, RngStream};
use crate::error::EvalError;
use crate::expr::{BinOp, Expr, Func};
use crate::value::Value;

/// Evaluate a pure expression: every identifier must be bound in `env`,
/// and `rnd(...)` is an error.
pub fn evaluate(expr: &Expr, env: &Env) -> Result<Value, EvalError> {
    eval_inner(expr, env, &mut None)
}

/// Evaluate an assignment expression, drawing `rnd(...)` samples from `rng`.
/// `complex_domain` selects one draw (real) or two (complex) per sample.
pub fn evaluate_sampling(
    expr: &Expr,
    env: &Env,
    rng: &mut RngStream,
    complex_domain: bool,
) -> Result<Value, EvalError> {
    eval_inner(expr, env, &mut Some((rng, complex_domain)))
}

fn eval_inner(
    expr: &Expr,
    env: &Env,
    rng: &mut Option<(&mut RngStream, bool)>,
) -> Result<Value, EvalError> {
    match expr {
        Expr::Const(v) => Ok(*v),
        Expr::Ident(name) => env.value(name),
        Expr::Neg(a) => eval_inner(a, env, rng)?.neg(),
        Expr::Conj(a) => eval_inner(a, env, rng)?.conj(),
        Expr::Call(Func::Rnd, args) => {
            let dist_name = match &args[0] {
                Expr::Ident(n) => n.as_str(),
                _ => {
                    return Err(EvalError::Domain(
                        "rnd(...) expects a distribution name".into(),
                    ))
                }
            };
            let dist = env
                .dist(dist_name)
                .ok_or_else(|| EvalError::UnknownDistribution(dist_name.to_string()))?
                .clone();
            match rng {
                Some((stream, complex)) => sample(&dist, stream, *complex),
                None => Err(EvalError::RngUnavailable),
            }
        }
        Expr::Call(f, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval_inner(a, env, rng)?);
            }
            apply_func(*f, &vals)
        }
        Expr::Bin(op, a, b) => {
            let x = eval_inner(a, env, rng)?;
            let y = eval_inner(b, env, rng)?;
            match op {
                BinOp::Add => x.add(&y),
                BinOp::Sub => x.sub(&y),
                BinOp::Mul => x.mul(&y),
                BinOp::Div => x.div(&y),
                BinOp::Pow => x.pow(&y),
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    let ord = x.compare(&y)?;
                    Ok(Value::Bool(match op {
                        BinOp::Lt => ord == std::cmp::Ordering::Less,
                        BinOp::Le => ord != std::cmp::Ordering::Greater,
                        BinOp::Gt => ord == std::cmp::Ordering::Greater,
                        BinOp::Ge => ord != std::cmp::Ordering::Less,
                        _ => unreachable!(),
                    }))
                }
            }
        }
    }
}

/// Apply a built-in function to already-evaluated arguments. `rnd` is
/// handled by the evaluator and always errors here.
pub fn apply_func(f: Func, args: &[Value]) -> Result<Value, EvalError> {
    match f {
        Func::Rnd => Err(EvalError::RngUnavailable),
        Func::Abs => match args[0] {
            Value::Complex(z) => Ok(Value::Real(z.norm())),
            ref v => Ok(Value::Real(v.as_real()?.abs())),
        },
        Func::Real => match args[0] {
            Value::Complex(z) => Ok(Value::Real(z.re)),
            ref v => Ok(Value::Real(v.as_real()?)),
        },
        Func::Imag => match args[0] {
            Value::Complex(z) => Ok(Value::Real(z.im)),
            Value::Bool(_) => Err(EvalError::BoolInArithmetic),
            _ => Ok(Value::Real(0.0)),
        },
        Func::Sign => {
            let x = args[0]
                .as_real()
                .map_err(|_| EvalError::Domain("sign of a complex value is undefined".into()))?;
            if x == 0.0 {
                Err(EvalError::SignAtZero)
            } else {
                Ok(Value::Real(x.signum()))
            }
        }
        Func::Round => {
            let digits = args[1].as_real()?.round();
            let factor = 10f64.powf(digits);
            match args[0] {
                Value::Complex(z) => Ok(Value::Complex(Complex64::new(
                    (z.re * factor).round() / factor,
                    (z.im * factor).round() / factor,
                ))),
                ref v => Ok(Value::Real((v.as_real()? * factor).round() / factor)),
            }
        }
        Func::Disc => {
            let x = args[0].as_real()?;
            let center = args[1].as_real()?;
            let step = args[2].as_real()?;
            if step == 0.0 {
                return Err(EvalError::Domain("disc step must be nonzero".into()));
            }
            Ok(Value::Real(center + ((x - center) / step).round() * step))
        }
        // One-argument analytic functions: stay real for real input,
        // except where the result leaves the reals (sqrt/log/asin/acos of
        // out-of-range arguments go complex, MATLAB-style).
        _ => {
            let v = &args[0];
            match v {
                Value::Complex(z) => Ok(Value::Complex(apply_complex(f, *z))),
                Value::Bool(_) => Err(EvalError::BoolInArithmetic),
                _ => {
                    let x = v.as_real()?;
                    apply_real(f, x)
                }
            }
        }
    }
}

fn apply_real(f: Func, x: f64) -> Result<Value, EvalError> {
    let out_of_range = |cond: bool| -> Option<Value> {
        if cond {
            Some(Value::Complex(apply_complex(f, Complex64::new(x, 0.0))))
        } else {
            None
        }
    };
    Ok(match f {
        Func::Sin => Value::Real(x.sin()),
        Func::Cos => Value::Real(x.cos()),
        Func::Tan => Value::Real(x.tan()),
        Func::Asin => out_of_range(x.abs() > 1.0).unwrap_or(Value::Real(x.asin())),
        Func::Acos => out_of_range(x.abs() > 1.0).unwrap_or(Value::Real(x.acos())),
        Func::Atan => Value::Real(x.atan()),
        Func::Sqrt => out_of_range(x < 0.0).unwrap_or(Value::Real(x.sqrt())),
        Func::Exp => Value::Real(x.exp()),
        Func::Log => {
            if x == 0.0 {
                return Err(EvalError::Domain("log of zero".into()));
            }
            out_of_range(x < 0.0).unwrap_or(Value::Real(x.ln()))
        }
        _ => unreachable!("handled by apply_func"),
    })
}

fn apply_complex(f: Func, z: Complex64) -> Complex64 {
    match f {
        Func::Sin => z.sin(),
        Func::Cos => z.cos(),
        Func::Tan => z.tan(),
        Func::Asin => z.asin(),
        Func::Acos => z.acos(),
        Func::Atan => z.atan(),
        Func::Sqrt => z.sqrt(),
        Func::Exp => z.exp(),
        Func::Log => z.ln(),
        _ => unreachable!("handled by apply_func"),
    }
}
