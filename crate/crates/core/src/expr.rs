//! Symbolic expression trees.
//!
//! An `Expr` holds model equations and assignment right-hand sides in
//! symbolic form: constants, identifiers, unary negation, built-in function
//! applications, binary arithmetic/comparisons, and an explicit conjugation
//! node used by the complex-domain machinery.

use num_complex::Complex64;

use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinOp {
    pub fn text(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }
}

/// Built-in functions, MATLAB-style syntax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Asin,
    Acos,
    Atan,
    Sqrt,
    Exp,
    Log,
    Abs,
    Real,
    Imag,
    /// round(x, n): round to n decimal digits.
    Round,
    /// disc(x, center, step): snap to the nearest discrete step.
    Disc,
    /// rnd(dist): draw from a named distribution.
    Rnd,
    /// sign(x): appears in derivatives of abs; undefined at 0.
    Sign,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "asin" => Func::Asin,
            "acos" => Func::Acos,
            "atan" => Func::Atan,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "real" => Func::Real,
            "imag" => Func::Imag,
            "round" => Func::Round,
            "disc" => Func::Disc,
            "rnd" => Func::Rnd,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Asin => "asin",
            Func::Acos => "acos",
            Func::Atan => "atan",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Real => "real",
            Func::Imag => "imag",
            Func::Round => "round",
            Func::Disc => "disc",
            Func::Rnd => "rnd",
            Func::Sign => "sign",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Round => 2,
            Func::Disc => 3,
            _ => 1,
        }
    }

    /// Functions that are non-smooth or stochastic. They may appear only in
    /// assignment expressions, never in NLEs/WLSEs/ECs.
    pub fn is_non_differentiable(self) -> bool {
        matches!(self, Func::Round | Func::Disc | Func::Rnd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Value),
    Ident(String),
    Neg(Box<Expr>),
    Conj(Box<Expr>),
    Call(Func, Vec<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn real(x: f64) -> Expr {
        Expr::Const(Value::Real(x))
    }

    pub fn complex(re: f64, im: f64) -> Expr {
        Expr::Const(Value::Complex(Complex64::new(re, im)))
    }

    pub fn ident(name: impl Into<String>) -> Expr {
        Expr::Ident(name.into())
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Div, a, b)
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Pow, a, b)
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn conj(a: Expr) -> Expr {
        Expr::Conj(Box::new(a))
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Expr {
        Expr::Call(f, args)
    }

    pub fn is_zero(&self) -> bool {
        matches!(
            self,
            Expr::Const(Value::Real(x)) if *x == 0.0
        ) || matches!(self, Expr::Const(Value::Int(0)))
            || matches!(self, Expr::Const(Value::Complex(z)) if z.re == 0.0 && z.im == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(Value::Real(x)) if *x == 1.0)
            || matches!(self, Expr::Const(Value::Int(1)))
            || matches!(self, Expr::Const(Value::Complex(z)) if z.re == 1.0 && z.im == 0.0)
    }

    /// Collect every identifier occurring in the expression. `under_conj`
    /// distinguishes occurrences inside a `conj(...)` wrapper, which matter
    /// for the complex-domain sparsity pattern.
    pub fn visit_idents(&self, f: &mut impl FnMut(&str, bool)) {
        self.visit_idents_inner(f, false)
    }

    fn visit_idents_inner(&self, f: &mut impl FnMut(&str, bool), under_conj: bool) {
        match self {
            Expr::Const(_) => {}
            Expr::Ident(name) => f(name, under_conj),
            Expr::Neg(a) => a.visit_idents_inner(f, under_conj),
            Expr::Conj(a) => a.visit_idents_inner(f, !under_conj),
            Expr::Call(_, args) => {
                for a in args {
                    a.visit_idents_inner(f, under_conj);
                }
            }
            Expr::Bin(_, a, b) => {
                a.visit_idents_inner(f, under_conj);
                b.visit_idents_inner(f, under_conj);
            }
        }
    }

    /// True if `name` occurs anywhere in the expression.
    pub fn mentions(&self, name: &str) -> bool {
        let mut found = false;
        self.visit_idents(&mut |n, _| {
            if n == name {
                found = true;
            }
        });
        found
    }

    /// True if a non-differentiable builtin (round/disc/rnd) occurs anywhere.
    pub fn has_non_differentiable(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Ident(_) => false,
            Expr::Neg(a) | Expr::Conj(a) => a.has_non_differentiable(),
            Expr::Call(f, args) => {
                f.is_non_differentiable() || args.iter().any(|a| a.has_non_differentiable())
            }
            Expr::Bin(_, a, b) => a.has_non_differentiable() || b.has_non_differentiable(),
        }
    }
}

/// Constant folding and 0/1 identities. No polynomial canonicalization, so
/// derivative trees stay predictable.
pub fn simplify(expr: &Expr) -> Expr {
    match expr {
        Expr::Const(_) | Expr::Ident(_) => expr.clone(),
        Expr::Neg(a) => {
            let a = simplify(a);
            match a {
                Expr::Const(v) => match v.neg() {
                    Ok(n) => Expr::Const(n),
                    Err(_) => Expr::neg(Expr::Const(v)),
                },
                Expr::Neg(inner) => *inner,
                other => Expr::neg(other),
            }
        }
        Expr::Conj(a) => {
            let a = simplify(a);
            match a {
                Expr::Const(v) => match v.conj() {
                    Ok(c) => Expr::Const(c),
                    Err(_) => Expr::conj(Expr::Const(v)),
                },
                Expr::Conj(inner) => *inner,
                other => Expr::conj(other),
            }
        }
        Expr::Call(f, args) => {
            let args: Vec<Expr> = args.iter().map(simplify).collect();
            // Fold pure functions of constants (never rnd).
            if *f != Func::Rnd && args.iter().all(|a| matches!(a, Expr::Const(_))) {
                let vals: Vec<Value> = args
                    .iter()
                    .map(|a| match a {
                        Expr::Const(v) => *v,
                        _ => unreachable!(),
                    })
                    .collect();
                if let Ok(v) = crate::eval::apply_func(*f, &vals) {
                    return Expr::Const(v);
                }
            }
            Expr::Call(*f, args)
        }
        Expr::Bin(op, a, b) => {
            let a = simplify(a);
            let b = simplify(b);
            if let (Expr::Const(x), Expr::Const(y)) = (&a, &b) {
                let folded = match op {
                    BinOp::Add => x.add(y),
                    BinOp::Sub => x.sub(y),
                    BinOp::Mul => x.mul(y),
                    BinOp::Div => x.div(y),
                    BinOp::Pow => x.pow(y),
                    _ => Err(crate::error::EvalError::Domain("comparison".into())),
                };
                if let Ok(v) = folded {
                    return Expr::Const(v);
                }
            }
            match op {
                BinOp::Add => {
                    if a.is_zero() {
                        return b;
                    }
                    if b.is_zero() {
                        return a;
                    }
                    Expr::bin(*op, a, b)
                }
                BinOp::Sub => {
                    if b.is_zero() {
                        return a;
                    }
                    if a.is_zero() {
                        return simplify(&Expr::neg(b));
                    }
                    Expr::bin(*op, a, b)
                }
                BinOp::Mul => {
                    if a.is_zero() || b.is_zero() {
                        return Expr::real(0.0);
                    }
                    if a.is_one() {
                        return b;
                    }
                    if b.is_one() {
                        return a;
                    }
                    Expr::bin(*op, a, b)
                }
                BinOp::Div => {
                    if a.is_zero() && !b.is_zero() {
                        return Expr::real(0.0);
                    }
                    if b.is_one() {
                        return a;
                    }
                    Expr::bin(*op, a, b)
                }
                BinOp::Pow => {
                    if b.is_one() {
                        return a;
                    }
                    if b.is_zero() {
                        return Expr::real(1.0);
                    }
                    Expr::bin(*op, a, b)
                }
                _ => Expr::bin(*op, a, b),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplify_identities() {
        let x = Expr::ident("x");
        assert_eq!(simplify(&Expr::add(x.clone(), Expr::real(0.0))), x);
        assert_eq!(simplify(&Expr::mul(Expr::real(1.0), x.clone())), x);
        assert_eq!(
            simplify(&Expr::mul(Expr::real(0.0), x.clone())),
            Expr::real(0.0)
        );
        assert_eq!(simplify(&Expr::pow(x.clone(), Expr::real(1.0))), x);
        assert_eq!(simplify(&Expr::neg(Expr::neg(x.clone()))), x);
    }

    #[test]
    fn constant_folding() {
        let e = Expr::mul(Expr::real(2.0), Expr::real(3.0));
        assert_eq!(simplify(&e), Expr::real(6.0));
        let c = Expr::conj(Expr::complex(1.0, 2.0));
        assert_eq!(simplify(&c), Expr::complex(1.0, -2.0));
    }

    #[test]
    fn conj_involution() {
        let x = Expr::ident("x");
        assert_eq!(simplify(&Expr::conj(Expr::conj(x.clone()))), x);
    }

    #[test]
    fn occurrence_scan_tracks_conj() {
        let e = Expr::mul(Expr::ident("v2"), Expr::conj(Expr::ident("v3")));
        let mut plain = vec![];
        let mut conjed = vec![];
        e.visit_idents(&mut |n, c| {
            if c {
                conjed.push(n.to_string())
            } else {
                plain.push(n.to_string())
            }
        });
        assert_eq!(plain, vec!["v2"]);
        assert_eq!(conjed, vec!["v3"]);
    }
}
