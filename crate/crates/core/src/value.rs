//! Runtime values and scalar type tags.
//!
//! Arithmetic promotes int -> real -> complex. Booleans exist only as guard
//! results and boolean parameters; using one in arithmetic is an error.

use std::fmt;

use num_complex::Complex64;

use crate::error::EvalError;

/// Static type tag attached to every parameter and variable slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
    Real,
    Complex,
    Int,
    Bool,
}

impl ScalarType {
    pub fn name(self) -> &'static str {
        match self {
            ScalarType::Real => "real",
            ScalarType::Complex => "complex",
            ScalarType::Int => "int",
            ScalarType::Bool => "bool",
        }
    }

    /// Numeric promotion: complex > real > int. Bool does not promote.
    pub fn join(self, other: ScalarType) -> ScalarType {
        use ScalarType::*;
        match (self, other) {
            (Bool, _) | (_, Bool) => Bool,
            (Complex, _) | (_, Complex) => Complex,
            (Real, _) | (_, Real) => Real,
            (Int, Int) => Int,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Real(f64),
    Complex(Complex64),
    Int(i64),
    Bool(bool),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Real(_) => "real",
            Value::Complex(_) => "complex",
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
        }
    }

    pub fn scalar_type(&self) -> ScalarType {
        match self {
            Value::Real(_) => ScalarType::Real,
            Value::Complex(_) => ScalarType::Complex,
            Value::Int(_) => ScalarType::Int,
            Value::Bool(_) => ScalarType::Bool,
        }
    }

    pub fn zero_of(ty: ScalarType) -> Value {
        match ty {
            ScalarType::Real => Value::Real(0.0),
            ScalarType::Complex => Value::Complex(Complex64::new(0.0, 0.0)),
            ScalarType::Int => Value::Int(0),
            ScalarType::Bool => Value::Bool(false),
        }
    }

    /// Numeric view as a complex number. Errors on booleans.
    pub fn as_complex(&self) -> Result<Complex64, EvalError> {
        match self {
            Value::Real(x) => Ok(Complex64::new(*x, 0.0)),
            Value::Complex(z) => Ok(*z),
            Value::Int(n) => Ok(Complex64::new(*n as f64, 0.0)),
            Value::Bool(_) => Err(EvalError::BoolInArithmetic),
        }
    }

    /// Real view. A complex with exactly zero imaginary part is accepted.
    pub fn as_real(&self) -> Result<f64, EvalError> {
        match self {
            Value::Real(x) => Ok(*x),
            Value::Int(n) => Ok(*n as f64),
            Value::Complex(z) if z.im == 0.0 => Ok(z.re),
            Value::Complex(_) => Err(EvalError::ComplexComparison),
            Value::Bool(_) => Err(EvalError::BoolInArithmetic),
        }
    }

    pub fn as_bool(&self) -> Result<bool, EvalError> {
        match self {
            Value::Bool(b) => Ok(*b),
            other => Err(EvalError::Domain(format!(
                "expected a boolean guard, found {}",
                other.type_name()
            ))),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, Value::Complex(_))
    }

    fn binop(
        a: &Value,
        b: &Value,
        real_op: impl Fn(f64, f64) -> f64,
        cplx_op: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Value, EvalError> {
        match (a, b) {
            (Value::Bool(_), _) | (_, Value::Bool(_)) => Err(EvalError::BoolInArithmetic),
            (Value::Complex(_), _) | (_, Value::Complex(_)) => {
                Ok(Value::Complex(cplx_op(a.as_complex()?, b.as_complex()?)))
            }
            _ => Ok(Value::Real(real_op(a.as_real()?, b.as_real()?))),
        }
    }

    pub fn add(&self, other: &Value) -> Result<Value, EvalError> {
        Value::binop(self, other, |a, b| a + b, |a, b| a + b)
    }

    pub fn sub(&self, other: &Value) -> Result<Value, EvalError> {
        Value::binop(self, other, |a, b| a - b, |a, b| a - b)
    }

    pub fn mul(&self, other: &Value) -> Result<Value, EvalError> {
        Value::binop(self, other, |a, b| a * b, |a, b| a * b)
    }

    pub fn div(&self, other: &Value) -> Result<Value, EvalError> {
        let zero = match other {
            Value::Real(x) => *x == 0.0,
            Value::Int(n) => *n == 0,
            Value::Complex(z) => z.re == 0.0 && z.im == 0.0,
            Value::Bool(_) => return Err(EvalError::BoolInArithmetic),
        };
        if zero {
            return Err(EvalError::DivisionByZero);
        }
        Value::binop(self, other, |a, b| a / b, |a, b| a / b)
    }

    pub fn neg(&self) -> Result<Value, EvalError> {
        match self {
            Value::Real(x) => Ok(Value::Real(-x)),
            Value::Complex(z) => Ok(Value::Complex(-z)),
            Value::Int(n) => Ok(Value::Int(-n)),
            Value::Bool(_) => Err(EvalError::BoolInArithmetic),
        }
    }

    pub fn pow(&self, exp: &Value) -> Result<Value, EvalError> {
        match (self, exp) {
            (Value::Bool(_), _) | (_, Value::Bool(_)) => Err(EvalError::BoolInArithmetic),
            (Value::Complex(_), _) | (_, Value::Complex(_)) => {
                Ok(Value::Complex(self.as_complex()?.powc(exp.as_complex()?)))
            }
            _ => {
                let base = self.as_real()?;
                let e = exp.as_real()?;
                // Negative base with non-integer exponent leaves the reals.
                if base < 0.0 && e.fract() != 0.0 {
                    Ok(Value::Complex(
                        Complex64::new(base, 0.0).powc(Complex64::new(e, 0.0)),
                    ))
                } else {
                    Ok(Value::Real(base.powf(e)))
                }
            }
        }
    }

    pub fn conj(&self) -> Result<Value, EvalError> {
        match self {
            Value::Complex(z) => Ok(Value::Complex(z.conj())),
            Value::Real(_) | Value::Int(_) => Ok(*self),
            Value::Bool(_) => Err(EvalError::BoolInArithmetic),
        }
    }

    /// Compare two values. Complex operands are only accepted when their
    /// imaginary part is exactly zero; otherwise the comparison is an error.
    pub fn compare(&self, other: &Value) -> Result<std::cmp::Ordering, EvalError> {
        let a = self.as_real()?;
        let b = other.as_real()?;
        a.partial_cmp(&b)
            .ok_or_else(|| EvalError::Domain("comparison of NaN".into()))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(x) => f.write_str(&fmt_g(*x, 12)),
            Value::Complex(z) => f.write_str(&fmt_complex(*z, 12)),
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Format with `digits` significant digits, MATLAB `%g` style: plain decimal
/// notation for moderate exponents, scientific otherwise, trailing zeros
/// trimmed. Deterministic for a given input.
pub fn fmt_g(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    // Decimal notation with `digits - 1 - exp` fractional digits.
    let frac = (digits as i32 - 1 - exp).max(0) as usize;
    let dec = format!("{:.*}", frac, x);
    if dec.contains('.') {
        trim_zeros(&dec)
    } else {
        dec
    }
}

fn trim_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0');
    t.trim_end_matches('.').to_string()
}

/// Format a complex value as `a+bi` / `a-bi` (pure imaginary prints as `bi`).
pub fn fmt_complex(z: Complex64, digits: usize) -> String {
    if z.im == 0.0 {
        return fmt_g(z.re, digits);
    }
    let im_abs = fmt_g(z.im.abs(), digits);
    let sign = if z.im < 0.0 { "-" } else { "+" };
    if z.re == 0.0 {
        if z.im < 0.0 {
            return format!("-{im_abs}i");
        }
        return format!("{im_abs}i");
    }
    format!("{}{}{}i", fmt_g(z.re, digits), sign, im_abs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn promotion() {
        let r = Value::Real(2.0);
        let z = Value::Complex(Complex64::new(0.0, 1.0));
        assert_eq!(r.mul(&z).unwrap(), Value::Complex(Complex64::new(0.0, 2.0)));
        assert_eq!(
            Value::Int(3).add(&Value::Real(0.5)).unwrap(),
            Value::Real(3.5)
        );
    }

    #[test]
    fn complex_comparison_rules() {
        let pure = Value::Complex(Complex64::new(1.5, 0.0));
        assert_eq!(
            pure.compare(&Value::Real(1.0)).unwrap(),
            std::cmp::Ordering::Greater
        );
        let mixed = Value::Complex(Complex64::new(1.5, 0.1));
        assert!(matches!(
            mixed.compare(&Value::Real(1.0)),
            Err(EvalError::ComplexComparison)
        ));
    }

    #[test]
    fn division_by_zero() {
        assert!(matches!(
            Value::Real(1.0).div(&Value::Real(0.0)),
            Err(EvalError::DivisionByZero)
        ));
    }

    #[test]
    fn g_format() {
        assert_eq!(fmt_g(32.8797974610715, 12), "32.8797974611");
        assert_eq!(fmt_g(1.0, 12), "1");
        assert_eq!(fmt_g(0.0, 12), "0");
        assert_eq!(fmt_g(-1.40564764938027, 12), "-1.40564764938");
        assert_eq!(fmt_g(1e-7, 12), "1e-7");
        assert_eq!(fmt_g(1234567890123456.0, 12), "1.23456789012e15");
    }

    #[test]
    fn complex_format() {
        assert_eq!(fmt_complex(Complex64::new(0.005, 0.03), 12), "0.005+0.03i");
        assert_eq!(fmt_complex(Complex64::new(-1.0, -0.3), 12), "-1-0.3i");
        assert_eq!(fmt_complex(Complex64::new(0.0, 1.0), 12), "1i");
        assert_eq!(fmt_complex(Complex64::new(2.0, 0.0), 12), "2");
    }
}
