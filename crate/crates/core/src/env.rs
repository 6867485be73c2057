//! Name -> value binding store for parameters and variable iterates.
//!
//! Slots keep their declaration order (copyPars takes "the first N
//! parameters" of a model, and reports list out-tagged names in declaration
//! order). Submodels get their own `Env`; cross-model `@main.` writes are
//! routed by the execution engine, plain reads never fall back to a parent.

use indexmap::IndexMap;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::Distribution as _;

use crate::error::EvalError;
use crate::value::{ScalarType, Value};

/// Deterministic, seedable random stream for `rnd(...)`.
pub type RngStream = rand_chacha::ChaCha12Rng;

pub fn seeded_rng(seed: u64) -> RngStream {
    RngStream::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Param,
    Var,
}

#[derive(Debug, Clone)]
pub struct Slot {
    pub value: Value,
    pub ty: ScalarType,
    pub kind: SymbolKind,
    pub out: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistKind {
    Gauss,
}

/// A named noise distribution from a Distributions group.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub name: String,
    pub kind: DistKind,
    pub mean: f64,
    pub dev: f64,
}

/// Draw one value. In a complex context the real and imaginary parts are
/// independent draws; with dev = 0 the mean is returned exactly and no
/// randomness is consumed.
pub fn sample(dist: &Distribution, rng: &mut RngStream, complex: bool) -> Result<Value, EvalError> {
    if dist.dev < 0.0 {
        return Err(EvalError::Domain(format!(
            "distribution `{}` has negative dev",
            dist.name
        )));
    }
    if dist.dev == 0.0 {
        return Ok(if complex {
            Value::Complex(Complex64::new(dist.mean, dist.mean))
        } else {
            Value::Real(dist.mean)
        });
    }
    let normal = rand_distr::Normal::new(dist.mean, dist.dev)
        .map_err(|e| EvalError::Domain(format!("distribution `{}`: {e}", dist.name)))?;
    if complex {
        let re = normal.sample(rng);
        let im = normal.sample(rng);
        Ok(Value::Complex(Complex64::new(re, im)))
    } else {
        Ok(Value::Real(normal.sample(rng)))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Env {
    slots: IndexMap<String, Slot>,
    dists: IndexMap<String, Distribution>,
}

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn declare(&mut self, name: &str, slot: Slot) {
        self.slots.insert(name.to_string(), slot);
    }

    pub fn declare_dist(&mut self, dist: Distribution) {
        self.dists.insert(dist.name.clone(), dist);
    }

    pub fn dist(&self, name: &str) -> Option<&Distribution> {
        self.dists.get(name)
    }

    pub fn slot(&self, name: &str) -> Option<&Slot> {
        self.slots.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.slots.contains_key(name)
    }

    pub fn value(&self, name: &str) -> Result<Value, EvalError> {
        self.slots
            .get(name)
            .map(|s| s.value)
            .ok_or_else(|| EvalError::Unbound(name.to_string()))
    }

    /// Store a value, coercing to the slot's declared scalar type.
    pub fn set(&mut self, name: &str, value: Value) -> Result<(), EvalError> {
        let slot = self
            .slots
            .get_mut(name)
            .ok_or_else(|| EvalError::Unbound(name.to_string()))?;
        slot.value = coerce(name, value, slot.ty)?;
        Ok(())
    }

    /// Iterate slots in declaration order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &Slot)> {
        self.slots.iter()
    }

    pub fn param_names(&self) -> impl Iterator<Item = &String> {
        self.slots
            .iter()
            .filter(|(_, s)| s.kind == SymbolKind::Param)
            .map(|(n, _)| n)
    }
}

/// Coerce a computed value into a slot of the given declared type.
///
/// Complex-to-real narrowing is accepted only when the imaginary part is
/// exactly zero. Integer slots round to the nearest integer (assignments
/// such as tap positions are produced via round(..., 0)).
pub fn coerce(name: &str, value: Value, ty: ScalarType) -> Result<Value, EvalError> {
    let mismatch = |got: &Value| EvalError::TypeMismatch {
        target: name.to_string(),
        want: ty.name(),
        got: got.type_name(),
    };
    Ok(match ty {
        ScalarType::Complex => Value::Complex(value.as_complex().map_err(|_| mismatch(&value))?),
        ScalarType::Real => match value {
            Value::Real(x) => Value::Real(x),
            Value::Int(n) => Value::Real(n as f64),
            Value::Complex(z) if z.im == 0.0 => Value::Real(z.re),
            other => return Err(mismatch(&other)),
        },
        ScalarType::Int => match value {
            Value::Int(n) => Value::Int(n),
            Value::Real(x) if x.is_finite() => Value::Int(x.round() as i64),
            Value::Complex(z) if z.im == 0.0 && z.re.is_finite() => Value::Int(z.re.round() as i64),
            other => return Err(mismatch(&other)),
        },
        ScalarType::Bool => match value {
            Value::Bool(b) => Value::Bool(b),
            other => return Err(mismatch(&other)),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dev_zero_returns_mean_exactly() {
        let d = Distribution {
            name: "g".into(),
            kind: DistKind::Gauss,
            mean: 0.25,
            dev: 0.0,
        };
        let mut rng = seeded_rng(7);
        assert_eq!(sample(&d, &mut rng, false).unwrap(), Value::Real(0.25));
        assert_eq!(
            sample(&d, &mut rng, true).unwrap(),
            Value::Complex(Complex64::new(0.25, 0.25))
        );
    }

    #[test]
    fn same_seed_same_sequence() {
        let d = Distribution {
            name: "g".into(),
            kind: DistKind::Gauss,
            mean: 0.0,
            dev: 0.02,
        };
        let draw = |seed| {
            let mut rng = seeded_rng(seed);
            (0..10)
                .map(|_| sample(&d, &mut rng, false).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn gaussian_statistics() {
        // 1e5 draws: sample mean within 3*dev/sqrt(n), sample dev within 2%.
        let d = Distribution {
            name: "g".into(),
            kind: DistKind::Gauss,
            mean: 0.0,
            dev: 0.02,
        };
        let mut rng = seeded_rng(1);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| match sample(&d, &mut rng, false).unwrap() {
                Value::Real(x) => x,
                _ => unreachable!(),
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let dev = var.sqrt();
        assert!(mean.abs() < 3.0 * 0.02 / (n as f64).sqrt(), "mean {mean}");
        assert!((dev - 0.02).abs() < 0.02 * 0.02, "dev {dev}");
    }

    #[test]
    fn negative_dev_rejected() {
        let d = Distribution {
            name: "g".into(),
            kind: DistKind::Gauss,
            mean: 0.0,
            dev: -0.1,
        };
        let mut rng = seeded_rng(1);
        assert!(sample(&d, &mut rng, false).is_err());
    }

    #[test]
    fn coerce_rules() {
        use ScalarType::*;
        assert_eq!(
            coerce("x", Value::Complex(Complex64::new(2.0, 0.0)), Real).unwrap(),
            Value::Real(2.0)
        );
        assert!(coerce("x", Value::Complex(Complex64::new(2.0, 0.1)), Real).is_err());
        assert_eq!(coerce("n", Value::Real(3.0), Int).unwrap(), Value::Int(3));
        assert_eq!(
            coerce("z", Value::Real(1.5), Complex).unwrap(),
            Value::Complex(Complex64::new(1.5, 0.0))
        );
        assert!(coerce("b", Value::Real(1.0), Bool).is_err());
    }
}
