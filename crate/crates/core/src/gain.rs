//! Comparison functions of class K / K∞ as immutable expression trees.
//!
//! Every variant other than [`GainExpr::Zero`] is continuous, strictly
//! increasing and vanishes at zero. Whether a tree is unbounded is decided
//! structurally (see [`GainExpr::classify`]), never by sampling.

use std::fmt;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum GainExpr<T> {
    Zero,
    /// `slope * s`
    Linear(T),
    /// `coeff * s^exponent`
    Power {
        coeff: T,
        exponent: T,
    },
    /// `coeff * s / (1 + s)`
    Saturating(T),
    /// `coeff * atan(s)`
    Atan(T),
    Sum(Vec<GainExpr<T>>),
    Max(Vec<GainExpr<T>>),
    /// `outer(inner(s))`
    Compose(Box<GainExpr<T>>, Box<GainExpr<T>>),
    /// `s + inner(s)`
    PlusId(Box<GainExpr<T>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainClass {
    Zero,
    KBounded,
    KInfinity,
}

impl fmt::Display for GainClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GainClass::Zero => "zero",
            GainClass::KBounded => "K (bounded)",
            GainClass::KInfinity => "K_infinity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InvertError {
    /// `y` is at or above the supremum of a bounded gain; the preimage is +∞.
    #[error("value {y} is outside the range of a bounded gain (sup = {sup})")]
    OutOfRange { y: f64, sup: f64 },
    #[error("the zero gain is not invertible")]
    ZeroGain,
    #[error("inverse requested for a negative or non-finite value {0}")]
    BadValue(f64),
}

impl<T: Scalar> GainExpr<T> {
    pub fn linear(slope: f64) -> Self {
        GainExpr::Linear(T::lit(slope))
    }

    pub fn power(coeff: f64, exponent: f64) -> Self {
        GainExpr::Power { coeff: T::lit(coeff), exponent: T::lit(exponent) }
    }

    pub fn saturating(coeff: f64) -> Self {
        GainExpr::Saturating(T::lit(coeff))
    }

    pub fn atan(coeff: f64) -> Self {
        GainExpr::Atan(T::lit(coeff))
    }

    pub fn compose(outer: GainExpr<T>, inner: GainExpr<T>) -> Self {
        GainExpr::Compose(Box::new(outer), Box::new(inner))
    }

    pub fn plus_id(inner: GainExpr<T>) -> Self {
        GainExpr::PlusId(Box::new(inner))
    }

    /// `k * self`, folded into the leaf coefficient where possible.
    pub fn scaled(&self, k: T) -> Self {
        if k == T::one() {
            return self.clone();
        }
        match self {
            GainExpr::Zero => GainExpr::Zero,
            GainExpr::Linear(c) => GainExpr::Linear(*c * k),
            GainExpr::Power { coeff, exponent } => GainExpr::Power { coeff: *coeff * k, exponent: *exponent },
            GainExpr::Saturating(c) => GainExpr::Saturating(*c * k),
            GainExpr::Atan(c) => GainExpr::Atan(*c * k),
            GainExpr::Sum(ch) => GainExpr::Sum(ch.iter().map(|g| g.scaled(k)).collect()),
            GainExpr::Max(ch) => GainExpr::Max(ch.iter().map(|g| g.scaled(k)).collect()),
            GainExpr::Compose(o, i) => GainExpr::Compose(Box::new(o.scaled(k)), i.clone()),
            GainExpr::PlusId(_) => GainExpr::compose(GainExpr::Linear(k), self.clone()),
        }
    }

    pub fn eval(&self, s: T) -> T {
        match self {
            GainExpr::Zero => T::zero(),
            GainExpr::Linear(c) => *c * s,
            GainExpr::Power { coeff, exponent } => {
                if s == T::zero() {
                    T::zero()
                } else {
                    *coeff * s.powf(*exponent)
                }
            }
            GainExpr::Saturating(c) => {
                if s.is_infinite() {
                    *c
                } else {
                    *c * s / (T::one() + s)
                }
            }
            GainExpr::Atan(c) => *c * s.atan(),
            GainExpr::Sum(ch) => ch.iter().map(|g| g.eval(s)).sum(),
            GainExpr::Max(ch) => ch.iter().fold(T::zero(), |m, g| m.max(g.eval(s))),
            GainExpr::Compose(o, i) => o.eval(i.eval(s)),
            GainExpr::PlusId(i) => s + i.eval(s),
        }
    }

    /// Structural supremum over `[0, ∞)`; `+∞` for unbounded trees.
    pub fn sup(&self) -> T {
        match self {
            GainExpr::Zero => T::zero(),
            GainExpr::Linear(_) | GainExpr::Power { .. } | GainExpr::PlusId(_) => T::infinity(),
            GainExpr::Saturating(c) => *c,
            GainExpr::Atan(c) => *c * T::lit(std::f64::consts::FRAC_PI_2),
            GainExpr::Sum(ch) => ch.iter().map(|g| g.sup()).sum(),
            GainExpr::Max(ch) => ch.iter().fold(T::zero(), |m, g| m.max(g.sup())),
            GainExpr::Compose(o, i) => {
                if i.is_zero() {
                    return T::zero();
                }
                let inner = i.sup();
                if inner.is_infinite() {
                    o.sup()
                } else {
                    o.eval(inner)
                }
            }
        }
    }

    /// True when the tree is identically zero.
    pub fn is_zero(&self) -> bool {
        match self {
            GainExpr::Zero => true,
            GainExpr::Sum(ch) | GainExpr::Max(ch) => ch.iter().all(|g| g.is_zero()),
            GainExpr::Compose(o, i) => o.is_zero() || i.is_zero(),
            _ => false,
        }
    }

    pub fn classify(&self) -> GainClass {
        if self.is_zero() {
            GainClass::Zero
        } else if self.sup().is_infinite() {
            GainClass::KInfinity
        } else {
            GainClass::KBounded
        }
    }

    /// Slope if the tree is exactly `c * s`.
    pub fn linear_slope(&self) -> Option<T> {
        match self {
            GainExpr::Zero => Some(T::zero()),
            GainExpr::Linear(c) => Some(*c),
            GainExpr::Power { coeff, exponent } if *exponent == T::one() => Some(*coeff),
            _ => None,
        }
    }

    /// Closed-form inverse as an expression, for the leaf families that have one.
    pub fn inverse_expr(&self) -> Option<GainExpr<T>> {
        match self {
            GainExpr::Linear(c) => Some(GainExpr::Linear(T::one() / *c)),
            GainExpr::Power { coeff, exponent } => {
                let p = T::one() / *exponent;
                Some(GainExpr::Power { coeff: (T::one() / *coeff).powf(p), exponent: p })
            }
            _ => None,
        }
    }

    /// Solves `self(s) = y` for `s`.
    pub fn invert(&self, y: T) -> Result<T, InvertError> {
        if !(y >= T::zero()) || y.is_infinite() {
            return Err(InvertError::BadValue(y.as_f64()));
        }
        if self.is_zero() {
            return Err(InvertError::ZeroGain);
        }
        if y == T::zero() {
            return Ok(T::zero());
        }
        let sup = self.sup();
        if y >= sup {
            return Err(InvertError::OutOfRange { y: y.as_f64(), sup: sup.as_f64() });
        }
        match self {
            GainExpr::Linear(c) => return Ok(y / *c),
            GainExpr::Power { coeff, exponent } => return Ok((y / *coeff).powf(T::one() / *exponent)),
            GainExpr::Saturating(c) => {
                let q = y / *c;
                return Ok(q / (T::one() - q));
            }
            GainExpr::Atan(c) => return Ok((y / *c).tan()),
            _ => {}
        }
        Ok(self.invert_by_bisection(y))
    }

    fn invert_by_bisection(&self, y: T) -> T {
        let two = T::lit(2.0);
        let mut hi = T::one();
        let mut lo;
        if self.eval(hi) < y {
            lo = hi;
            while self.eval(hi) < y {
                lo = hi;
                hi = hi * two;
                if hi.is_infinite() {
                    return T::max_value();
                }
            }
        } else {
            lo = hi / two;
            while self.eval(lo) >= y {
                hi = lo;
                lo = lo / two;
                if lo == T::zero() {
                    break;
                }
            }
        }
        for _ in 0..200 {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // pick the closer endpoint
        if (self.eval(lo) - y).abs() <= (self.eval(hi) - y).abs() {
            lo
        } else {
            hi
        }
    }
}
