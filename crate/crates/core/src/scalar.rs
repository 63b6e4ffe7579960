//! Scalar abstraction shared by the gain calculus, path construction and
//! Lyapunov composition.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the numerical core is generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + FromStr + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only for types that cannot hold it.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    /// Relative margin used for strict inequalities, never below a few ulps.
    #[inline]
    fn tol_strict() -> Self {
        Self::lit(1e-9).max(Self::epsilon() * Self::lit(16.0))
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {}
impl Scalar for f32 {}

/// `a < b` in the certification sense: `a <= b - tol * max(1, b)`.
#[inline]
pub fn strictly_below<T: Scalar>(a: T, b: T, tol: T) -> bool {
    a <= b - tol * b.max(T::one())
}

/// Componentwise `a < b` with plain floating point comparison.
pub fn vec_lt<T: Scalar>(a: &[T], b: &[T]) -> bool {
    a.iter().zip(b).all(|(x, y)| x < y)
}

/// Componentwise `a >= b`.
pub fn vec_ge<T: Scalar>(a: &[T], b: &[T]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

pub fn norm_inf<T: Scalar>(s: &[T]) -> T {
    s.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// `count` points log-spaced over `[lo, hi]`, both ends included.
pub fn log_grid<T: Scalar>(lo: T, hi: T, count: usize) -> Vec<T> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let step = (b - a) / T::from_usize(count - 1).unwrap();
            (0..count)
                .map(|k| {
                    if k == 0 {
                        lo
                    } else if k == count - 1 {
                        hi
                    } else {
                        (a + step * T::from_usize(k).unwrap()).exp()
                    }
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_margin_uses_unit_floor() {
        assert!(strictly_below(0.5_f64, 1.0, 1e-9));
        assert!(!strictly_below(1.0_f64 - 1e-12, 1.0, 1e-9));
        assert!(!strictly_below(1e-9_f64, 1.5e-9, 1e-9));
    }

    #[test]
    fn grid_hits_endpoints() {
        let g = log_grid(1e-6_f64, 1e6, 13);
        assert_eq!(g.len(), 13);
        assert_eq!(g[0], 1e-6);
        assert_eq!(g[12], 1e6);
        assert!((g[6] - 1.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tolerance_is_usable_in_f32() {
        assert!(f32::tol_strict() > f32::EPSILON);
        assert_eq!(f64::tol_strict(), 1e-9);
    }
}
