//! Scalar field abstraction shared by the real and complex code paths.
//!
//! Basis and norm matrices are always real; elements and coefficients live
//! in the scalar type `S`. Signs for the complex field are drawn from the
//! roots of unity of the configured net order.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + Serialize
    + DeserializeOwned
    + 'static
{
    const IS_COMPLEX: bool;
    /// Number of real parameters per scalar (1 for real, 2 for complex).
    const REAL_DIM: usize;

    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn from_parts(re: f64, im: f64) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn modulus(self) -> f64;
    fn modulus_sq(self) -> f64;
    fn scale(self, t: f64) -> Self;

    /// `z / |z|`, or zero when `z == 0`.
    fn sign(self) -> Self {
        let r = self.modulus();
        if r == 0.0 {
            Self::zero()
        } else {
            self.scale(1.0 / r)
        }
    }

    /// Unimodular sign family: `{1, -1}` for reals, the `order`-th roots of
    /// unity for complex scalars (starting at 1).
    fn unit_net(order: usize) -> Vec<Self>;

    fn is_nonneg_real(self, tol: f64) -> bool {
        self.re() >= -tol && self.im().abs() <= tol
    }
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;
    const REAL_DIM: usize = 1;

    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn im(self) -> f64 {
        0.0
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }
    #[inline]
    fn modulus_sq(self) -> f64 {
        self * self
    }
    #[inline]
    fn scale(self, t: f64) -> Self {
        self * t
    }

    fn unit_net(_order: usize) -> Vec<Self> {
        vec![1.0, -1.0]
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;
    const REAL_DIM: usize = 2;

    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn im(self) -> f64 {
        self.im
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn modulus_sq(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn scale(self, t: f64) -> Self {
        self * t
    }

    fn unit_net(order: usize) -> Vec<Self> {
        roots_of_unity(order)
    }
}

/// The `n`-th roots of unity `exp(2πik/n)`, `k = 0..n`, with the four
/// axis points snapped to exact values.
pub fn roots_of_unity(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            if (4 * k) % n == 0 {
                match 4 * k / n {
                    0 => Complex64::new(1.0, 0.0),
                    1 => Complex64::new(0.0, 1.0),
                    2 => Complex64::new(-1.0, 0.0),
                    _ => Complex64::new(0.0, -1.0),
                }
            } else {
                Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)
            }
        })
        .collect()
}

/// `Σ_j c_j v_j` for real vectors `v_j` given column-wise.
pub(crate) fn axpy<S: Scalar>(out: &mut [S], c: S, column: &[f64]) {
    for (o, &x) in out.iter_mut().zip(column) {
        *o += c.scale(x);
    }
}
