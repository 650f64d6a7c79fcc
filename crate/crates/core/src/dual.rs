//! Forward-mode dual numbers, nested once for exact second derivatives.
//!
//! `Dual1` carries one derivative direction, `Dual2 = Dual<Dual1>` carries
//! two; seeding the inner and outer parts against different coordinates
//! yields mixed partials without any finite-difference step.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic interface shared by `f64`, `Dual1` and `Dual2`.
///
/// Domain checks (log, sqrt, pow, division) are the evaluator's job; the
/// trait methods assume the standard part has already been screened and
/// only have to produce derivative-correct values.
pub trait Scalar:
    Copy
    + Clone
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    /// Standard part, recursing through all dual levels.
    fn value(&self) -> f64;
    /// True when every derivative component is zero.
    fn is_constant(&self) -> bool;
    /// True when every component (value and derivatives) is finite.
    fn all_finite(&self) -> bool;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    /// Natural logarithm; caller guarantees a positive standard part.
    fn ln(self) -> Self;
    /// Caller guarantees a non-negative standard part.
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }

    /// Integer power by repeated multiplication; caller guarantees a
    /// nonzero standard part when `k < 0`.
    fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Self::one();
        }
        let mut base = if k < 0 { Self::one() / self } else { self };
        let mut left = k.unsigned_abs();
        let mut acc = Self::one();
        while left > 0 {
            if left & 1 == 1 {
                acc = acc * base;
            }
            left >>= 1;
            if left > 0 {
                base = base * base;
            }
        }
        acc
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn value(&self) -> f64 {
        *self
    }
    fn is_constant(&self) -> bool {
        true
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

/// Dual number over an arbitrary scalar: `re + ε·du` with ε² = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub du: T,
}

/// First-order dual number.
pub type Dual1 = Dual<f64>;
/// Second-order (nested) dual number.
pub type Dual2 = Dual<Dual1>;

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, du: T) -> Self {
        Self { re, du }
    }

    /// Constant lift: no derivative content.
    pub fn constant(re: T) -> Self {
        Self { re, du: T::zero() }
    }

    /// Seeded variable: unit derivative in this direction.
    pub fn variable(re: T) -> Self {
        Self { re, du: T::one() }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.du + rhs.du)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.du - rhs.du)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(self.re * rhs.re, self.re * rhs.du + self.du * rhs.re)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let re = self.re / rhs.re;
        let du = (self.du - re * rhs.du) / rhs.re;
        Self::new(re, du)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.du)
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(x: f64) -> Self {
        Self::constant(T::from_f64(x))
    }
    fn value(&self) -> f64 {
        self.re.value()
    }
    fn is_constant(&self) -> bool {
        self.re.is_constant() && self.du.is_constant() && self.du.value() == 0.0
    }
    fn all_finite(&self) -> bool {
        self.re.all_finite() && self.du.all_finite()
    }

    fn sin(self) -> Self {
        Self::new(self.re.sin(), self.du * self.re.cos())
    }
    fn cos(self) -> Self {
        Self::new(self.re.cos(), -(self.du * self.re.sin()))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Self::new(e, self.du * e)
    }
    fn ln(self) -> Self {
        Self::new(self.re.ln(), self.du / self.re)
    }
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        // Constant zero stays an exact zero; a seeded direction at the
        // origin produces the honest infinite slope instead.
        let du = if self.du.is_constant() && self.du.value() == 0.0 {
            T::zero()
        } else {
            self.du / (T::from_f64(2.0) * r)
        };
        Self::new(r, du)
    }
    fn abs(self) -> Self {
        let v = self.re.value();
        if v < 0.0 {
            -self
        } else if v > 0.0 {
            self
        } else {
            // Subgradient 0 at the kink keeps constants exact.
            Self::new(self.re.abs(), T::zero())
        }
    }
}
