//! Scalar types used to evaluate expressions: plain reals, first-order dual
//! numbers and hyper-dual numbers (exact mixed second derivatives).

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed to evaluate a syntax tree.
///
/// Every elementary function is expressed through [`Scalar::lift`], which
/// receives `f(re)`, `f'(re)` and `f''(re)` and propagates them to the
/// infinitesimal parts.
pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self> {
    fn constant(v: f64) -> Self;

    /// Real part.
    fn re(&self) -> f64;

    /// True when every infinitesimal component is exactly zero.
    fn is_real(&self) -> bool;

    fn lift(self, f0: f64, f1: f64, f2: f64) -> Self;

    fn sin(self) -> Self {
        let v = self.re();
        self.lift(v.sin(), v.cos(), -v.sin())
    }

    fn cos(self) -> Self {
        let v = self.re();
        self.lift(v.cos(), -v.sin(), -v.cos())
    }

    fn tan(self) -> Self {
        let v = self.re();
        let t = v.tan();
        let s2 = 1.0 + t * t;
        self.lift(t, s2, 2.0 * t * s2)
    }

    fn tanh(self) -> Self {
        let t = self.re().tanh();
        let s2 = 1.0 - t * t;
        self.lift(t, s2, -2.0 * t * s2)
    }

    fn exp(self) -> Self {
        let e = self.re().exp();
        self.lift(e, e, e)
    }

    /// Natural logarithm; caller guarantees a positive real part.
    fn ln(self) -> Self {
        let v = self.re();
        self.lift(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    /// Square root; caller guarantees a non-negative real part.
    fn sqrt(self) -> Self {
        let v = self.re();
        let s = v.sqrt();
        self.lift(s, 0.5 / s, -0.25 / (s * v))
    }

    fn abs(self) -> Self {
        let v = self.re();
        let sign = if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.lift(v.abs(), sign, 0.0)
    }

    fn powi(self, n: i32) -> Self {
        let v = self.re();
        let f0 = v.powi(n);
        let f1 = if n == 0 { 0.0 } else { f64::from(n) * v.powi(n - 1) };
        let f2 = if n == 0 || n == 1 { 0.0 } else { f64::from(n) * f64::from(n - 1) * v.powi(n - 2) };
        self.lift(f0, f1, f2)
    }

    /// Real power with constant exponent; caller guarantees `re >= 0`.
    fn powf(self, p: f64) -> Self {
        let v = self.re();
        let f0 = v.powf(p);
        let f1 = if p == 0.0 { 0.0 } else { p * v.powf(p - 1.0) };
        let f2 = if p == 0.0 || p == 1.0 { 0.0 } else { p * (p - 1.0) * v.powf(p - 2.0) };
        self.lift(f0, f1, f2)
    }

    fn recip(self) -> Self {
        let v = self.re();
        self.lift(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }
}

impl Scalar for f64 {
    #[inline]
    fn constant(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn is_real(&self) -> bool {
        true
    }
    #[inline]
    fn lift(self, f0: f64, _f1: f64, _f2: f64) -> Self {
        f0
    }
    #[inline]
    fn recip(self) -> Self {
        1.0 / self
    }
}

/// First-order dual number `re + du·ε`, `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub du: f64,
}

impl Dual {
    pub fn new(re: f64, du: f64) -> Self {
        Dual { re, du }
    }

    pub fn variable(re: f64) -> Self {
        Dual { re, du: 1.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.re + o.re, self.du + o.du)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.re - o.re, self.du - o.du)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.re * o.re, self.re * o.du + self.du * o.re)
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        let q = self.re / o.re;
        Dual::new(q, (self.du - q * o.du) / o.re)
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.du)
    }
}

impl Scalar for Dual {
    #[inline]
    fn constant(v: f64) -> Self {
        Dual::new(v, 0.0)
    }
    #[inline]
    fn re(&self) -> f64 {
        self.re
    }
    #[inline]
    fn is_real(&self) -> bool {
        self.du == 0.0
    }
    #[inline]
    fn lift(self, f0: f64, f1: f64, _f2: f64) -> Self {
        // Skip the product when the tangent is zero so that infinite
        // derivatives at irrelevant points do not poison the result.
        let du = if self.du == 0.0 { 0.0 } else { f1 * self.du };
        Dual::new(f0, du)
    }
}

/// Hyper-dual number `re + e1·ε₁ + e2·ε₂ + e12·ε₁ε₂` with `ε₁² = ε₂² = 0`.
///
/// Seeding `e1` along coordinate `i` and `e2` along `j` yields the exact
/// mixed partial `∂²f/∂xᵢ∂xⱼ` in `e12`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    pub fn new(re: f64, e1: f64, e2: f64, e12: f64) -> Self {
        HyperDual { re, e1, e2, e12 }
    }
}

impl Add for HyperDual {
    type Output = HyperDual;
    #[inline]
    fn add(self, o: Self) -> Self {
        HyperDual::new(self.re + o.re, self.e1 + o.e1, self.e2 + o.e2, self.e12 + o.e12)
    }
}

impl Sub for HyperDual {
    type Output = HyperDual;
    #[inline]
    fn sub(self, o: Self) -> Self {
        HyperDual::new(self.re - o.re, self.e1 - o.e1, self.e2 - o.e2, self.e12 - o.e12)
    }
}

impl Mul for HyperDual {
    type Output = HyperDual;
    #[inline]
    fn mul(self, o: Self) -> Self {
        HyperDual::new(
            self.re * o.re,
            self.re * o.e1 + self.e1 * o.re,
            self.re * o.e2 + self.e2 * o.re,
            self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        )
    }
}

impl Div for HyperDual {
    type Output = HyperDual;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl Neg for HyperDual {
    type Output = HyperDual;
    #[inline]
    fn neg(self) -> Self {
        HyperDual::new(-self.re, -self.e1, -self.e2, -self.e12)
    }
}

impl Scalar for HyperDual {
    #[inline]
    fn constant(v: f64) -> Self {
        HyperDual::new(v, 0.0, 0.0, 0.0)
    }
    #[inline]
    fn re(&self) -> f64 {
        self.re
    }
    #[inline]
    fn is_real(&self) -> bool {
        self.e1 == 0.0 && self.e2 == 0.0 && self.e12 == 0.0
    }
    #[inline]
    fn lift(self, f0: f64, f1: f64, f2: f64) -> Self {
        if self.is_real() {
            return HyperDual::constant(f0);
        }
        HyperDual::new(f0, f1 * self.e1, f1 * self.e2, f1 * self.e12 + f2 * self.e1 * self.e2)
    }
}
