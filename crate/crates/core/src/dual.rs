//! Forward-mode dual numbers and the scalar abstraction used to make the
//! likelihood code differentiable.
//!
//! Model likelihoods are written generically over [`Real`]; instantiating with
//! `f64` gives plain evaluation, instantiating with [`Dual<N>`] propagates N
//! partial derivatives through every operation, including the quasi-Monte
//! Carlo normal probabilities. Branch decisions (comparisons, clamps, sorting)
//! always look at the value lane only, so the derivative follows the branch
//! actually taken.

// the arithmetic below walks paired eps lanes by index on purpose
#![allow(clippy::needless_range_loop)]

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::mvn::{std_normal_cdf, std_normal_pdf, std_normal_ppf};

/// Scalar interface shared by `f64` and [`Dual`].
pub trait Real:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + PartialOrd
{
    fn from_f64(x: f64) -> Self;
    /// Value lane (drops derivatives).
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powf(self, e: Self) -> Self;
    /// Standard normal CDF.
    fn norm_cdf(self) -> Self;
    /// Standard normal quantile.
    fn norm_ppf(self) -> Self;
    /// Clamp by value; a clamped result is treated as locally constant.
    fn clamp_const(self, lo: f64, hi: f64) -> Self;
    fn scale(self, c: f64) -> Self;
    fn shift(self, c: f64) -> Self;
    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn value(self) -> f64 {
        self
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
    fn powf(self, e: Self) -> Self {
        f64::powf(self, e)
    }
    fn norm_cdf(self) -> Self {
        std_normal_cdf(self)
    }
    fn norm_ppf(self) -> Self {
        std_normal_ppf(self)
    }
    fn clamp_const(self, lo: f64, hi: f64) -> Self {
        self.clamp(lo, hi)
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
    fn shift(self, c: f64) -> Self {
        self + c
    }
}

/// Dual number carrying `N` simultaneous partial derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Dual<const N: usize> {
    pub val: f64,
    pub eps: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(x: f64) -> Self {
        Dual {
            val: x,
            eps: [0.0; N],
        }
    }

    /// Seed variable `i`: value `x`, unit derivative in lane `i`.
    pub fn var(x: f64, i: usize) -> Self {
        let mut eps = [0.0; N];
        eps[i] = 1.0;
        Dual { val: x, eps }
    }

    fn lift(self, val: f64, dcoef: f64) -> Self {
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = dcoef * self.eps[i];
        }
        Dual { val, eps }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = self.eps[i] + o.eps[i];
        }
        Dual {
            val: self.val + o.val,
            eps,
        }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = self.eps[i] - o.eps[i];
        }
        Dual {
            val: self.val - o.val,
            eps,
        }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = self.eps[i] * o.val + self.val * o.eps[i];
        }
        Dual {
            val: self.val * o.val,
            eps,
        }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.val;
        let val = self.val * inv;
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = (self.eps[i] - val * o.eps[i]) * inv;
        }
        Dual { val, eps }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = -self.eps[i];
        }
        Dual {
            val: -self.val,
            eps,
        }
    }
}

impl<const N: usize> PartialEq for Dual<N> {
    fn eq(&self, o: &Self) -> bool {
        self.val == o.val
    }
}

impl<const N: usize> PartialOrd for Dual<N> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        self.val.partial_cmp(&o.val)
    }
}

impl<const N: usize> Real for Dual<N> {
    fn from_f64(x: f64) -> Self {
        Dual::constant(x)
    }
    fn value(self) -> f64 {
        self.val
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.lift(e, e)
    }
    fn ln(self) -> Self {
        self.lift(self.val.ln(), 1.0 / self.val)
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.lift(s, 0.5 / s)
    }
    fn powf(self, e: Self) -> Self {
        // d(a^b) = a^b * (b' ln a + b a'/a)
        let val = self.val.powf(e.val);
        let ln_a = self.val.ln();
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = val * (e.eps[i] * ln_a + e.val * self.eps[i] / self.val);
        }
        Dual { val, eps }
    }
    fn norm_cdf(self) -> Self {
        self.lift(std_normal_cdf(self.val), std_normal_pdf(self.val))
    }
    fn norm_ppf(self) -> Self {
        let y = std_normal_ppf(self.val);
        self.lift(y, 1.0 / std_normal_pdf(y))
    }
    fn clamp_const(self, lo: f64, hi: f64) -> Self {
        if self.val < lo {
            Dual::constant(lo)
        } else if self.val > hi {
            Dual::constant(hi)
        } else {
            self
        }
    }
    fn scale(self, c: f64) -> Self {
        self.lift(self.val * c, c)
    }
    fn shift(self, c: f64) -> Self {
        Dual {
            val: self.val + c,
            eps: self.eps,
        }
    }
}

/// log(sum(exp(x))) with the usual max shift; -inf entries drop out.
pub fn logsumexp_g<S: Real>(xs: &[S]) -> S {
    let mut mx = f64::NEG_INFINITY;
    let mut arg = None;
    for (k, x) in xs.iter().enumerate() {
        if x.value() > mx {
            mx = x.value();
            arg = Some(k);
        }
    }
    let Some(arg) = arg else {
        return S::from_f64(f64::NEG_INFINITY);
    };
    if mx == f64::NEG_INFINITY {
        return S::from_f64(f64::NEG_INFINITY);
    }
    if mx == f64::INFINITY {
        return xs[arg];
    }
    let m = xs[arg];
    let mut acc = S::from_f64(0.0);
    for (k, x) in xs.iter().enumerate() {
        if k == arg {
            acc = acc + S::from_f64(1.0);
        } else if x.value() > f64::NEG_INFINITY {
            acc = acc + (*x - m).exp();
        }
    }
    m + acc.ln()
}

pub fn logsumexp(xs: &[f64]) -> f64 {
    logsumexp_g::<f64>(xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // test function mixing every primitive: f(a, b) = Phi(a*sqrt(b)) + ln(a^b) - exp(a/b)
    fn f<S: Real>(a: S, b: S) -> S {
        a.norm_cdf() * b.sqrt() + a.powf(b).ln() - (a / b).exp()
    }

    #[test]
    fn dual_matches_central_differences() {
        let (a0, b0) = (0.7, 1.3);
        let g = f(Dual::<2>::var(a0, 0), Dual::<2>::var(b0, 1));
        let h = 1e-6;
        let da = (f(a0 + h, b0) - f(a0 - h, b0)) / (2.0 * h);
        let db = (f(a0, b0 + h) - f(a0, b0 - h)) / (2.0 * h);
        assert_relative_eq!(g.eps[0], da, max_relative = 1e-8);
        assert_relative_eq!(g.eps[1], db, max_relative = 1e-8);
        assert_relative_eq!(g.val, f(a0, b0), max_relative = 1e-14);
    }

    #[test]
    fn ppf_derivative_is_reciprocal_density() {
        let p = Dual::<1>::var(0.3, 0);
        let y = p.norm_ppf();
        let h = 1e-7;
        let fd = (std_normal_ppf(0.3 + h) - std_normal_ppf(0.3 - h)) / (2.0 * h);
        assert_relative_eq!(y.eps[0], fd, max_relative = 1e-7);
    }

    #[test]
    fn clamp_freezes_derivative() {
        let x = Dual::<1>::var(1.5, 0);
        let c = x.clamp_const(0.0, 1.0);
        assert_eq!(c.val, 1.0);
        assert_eq!(c.eps[0], 0.0);
        let inside = x.clamp_const(0.0, 2.0);
        assert_eq!(inside.eps[0], 1.0);
    }

    #[test]
    fn logsumexp_handles_extremes() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_relative_eq!(
            logsumexp(&[-1000.0, -1000.0]),
            -1000.0 + std::f64::consts::LN_2
        );
        let v = logsumexp(&[0.0, (2.0f64).ln(), f64::NEG_INFINITY]);
        assert_relative_eq!(v, (3.0f64).ln(), epsilon = 1e-15);
    }
}
