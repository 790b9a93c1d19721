//! Multi-dual numbers: truncated Taylor expansions in a handful of commuting
//! nilpotent infinitesimals `ε_0, …, ε_{K-1}` with `ε_i² = 0`.
//!
//! A jet with `K` active infinitesimals stores one coefficient per subset of
//! `{0, …, K-1}`; coefficient `S` multiplies `Π_{i∈S} ε_i`. Evaluating a smooth
//! map on `x + ε_k v` and reading the `ε_k` coefficient gives the directional
//! derivative `Df(x)·v`, exactly up to round-off. Nesting this (each level adds
//! a fresh infinitesimal) yields the iterated first-order operators
//! `F_{i1}(F_{i2}(… f))` needed for bracket substitution and Taylor-Euler
//! expansions without finite differences.
//!
//! Vector fields, projectors and connection forms in this crate are written
//! against `Jet` so that any nesting depth up to [`MAX_INFINITESIMALS`] is
//! available to the solvers.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Maximum number of simultaneously active infinitesimals.
pub const MAX_INFINITESIMALS: usize = 4;
const CAP: usize = 1 << MAX_INFINITESIMALS;

#[derive(Clone, Copy)]
pub struct Jet {
    order: u8,
    c: [f64; CAP],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; CAP];
        c[0] = v;
        Jet { order: 0, c }
    }

    /// Number of active infinitesimals.
    #[inline]
    pub fn order(&self) -> usize {
        self.order as usize
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    #[inline]
    fn len(&self) -> usize {
        1 << self.order
    }

    /// Coefficient of the monomial indexed by the bit set `mask`.
    pub fn coeff(&self, mask: usize) -> f64 {
        if mask < self.len() {
            self.c[mask]
        } else {
            0.0
        }
    }

    /// The coefficient of `ε_k`, as a jet in the infinitesimals below `k`.
    ///
    /// Callers must only have used infinitesimals `< k` besides `ε_k` itself.
    pub fn derivative(&self, k: usize) -> Jet {
        debug_assert!(k < MAX_INFINITESIMALS);
        let mut out = Jet::constant(0.0);
        if k >= self.order() {
            return out;
        }
        out.order = k as u8;
        let bit = 1 << k;
        for s in 0..(1usize << k) {
            out.c[s] = self.c[s | bit];
        }
        out
    }

    /// `self + ε_k * dir`, raising the order to `k + 1`.
    pub fn perturbed(&self, k: usize, dir: &Jet) -> Jet {
        assert!(
            k < MAX_INFINITESIMALS,
            "jet nesting depth exceeds {MAX_INFINITESIMALS} infinitesimals"
        );
        let mut out = *self;
        out.order = out.order.max(k as u8 + 1);
        let bit = 1 << k;
        for s in 0..dir.len().min(bit) {
            out.c[s | bit] += dir.c[s];
        }
        out
    }

    fn raised(&self, order: u8) -> Jet {
        let mut out = *self;
        out.order = order;
        out
    }

    /// The nilpotent part `self - value()`.
    fn nilpotent(&self) -> Jet {
        let mut out = *self;
        out.c[0] = 0.0;
        out
    }

    /// Sum of `coeffs[k] * n^k` for nilpotent `n` with the value part set by the caller.
    fn taylor(&self, coeffs: &[f64]) -> Jet {
        let n = self.nilpotent();
        let mut out = Jet::constant(coeffs[0]).raised(self.order);
        let mut pow = Jet::constant(1.0);
        for &ck in coeffs.iter().skip(1).take(self.order()) {
            pow = pow * n;
            out += pow * ck;
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        let mut coeffs = [0.0; MAX_INFINITESIMALS + 1];
        let mut t = 1.0 / a;
        for ck in coeffs.iter_mut() {
            *ck = t;
            t *= -1.0 / a;
        }
        self.taylor(&coeffs)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    /// Real power for a positive value part.
    pub fn powf(&self, e: f64) -> Jet {
        let a = self.value();
        let mut coeffs = [0.0; MAX_INFINITESIMALS + 1];
        // binomial series: a^e (1 + n/a)^e
        let mut binom = 1.0;
        let base = a.powf(e);
        for (k, ck) in coeffs.iter_mut().enumerate() {
            *ck = base * binom / a.powi(k as i32);
            binom *= (e - k as f64) / (k as f64 + 1.0);
        }
        self.taylor(&coeffs)
    }

    pub fn exp(&self) -> Jet {
        let ea = self.value().exp();
        let mut coeffs = [0.0; MAX_INFINITESIMALS + 1];
        let mut fact = 1.0;
        for (k, ck) in coeffs.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *ck = ea / fact;
        }
        self.taylor(&coeffs)
    }

    pub fn sin(&self) -> Jet {
        self.trig(0)
    }

    pub fn cos(&self) -> Jet {
        self.trig(1)
    }

    fn trig(&self, phase: usize) -> Jet {
        let a = self.value();
        let cycle = [a.sin(), a.cos(), -a.sin(), -a.cos()];
        let mut coeffs = [0.0; MAX_INFINITESIMALS + 1];
        let mut fact = 1.0;
        for (k, ck) in coeffs.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *ck = cycle[(k + phase) % 4] / fact;
        }
        self.taylor(&coeffs)
    }

    pub fn powi(&self, n: u32) -> Jet {
        let mut out = Jet::constant(1.0);
        for _ in 0..n {
            out = out * *self;
        }
        out
    }
}

impl Default for Jet {
    fn default() -> Self {
        Jet::constant(0.0)
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.c[..self.len()]).finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        let n = self.len().max(other.len());
        (0..n).all(|s| self.coeff(s) == other.coeff(s))
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self += rhs;
        self
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        self.order = self.order.max(rhs.order);
        for s in 0..rhs.len() {
            self.c[s] += rhs.c[s];
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self -= rhs;
        self
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        self.order = self.order.max(rhs.order);
        for s in 0..rhs.len() {
            self.c[s] -= rhs.c[s];
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for s in 0..self.len() {
            self.c[s] = -self.c[s];
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        if self.order == 0 {
            return rhs * self.c[0];
        }
        if rhs.order == 0 {
            return self * rhs.c[0];
        }
        let order = self.order.max(rhs.order);
        let n = 1usize << order;
        let mut out = Jet::constant(0.0).raised(order);
        for s in 0..n {
            // sum over submasks t of s
            let mut t = s;
            let mut acc = 0.0;
            loop {
                acc += self.coeff(t) * rhs.coeff(s ^ t);
                if t == 0 {
                    break;
                }
                t = (t - 1) & s;
            }
            out.c[s] = acc;
        }
        out
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for s in 0..self.len() {
            self.c[s] *= rhs;
        }
        self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        if rhs.order == 0 {
            return self * (1.0 / rhs.c[0]);
        }
        self * rhs.recip()
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

/// Lift a point to constant jets.
pub fn lift(x: &[f64]) -> Vec<Jet> {
    x.iter().map(|&v| Jet::constant(v)).collect()
}

/// Value parts of a slice of jets.
pub fn values(x: &[Jet]) -> Vec<f64> {
    x.iter().map(Jet::value).collect()
}

/// Highest order among a set of jets.
pub fn max_order(x: &[Jet]) -> usize {
    x.iter().map(Jet::order).max().unwrap_or(0)
}

pub fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    a.iter()
        .zip(b)
        .fold(Jet::constant(0.0), |acc, (x, y)| acc + *x * *y)
}

/// `Dg(x)·v` for a jet-evaluable map `g`, exact up to round-off.
pub fn directional<G>(g: G, x: &[Jet], v: &[Jet]) -> Vec<Jet>
where
    G: FnOnce(&[Jet]) -> Vec<Jet>,
{
    let k = max_order(x).max(max_order(v));
    let y: Vec<Jet> = x.iter().zip(v).map(|(xi, vi)| xi.perturbed(k, vi)).collect();
    g(&y).iter().map(|r| r.derivative(k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn first_derivative_of_polynomial() {
        // f(x) = x^3 at x = 2, f' = 12
        let x = Jet::constant(2.0).perturbed(0, &Jet::constant(1.0));
        let y = x * x * x;
        assert_eq!(y.value(), 8.0);
        assert_eq!(y.derivative(0).value(), 12.0);
    }

    #[test]
    fn nested_derivatives_give_higher_orders() {
        // d^3/dx^3 sin(x) = -cos(x)
        let x0 = 0.7;
        let mut x = Jet::constant(x0);
        for k in 0..3 {
            x = x.perturbed(k, &Jet::constant(1.0));
        }
        let y = x.sin();
        assert!(close(y.coeff(0b111), -x0.cos(), 1e-14));
        assert!(close(y.coeff(0b011), -x0.sin(), 1e-14));
    }

    #[test]
    fn transcendental_functions_match_closed_forms() {
        let x0 = 1.3;
        let mut x = Jet::constant(x0);
        for k in 0..4 {
            x = x.perturbed(k, &Jet::constant(1.0));
        }
        let r = x.recip();
        // fourth derivative of 1/x is 24/x^5
        assert!(close(r.coeff(0b1111), 24.0 / x0.powi(5), 1e-13));
        let s = x.sqrt();
        // (x^{1/2})'' = -1/4 x^{-3/2}
        assert!(close(s.coeff(0b0011), -0.25 * x0.powf(-1.5), 1e-13));
        let e = x.exp();
        assert!(close(e.coeff(0b1111), x0.exp(), 1e-13));
        let c = x.cos();
        assert!(close(c.coeff(0b0001), -x0.sin(), 1e-14));
        let q = x / (x * x + 1.0);
        let fd = {
            let f = |t: f64| t / (t * t + 1.0);
            let h = 1e-6;
            (f(x0 + h) - f(x0 - h)) / (2.0 * h)
        };
        assert!(close(q.coeff(1), fd, 1e-8));
    }

    #[test]
    fn directional_derivative_of_map() {
        let x = lift(&[1.0, 2.0]);
        let v = lift(&[0.5, -1.0]);
        let d = directional(|y| vec![y[0] * y[1], y[1] * y[1]], &x, &v);
        assert_eq!(values(&d), vec![0.5 * 2.0 - 1.0, -4.0]);
    }
}
