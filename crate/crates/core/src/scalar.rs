//! Float scalars for the loss path: plain `f64` and forward-mode dual
//! numbers carrying a dense tangent vector.

use alloc::vec;
use alloc::vec::Vec;

/// Arithmetic shared by `f64` and [`Dual`]. Non-smooth operations take the
/// left branch at a tie.
pub trait Scalar: Clone {
    fn constant(x: f64) -> Self;
    fn value(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    /// `self^p` for a constant exponent; `0^p` is 0 with zero derivative.
    fn powf(&self, p: f64) -> Self;

    fn max(&self, o: &Self) -> Self {
        if self.value() >= o.value() {
            self.clone()
        } else {
            o.clone()
        }
    }

    fn min(&self, o: &Self) -> Self {
        if self.value() <= o.value() {
            self.clone()
        } else {
            o.clone()
        }
    }

    fn abs(&self) -> Self {
        if self.value() >= 0.0 {
            self.clone()
        } else {
            self.neg()
        }
    }

    fn relu(&self) -> Self {
        self.max(&Self::constant(0.0))
    }
}

impl Scalar for f64 {
    fn constant(x: f64) -> Self {
        x
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn powf(&self, p: f64) -> Self {
        if *self <= 0.0 {
            0.0
        } else {
            libm::pow(*self, p)
        }
    }
}

/// `value + Σ tangent[i]·εᵢ`. An empty tangent stands for the zero vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub tangent: Vec<f64>,
}

impl Dual {
    /// The `i`th of `n` independent variables.
    pub fn variable(value: f64, i: usize, n: usize) -> Self {
        let mut tangent = vec![0.0; n];
        tangent[i] = 1.0;
        Dual { value, tangent }
    }

    /// Derivative with respect to variable `i`.
    pub fn d(&self, i: usize) -> f64 {
        self.tangent.get(i).copied().unwrap_or(0.0)
    }

    fn combine(value: f64, a: &Dual, ka: f64, b: &Dual, kb: f64) -> Dual {
        let n = a.tangent.len().max(b.tangent.len());
        let mut tangent = Vec::with_capacity(if a.tangent.is_empty() && b.tangent.is_empty() { 0 } else { n });
        if !(a.tangent.is_empty() && b.tangent.is_empty()) {
            for i in 0..n {
                tangent.push(ka * a.d(i) + kb * b.d(i));
            }
        }
        Dual { value, tangent }
    }

    fn scaled(&self, value: f64, k: f64) -> Dual {
        Dual { value, tangent: self.tangent.iter().map(|t| k * t).collect() }
    }
}

impl Scalar for Dual {
    fn constant(x: f64) -> Self {
        Dual { value: x, tangent: Vec::new() }
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn add(&self, o: &Self) -> Self {
        Dual::combine(self.value + o.value, self, 1.0, o, 1.0)
    }
    fn sub(&self, o: &Self) -> Self {
        Dual::combine(self.value - o.value, self, 1.0, o, -1.0)
    }
    fn mul(&self, o: &Self) -> Self {
        Dual::combine(self.value * o.value, self, o.value, o, self.value)
    }
    fn div(&self, o: &Self) -> Self {
        let q = self.value / o.value;
        Dual::combine(q, self, 1.0 / o.value, o, -q / o.value)
    }
    fn neg(&self) -> Self {
        self.scaled(-self.value, -1.0)
    }
    fn powf(&self, p: f64) -> Self {
        if self.value <= 0.0 {
            return Dual::constant(0.0);
        }
        let v = libm::pow(self.value, p);
        self.scaled(v, p * libm::pow(self.value, p - 1.0))
    }
}
