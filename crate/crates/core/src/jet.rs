//! Forward-mode jets.
//!
//! [`Jet2`] carries value, gradient and Hessian of a scalar and is what
//! fields return. [`Local`] is a first-order jet whose entries are
//! themselves generic [`Scalar`]s: instantiated at `f64` it evaluates an
//! expression from first derivatives, and instantiated at [`Jet1`] the
//! same code also yields the gradient of the result. That is how
//! brackets of brackets get their derivatives without finite differences.

use std::ops::{Add, Mul, Neg, Sub};

/// Value and gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet1 {
    pub val: f64,
    pub grad: Vec<f64>,
}

impl Jet1 {
    pub fn constant(dim: usize, val: f64) -> Self {
        Self { val, grad: vec![0.0; dim] }
    }
}

/// Value, gradient and row-major Hessian.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub val: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Jet2 {
    pub fn constant(dim: usize, val: f64) -> Self {
        Self { val, grad: vec![0.0; dim], hess: vec![0.0; dim * dim] }
    }

    /// The coordinate function `x_i` evaluated at `x`.
    pub fn variable(x: &[f64], i: usize) -> Self {
        let mut j = Self::constant(x.len(), x[i]);
        j.grad[i] = 1.0;
        j
    }

    /// All coordinate functions at `x`.
    pub fn variables(x: &[f64]) -> Vec<Self> {
        (0..x.len()).map(|i| Self::variable(x, i)).collect()
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.dim() + j]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            val: self.val * c,
            grad: self.grad.iter().map(|g| g * c).collect(),
            hess: self.hess.iter().map(|h| h * c).collect(),
        }
    }

    /// `φ(self)` given `φ(v)`, `φ'(v)`, `φ''(v)`.
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let d = self.dim();
        let mut hess = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                hess[i * d + j] = f1 * self.hess[i * d + j] + f2 * self.grad[i] * self.grad[j];
            }
        }
        Self { val: f0, grad: self.grad.iter().map(|g| f1 * g).collect(), hess }
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(&self) -> Self {
        let e = self.val.exp();
        self.chain(e, e, e)
    }

    pub fn powi(&self, n: i32) -> Self {
        match n {
            0 => Self::constant(self.dim(), 1.0),
            1 => self.clone(),
            _ => {
                let v = self.val;
                let nf = n as f64;
                self.chain(v.powi(n), nf * v.powi(n - 1), nf * (nf - 1.0) * v.powi(n - 2))
            }
        }
    }

    pub fn recip(&self) -> Self {
        let v = self.val;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    fn zip(&self, o: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dim(), o.dim(), "jet dimensions differ");
        Self {
            val: f(self.val, o.val),
            grad: self.grad.iter().zip(&o.grad).map(|(a, b)| f(*a, *b)).collect(),
            hess: self.hess.iter().zip(&o.hess).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    fn product(&self, o: &Self) -> Self {
        assert_eq!(self.dim(), o.dim(), "jet dimensions differ");
        let d = self.dim();
        let (a, b) = (self.val, o.val);
        let mut hess = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                hess[k] = a * o.hess[k]
                    + b * self.hess[k]
                    + self.grad[i] * o.grad[j]
                    + o.grad[i] * self.grad[j];
            }
        }
        Self {
            val: a * b,
            grad: self.grad.iter().zip(&o.grad).map(|(ga, gb)| a * gb + b * ga).collect(),
            hess,
        }
    }
}

macro_rules! jet2_binops {
    ($lhs:ty, $rhs:ty) => {
        impl Add<$rhs> for $lhs {
            type Output = Jet2;
            fn add(self, o: $rhs) -> Jet2 {
                self.zip(&o, |a, b| a + b)
            }
        }
        impl Sub<$rhs> for $lhs {
            type Output = Jet2;
            fn sub(self, o: $rhs) -> Jet2 {
                self.zip(&o, |a, b| a - b)
            }
        }
        impl Mul<$rhs> for $lhs {
            type Output = Jet2;
            fn mul(self, o: $rhs) -> Jet2 {
                self.product(&o)
            }
        }
    };
}

jet2_binops!(Jet2, Jet2);
jet2_binops!(&Jet2, &Jet2);
jet2_binops!(Jet2, &Jet2);
jet2_binops!(&Jet2, Jet2);

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(mut self, c: f64) -> Jet2 {
        self.val += c;
        self
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, c: f64) -> Jet2 {
        self.scale(c)
    }
}

impl Mul<f64> for &Jet2 {
    type Output = Jet2;
    fn mul(self, c: f64) -> Jet2 {
        self.scale(c)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

/// Minimal ring interface for the generic first-order calculus.
pub trait Scalar: Clone + Send + Sync {
    fn zero_like(&self) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn value(&self) -> f64;
}

impl Scalar for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn value(&self) -> f64 {
        *self
    }
}

impl Scalar for Jet1 {
    fn zero_like(&self) -> Self {
        Jet1::constant(self.grad.len(), 0.0)
    }
    fn plus(&self, o: &Self) -> Self {
        Jet1 { val: self.val + o.val, grad: self.grad.iter().zip(&o.grad).map(|(a, b)| a + b).collect() }
    }
    fn minus(&self, o: &Self) -> Self {
        Jet1 { val: self.val - o.val, grad: self.grad.iter().zip(&o.grad).map(|(a, b)| a - b).collect() }
    }
    fn times(&self, o: &Self) -> Self {
        Jet1 {
            val: self.val * o.val,
            grad: self.grad.iter().zip(&o.grad).map(|(a, b)| self.val * b + o.val * a).collect(),
        }
    }
    fn scale(&self, c: f64) -> Self {
        Jet1 { val: self.val * c, grad: self.grad.iter().map(|g| g * c).collect() }
    }
    fn value(&self) -> f64 {
        self.val
    }
}

/// A quantity together with its partial derivatives, entries in `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Local<T> {
    pub val: T,
    pub d: Vec<T>,
}

impl<T: Scalar> Local<T> {
    /// A value with vanishing derivatives.
    pub fn frozen(val: T, dim: usize) -> Self {
        let z = val.zero_like();
        Self { val, d: vec![z; dim] }
    }

    pub fn zero_like(&self) -> Self {
        Self { val: self.val.zero_like(), d: self.d.iter().map(Scalar::zero_like).collect() }
    }

    pub fn plus(&self, o: &Self) -> Self {
        Self { val: self.val.plus(&o.val), d: self.d.iter().zip(&o.d).map(|(a, b)| a.plus(b)).collect() }
    }

    pub fn minus(&self, o: &Self) -> Self {
        Self { val: self.val.minus(&o.val), d: self.d.iter().zip(&o.d).map(|(a, b)| a.minus(b)).collect() }
    }

    pub fn times(&self, o: &Self) -> Self {
        Self {
            val: self.val.times(&o.val),
            d: self
                .d
                .iter()
                .zip(&o.d)
                .map(|(da, db)| self.val.times(db).plus(&o.val.times(da)))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { val: self.val.scale(c), d: self.d.iter().map(|x| x.scale(c)).collect() }
    }
}

/// Scalars that can be read off a [`Jet2`] as a [`Local`].
pub trait FromJet2: Scalar {
    fn local(j: &Jet2) -> Local<Self>;
    fn frozen_value(v: f64, dim: usize) -> Self;
}

impl FromJet2 for f64 {
    fn local(j: &Jet2) -> Local<f64> {
        Local { val: j.val, d: j.grad.clone() }
    }
    fn frozen_value(v: f64, _dim: usize) -> f64 {
        v
    }
}

impl FromJet2 for Jet1 {
    fn local(j: &Jet2) -> Local<Jet1> {
        let n = j.dim();
        Local {
            val: Jet1 { val: j.val, grad: j.grad.clone() },
            d: (0..n)
                .map(|l| Jet1 { val: j.grad[l], grad: j.hess[l * n..(l + 1) * n].to_vec() })
                .collect(),
        }
    }
    fn frozen_value(v: f64, dim: usize) -> Jet1 {
        Jet1::constant(dim, v)
    }
}

pub fn locals<T: FromJet2>(js: &[Jet2]) -> Vec<Local<T>> {
    js.iter().map(T::local).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(x: &[Jet2]) -> Jet2 {
        // sin(x0 x1) + exp(x2) x0^3 - cos(x1) / (2 + x2^2)
        let a = (&x[0] * &x[1]).sin();
        let b = x[2].exp() * x[0].powi(3);
        let c = x[1].cos() * (x[2].powi(2) + 2.0).recip();
        a + b - c
    }

    fn fval(x: &[f64]) -> f64 {
        (x[0] * x[1]).sin() + x[2].exp() * x[0].powi(3) - x[1].cos() / (2.0 + x[2] * x[2])
    }

    #[test]
    fn derivatives_match_central_differences() {
        let x = [0.3, -0.7, 0.4];
        let j = f(&Jet2::variables(&x));
        let h = 1e-5;
        for i in 0..3 {
            let mut p = x;
            let mut m = x;
            p[i] += h;
            m[i] -= h;
            let fd = (fval(&p) - fval(&m)) / (2.0 * h);
            assert!((fd - j.grad[i]).abs() < 1e-8);
            for k in 0..3 {
                let gp = f(&Jet2::variables(&p)).grad[k];
                let gm = f(&Jet2::variables(&m)).grad[k];
                assert!(((gp - gm) / (2.0 * h) - j.hess_at(i, k)).abs() < 1e-7);
            }
        }
        for i in 0..3 {
            for k in 0..3 {
                assert_eq!(j.hess_at(i, k), j.hess_at(k, i));
            }
        }
    }

    #[test]
    fn local_jet1_gives_gradient_of_products() {
        let x = [1.5, -2.0];
        let v = Jet2::variables(&x);
        let p = &v[0] * &v[1];
        let q = v[0].sin();
        // d/dx of (p * dq/dx0)
        let lp = Jet1::local(&p);
        let lq = Jet1::local(&q);
        let prod = lp.val.times(&lq.d[0]);
        let expected = [x[1] * x[0].cos() - x[0] * x[1] * x[0].sin(), x[0] * x[0].cos()];
        for i in 0..2 {
            assert!((prod.grad[i] - expected[i]).abs() < 1e-14);
        }
        let fl = f64::local(&p).times(&f64::local(&q));
        assert!((fl.d[1] - x[0] * x[0].sin()).abs() < 1e-14);
    }
}
