//! Second-order forward-mode jets.
//!
//! A [`Jet2`] carries a value, its gradient over `m` seed directions and
//! its Hessian. Only the upper triangle of the Hessian is stored, so it is
//! symmetric by construction.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::expr::{Expr, Numeric};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Jet2<T> {
    value: T,
    grad: Vec<T>,
    /// Packed upper triangle, row major.
    hess: Vec<T>,
}

#[inline]
fn packed_len(m: usize) -> usize {
    m * (m + 1) / 2
}

#[inline]
fn packed_index(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * m - i - 1) / 2 + j
}

impl<T: Scalar> Jet2<T> {
    pub fn constant(m: usize, value: T) -> Self {
        Jet2 {
            value,
            grad: vec![T::zero(); m],
            hess: vec![T::zero(); packed_len(m)],
        }
    }

    /// Seed jet for direction `i`: value `point[i]`, gradient `e_i`.
    pub fn lift(point: &[T], i: usize) -> Result<Self> {
        let m = point.len();
        if i >= m {
            return Err(Error::IndexOutOfRange { index: i, dim: m });
        }
        let mut j = Jet2::constant(m, point[i]);
        j.grad[i] = T::one();
        Ok(j)
    }

    /// Builds a jet from a value, gradient and full Hessian. Only the upper
    /// triangle of `hess` is read.
    pub fn from_parts(value: T, grad: Vec<T>, hess: impl Fn(usize, usize) -> T) -> Self {
        let m = grad.len();
        let mut packed = Vec::with_capacity(packed_len(m));
        for i in 0..m {
            for j in i..m {
                packed.push(hess(i, j));
            }
        }
        Jet2 { value, grad, hess: packed }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn value(&self) -> T {
        self.value
    }

    pub fn grad(&self) -> &[T] {
        &self.grad
    }

    pub fn hess(&self, i: usize, j: usize) -> T {
        self.hess[packed_index(self.dim(), i, j)]
    }

    pub fn hess_matrix(&self) -> Vec<Vec<T>> {
        let m = self.dim();
        (0..m).map(|i| (0..m).map(|j| self.hess(i, j)).collect()).collect()
    }

    /// Restricts to a subset of directions (e.g. drop a parameter that was
    /// only seeded to be held fixed).
    pub fn project(&self, dirs: &[usize]) -> Self {
        Jet2::from_parts(
            self.value,
            dirs.iter().map(|&i| self.grad[i]).collect(),
            |a, b| self.hess(dirs[a], dirs[b]),
        )
    }

    pub fn all_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.iter().all(|h| h.is_finite())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Jet2 {
            value: f(self.value, other.value),
            grad: self.grad.iter().zip(&other.grad).map(|(&a, &b)| f(a, b)).collect(),
            hess: self.hess.iter().zip(&other.hess).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    fn scale(&self, s: T) -> Self {
        Jet2 {
            value: self.value * s,
            grad: self.grad.iter().map(|&g| g * s).collect(),
            hess: self.hess.iter().map(|&h| h * s).collect(),
        }
    }

    fn product(&self, other: &Self) -> Self {
        let m = self.dim();
        debug_assert_eq!(m, other.dim());
        let (a, b) = (self.value, other.value);
        let grad = (0..m).map(|i| a * other.grad[i] + b * self.grad[i]).collect();
        let mut hess = Vec::with_capacity(packed_len(m));
        let mut k = 0;
        for i in 0..m {
            for j in i..m {
                let cross = self.grad[i] * other.grad[j] + other.grad[i] * self.grad[j];
                hess.push(a * other.hess[k] + b * self.hess[k] + cross);
                k += 1;
            }
        }
        Jet2 { value: a * b, grad, hess }
    }

    /// `f(self)` given `f`, `f'`, `f''` at `self.value`.
    pub fn compose(&self, f: T, d1: T, d2: T) -> Self {
        let m = self.dim();
        let grad = self.grad.iter().map(|&g| d1 * g).collect();
        let mut hess = Vec::with_capacity(packed_len(m));
        let mut k = 0;
        for i in 0..m {
            for j in i..m {
                hess.push(d1 * self.hess[k] + d2 * self.grad[i] * self.grad[j]);
                k += 1;
            }
        }
        Jet2 { value: f, grad, hess }
    }

    pub fn recip(&self) -> Self {
        let r = self.value.recip();
        self.compose(r, -r * r, T::lit(2.0) * r * r * r)
    }
}

impl<T: Scalar> Add for Jet2<T> {
    type Output = Jet2<T>;
    fn add(self, rhs: Self) -> Self {
        self.zip_with(&rhs, |a, b| a + b)
    }
}

impl<T: Scalar> Sub for Jet2<T> {
    type Output = Jet2<T>;
    fn sub(self, rhs: Self) -> Self {
        self.zip_with(&rhs, |a, b| a - b)
    }
}

impl<T: Scalar> Mul for Jet2<T> {
    type Output = Jet2<T>;
    fn mul(self, rhs: Self) -> Self {
        self.product(&rhs)
    }
}

impl<T: Scalar> Mul<T> for Jet2<T> {
    type Output = Jet2<T>;
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}

impl<T: Scalar> Div for Jet2<T> {
    type Output = Jet2<T>;
    fn div(self, rhs: Self) -> Self {
        self.product(&rhs.recip())
    }
}

impl<T: Scalar> Neg for Jet2<T> {
    type Output = Jet2<T>;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Numeric<T> for Jet2<T> {
    type Ctx = usize;

    fn constant(m: usize, c: T) -> Self {
        Jet2::constant(m, c)
    }

    fn value(&self) -> T {
        self.value
    }

    fn chain(&self, f: T, d1: T, d2: T) -> Self {
        self.compose(f, d1, d2)
    }

    fn is_finite(&self) -> bool {
        self.all_finite()
    }
}

/// Value, gradient and Hessian of `e` at `point`, with `vars[i]` seeded as
/// direction `i`. Every free variable of `e` must appear in `vars`.
pub fn jet_eval<T: Scalar>(e: &Expr, point: &[T], vars: &[&str]) -> Result<Jet2<T>> {
    jet_eval_with(e, point, vars, &[])
}

/// Like [`jet_eval`], with extra variables held at fixed values.
pub fn jet_eval_with<T: Scalar>(
    e: &Expr,
    point: &[T],
    vars: &[&str],
    fixed: &[(&str, T)],
) -> Result<Jet2<T>> {
    if point.len() != vars.len() {
        return Err(Error::DimensionMismatch { expected: vars.len(), found: point.len() });
    }
    let m = vars.len();
    e.eval_numeric(m, &|name| {
        if let Some(i) = vars.iter().position(|v| *v == name) {
            Jet2::lift(point, i).ok()
        } else {
            fixed
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| Jet2::constant(m, *v))
        }
    })
}

/// Evaluates `e` with variables bound to arbitrary jets of dimension `m`,
/// composing derivatives through them.
pub fn jet_compose<T: Scalar>(e: &Expr, m: usize, bindings: &[(&str, Jet2<T>)]) -> Result<Jet2<T>> {
    e.eval_numeric(m, &|name| {
        bindings.iter().find(|(n, _)| *n == name).map(|(_, j)| j.clone())
    })
}
