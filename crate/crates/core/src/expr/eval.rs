use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{Expr, Func};
use crate::error::{Error, Result};
use crate::Scalar;

/// A carrier the evaluator can compute in: a plain scalar, or a truncated
/// Taylor object such as [`crate::Jet2`].
pub trait Numeric<T: Scalar>:
    Sized
    + Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// What is needed to build a constant (the jet dimension, say).
    type Ctx: Copy;

    fn constant(ctx: Self::Ctx, c: T) -> Self;

    fn value(&self) -> T;

    /// Composes with a unary function given its value and first two
    /// derivatives at `self.value()`.
    fn chain(&self, f: T, d1: T, d2: T) -> Self;

    fn is_finite(&self) -> bool {
        self.value().is_finite()
    }
}

impl<T: Scalar> Numeric<T> for T {
    type Ctx = ();

    fn constant(_: (), c: T) -> T {
        c
    }

    fn value(&self) -> T {
        *self
    }

    fn chain(&self, f: T, _d1: T, _d2: T) -> T {
        f
    }
}

pub(super) fn evaluate<T: Scalar, N: Numeric<T>>(
    e: &Expr,
    ctx: N::Ctx,
    lookup: &dyn Fn(&str) -> Option<N>,
) -> Result<N> {
    let out = Evaluator { ctx, lookup }.eval(e)?;
    if !out.is_finite() {
        return Err(Error::NonFinite(e.to_string()));
    }
    Ok(out)
}

struct Evaluator<'a, T: Scalar, N: Numeric<T>> {
    ctx: N::Ctx,
    lookup: &'a dyn Fn(&str) -> Option<N>,
}

impl<T: Scalar, N: Numeric<T>> Evaluator<'_, T, N> {
    fn eval(&self, e: &Expr) -> Result<N> {
        let out = match e {
            Expr::Num(c) => N::constant(self.ctx, T::lit(*c)),
            Expr::Var(name) => {
                (self.lookup)(name).ok_or_else(|| Error::UnboundVariable(name.clone()))?
            }
            Expr::Neg(a) => -self.eval(a)?,
            Expr::Add(a, b) => self.eval(a)? + self.eval(b)?,
            Expr::Sub(a, b) => self.eval(a)? - self.eval(b)?,
            Expr::Mul(a, b) => self.eval(a)? * self.eval(b)?,
            Expr::Div(a, b) => {
                let num = self.eval(a)?;
                let den = self.eval(b)?;
                let d = den.value();
                if d == T::zero() {
                    return Err(Error::Domain(format!("division by zero in {e}")));
                }
                // a / b = a * recip(b), with recip's derivative triple.
                let r = d.recip();
                num * den.chain(r, -r * r, T::lit(2.0) * r * r * r)
            }
            Expr::Pow(a, b) => self.pow(e, a, b)?,
            Expr::Call(func, a) => {
                let arg = self.eval(a)?;
                let (f, d1, d2) = func.triple(arg.value())?;
                arg.chain(f, d1, d2)
            }
        };
        if !out.value().is_finite() {
            return Err(Error::NonFinite(e.to_string()));
        }
        Ok(out)
    }

    fn pow(&self, whole: &Expr, base: &Expr, exponent: &Expr) -> Result<N> {
        let u = self.eval(base)?;
        let u0 = u.value();
        // Exponents without free variables are treated as constants, so
        // that integer powers of negative bases are allowed.
        if exponent.free_vars().is_empty() {
            let c: T = exponent.eval(&[])?;
            let k = c.to_i32().filter(|k| T::lit(f64::from(*k)) == c);
            if let Some(k) = k {
                return match k {
                    0 => Ok(N::constant(self.ctx, T::one())),
                    1 => Ok(u),
                    _ => {
                        if u0 == T::zero() && k < 0 {
                            return Err(Error::Domain(format!("zero to a negative power in {whole}")));
                        }
                        let kf = T::lit(f64::from(k));
                        let d2 = kf * (kf - T::one()) * u0.powi(k - 2);
                        Ok(u.chain(u0.powi(k), kf * u0.powi(k - 1), d2))
                    }
                };
            }
            if u0 < T::zero() {
                return Err(Error::Domain(format!("negative base to a fractional power in {whole}")));
            }
            let d1 = c * u0.powf(c - T::one());
            let d2 = c * (c - T::one()) * u0.powf(c - T::lit(2.0));
            return Ok(u.chain(u0.powf(c), d1, d2));
        }
        // u^v = exp(v ln u)
        if u0 <= T::zero() {
            return Err(Error::Domain(format!("nonpositive base to a variable power in {whole}")));
        }
        let v = self.eval(exponent)?;
        let (l, l1, l2) = Func::Log.triple(u0)?;
        let prod = v * u.chain(l, l1, l2);
        let (f, d1, d2) = Func::Exp.triple(prod.value())?;
        Ok(prod.chain(f, d1, d2))
    }
}
