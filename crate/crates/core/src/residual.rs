//! PDE residuals evaluated on field jets.
//!
//! Every residual is returned together with a scale: the sum of the
//! magnitudes of the equation's additive terms (for determinants, the sum
//! over all Leibniz terms). `raw / scale` is dimensionless, so a single
//! tolerance is meaningful across families of very different magnitude.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::implicit::FieldJet;
use crate::jet::jet_eval_with;
use crate::linalg::SquareMatrix;
use crate::Scalar;

pub const SCALE_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual<T> {
    pub raw: T,
    pub scale: T,
}

impl<T: Scalar> Residual<T> {
    pub fn zero() -> Self {
        Residual { raw: T::zero(), scale: T::zero() }
    }

    /// Accumulates one additive term.
    pub fn term(mut self, v: T) -> Self {
        self.raw = self.raw + v;
        self.scale = self.scale + v.abs();
        self
    }

    pub fn from_terms(terms: impl IntoIterator<Item = T>) -> Self {
        terms.into_iter().fold(Self::zero(), Self::term)
    }

    pub fn combine(self, other: Self) -> Self {
        Residual { raw: self.raw + other.raw, scale: self.scale + other.scale }
    }

    pub fn scaled(self, s: T) -> Self {
        Residual { raw: self.raw * s, scale: self.scale * s.abs() }
    }

    pub fn normalized(&self) -> T {
        self.raw.abs() / self.scale.max(T::lit(SCALE_FLOOR))
    }
}

/// The pairwise Bateman operator
/// `f_pq = phi_p^2 phi_qq - 2 phi_p phi_q phi_pq + phi_q^2 phi_pp`.
pub fn f_pair<T: Scalar>(j: &FieldJet<T>, p: usize, q: usize) -> T {
    f_pair_terms(j, p, q).raw
}

pub fn f_pair_terms<T: Scalar>(j: &FieldJet<T>, p: usize, q: usize) -> Residual<T> {
    let (a, b) = (j.d(p), j.d(q));
    Residual::from_terms([
        a * a * j.dd(q, q),
        -T::lit(2.0) * a * b * j.dd(p, q),
        b * b * j.dd(p, p),
    ])
}

fn check_index<T: Scalar>(j: &FieldJet<T>, idx: &[usize]) -> Result<()> {
    match idx.iter().find(|&&i| i >= j.n()) {
        Some(&i) => Err(Error::IndexOutOfRange { index: i, dim: j.n() }),
        None => Ok(()),
    }
}

pub fn f_pair_checked<T: Scalar>(j: &FieldJet<T>, p: usize, q: usize) -> Result<T> {
    check_index(j, &[p, q])?;
    if p == q {
        return Err(Error::Arity("f_pq needs distinct indices".into()));
    }
    Ok(f_pair(j, p, q))
}

/// Bateman equation in two variables.
pub fn bateman_residual<T: Scalar>(j: &FieldJet<T>) -> Result<Residual<T>> {
    j.require_dim(2)?;
    Ok(f_pair_terms(j, 0, 1))
}

/// `[[0, grad^T], [grad, hess]]` for the jet.
pub fn bordered_hessian<T: Scalar>(j: &FieldJet<T>) -> SquareMatrix<T> {
    let h = SquareMatrix::from_fn(j.n(), |p, q| j.dd(p, q));
    h.bordered(T::zero(), j.grad())
}

/// Universal Field Equation: the bordered Hessian determinant.
pub fn ufe_residual<T: Scalar>(j: &FieldJet<T>) -> Result<Residual<T>> {
    if j.n() < 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: j.n() });
    }
    let b = bordered_hessian(j);
    Ok(Residual { raw: b.determinant(), scale: b.abs_permanent() })
}

/// `f_12 + f_23 + f_13`
pub fn sum_bateman_residual<T: Scalar>(j: &FieldJet<T>) -> Result<Residual<T>> {
    j.require_dim(3)?;
    Ok(f_pair_terms(j, 0, 1)
        .combine(f_pair_terms(j, 1, 2))
        .combine(f_pair_terms(j, 0, 2)))
}

/// Complex Bateman equation over coordinates ordered `(x, y, z, w)`:
/// `phi_x phi_z phi_yw - phi_x phi_w phi_yz - phi_y phi_z phi_xw + phi_y phi_w phi_xz`.
///
/// This is `phi_w d_z(phi_x/phi_y) - phi_z d_w(phi_x/phi_y)` cleared of
/// denominators, so every `F(x, y, phi) = G(z, w, phi)` solves it. With the
/// last two signs flipped the product and `F(f(x,y), g(z,w))` solutions still
/// pass but `x + y phi = z + w phi` does not.
pub fn complex_bateman_residual<T: Scalar>(j: &FieldJet<T>) -> Result<Residual<T>> {
    j.require_dim(4)?;
    let (x, y, z, w) = (0, 1, 2, 3);
    let d = |i| j.d(i);
    Ok(Residual::from_terms([
        d(x) * d(z) * j.dd(y, w),
        -d(x) * d(w) * j.dd(y, z),
        -d(y) * d(z) * j.dd(x, w),
        d(y) * d(w) * j.dd(x, z),
    ]))
}

/// `phi_1^2 phi_2 x_1 + phi_1 phi_2^2 x_2 - x_1 x_2 f_12`: the equation
/// solved by `M11(phi) x1^2 + M22(phi) x2^2 = 1`.
pub fn example2_residual<T: Scalar>(j: &FieldJet<T>) -> Result<Residual<T>> {
    j.require_dim(2)?;
    let (p1, p2) = (j.d(0), j.d(1));
    let (x1, x2) = (j.x()[0], j.x()[1]);
    let f = f_pair_terms(j, 0, 1).scaled(-x1 * x2);
    Ok(Residual::from_terms([p1 * p1 * p2 * x1, p1 * p2 * p2 * x2]).combine(f))
}

/// Residuals of a surface `t = A(phi, x1, x2)` with `phi` held fixed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceResiduals<T> {
    /// Hessian determinant of `A` in the x-variables.
    pub monge_ampere: Residual<T>,
    /// `(1 + A_1^2) A_22 + (1 + A_2^2) A_11 - 2 A_1 A_2 A_12`
    pub bateman2d: Residual<T>,
}

/// `point = (phi, x1, .., xk)`. The Monge-Ampere determinant is taken over
/// however many x-variables `A` is given in; `bateman2d` needs two.
pub fn a_surface_residuals<T: Scalar>(a: &Expr, xs: &[&str], point: &[T]) -> Result<SurfaceResiduals<T>> {
    if point.len() != xs.len() + 1 {
        return Err(Error::DimensionMismatch { expected: xs.len() + 1, found: point.len() });
    }
    let jet = jet_eval_with(a, &point[1..], xs, &[("phi", point[0])])?;
    let k = xs.len();
    let h = SquareMatrix::from_fn(k, |i, l| jet.hess(i, l));
    let monge_ampere = Residual { raw: h.determinant(), scale: h.abs_permanent() };
    let bateman2d = if k == 2 {
        let (a1, a2) = (jet.grad()[0], jet.grad()[1]);
        let (a11, a12, a22) = (jet.hess(0, 0), jet.hess(0, 1), jet.hess(1, 1));
        Residual::from_terms([
            a22,
            a1 * a1 * a22,
            a11,
            a2 * a2 * a11,
            -T::lit(2.0) * a1 * a2 * a12,
        ])
    } else {
        Residual { raw: T::nan(), scale: T::one() }
    };
    Ok(SurfaceResiduals { monge_ampere, bateman2d })
}

/// Residuals of the first-order system
/// `u_x = v u_y, v_z = u v_w, phi_x = v phi_y, phi_z = u phi_w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FirstOrderResiduals<T> {
    pub u_eq: Residual<T>,
    pub v_eq: Residual<T>,
    pub phi_x_eq: Residual<T>,
    pub phi_z_eq: Residual<T>,
}

impl<T: Scalar> FirstOrderResiduals<T> {
    pub fn all(&self) -> [Residual<T>; 4] {
        [self.u_eq, self.v_eq, self.phi_x_eq, self.phi_z_eq]
    }

    pub fn worst(&self) -> Residual<T> {
        self.all()
            .into_iter()
            .fold(Residual::zero(), |w, r| if r.normalized() > w.normalized() { r } else { w })
    }
}

/// A ratio `num/den` and its total derivatives along the four coordinates.
/// `scale` holds the quotient-rule terms in absolute value, so a derivative
/// that cancels to roundoff is measured against its parts.
struct Quotient<T> {
    value: T,
    d: [T; 4],
    scale: [T; 4],
}

fn quotient<T: Scalar>(num: T, den: T, dnum: [T; 4], dden: [T; 4]) -> Quotient<T> {
    let mut d = [T::zero(); 4];
    let mut scale = [T::zero(); 4];
    for k in 0..4 {
        d[k] = (dnum[k] * den - num * dden[k]) / (den * den);
        scale[k] = ((dnum[k] * den).abs() + (num * dden[k]).abs()) / (den * den);
    }
    Quotient { value: num / den, d, scale }
}

fn assemble<T: Scalar>(j: &FieldJet<T>, u: Quotient<T>, v: Quotient<T>) -> FirstOrderResiduals<T> {
    let (x, y, z, w) = (0, 1, 2, 3);
    let r = |a: T, b: T| Residual::from_terms([a, -b]);
    let chained = |q: &Quotient<T>, a: usize, c: T, b: usize| Residual {
        raw: q.d[a] - c * q.d[b],
        scale: q.scale[a] + (c * q.scale[b]).abs(),
    };
    FirstOrderResiduals {
        u_eq: chained(&u, x, v.value, y),
        v_eq: chained(&v, z, u.value, w),
        phi_x_eq: r(j.d(x), v.value * j.d(y)),
        phi_z_eq: r(j.d(z), u.value * j.d(w)),
    }
}

/// First-order system for a Chaundy family `F(x, y, phi) = G(z, w, phi)`
/// with `v = F_x / F_y`, `u = G_z / G_w`. Derivatives of `u` and `v` are
/// taken through the implicit `phi` using its jet `j`.
pub fn first_order_system_residual<T: Scalar>(
    f: &Expr,
    g: &Expr,
    j: &FieldJet<T>,
) -> Result<FirstOrderResiduals<T>> {
    j.require_dim(4)?;
    let pt = j.x();
    let phi = j.phi();
    let fj = jet_eval_with(f, &[pt[0], pt[1], phi], &["x", "y", "phi"], &[])?;
    let gj = jet_eval_with(g, &[pt[2], pt[3], phi], &["z", "w", "phi"], &[])?;
    let threshold = T::lit(crate::implicit::DEFAULT_SINGULAR_THRESHOLD);
    for v in [fj.grad()[1], gj.grad()[1]] {
        if v.abs() <= threshold {
            return Err(Error::SingularPoint { derivative: v.abs().as_f64(), threshold: threshold.as_f64() });
        }
    }
    let grad = j.grad();
    // d/dx_k of a first partial F_a(x, y, phi(x, y, z, w)); own variables
    // occupy directions `own` of the 4-vector.
    let total = |jet: &crate::jet::Jet2<T>, a: usize, own: [usize; 2]| {
        let mut d = [T::zero(); 4];
        for (k, dk) in d.iter_mut().enumerate() {
            let mut acc = jet.hess(a, 2) * grad[k];
            if k == own[0] {
                acc = acc + jet.hess(a, 0);
            }
            if k == own[1] {
                acc = acc + jet.hess(a, 1);
            }
            *dk = acc;
        }
        d
    };
    let v = quotient(fj.grad()[0], fj.grad()[1], total(&fj, 0, [0, 1]), total(&fj, 1, [0, 1]));
    let u = quotient(gj.grad()[0], gj.grad()[1], total(&gj, 0, [2, 3]), total(&gj, 1, [2, 3]));
    Ok(assemble(j, u, v))
}

/// The same system with `v = phi_x / phi_y`, `u = phi_z / phi_w` read off
/// the jet of an explicit field.
pub fn first_order_system_from_jet<T: Scalar>(j: &FieldJet<T>) -> Result<FirstOrderResiduals<T>> {
    j.require_dim(4)?;
    let threshold = T::lit(crate::implicit::DEFAULT_SINGULAR_THRESHOLD);
    for i in [1, 3] {
        if j.d(i).abs() <= threshold {
            return Err(Error::SingularPoint { derivative: j.d(i).abs().as_f64(), threshold: threshold.as_f64() });
        }
    }
    let row = |i: usize| [j.dd(i, 0), j.dd(i, 1), j.dd(i, 2), j.dd(i, 3)];
    let v = quotient(j.d(0), j.d(1), row(0), row(1));
    let u = quotient(j.d(2), j.d(3), row(2), row(3));
    Ok(assemble(j, u, v))
}

/// One point's contribution to a [`ResidualReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    pub point: Vec<f64>,
    pub phi: f64,
    pub raw: f64,
    pub scale: f64,
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub check: String,
    pub tolerance: f64,
    pub records: Vec<PointRecord>,
    pub max_normalized: f64,
    pub mean_normalized: f64,
    pub pass: bool,
}

impl ResidualReport {
    pub fn new(check: impl Into<String>, tolerance: f64) -> Self {
        ResidualReport {
            check: check.into(),
            tolerance,
            records: Vec::new(),
            max_normalized: 0.0,
            mean_normalized: 0.0,
            pass: true,
        }
    }

    pub fn push<T: Scalar>(&mut self, index: usize, j: &FieldJet<T>, r: Residual<T>) {
        self.push_raw(index, j.x().iter().map(|v| v.as_f64()).collect(), j.phi().as_f64(), r);
    }

    pub fn push_raw<T: Scalar>(&mut self, index: usize, point: Vec<f64>, phi: f64, r: Residual<T>) {
        let normalized = r.normalized().as_f64();
        self.records.push(PointRecord {
            index,
            point,
            phi,
            raw: r.raw.as_f64(),
            scale: r.scale.as_f64(),
            normalized,
        });
        let k = self.records.len() as f64;
        // NaN normalized residuals count as failures.
        self.max_normalized = if normalized.is_nan() || self.max_normalized.is_nan() {
            f64::NAN
        } else {
            self.max_normalized.max(normalized)
        };
        self.mean_normalized += (normalized - self.mean_normalized) / k;
        self.pass = self.max_normalized <= self.tolerance;
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
