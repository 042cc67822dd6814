//! Seeded random families for property tests.
//!
//! Coefficients are uniform in `[-1, 1]`. A draw is rejected when the
//! constraint fails to solve at one of the probe points or has
//! `|C_phi| < 1e-6` there.

use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::families::{Field, FamilySpec};
use crate::quad::SymFuncMatrix;

pub const MIN_SLOPE: f64 = 1e-6;
pub const MAX_DRAWS: usize = 1000;

/// Exponent vectors of total degree in `lo..=hi` over `nvars` variables.
fn monomials(nvars: usize, lo: usize, hi: usize) -> Vec<Vec<usize>> {
    fn rec(nvars: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == nvars {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(nvars, left - k, cur, out);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    rec(nvars, hi, &mut Vec::new(), &mut all);
    all.retain(|m| (lo..=hi).contains(&m.iter().sum()));
    all
}

fn polynomial<R: Rng + ?Sized>(vars: &[&str], lo: usize, hi: usize, rng: &mut R) -> Expr {
    Expr::sum(monomials(vars.len(), lo, hi).into_iter().map(|exps| {
        let c = rng.gen_range(-1.0..=1.0);
        let mono = vars.iter().zip(&exps).map(|(v, &k)| match k {
            0 => Expr::one(),
            1 => Expr::var(*v),
            _ => Expr::pow(Expr::var(*v), Expr::num(k as f64)),
        });
        mono.fold(Expr::num(c), Expr::mul)
    }))
}

/// Polynomial of total degree at most `degree`.
pub fn poly<R: Rng + ?Sized>(vars: &[&str], degree: usize, rng: &mut R) -> Expr {
    polynomial(vars, 0, degree, rng)
}

/// Homogeneous polynomial of exactly `degree`.
pub fn homogeneous_poly<R: Rng + ?Sized>(vars: &[&str], degree: usize, rng: &mut R) -> Expr {
    polynomial(vars, degree, degree, rng)
}

/// Whether every probe solves with a slope of at least [`MIN_SLOPE`].
pub fn well_posed(spec: &FamilySpec, probes: &[Vec<f64>]) -> bool {
    let Ok(field) = spec.to_constraint() else { return false };
    probes.iter().all(|x| match &field {
        Field::Implicit(fam) => fam
            .solve_phi(x)
            .and_then(|phi| fam.value_and_slope(x, phi))
            .is_ok_and(|(_, slope)| slope.abs() >= MIN_SLOPE),
        Field::Explicit { .. } => field.solve(x).is_ok(),
    })
}

fn draw<R: Rng + ?Sized>(
    rng: &mut R,
    probes: &[Vec<f64>],
    mut make: impl FnMut(&mut R) -> Result<FamilySpec>,
) -> Result<FamilySpec> {
    for _ in 0..MAX_DRAWS {
        let spec = make(rng)?;
        if well_posed(&spec, probes) {
            return Ok(spec);
        }
    }
    Err(Error::NoRoot(format!("no well-posed family in {MAX_DRAWS} draws")))
}

/// `t F(phi) + x G(phi) = 1` with cubic `F`, `G`.
pub fn bateman_family<R: Rng + ?Sized>(rng: &mut R, probes: &[Vec<f64>]) -> Result<FamilySpec> {
    draw(rng, probes, |rng| FamilySpec::bateman(poly(&["phi"], 3, rng), poly(&["phi"], 3, rng)))
}

/// `sum (a_i + b_i phi) x_i = 1`.
pub fn affine_linear_family<R: Rng + ?Sized>(n: usize, rng: &mut R, probes: &[Vec<f64>]) -> Result<FamilySpec> {
    draw(rng, probes, |rng| FamilySpec::linear((0..n).map(|_| poly(&["phi"], 1, rng)).collect(), 1.0))
}

/// `sum_k v_k v_k^T` with `rank` vectors of quadratics in `phi`.
pub fn gram_matrix<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> SymFuncMatrix {
    let vectors: Vec<Vec<Expr>> = (0..rank).map(|_| (0..n).map(|_| poly(&["phi"], 2, rng)).collect()).collect();
    SymFuncMatrix::gram(&vectors).expect("vectors share a length")
}

pub fn gram_family<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R, probes: &[Vec<f64>]) -> Result<FamilySpec> {
    draw(rng, probes, |rng| FamilySpec::quadratic(gram_matrix(n, rank, rng)))
}

/// `M11(phi) x1^2 + M22(phi) x2^2 = 1` with quadratic diagonal entries.
pub fn diagonal_family<R: Rng + ?Sized>(rng: &mut R, probes: &[Vec<f64>]) -> Result<FamilySpec> {
    draw(rng, probes, |rng| {
        FamilySpec::quadratic(SymFuncMatrix::diagonal(vec![poly(&["phi"], 2, rng), poly(&["phi"], 2, rng)])?)
    })
}

/// `P(x) / Q(x)` with `P`, `Q` homogeneous of the same degree 1 or 2;
/// `Q` must stay away from zero on the probes.
pub fn degree_zero_rational<R: Rng + ?Sized>(vars: &[&str], rng: &mut R, probes: &[Vec<f64>]) -> Result<Expr> {
    for _ in 0..MAX_DRAWS {
        let d = rng.gen_range(1..=2);
        let num = homogeneous_poly(vars, d, rng);
        let den = homogeneous_poly(vars, d, rng);
        let away = probes.iter().all(|x| {
            let b: Vec<(&str, f64)> = vars.iter().copied().zip(x.iter().copied()).collect();
            den.eval(&b).is_ok_and(|v| v.abs() >= 0.1)
        });
        if away {
            return Ok(Expr::div(num, den));
        }
    }
    Err(Error::Domain(format!("no usable denominator in {MAX_DRAWS} draws")))
}
