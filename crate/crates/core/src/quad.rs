//! The quadratic ansatz `sum_ij M_ij(phi) x_i x_j = 1`.
//!
//! Sign convention: `lambda = -1/2 sum_ij M'_ij x_i x_j`, which makes the
//! first derivative of the constraint read `M x = lambda grad(phi)` and
//! gives `lambda * sum_j phi_j x_j = 1`. In this convention the pairwise
//! eliminant is
//!
//! ```text
//! M_pp phi_q^2 - 2 M_pq phi_p phi_q + M_qq phi_p^2 - lambda f_pq = 0
//! ```
//!
//! and `M` is recovered from a field jet by a square linear system in the
//! `n(n+1)/2` entries of `M`, with `lambda` replaced by `1 / sum phi_j x_j`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::implicit::{Branch, FieldJet, ImplicitFamily, SampleSpec};
use crate::linalg::SquareMatrix;
use crate::residual::{f_pair, f_pair_terms, ufe_residual, Residual, ResidualReport};
use crate::Scalar;

/// Symmetric matrix of unary functions of `phi`; the upper triangle is
/// stored, so symmetry holds structurally.
#[derive(Clone, Debug, PartialEq)]
pub struct SymFuncMatrix {
    n: usize,
    upper: Vec<Expr>,
}

impl SymFuncMatrix {
    /// Entries in row-major upper-triangle order: `M11, M12, .., M1n, M22, ..`.
    pub fn new(n: usize, upper: Vec<Expr>) -> Result<Self> {
        if upper.len() != n * (n + 1) / 2 {
            return Err(Error::Arity(format!(
                "a symmetric {n}x{n} matrix needs {} entries, got {}",
                n * (n + 1) / 2,
                upper.len()
            )));
        }
        for e in &upper {
            if let Some(v) = e.free_vars().into_iter().find(|v| v != "phi") {
                return Err(Error::Arity(format!("matrix entry `{e}` depends on `{v}`, not only on phi")));
            }
        }
        Ok(SymFuncMatrix { n, upper })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Expr) -> Result<Self> {
        let mut upper = Vec::new();
        for i in 0..n {
            for j in i..n {
                upper.push(f(i, j));
            }
        }
        Self::new(n, upper)
    }

    pub fn diagonal(entries: Vec<Expr>) -> Result<Self> {
        let n = entries.len();
        Self::from_fn(n, |i, j| if i == j { entries[i].clone() } else { Expr::zero() })
    }

    /// `sum_k v_k v_k^T`; at most `vectors.len()` in rank for every `phi`.
    pub fn gram(vectors: &[Vec<Expr>]) -> Result<Self> {
        let n = vectors.first().map_or(0, Vec::len);
        if vectors.iter().any(|v| v.len() != n) {
            return Err(Error::Arity("Gram vectors must share a length".into()));
        }
        Self::from_fn(n, |i, j| {
            Expr::sum(vectors.iter().map(|v| Expr::mul(v[i].clone(), v[j].clone())))
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        &self.upper[i * (2 * self.n - i - 1) / 2 + j]
    }

    pub fn eval<T: Scalar>(&self, phi: T) -> Result<SquareMatrix<T>> {
        let mut m = SquareMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.get(i, j).eval(&[("phi", phi)])?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// Entrywise `d/dphi`.
    pub fn derivative(&self) -> SymFuncMatrix {
        SymFuncMatrix { n: self.n, upper: self.upper.iter().map(|e| e.diff("phi")).collect() }
    }

    /// `sum_ij M_ij(phi) x_i x_j - 1` over the named coordinates.
    pub fn constraint(&self, coords: &[&str]) -> Result<Expr> {
        if coords.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: coords.len() });
        }
        let x = |i: usize| Expr::var(coords[i]);
        let mut terms = Vec::new();
        for i in 0..self.n {
            for j in i..self.n {
                let m = self.get(i, j).clone();
                let monomial = if i == j {
                    Expr::pow(x(i), Expr::num(2.0))
                } else {
                    Expr::mul(Expr::num(2.0), Expr::mul(x(i), x(j)))
                };
                terms.push(Expr::mul(m, monomial));
            }
        }
        Ok(Expr::sub(Expr::sum(terms), Expr::one()))
    }

    /// The implicit family defined by this matrix over `x1..xn`.
    pub fn family<T: Scalar>(&self, branch: Branch<T>) -> Result<ImplicitFamily<T>> {
        let names = coordinate_names(self.n);
        let coords: Vec<&str> = names.iter().map(String::as_str).collect();
        Ok(ImplicitFamily::new(self.constraint(&coords)?, &coords)?.with_branch(branch))
    }
}

pub fn coordinate_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

/// `M`, `M'`, `M''` and the scalars `lambda`, `mu` at one solved point.
#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzState<T> {
    pub x: Vec<T>,
    pub phi: T,
    pub m: SquareMatrix<T>,
    pub dm: SquareMatrix<T>,
    pub ddm: SquareMatrix<T>,
    pub lambda: T,
    pub mu: T,
}

fn require_nonzero_gradient<T: Scalar>(j: &FieldJet<T>) -> Result<()> {
    match j.grad().iter().position(|g| *g == T::zero()) {
        Some(index) => Err(Error::ZeroDerivative { index }),
        None => Ok(()),
    }
}

/// `sum_{r,s} f_rs x_r x_s / (phi_r phi_s)`
fn weighted_f_sum<T: Scalar>(j: &FieldJet<T>) -> T {
    let n = j.n();
    let mut t = T::zero();
    for r in 0..n {
        for s in 0..n {
            if r != s {
                t = t + f_pair(j, r, s) * j.x()[r] * j.x()[s] / (j.d(r) * j.d(s));
            }
        }
    }
    t
}

fn gradient_dot_x<T: Scalar>(j: &FieldJet<T>) -> T {
    j.grad().iter().zip(j.x()).fold(T::zero(), |s, (g, x)| s + *g * *x)
}

impl<T: Scalar> AnsatzState<T> {
    pub fn build(m: &SymFuncMatrix, j: &FieldJet<T>) -> Result<Self> {
        j.require_dim(m.n())?;
        require_nonzero_gradient(j)?;
        let phi = j.phi();
        let dmf = m.derivative();
        let mv = m.eval(phi)?;
        let dm = dmf.eval(phi)?;
        let ddm = dmf.derivative().eval(phi)?;
        let lambda = -T::lit(0.5) * dm.quadratic_form(j.x());
        let mu = lambda * weighted_f_sum(j);
        Ok(AnsatzState { x: j.x().to_vec(), phi, m: mv, dm, ddm, lambda, mu })
    }

    /// `x^T M x - 1`
    pub fn constraint_residual(&self) -> T {
        self.m.quadratic_form(&self.x) - T::one()
    }

    /// `|M x - lambda grad(phi)| / |M x|`
    pub fn gradient_relation(&self, j: &FieldJet<T>) -> T {
        let mx = self.m.mul_vec(&self.x);
        let (num, den) = mx.iter().zip(j.grad()).fold((T::zero(), T::zero()), |(n, d), (a, g)| {
            let r = *a - self.lambda * *g;
            (n + r * r, d + *a * *a)
        });
        (num / den).sqrt()
    }

    /// `lambda * sum_j phi_j x_j`, which is `+1` in this convention.
    pub fn consistency(&self, j: &FieldJet<T>) -> T {
        self.lambda * gradient_dot_x(j)
    }
}

pub fn build_state<T: Scalar>(m: &SymFuncMatrix, j: &FieldJet<T>) -> Result<AnsatzState<T>> {
    AnsatzState::build(m, j)
}

/// Pairwise eliminant.
pub fn eliminant_residual<T: Scalar>(s: &AnsatzState<T>, j: &FieldJet<T>, p: usize, q: usize) -> Residual<T> {
    let (a, b) = (j.d(p), j.d(q));
    f_pair_terms(j, p, q).scaled(-s.lambda).combine(Residual::from_terms([
        s.m[(p, p)] * b * b,
        -T::lit(2.0) * s.m[(p, q)] * a * b,
        s.m[(q, q)] * a * a,
    ]))
}

/// Which final factor the four-index eliminant uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EliminantForm {
    /// `... + N_rs phi_p phi_q`, the antisymmetric completion.
    Corrected,
    /// `... + N_rs phi_p phi_s`, as the formula is usually printed.
    AsPrinted,
}

/// Four-index eliminant with `N_ab = M_ab - lambda phi_ab`:
/// `N_pq phi_r phi_s - N_rq phi_p phi_s - N_ps phi_r phi_q + N_rs phi_p phi_q`.
pub fn general_eliminant_residual<T: Scalar>(
    s: &AnsatzState<T>,
    j: &FieldJet<T>,
    idx: [usize; 4],
    form: EliminantForm,
) -> Result<Residual<T>> {
    if let Some(&bad) = idx.iter().find(|&&i| i >= j.n()) {
        return Err(Error::IndexOutOfRange { index: bad, dim: j.n() });
    }
    let [p, q, r, t] = idx;
    let big_n = |a: usize, b: usize| s.m[(a, b)] - s.lambda * j.dd(a, b);
    let d = |a: usize| j.d(a);
    let last = match form {
        EliminantForm::Corrected => d(p) * d(q),
        EliminantForm::AsPrinted => d(p) * d(t),
    };
    Ok(Residual::from_terms([
        big_n(p, q) * d(r) * d(t),
        -big_n(r, q) * d(p) * d(t),
        -big_n(p, t) * d(r) * d(q),
        big_n(r, t) * last,
    ]))
}

/// Recovers `M` at the jet's point from the gradient relation and the
/// pairwise eliminants, with `lambda = 1 / sum phi_j x_j`.
pub fn recover_m_linear<T: Scalar>(j: &FieldJet<T>) -> Result<SquareMatrix<T>> {
    let n = j.n();
    let x = j.x();
    let s = gradient_dot_x(j);
    if s == T::zero() || j.grad().iter().all(|g| *g == T::zero()) {
        return Err(Error::RankDeficientSystem);
    }
    let lambda = s.recip();
    let unknowns = n * (n + 1) / 2;
    let col = |a: usize, b: usize| {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        a * (2 * n - a - 1) / 2 + b
    };
    let mut a = SquareMatrix::zeros(unknowns);
    let mut rhs = vec![T::zero(); unknowns];
    let mut row = 0;
    for p in 0..n {
        for (k, xk) in x.iter().enumerate() {
            a[(row, col(p, k))] = a[(row, col(p, k))] + *xk;
        }
        rhs[row] = lambda * j.d(p);
        row += 1;
    }
    for p in 0..n {
        for q in p + 1..n {
            let (dp, dq) = (j.d(p), j.d(q));
            a[(row, col(p, p))] = dq * dq;
            a[(row, col(p, q))] = -T::lit(2.0) * dp * dq;
            a[(row, col(q, q))] = dp * dp;
            rhs[row] = lambda * f_pair(j, p, q);
            row += 1;
        }
    }
    let sol = a.solve(&rhs)?;
    let mut m = SquareMatrix::from_fn(n, |p, q| sol[col(p, q)]);
    let norm = m.quadratic_form(x);
    if !(norm.is_finite() && norm != T::zero()) {
        return Err(Error::RankDeficientSystem);
    }
    m = m.map(|v| v / norm);
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosedForm {
    /// Two variables, rational in the jet with denominator `(x . grad phi)^2`.
    TwoVarRational,
    /// Two variables, `lambda^2 (phi_p phi_q +/- lambda x x f_12)`.
    TwoVarLambda,
    /// Any `n`, in terms of `lambda` and `mu`.
    Multivariable,
}

/// Closed-form `M` at the jet's point, `lambda = 1 / sum phi_j x_j`.
pub fn closed_form_m<T: Scalar>(j: &FieldJet<T>, form: ClosedForm) -> Result<SquareMatrix<T>> {
    let n = j.n();
    let x = j.x();
    let s = gradient_dot_x(j);
    let lambda = s.recip();
    let two = T::lit(2.0);
    match form {
        ClosedForm::TwoVarRational | ClosedForm::TwoVarLambda => {
            j.require_dim(2)?;
            let (p1, p2) = (j.d(0), j.d(1));
            let (x1, x2) = (x[0], x[1]);
            let f = f_pair(j, 0, 1);
            let l2 = lambda * lambda;
            let (m11, m12, m22) = if form == ClosedForm::TwoVarLambda {
                (
                    l2 * (p1 * p1 + lambda * x2 * x2 * f),
                    l2 * (p1 * p2 - lambda * x1 * x2 * f),
                    l2 * (p2 * p2 + lambda * x1 * x1 * f),
                )
            } else {
                let den = s * s;
                (
                    lambda * (x1 * p1 * p1 * p1 + x2 * p1 * p1 * p2 + x2 * x2 * f) / den,
                    lambda * (x1 * p1 * p1 * p2 + x2 * p1 * p2 * p2 - x1 * x2 * f) / den,
                    lambda * (x1 * x1 * f + x1 * p1 * p2 * p2 + x2 * p2 * p2 * p2) / den,
                )
            };
            Ok(SquareMatrix::from_rows(&[vec![m11, m12], vec![m12, m22]]))
        }
        ClosedForm::Multivariable => {
            require_nonzero_gradient(j)?;
            let mu = lambda * weighted_f_sum(j);
            let d = |a: usize| j.d(a);
            let f = |a: usize, b: usize| if a == b { T::zero() } else { f_pair(j, a, b) };
            let entry = |p: usize, q: usize| {
                let rest: T = (0..n)
                    .filter(|&r| r != p && r != q)
                    .fold(T::zero(), |acc, r| acc + d(r) * x[r]);
                let sum_q = (0..n)
                    .filter(|&r| r != p)
                    .fold(T::zero(), |acc, r| acc + f(q, r) * x[r] / (d(q) * d(r)));
                let sum_p = (0..n)
                    .filter(|&r| r != q)
                    .fold(T::zero(), |acc, r| acc + f(p, r) * x[r] / (d(p) * d(r)));
                let bracket = rest * f(p, q) / (d(p) * d(q)) - d(p) * sum_q - d(q) * sum_p
                    + d(p) * d(q) * mu;
                lambda * lambda * (d(p) * d(q) - bracket / two)
            };
            Ok(SquareMatrix::from_fn(n, entry))
        }
    }
}

/// The diagonal entry as commonly printed,
/// `lambda^2 (phi_p^2 + sum_r x_r f_pr / phi_r + phi_p^2 mu)` in this
/// convention. It disagrees with the general entry formula at `q = p`
/// (which has `-mu/2`) and fails the linear-system check.
pub fn printed_diagonal_entry<T: Scalar>(j: &FieldJet<T>, p: usize) -> Result<T> {
    require_nonzero_gradient(j)?;
    let lambda = gradient_dot_x(j).recip();
    let mu = lambda * weighted_f_sum(j);
    let sum = (0..j.n())
        .filter(|&r| r != p)
        .fold(T::zero(), |acc, r| acc + j.x()[r] * f_pair(j, p, r) / j.d(r));
    let dp = j.d(p);
    Ok(lambda * lambda * (dp * dp + sum + dp * dp * mu))
}

/// Determinant of the coefficient matrix.
pub fn discriminant<T: Scalar>(m: &SquareMatrix<T>) -> T {
    m.determinant()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetIdentity<T> {
    /// det of the matrix bordered by `phi_i^2` with body `f_ij` (zero diagonal).
    pub lhs: T,
    /// `2^(n-1) prod phi_i^2 * UFE`
    pub rhs_core: T,
    /// `|lhs| / |rhs_core|`, expected to be 1.
    pub ratio: T,
    /// Sign of `lhs / rhs_core`; `(-1)^(n-1)`.
    pub sign: i8,
}

/// The `f`-bordered determinant.
pub fn f_bordered<T: Scalar>(j: &FieldJet<T>) -> SquareMatrix<T> {
    let n = j.n();
    let body = SquareMatrix::from_fn(n, |p, q| if p == q { T::zero() } else { f_pair(j, p, q) });
    let border: Vec<T> = j.grad().iter().map(|g| *g * *g).collect();
    body.bordered(T::zero(), &border)
}

fn sign_of<T: Scalar>(v: T) -> i8 {
    if v > T::zero() {
        1
    } else if v < T::zero() {
        -1
    } else {
        0
    }
}

/// Compares the `f`-bordered determinant with the bordered Hessian.
pub fn det_identity_check<T: Scalar>(j: &FieldJet<T>) -> Result<DetIdentity<T>> {
    require_nonzero_gradient(j)?;
    let n = j.n();
    let lhs = f_bordered(j).determinant();
    let prod = j.grad().iter().fold(T::one(), |acc, g| acc * *g * *g);
    let rhs_core = T::lit(2f64.powi(n as i32 - 1)) * prod * ufe_residual(j)?.raw;
    Ok(DetIdentity { lhs, rhs_core, ratio: lhs.abs() / rhs_core.abs(), sign: sign_of(lhs * rhs_core) })
}

/// Compares the `f`-bordered determinant with
/// `(2/lambda)^(n-1) prod phi_i^2 det [[0, phi_i], [phi_j, M_ij]]`, which
/// it equals up to sign on an ansatz state.
pub fn bordered_m_check<T: Scalar>(s: &AnsatzState<T>, j: &FieldJet<T>) -> Result<DetIdentity<T>> {
    require_nonzero_gradient(j)?;
    let n = j.n();
    let lhs = f_bordered(j).determinant();
    let prod = j.grad().iter().fold(T::one(), |acc, g| acc * *g * *g);
    let bm = s.m.bordered(T::zero(), j.grad()).determinant();
    let rhs_core = (T::lit(2.0) / s.lambda).powi(n as i32 - 1) * prod * bm;
    Ok(DetIdentity { lhs, rhs_core, ratio: lhs.abs() / rhs_core.abs(), sign: sign_of(lhs * rhs_core) })
}

pub const GATE_PROBES: usize = 20;
pub const GATE_RELATIVE_DET: f64 = 1e-10;

/// Checks that `det M(phi)` vanishes at seeded random `phi` in `[-2, 2]`,
/// relative to `|M|_F^n`.
pub fn gate_precheck(m: &SymFuncMatrix, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut probed = 0;
    for _ in 0..GATE_PROBES * 5 {
        if probed == GATE_PROBES {
            break;
        }
        let phi: f64 = rng.gen_range(-2.0..2.0);
        let Ok(mv) = m.eval(phi) else { continue };
        probed += 1;
        let det = mv.determinant();
        if det.abs() > GATE_RELATIVE_DET * mv.frobenius().powi(m.n() as i32) {
            return Err(Error::GateNotSatisfied { det: det.abs(), phi });
        }
    }
    if probed == 0 {
        return Err(Error::Domain("M(phi) could not be evaluated at any probe".into()));
    }
    Ok(())
}

/// UFE residuals of the quadratic family over a sample. Fails with
/// [`Error::SolverCoverage`] when more than 10% of the points fail to solve.
pub fn ufe_sample_report(
    m: &SymFuncMatrix,
    branch: Branch<f64>,
    sample: &SampleSpec,
    tolerance: f64,
) -> Result<ResidualReport> {
    let fam = m.family(branch)?;
    let points = fam.solve_points(sample.points()?);
    let mut report = ResidualReport::new("ufe", tolerance);
    let mut failed = 0;
    for sp in &points {
        match &sp.outcome {
            Ok(j) => report.push(sp.index, j, ufe_residual(j)?),
            Err(_) => failed += 1,
        }
    }
    if failed * 10 > points.len() {
        return Err(Error::SolverCoverage { failed, total: points.len() });
    }
    Ok(report)
}

/// When `det M` vanishes identically the implicit field solves the
/// Universal Field Equation; this runs the precheck and then measures it.
pub fn ufe_gate_verify(
    m: &SymFuncMatrix,
    branch: Branch<f64>,
    sample: &SampleSpec,
    tolerance: f64,
) -> Result<ResidualReport> {
    gate_precheck(m, sample.seed)?;
    ufe_sample_report(m, branch, sample, tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        s.parse().unwrap()
    }

    fn solved(m: &SymFuncMatrix, x: &[f64], lo: f64, hi: f64) -> FieldJet<f64> {
        m.family(Branch::Bracket { lo, hi }).unwrap().solve(x).unwrap()
    }

    #[test]
    fn sym_func_matrix_structure() {
        let m = SymFuncMatrix::new(2, vec![p("phi"), p("phi/2"), p("phi^2 + 1")]).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));
        let v = m.eval(2.0).unwrap();
        assert_eq!(v.rows(), vec![vec![2.0, 1.0], vec![1.0, 5.0]]);
        let d = m.derivative().eval(2.0).unwrap();
        assert_eq!(d.rows(), vec![vec![1.0, 0.5], vec![0.5, 4.0]]);
        assert!(SymFuncMatrix::new(2, vec![p("phi"), p("x1")]).is_err());
        assert!(SymFuncMatrix::new(2, vec![p("phi"), p("x1"), p("1")]).is_err());
    }

    #[test]
    fn lambda_for_identity_derivative() {
        let m = SymFuncMatrix::diagonal(vec![p("phi"), p("phi")]).unwrap();
        let x = [0.6, 0.8];
        let j = solved(&m, &x, 0.1, 10.0);
        let s = build_state(&m, &j).unwrap();
        assert!((2.0 * s.lambda + (x[0] * x[0] + x[1] * x[1])).abs() < 1e-15);
        assert!(s.constraint_residual().abs() < 1e-12);
        assert!(s.gradient_relation(&j) < 1e-9);
        assert!((s.consistency(&j) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn printed_diagonal_disagrees_with_linear_solve() {
        let m = SymFuncMatrix::diagonal(vec![p("phi"), p("phi^2 + 1")]).unwrap();
        let j = solved(&m, &[0.6, 0.5], 0.01, 10.0);
        let truth = recover_m_linear(&j).unwrap();
        let printed = printed_diagonal_entry(&j, 0).unwrap();
        assert!((printed - truth[(0, 0)]).abs() > 1e-3 * truth[(0, 0)].abs());
        let closed = closed_form_m(&j, ClosedForm::Multivariable).unwrap();
        assert!((closed[(0, 0)] - truth[(0, 0)]).abs() < 1e-10 * truth[(0, 0)].abs());
    }

    #[test]
    fn constant_matrix_has_zero_lambda() {
        let m = SymFuncMatrix::diagonal(vec![p("2"), p("3")]).unwrap();
        let j = FieldJet::from_parts(vec![0.5, 0.3], 0.0, vec![1.0, 1.0], |_, _| 0.0);
        let s = build_state(&m, &j).unwrap();
        assert_eq!(s.lambda, 0.0);
    }

    #[test]
    fn zero_gradient_component_is_rejected() {
        let m = SymFuncMatrix::diagonal(vec![p("phi"), p("phi")]).unwrap();
        let j = FieldJet::from_parts(vec![0.5, 0.3], 1.0, vec![1.0, 0.0], |_, _| 0.5);
        assert_eq!(build_state(&m, &j).unwrap_err(), Error::ZeroDerivative { index: 1 });
        assert_eq!(
            closed_form_m(&j, ClosedForm::Multivariable).unwrap_err(),
            Error::ZeroDerivative { index: 1 }
        );
        assert_eq!(det_identity_check(&j).unwrap_err(), Error::ZeroDerivative { index: 1 });
    }

    #[test]
    fn eliminant_degenerate_and_perturbed() {
        let j = FieldJet::from_parts(vec![0.5, 0.3], 1.0, vec![0.7, -0.2], |a, b| [[0.1, 0.4], [0.4, -0.3]][a][b]);
        let zero = AnsatzState {
            x: j.x().to_vec(),
            phi: 1.0,
            m: SquareMatrix::zeros(2),
            dm: SquareMatrix::zeros(2),
            ddm: SquareMatrix::zeros(2),
            lambda: 0.0,
            mu: 0.0,
        };
        assert_eq!(eliminant_residual(&zero, &j, 0, 1).raw, 0.0);

        let m = SymFuncMatrix::new(2, vec![p("phi"), p("phi/2"), p("phi^2 + 1")]).unwrap();
        let j = solved(&m, &[0.4, 0.3], 0.0, 5.0);
        let mut s = build_state(&m, &j).unwrap();
        let base = eliminant_residual(&s, &j, 0, 1);
        assert!(base.normalized() < 1e-8, "{base:?}");
        s.m[(0, 0)] += 0.1;
        let bumped = eliminant_residual(&s, &j, 0, 1).raw;
        assert!((bumped - base.raw - 0.1 * j.d(1) * j.d(1)).abs() < 1e-14);
    }

    #[test]
    fn general_eliminant_reductions() {
        let m = SymFuncMatrix::new(2, vec![p("phi"), p("phi/2"), p("phi^2 + 1")]).unwrap();
        let j = solved(&m, &[0.4, 0.3], 0.0, 5.0);
        let s = build_state(&m, &j).unwrap();
        let r = general_eliminant_residual(&s, &j, [0, 1, 0, 1], EliminantForm::Corrected).unwrap();
        assert!(r.normalized() <= 1e-8);
        let swapped = general_eliminant_residual(&s, &j, [0, 1, 1, 0], EliminantForm::Corrected).unwrap();
        let pair = eliminant_residual(&s, &j, 0, 1);
        assert!((swapped.raw + pair.raw).abs() <= 1e-12 * pair.scale);
        for i in 0..2 {
            let diag = general_eliminant_residual(&s, &j, [i; 4], EliminantForm::Corrected).unwrap();
            assert!(diag.normalized() < 1e-14);
        }
        assert!(general_eliminant_residual(&s, &j, [0, 1, 2, 0], EliminantForm::Corrected).is_err());
    }

    #[test]
    fn two_variable_closed_forms_agree_with_linear_solve() {
        let m = SymFuncMatrix::new(2, vec![p("phi"), p("phi/2"), p("phi^2 + 1")]).unwrap();
        let j = solved(&m, &[0.4, 0.3], 0.0, 5.0);
        let truth = m.eval(j.phi()).unwrap();
        let lin = recover_m_linear(&j).unwrap();
        let rat = closed_form_m(&j, ClosedForm::TwoVarRational).unwrap();
        let lam = closed_form_m(&j, ClosedForm::TwoVarLambda).unwrap();
        let multi = closed_form_m(&j, ClosedForm::Multivariable).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for other in [&lin, &rat, &lam, &multi] {
                    assert!((other[(a, b)] - truth[(a, b)]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn linear_field_recovers_rank_one_matrix() {
        // A linear field has every f_pq = 0; the solution is lambda^2 grad grad^T.
        let j = FieldJet::explicit(&p("0.3*x1 + 0.5*x2 + 0.2*x3"), &["x1", "x2", "x3"], &[1.0f64, 2.0, 0.5]).unwrap();
        let m = recover_m_linear(&j).unwrap();
        assert!(m.determinant().abs() < 1e-12);
        let lambda = 1.0 / (0.3 + 1.0 + 0.1);
        assert!((m[(0, 1)] - lambda * lambda * 0.15).abs() < 1e-12);
    }

    #[test]
    fn degenerate_linear_system() {
        // x . grad(phi) = 0: lambda is undefined and the system is singular.
        let j = FieldJet::from_parts(vec![1.0, 1.0], 0.0, vec![1.0, -1.0], |a, b| [[0.2, 0.1], [0.1, 0.3]][a][b]);
        assert_eq!(recover_m_linear(&j).unwrap_err(), Error::RankDeficientSystem);
    }

    #[test]
    fn discriminant_cases() {
        assert_eq!(discriminant(&SquareMatrix::<f64>::identity(3)), 1.0);
        let v = [0.3f64, -1.2, 2.0];
        assert!(discriminant(&SquareMatrix::from_fn(3, |i, j| v[i] * v[j])).abs() < 1e-15);
        assert_eq!(discriminant(&SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]])), 0.0);
    }

    #[test]
    fn det_identity_hand_expansion() {
        // phi_1 = 1, phi_2 = 2 and f_12 = 1 (phi_11 = 0, phi_12 = 0, phi_22 = 1)
        let j = FieldJet::from_parts(vec![0.0f64, 0.0], 0.0, vec![1.0, 2.0], |a, b| if a == 1 && b == 1 { 1.0 } else { 0.0 });
        assert_eq!(f_pair(&j, 0, 1), 1.0);
        let d = det_identity_check(&j).unwrap();
        assert!((d.lhs - 8.0).abs() < 1e-14);
        assert!((d.rhs_core + 8.0).abs() < 1e-14);
        assert!((d.ratio - 1.0).abs() < 1e-14);
        assert_eq!(d.sign, -1);
    }

    #[test]
    fn gate_rejects_full_rank() {
        let full = SymFuncMatrix::diagonal(vec![p("phi + 2"), p("phi^2 + 2"), p("1")]).unwrap();
        assert!(matches!(gate_precheck(&full, 1), Err(Error::GateNotSatisfied { .. })));
        let rank1 = SymFuncMatrix::gram(&[vec![p("phi"), p("phi^2 + 1")]]).unwrap();
        gate_precheck(&rank1, 1).unwrap();
    }

    #[test]
    fn rank_one_gate_gives_bateman() {
        let m = SymFuncMatrix::gram(&[vec![p("phi"), p("phi^2 + 1")]]).unwrap();
        let sample = SampleSpec::random(vec![(0.2, 0.5), (0.2, 0.5)], 30, 3);
        let rep = ufe_gate_verify(&m, Branch::Bracket { lo: 0.0, hi: 5.0 }, &sample, 1e-7).unwrap();
        assert_eq!(rep.len(), 30);
        assert!(rep.pass, "max {}", rep.max_normalized);
    }
}
