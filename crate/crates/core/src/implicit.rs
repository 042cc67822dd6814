//! Fields defined implicitly by a constraint `C(x, phi) = 0`.
//!
//! [`ImplicitFamily::solve_phi`] finds `phi` on a selected branch and
//! [`ImplicitFamily::field_jet`] differentiates the constraint to recover
//! the gradient and Hessian of `phi`:
//!
//! ```text
//! phi_p  = -C_p / C_phi
//! phi_pq = -(C_pq + C_p,phi phi_q + C_q,phi phi_p + C_phi,phi phi_p phi_q) / C_phi
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{jet_eval, jet_eval_with, Jet2};
use crate::Scalar;

/// Absolute tolerance on the constraint; single precision is floored at
/// 64 ulp.
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
pub const DEFAULT_SINGULAR_THRESHOLD: f64 = 1e-8;
pub const PHI: &str = "phi";

/// How a root is selected among the branches of the constraint.
#[derive(Clone, Debug, PartialEq)]
pub enum Branch<T> {
    /// The root inside `[lo, hi]`; the endpoints must bracket a sign change.
    Bracket { lo: T, hi: T },
    /// Damped Newton from a starting value. On grids the starting value is
    /// predicted from the nearest already-solved point, which keeps the
    /// solution on one branch.
    Guess(T),
    /// The first sign change found scanning `[lo, hi]` in `cells` steps.
    Scan { lo: T, hi: T, cells: usize },
}

#[derive(Clone, Debug)]
pub struct ImplicitFamily<T> {
    constraint: Expr,
    coords: Vec<String>,
    branch: Branch<T>,
    root_tol: T,
    singular_threshold: T,
    max_iter: usize,
}

/// `phi` together with its gradient and Hessian at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldJet<T> {
    x: Vec<T>,
    jet: Jet2<T>,
}

impl<T: Scalar> FieldJet<T> {
    pub fn from_jet(x: Vec<T>, jet: Jet2<T>) -> Result<Self> {
        if x.len() != jet.dim() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: jet.dim() });
        }
        Ok(FieldJet { x, jet })
    }

    /// Builds a jet from explicit derivative values; only `hess(i, j)` with
    /// `i <= j` is read.
    pub fn from_parts(x: Vec<T>, phi: T, grad: Vec<T>, hess: impl Fn(usize, usize) -> T) -> Self {
        assert_eq!(x.len(), grad.len(), "gradient length must match point dimension");
        FieldJet { x, jet: Jet2::from_parts(phi, grad, hess) }
    }

    /// Jet of an explicit field `e` over `vars` at `x`.
    pub fn explicit(e: &Expr, vars: &[&str], x: &[T]) -> Result<Self> {
        Ok(FieldJet { x: x.to_vec(), jet: jet_eval(e, x, vars)? })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn phi(&self) -> T {
        self.jet.value()
    }

    pub fn grad(&self) -> &[T] {
        self.jet.grad()
    }

    /// `phi_p`
    pub fn d(&self, p: usize) -> T {
        self.jet.grad()[p]
    }

    /// `phi_pq`
    pub fn dd(&self, p: usize, q: usize) -> T {
        self.jet.hess(p, q)
    }

    pub fn hess_matrix(&self) -> Vec<Vec<T>> {
        self.jet.hess_matrix()
    }

    pub fn as_jet(&self) -> &Jet2<T> {
        &self.jet
    }

    /// The jet of `h(phi)` given `h`, `h'`, `h''` at `phi`.
    pub fn compose(&self, h: T, d1: T, d2: T) -> Self {
        FieldJet { x: self.x.clone(), jet: self.jet.compose(h, d1, d2) }
    }

    pub fn require_dim(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.n() });
        }
        Ok(())
    }
}

impl<T: Scalar> ImplicitFamily<T> {
    /// A family over the named coordinates. The constraint must mention
    /// `phi` and no variable outside `coords`.
    pub fn new(constraint: Expr, coords: &[&str]) -> Result<Self> {
        let free = constraint.free_vars();
        if !free.contains(PHI) {
            return Err(Error::Arity("constraint does not involve phi".into()));
        }
        if let Some(stray) = free.iter().find(|v| *v != PHI && !coords.contains(&v.as_str())) {
            return Err(Error::UnboundVariable(stray.clone()));
        }
        Ok(ImplicitFamily {
            constraint,
            coords: coords.iter().map(|s| s.to_string()).collect(),
            branch: Branch::Guess(T::zero()),
            root_tol: T::lit(DEFAULT_ROOT_TOL).max(T::epsilon() * T::lit(64.0)),
            singular_threshold: T::lit(DEFAULT_SINGULAR_THRESHOLD),
            max_iter: 200,
        })
    }

    pub fn with_branch(mut self, branch: Branch<T>) -> Self {
        self.branch = branch;
        self
    }

    pub fn with_root_tol(mut self, tol: T) -> Self {
        self.root_tol = tol;
        self
    }

    pub fn with_singular_threshold(mut self, threshold: T) -> Self {
        self.singular_threshold = threshold;
        self
    }

    pub fn constraint(&self) -> &Expr {
        &self.constraint
    }

    pub fn coords(&self) -> Vec<&str> {
        self.coords.iter().map(String::as_str).collect()
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn branch(&self) -> &Branch<T> {
        &self.branch
    }

    pub fn root_tol(&self) -> T {
        self.root_tol
    }

    pub fn singular_threshold(&self) -> T {
        self.singular_threshold
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: x.len() });
        }
        Ok(())
    }

    /// `C(x, phi)`
    pub fn residual(&self, x: &[T], phi: T) -> Result<T> {
        self.check_point(x)?;
        self.constraint.eval_with(&|name| {
            if name == PHI {
                Some(phi)
            } else {
                self.coords.iter().position(|c| c == name).map(|i| x[i])
            }
        })
    }

    /// `(C, C_phi)` at `(x, phi)`.
    pub fn value_and_slope(&self, x: &[T], phi: T) -> Result<(T, T)> {
        self.check_point(x)?;
        let fixed: Vec<(&str, T)> = self.coords.iter().map(String::as_str).zip(x.iter().copied()).collect();
        let j = jet_eval_with(&self.constraint, &[phi], &[PHI], &fixed)?;
        Ok((j.value(), j.grad()[0]))
    }

    /// Solves `C(x, phi) = 0` on the configured branch.
    pub fn solve_phi(&self, x: &[T]) -> Result<T> {
        match self.branch {
            Branch::Bracket { lo, hi } => self.solve_bracket(x, lo, hi),
            Branch::Guess(g) => self.solve_from(x, g),
            Branch::Scan { lo, hi, cells } => self.solve_scan(x, lo, hi, cells),
        }
    }

    /// Safeguarded secant/bisection on a sign-changing bracket, polished by
    /// Newton steps that must stay inside the bracket.
    pub fn solve_bracket(&self, x: &[T], lo: T, hi: T) -> Result<T> {
        let f = |p: T| self.residual(x, p);
        let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let (mut fa, mut fb) = (f(a)?, f(b)?);
        if fa.abs() <= self.root_tol {
            return self.accept(x, a);
        }
        if fb.abs() <= self.root_tol {
            return self.accept(x, b);
        }
        if fa.signum() == fb.signum() {
            return Err(Error::NoRoot(format!("no sign change on [{a}, {b}]")));
        }
        let half = T::lit(0.5);
        let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
        let mut force_bisect = false;
        for _ in 0..self.max_iter {
            let width = b - a;
            let secant = b - fb * (b - a) / (fb - fa);
            let c = if !force_bisect && secant > a && secant < b {
                secant
            } else {
                a + half * width
            };
            let fc = f(c)?;
            if fc.abs() < best.1.abs() {
                best = (c, fc);
            }
            if fc.abs() <= self.root_tol {
                break;
            }
            if fc.signum() == fa.signum() {
                a = c;
                fa = fc;
            } else {
                b = c;
                fb = fc;
            }
            force_bisect = b - a > half * width;
            if b - a <= T::epsilon() * T::lit(4.0) * a.abs().max(b.abs()).max(T::one()) {
                break;
            }
        }
        let (mut root, mut froot) = best;
        for _ in 0..3 {
            if froot.abs() <= self.root_tol * T::lit(1e-3) {
                break;
            }
            let (_, slope) = self.value_and_slope(x, root)?;
            if slope == T::zero() {
                break;
            }
            let cand = root - froot / slope;
            if cand < a.min(b) || cand > a.max(b) {
                break;
            }
            let fc = f(cand)?;
            if fc.abs() >= froot.abs() {
                break;
            }
            root = cand;
            froot = fc;
        }
        if froot.abs() > self.root_tol {
            return Err(Error::NoRoot(format!("tolerance not reached, |C| = {:e}", froot.abs().as_f64())));
        }
        self.accept(x, root)
    }

    /// Damped Newton iteration from `guess`.
    pub fn solve_from(&self, x: &[T], guess: T) -> Result<T> {
        let mut phi = guess;
        let (mut c, mut slope) = self.value_and_slope(x, phi)?;
        let mut iter = 0;
        while c.abs() > self.root_tol {
            iter += 1;
            if iter > self.max_iter {
                return Err(Error::NoRoot(format!("Newton did not converge from {guess}")));
            }
            if slope == T::zero() || !slope.is_finite() {
                return Err(Error::NoRoot(format!("Newton stalled at phi = {phi}")));
            }
            let step = c / slope;
            let mut damping = T::one();
            loop {
                let cand = phi - damping * step;
                if let Ok((cc, cs)) = self.value_and_slope(x, cand) {
                    if cc.abs() < c.abs() {
                        phi = cand;
                        c = cc;
                        slope = cs;
                        break;
                    }
                }
                damping = damping * T::lit(0.5);
                if damping < T::lit(1e-12) {
                    return Err(Error::NoRoot(format!("Newton diverged near phi = {phi}")));
                }
            }
        }
        self.accept(x, phi)
    }

    pub fn solve_scan(&self, x: &[T], lo: T, hi: T, cells: usize) -> Result<T> {
        let cells = cells.max(1);
        let step = (hi - lo) / T::lit(cells as f64);
        let mut prev: Option<(T, T)> = None;
        for i in 0..=cells {
            let p = lo + step * T::lit(i as f64);
            let Ok(v) = self.residual(x, p) else {
                prev = None;
                continue;
            };
            if v == T::zero() {
                return self.accept(x, p);
            }
            if let Some((pp, pv)) = prev {
                if pv.signum() != v.signum() {
                    return self.solve_bracket(x, pp, p);
                }
            }
            prev = Some((p, v));
        }
        Err(Error::NoRoot(format!("no sign change while scanning [{lo}, {hi}]")))
    }

    fn accept(&self, x: &[T], phi: T) -> Result<T> {
        let (_, slope) = self.value_and_slope(x, phi)?;
        if slope.abs() <= self.singular_threshold {
            return Err(Error::SingularPoint {
                derivative: slope.abs().as_f64(),
                threshold: self.singular_threshold.as_f64(),
            });
        }
        Ok(phi)
    }

    /// Implicit differentiation of the constraint at a solved point.
    pub fn field_jet(&self, x: &[T], phi: T) -> Result<FieldJet<T>> {
        self.check_point(x)?;
        let n = self.n();
        let mut vars = self.coords();
        vars.push(PHI);
        let mut point = x.to_vec();
        point.push(phi);
        let c = jet_eval(&self.constraint, &point, &vars)?;
        let c_phi = c.grad()[n];
        if c_phi.abs() <= self.singular_threshold {
            return Err(Error::SingularPoint {
                derivative: c_phi.abs().as_f64(),
                threshold: self.singular_threshold.as_f64(),
            });
        }
        let grad: Vec<T> = (0..n).map(|p| -c.grad()[p] / c_phi).collect();
        let hess = |p: usize, q: usize| {
            -(c.hess(p, q)
                + c.hess(p, n) * grad[q]
                + c.hess(q, n) * grad[p]
                + c.hess(n, n) * grad[p] * grad[q])
                / c_phi
        };
        Ok(FieldJet { x: x.to_vec(), jet: Jet2::from_parts(phi, grad.clone(), hess) })
    }

    /// Solve and differentiate in one step.
    pub fn solve(&self, x: &[T]) -> Result<FieldJet<T>> {
        let phi = self.solve_phi(x)?;
        self.field_jet(x, phi)
    }

    /// Solves at each point in order. With a [`Branch::Guess`] policy the
    /// starting value comes from the nearest solved point, extrapolated
    /// along its gradient.
    pub fn solve_points(&self, points: Vec<Vec<T>>) -> Vec<SamplePoint<T>> {
        let mut out: Vec<SamplePoint<T>> = Vec::with_capacity(points.len());
        for (index, x) in points.into_iter().enumerate() {
            let outcome = match self.branch {
                Branch::Guess(g) => {
                    let guess = nearest_solved(&out, &x)
                        .map(|j| {
                            j.x().iter()
                                .zip(&x)
                                .zip(j.grad())
                                .fold(j.phi(), |acc, ((a, b), g)| acc + *g * (*b - *a))
                        })
                        .unwrap_or(g);
                    self.solve_from(&x, guess)
                        .or_else(|e| if guess != g { self.solve_from(&x, g) } else { Err(e) })
                        .and_then(|phi| self.field_jet(&x, phi))
                }
                _ => self.solve(&x),
            };
            out.push(SamplePoint { index, x, outcome });
        }
        out
    }
}

fn nearest_solved<'a, T: Scalar>(done: &'a [SamplePoint<T>], x: &[T]) -> Option<&'a FieldJet<T>> {
    done.iter()
        .filter_map(|s| s.outcome.as_ref().ok())
        .map(|j| {
            let d = j.x().iter().zip(x).fold(T::zero(), |s, (a, b)| s + (*a - *b) * (*a - *b));
            (d, j)
        })
        .fold(None, |best: Option<(T, &FieldJet<T>)>, cur| match best {
            Some(b) if b.0 <= cur.0 => Some(b),
            _ => Some(cur),
        })
        .map(|(_, j)| j)
}

/// One sampled point. Failures are kept with their error so that reports
/// can show where the branch folds.
#[derive(Clone, Debug)]
pub struct SamplePoint<T> {
    pub index: usize,
    pub x: Vec<T>,
    pub outcome: Result<FieldJet<T>>,
}

/// Stratified grid: one point per cell, jittered inside the middle half of
/// the cell by a seeded generator. The last axis varies fastest.
pub fn grid_points<T: Scalar>(bounds: &[(T, T)], counts: &[usize], seed: u64) -> Result<Vec<Vec<T>>> {
    if bounds.len() != counts.len() {
        return Err(Error::DimensionMismatch { expected: bounds.len(), found: counts.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut idx = vec![0; counts.len()];
        for axis in (0..counts.len()).rev() {
            idx[axis] = rem % counts[axis];
            rem /= counts[axis];
        }
        let point = bounds
            .iter()
            .zip(counts)
            .zip(&idx)
            .map(|(((lo, hi), &count), &i)| {
                let jitter = 0.25 + 0.5 * rng.gen::<f64>();
                let frac = (i as f64 + jitter) / count as f64;
                *lo + (*hi - *lo) * T::lit(frac)
            })
            .collect();
        out.push(point);
    }
    Ok(out)
}

/// `k` independent uniform points in the box.
pub fn random_points<T: Scalar>(bounds: &[(T, T)], k: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            bounds
                .iter()
                .map(|(lo, hi)| *lo + (*hi - *lo) * T::lit(rng.gen::<f64>()))
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum SampleMode {
    /// Jittered grid with the given number of cells per axis.
    Grid(Vec<usize>),
    /// Independent uniform points.
    Random(usize),
}

/// Where and how to place sample points.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSpec {
    pub bounds: Vec<(f64, f64)>,
    pub mode: SampleMode,
    pub seed: u64,
}

impl SampleSpec {
    pub fn random(bounds: Vec<(f64, f64)>, k: usize, seed: u64) -> Self {
        SampleSpec { bounds, mode: SampleMode::Random(k), seed }
    }

    pub fn grid(bounds: Vec<(f64, f64)>, counts: Vec<usize>, seed: u64) -> Self {
        SampleSpec { bounds, mode: SampleMode::Grid(counts), seed }
    }

    pub fn points<T: Scalar>(&self) -> Result<Vec<Vec<T>>> {
        let bounds: Vec<(T, T)> = self.bounds.iter().map(|(a, b)| (T::lit(*a), T::lit(*b))).collect();
        match &self.mode {
            SampleMode::Grid(counts) => grid_points(&bounds, counts, self.seed),
            SampleMode::Random(k) => Ok(random_points(&bounds, *k, self.seed)),
        }
    }

    pub fn len(&self) -> usize {
        match &self.mode {
            SampleMode::Grid(counts) => counts.iter().product(),
            SampleMode::Random(k) => *k,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Solves the family on a jittered grid.
pub fn sample_grid<T: Scalar>(
    fam: &ImplicitFamily<T>,
    bounds: &[(T, T)],
    counts: &[usize],
    seed: u64,
) -> Result<Vec<SamplePoint<T>>> {
    if bounds.len() != fam.n() {
        return Err(Error::DimensionMismatch { expected: fam.n(), found: bounds.len() });
    }
    Ok(fam.solve_points(grid_points(bounds, counts, seed)?))
}

/// Solves the family at `k` seeded uniform points.
pub fn sample_random<T: Scalar>(
    fam: &ImplicitFamily<T>,
    bounds: &[(T, T)],
    k: usize,
    seed: u64,
) -> Result<Vec<SamplePoint<T>>> {
    if bounds.len() != fam.n() {
        return Err(Error::DimensionMismatch { expected: fam.n(), found: bounds.len() });
    }
    Ok(fam.solve_points(random_points(bounds, k, seed)))
}
