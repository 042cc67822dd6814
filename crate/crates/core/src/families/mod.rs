//! Constructors for the solution families and the checks each one is
//! expected to pass.

pub mod random;

use std::fmt;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::implicit::{Branch, FieldJet, ImplicitFamily, SamplePoint, SampleSpec, PHI};
use crate::quad::{coordinate_names, gate_precheck, SymFuncMatrix};
use crate::residual::{
    a_surface_residuals, bateman_residual, complex_bateman_residual, example2_residual,
    first_order_system_from_jet, first_order_system_residual, sum_bateman_residual, ufe_residual,
    Residual, ResidualReport,
};

/// Root search window used when a family does not name its own branch.
pub const DEFAULT_SCAN: Branch<f64> = Branch::Scan { lo: -10.0, hi: 10.0, cells: 200 };

#[derive(Clone, Debug, PartialEq)]
pub enum FamilyKind {
    /// `t F(phi) + x G(phi) - 1` over `(t, x)`.
    Bateman { f: Expr, g: Expr },
    /// `sum F_i(phi) x_i - c` over `x1..xn`.
    Linear { fs: Vec<Expr>, c: f64 },
    /// `sum M_ij(phi) x_i x_j - 1` over `x1..xn`.
    Quadratic { m: SymFuncMatrix },
    /// `F(x, y, phi) - G(z, w, phi)` over `(x, y, z, w)`.
    Chaundy { f: Expr, g: Expr },
    /// `phi = F(f(x, y), g(z, w))` with `F` written in `u`, `v`.
    ExplicitComplex { outer: Expr, f: Expr, g: Expr },
    /// `x^2/(a2+phi) + y^2/(b2+phi) + z^2/(c2+phi) - 1` over `(x, y, z)`.
    Confocal { a2: f64, b2: f64, c2: f64 },
    /// `t - A(phi, x1..xk)` over `(t, x1..xk)`.
    ASurface { a: Expr, k: usize },
    /// Any constraint in `phi` and the named coordinates.
    Implicit { constraint: Expr, coords: Vec<String> },
    /// `phi = e(coords)`; with a degree, `e` is claimed homogeneous.
    Explicit { e: Expr, coords: Vec<String>, degree: Option<f64> },
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Bateman { .. } => "bateman",
            FamilyKind::Linear { .. } => "linear",
            FamilyKind::Quadratic { .. } => "quadratic",
            FamilyKind::Chaundy { .. } => "chaundy",
            FamilyKind::ExplicitComplex { .. } => "explicit_complex",
            FamilyKind::Confocal { .. } => "confocal",
            FamilyKind::ASurface { .. } => "a_surface",
            FamilyKind::Implicit { .. } => "implicit",
            FamilyKind::Explicit { .. } => "explicit",
        }
    }
}

/// A validated family with its root-selection policy.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilySpec {
    kind: FamilyKind,
    branch: Option<Branch<f64>>,
}

fn require_vars(what: &str, e: &Expr, allowed: &[&str]) -> Result<()> {
    match e.free_vars().into_iter().find(|v| !allowed.contains(&v.as_str())) {
        Some(v) => Err(Error::Arity(format!("{what} uses `{v}`; allowed variables are {}", allowed.join(", ")))),
        None => Ok(()),
    }
}

impl FamilySpec {
    pub fn new(kind: FamilyKind) -> Result<Self> {
        match &kind {
            FamilyKind::Bateman { f, g } => {
                require_vars("F", f, &[PHI])?;
                require_vars("G", g, &[PHI])?;
            }
            FamilyKind::Linear { fs, c } => {
                if fs.is_empty() {
                    return Err(Error::Arity("a linear family needs at least one coefficient".into()));
                }
                for (i, f) in fs.iter().enumerate() {
                    require_vars(&format!("F{}", i + 1), f, &[PHI])?;
                }
                if !c.is_finite() {
                    return Err(Error::Arity("c must be finite".into()));
                }
            }
            FamilyKind::Quadratic { .. } => {}
            FamilyKind::Chaundy { f, g } => {
                require_vars("F", f, &["x", "y", PHI])?;
                require_vars("G", g, &["z", "w", PHI])?;
            }
            FamilyKind::ExplicitComplex { outer, f, g } => {
                require_vars("F", outer, &["u", "v"])?;
                require_vars("f", f, &["x", "y"])?;
                require_vars("g", g, &["z", "w"])?;
            }
            FamilyKind::Confocal { a2, b2, c2 } => {
                if ![a2, b2, c2].iter().all(|v| v.is_finite()) {
                    return Err(Error::Arity("confocal parameters must be finite".into()));
                }
            }
            FamilyKind::ASurface { a, k } => {
                if *k == 0 {
                    return Err(Error::Arity("A needs at least one x variable".into()));
                }
                let names = coordinate_names(*k);
                let mut allowed: Vec<&str> = names.iter().map(String::as_str).collect();
                allowed.push(PHI);
                require_vars("A", a, &allowed)?;
            }
            FamilyKind::Implicit { constraint, coords } => {
                let mut allowed: Vec<&str> = coords.iter().map(String::as_str).collect();
                allowed.push(PHI);
                require_vars("C", constraint, &allowed)?;
            }
            FamilyKind::Explicit { e, coords, .. } => {
                let allowed: Vec<&str> = coords.iter().map(String::as_str).collect();
                require_vars("e", e, &allowed)?;
            }
        }
        Ok(FamilySpec { kind, branch: None })
    }

    pub fn bateman(f: Expr, g: Expr) -> Result<Self> {
        Self::new(FamilyKind::Bateman { f, g })
    }

    pub fn linear(fs: Vec<Expr>, c: f64) -> Result<Self> {
        Self::new(FamilyKind::Linear { fs, c })
    }

    pub fn quadratic(m: SymFuncMatrix) -> Result<Self> {
        Self::new(FamilyKind::Quadratic { m })
    }

    pub fn chaundy(f: Expr, g: Expr) -> Result<Self> {
        Self::new(FamilyKind::Chaundy { f, g })
    }

    pub fn explicit_complex(outer: Expr, f: Expr, g: Expr) -> Result<Self> {
        Self::new(FamilyKind::ExplicitComplex { outer, f, g })
    }

    pub fn confocal(a2: f64, b2: f64, c2: f64) -> Result<Self> {
        Self::new(FamilyKind::Confocal { a2, b2, c2 })
    }

    pub fn a_surface(a: Expr, k: usize) -> Result<Self> {
        Self::new(FamilyKind::ASurface { a, k })
    }

    pub fn implicit(constraint: Expr, coords: &[&str]) -> Result<Self> {
        Self::new(FamilyKind::Implicit { constraint, coords: coords.iter().map(|s| s.to_string()).collect() })
    }

    pub fn explicit(e: Expr, coords: &[&str], degree: Option<f64>) -> Result<Self> {
        Self::new(FamilyKind::Explicit { e, coords: coords.iter().map(|s| s.to_string()).collect(), degree })
    }

    pub fn with_branch(mut self, branch: Branch<f64>) -> Self {
        self.branch = Some(branch);
        self
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn coords(&self) -> Vec<String> {
        let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        match &self.kind {
            FamilyKind::Bateman { .. } => own(&["t", "x"]),
            FamilyKind::Linear { fs, .. } => coordinate_names(fs.len()),
            FamilyKind::Quadratic { m } => coordinate_names(m.n()),
            FamilyKind::Chaundy { .. } | FamilyKind::ExplicitComplex { .. } => own(&["x", "y", "z", "w"]),
            FamilyKind::Confocal { .. } => own(&["x", "y", "z"]),
            FamilyKind::ASurface { k, .. } => {
                let mut c = vec!["t".to_string()];
                c.extend(coordinate_names(*k));
                c
            }
            FamilyKind::Implicit { coords, .. } | FamilyKind::Explicit { coords, .. } => coords.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.coords().len()
    }

    /// The branch used for root finding: the configured one or the kind's
    /// default.
    pub fn branch(&self) -> Branch<f64> {
        if let Some(b) = &self.branch {
            return b.clone();
        }
        match &self.kind {
            FamilyKind::Confocal { a2, b2, c2 } => {
                // C blows up at the largest pole -min(a2, b2, c2) and tends to -1 as phi grows.
                let pole = -a2.min(*b2).min(*c2);
                Branch::Bracket { lo: pole + 1e-9 * (1.0 + pole.abs()), hi: 1e6 }
            }
            _ => DEFAULT_SCAN,
        }
    }

    /// The constraint, or the explicit field for kinds that bypass root
    /// finding. Chaundy families that are affine in `phi` are solved in
    /// closed form.
    pub fn to_constraint(&self) -> Result<Field> {
        let coords = self.coords();
        let names: Vec<&str> = coords.iter().map(String::as_str).collect();
        let v = Expr::var;
        let n = Expr::num;
        let c = match &self.kind {
            FamilyKind::Bateman { f, g } => Expr::sub(
                Expr::add(Expr::mul(v("t"), f.clone()), Expr::mul(v("x"), g.clone())),
                Expr::one(),
            ),
            FamilyKind::Linear { fs, c } => Expr::sub(
                Expr::sum(fs.iter().zip(&names).map(|(f, x)| Expr::mul(f.clone(), v(x)))),
                n(*c),
            ),
            FamilyKind::Quadratic { m } => m.constraint(&names)?,
            FamilyKind::Chaundy { f, g } => {
                let c = Expr::sub(f.clone(), g.clone());
                if let Some(e) = affine_solution(&c) {
                    return Ok(Field::Explicit { expr: e, coords });
                }
                c
            }
            FamilyKind::ExplicitComplex { outer, f, g } => {
                let e = outer.substitute(&[("u", f), ("v", g)]);
                return Ok(Field::Explicit { expr: e, coords });
            }
            FamilyKind::Confocal { a2, b2, c2 } => {
                let term = |x: &str, s: f64| {
                    Expr::div(Expr::pow(Expr::var(x), n(2.0)), Expr::add(n(s), Expr::var(PHI)))
                };
                Expr::sub(Expr::sum([term("x", *a2), term("y", *b2), term("z", *c2)]), Expr::one())
            }
            FamilyKind::ASurface { a, .. } => Expr::sub(v("t"), a.clone()),
            FamilyKind::Implicit { constraint, .. } => constraint.clone(),
            FamilyKind::Explicit { e, .. } => return Ok(Field::Explicit { expr: e.clone(), coords }),
        };
        Ok(Field::Implicit(ImplicitFamily::new(c, &names)?.with_branch(self.branch())))
    }
}

/// `-C(phi = 0) / C_phi` when `C_phi` does not involve `phi`.
fn affine_solution(c: &Expr) -> Option<Expr> {
    let slope = c.diff(PHI);
    if slope.depends_on(PHI) || slope.is_zero() {
        return None;
    }
    let zero = Expr::zero();
    let offset = c.substitute(&[(PHI, &zero)]);
    Some(Expr::neg(Expr::div(offset, slope)))
}

/// A family ready for sampling.
#[derive(Clone, Debug)]
pub enum Field {
    Implicit(ImplicitFamily<f64>),
    Explicit { expr: Expr, coords: Vec<String> },
}

impl Field {
    pub fn coords(&self) -> Vec<&str> {
        match self {
            Field::Implicit(f) => f.coords(),
            Field::Explicit { coords, .. } => coords.iter().map(String::as_str).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.coords().len()
    }

    pub fn solve(&self, x: &[f64]) -> Result<FieldJet<f64>> {
        match self {
            Field::Implicit(f) => f.solve(x),
            Field::Explicit { expr, coords } => {
                if x.len() != coords.len() {
                    return Err(Error::DimensionMismatch { expected: coords.len(), found: x.len() });
                }
                let names: Vec<&str> = coords.iter().map(String::as_str).collect();
                FieldJet::explicit(expr, &names, x)
            }
        }
    }

    pub fn solve_points(&self, points: Vec<Vec<f64>>) -> Vec<SamplePoint<f64>> {
        match self {
            Field::Implicit(f) => f.solve_points(points),
            Field::Explicit { .. } => points
                .into_iter()
                .enumerate()
                .map(|(index, x)| SamplePoint { outcome: self.solve(&x), index, x })
                .collect(),
        }
    }

    pub fn sample(&self, spec: &SampleSpec) -> Result<Vec<SamplePoint<f64>>> {
        if spec.bounds.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: spec.bounds.len() });
        }
        Ok(self.solve_points(spec.points()?))
    }
}

/// Residual checks known to the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Check {
    Bateman,
    Ufe,
    SumBateman,
    ComplexBateman,
    FirstOrder,
    Example2,
    MongeAmpere,
    Bateman2d,
    Euler,
    Equipotential,
}

impl Check {
    pub const ALL: [Check; 10] = [
        Check::Bateman,
        Check::Ufe,
        Check::SumBateman,
        Check::ComplexBateman,
        Check::FirstOrder,
        Check::Example2,
        Check::MongeAmpere,
        Check::Bateman2d,
        Check::Euler,
        Check::Equipotential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Bateman => "bateman",
            Check::Ufe => "ufe",
            Check::SumBateman => "sum_bateman",
            Check::ComplexBateman => "complex_bateman",
            Check::FirstOrder => "first_order",
            Check::Example2 => "example2",
            Check::MongeAmpere => "monge_ampere",
            Check::Bateman2d => "bateman2d",
            Check::Euler => "euler",
            Check::Equipotential => "equipotential",
        }
    }

    pub fn from_name(name: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A check with its tolerance. When `given` is set the check is only
/// claimed at points where that premise holds to its tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpectedCheck {
    pub check: Check,
    pub tolerance: f64,
    pub given: Option<(Check, f64)>,
}

impl ExpectedCheck {
    pub fn new(check: Check, tolerance: f64) -> Self {
        ExpectedCheck { check, tolerance, given: None }
    }

    pub fn given(mut self, premise: Check, tolerance: f64) -> Self {
        self.given = Some((premise, tolerance));
        self
    }
}

pub const RESIDUAL_TOL: f64 = 1e-7;
pub const COMPLEX_TOL: f64 = 1e-10;
pub const SURFACE_TOL: f64 = 1e-6;
pub const PREMISE_TOL: f64 = 1e-9;
pub const EULER_TOL: f64 = 1e-12;
pub const HOMOGENEOUS_UFE_TOL: f64 = 1e-9;
pub const EQUIPOTENTIAL_TOL: f64 = 1e-8;

/// The equations a family is known to satisfy.
pub fn expected_checks(spec: &FamilySpec) -> Vec<ExpectedCheck> {
    use Check::*;
    match spec.kind() {
        FamilyKind::Bateman { .. } => vec![ExpectedCheck::new(Bateman, RESIDUAL_TOL)],
        FamilyKind::Linear { .. } => vec![ExpectedCheck::new(Ufe, RESIDUAL_TOL)],
        FamilyKind::Quadratic { m } => {
            let mut out = Vec::new();
            if gate_precheck(m, 0).is_ok() {
                out.push(ExpectedCheck::new(Ufe, RESIDUAL_TOL));
            }
            if m.n() == 2 && m.get(0, 1).is_zero() {
                out.push(ExpectedCheck::new(Example2, RESIDUAL_TOL));
            }
            out
        }
        FamilyKind::Chaundy { .. } | FamilyKind::ExplicitComplex { .. } => vec![
            ExpectedCheck::new(ComplexBateman, COMPLEX_TOL),
            ExpectedCheck::new(FirstOrder, COMPLEX_TOL),
        ],
        FamilyKind::Confocal { .. } => vec![ExpectedCheck::new(Equipotential, EQUIPOTENTIAL_TOL)],
        FamilyKind::ASurface { k, .. } => {
            let mut out = vec![ExpectedCheck::new(Ufe, SURFACE_TOL).given(MongeAmpere, PREMISE_TOL)];
            if *k == 2 {
                out.push(ExpectedCheck::new(SumBateman, SURFACE_TOL).given(Bateman2d, PREMISE_TOL));
            }
            out
        }
        FamilyKind::Explicit { degree: Some(d), .. } => {
            let mut out = vec![ExpectedCheck::new(Euler, EULER_TOL)];
            if *d == 0.0 {
                out.push(ExpectedCheck::new(Ufe, HOMOGENEOUS_UFE_TOL).given(Euler, EULER_TOL));
            }
            out
        }
        FamilyKind::Implicit { .. } | FamilyKind::Explicit { .. } => Vec::new(),
    }
}

/// `sum x_i phi_i - d phi`
pub fn euler_residual(j: &FieldJet<f64>, degree: f64) -> Residual<f64> {
    Residual::from_terms(j.x().iter().zip(j.grad()).map(|(x, g)| x * g))
        .term(-degree * j.phi())
}

/// Evaluates a pointwise check on a solved point of `spec`.
pub fn point_residual(spec: &FamilySpec, check: Check, j: &FieldJet<f64>) -> Result<Residual<f64>> {
    match check {
        Check::Bateman => bateman_residual(j),
        Check::Ufe => ufe_residual(j),
        Check::SumBateman => sum_bateman_residual(j),
        Check::ComplexBateman => complex_bateman_residual(j),
        Check::FirstOrder => {
            let r = match spec.kind() {
                FamilyKind::Chaundy { f, g } => first_order_system_residual(f, g, j)?,
                _ => first_order_system_from_jet(j)?,
            };
            Ok(r.worst())
        }
        Check::Example2 => example2_residual(j),
        Check::MongeAmpere | Check::Bateman2d => {
            let FamilyKind::ASurface { a, k } = spec.kind() else {
                return Err(Error::Arity(format!("{check} applies to a_surface families only")));
            };
            let names = coordinate_names(*k);
            let xs: Vec<&str> = names.iter().map(String::as_str).collect();
            let mut point = vec![j.phi()];
            point.extend_from_slice(&j.x()[1..]);
            let s = a_surface_residuals(a, &xs, &point)?;
            Ok(if check == Check::MongeAmpere { s.monge_ampere } else { s.bateman2d })
        }
        Check::Euler => match spec.kind() {
            FamilyKind::Explicit { degree: Some(d), .. } => Ok(euler_residual(j, *d)),
            _ => Ok(euler_residual(j, 0.0)),
        },
        Check::Equipotential => Err(Error::Arity("equipotential is not a pointwise check".into())),
    }
}

/// Per-point spread report of `r = laplacian(phi) / |grad phi|^2` on the
/// level set `phi = level`. Its `max_normalized` is the spread
/// `max |r - mean r| / |mean r|`.
pub fn equipotential_report(
    fam: &ImplicitFamily<f64>,
    level: f64,
    k: usize,
    seed: u64,
    tolerance: f64,
) -> Result<ResidualReport> {
    let jets = level_set_points(fam, level, k, seed)?;
    let ratios: Vec<f64> = jets
        .iter()
        .map(|j| {
            let lap: f64 = (0..j.n()).map(|i| j.dd(i, i)).sum();
            let g2: f64 = j.grad().iter().map(|g| g * g).sum();
            lap / g2
        })
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let mut report = ResidualReport::new(Check::Equipotential.name(), tolerance);
    for (i, (j, r)) in jets.iter().zip(&ratios).enumerate() {
        report.push(i, j, Residual { raw: r - mean, scale: mean.abs() });
    }
    Ok(report)
}

/// Spread of `laplacian(phi) / |grad phi|^2` over `k` points of a level set.
pub fn equipotential_check(fam: &ImplicitFamily<f64>, level: f64, k: usize, seed: u64) -> Result<f64> {
    Ok(equipotential_report(fam, level, k, seed, EQUIPOTENTIAL_TOL)?.max_normalized)
}

/// Points of the surface `C(x, level) = 0` in three dimensions, found by
/// drawing the first two coordinates inside the surface's shadow and solving
/// for a positive third. The surface must enclose the origin.
fn level_set_points(fam: &ImplicitFamily<f64>, level: f64, k: usize, seed: u64) -> Result<Vec<FieldJet<f64>>> {
    if fam.n() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: fam.n() });
    }
    let g = |p: &[f64]| fam.residual(p, level);
    let empty = |why: &str| Error::EmptyLevelSet(format!("phi = {level}: {why}"));
    if !(g(&[0.0; 3]).is_ok_and(|v| v < 0.0)) {
        return Err(empty("the origin is not inside the level surface"));
    }
    let mut extent = [0.0; 3];
    for (axis, e) in extent.iter_mut().enumerate() {
        let at = |s: f64| {
            let mut p = [0.0; 3];
            p[axis] = s;
            g(&p)
        };
        let mut hi = 1.0;
        while at(hi).map_or(true, |v| v <= 0.0) {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(empty("the level surface is unbounded"));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at(mid).is_ok_and(|v| v <= 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        *e = hi;
    }

    // Solve for the third coordinate: it takes the place of phi.
    let coords = fam.coords();
    let lvl = Expr::num(level);
    let third = Expr::var(PHI);
    let height = fam.constraint().substitute(&[(PHI, &lvl), (coords[2], &third)]);
    let zfam = ImplicitFamily::new(height, &coords[..2])?;

    let candidates = crate::implicit::random_points(&[(-extent[0], extent[0]), (-extent[1], extent[1])], 10 * k, seed);
    let mut out = Vec::with_capacity(k);
    for xy in candidates {
        if out.len() == k {
            break;
        }
        if g(&[xy[0], xy[1], 0.0]).map_or(true, |v| v >= 0.0) {
            continue;
        }
        let mut top = extent[2];
        while g(&[xy[0], xy[1], top]).is_ok_and(|v| v <= 0.0) && top < 1e6 {
            top *= 2.0;
        }
        let Ok(z) = zfam.clone().with_branch(Branch::Bracket { lo: 0.0, hi: top }).solve(&xy) else {
            continue;
        };
        let p = [xy[0], xy[1], z.phi()];
        if let Ok(j) = fam.field_jet(&p, level) {
            out.push(j);
        }
    }
    if out.len() < k {
        return Err(empty(&format!("found {} of {k} points in {} attempts", out.len(), 10 * k)));
    }
    Ok(out)
}

/// Euler relation for a field claimed homogeneous of degree `degree`, plus
/// the UFE when the degree is zero and the Euler check passes.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneityReport {
    pub euler: ResidualReport,
    pub ufe: Option<ResidualReport>,
}

impl HomogeneityReport {
    pub fn pass(&self) -> bool {
        self.euler.pass && self.ufe.as_ref().is_none_or(|u| u.pass)
    }
}

pub fn homogeneity_check(e: &Expr, coords: &[&str], degree: f64, sample: &SampleSpec) -> Result<HomogeneityReport> {
    let spec = FamilySpec::explicit(e.clone(), coords, Some(degree))?;
    let field = spec.to_constraint()?;
    let points = field.sample(sample)?;
    let mut euler = ResidualReport::new(Check::Euler.name(), EULER_TOL);
    let mut solved = Vec::new();
    for sp in points {
        let j = sp.outcome?;
        euler.push(sp.index, &j, euler_residual(&j, degree));
        solved.push((sp.index, j));
    }
    let ufe = if degree == 0.0 && euler.pass {
        let mut r = ResidualReport::new(Check::Ufe.name(), HOMOGENEOUS_UFE_TOL);
        for (i, j) in &solved {
            r.push(*i, j, ufe_residual(j)?);
        }
        Some(r)
    } else {
        None
    };
    Ok(HomogeneityReport { euler, ufe })
}
