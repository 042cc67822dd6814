//! Implicit differentiation across scalar types and reparametrizations.

use approx::assert_relative_eq;
use implicit_pde::families::FamilySpec;
use implicit_pde::implicit::{random_points, Branch};
use implicit_pde::residual::{bateman_residual, ufe_residual};
use implicit_pde::implicit::ImplicitFamily;
use implicit_pde::Expr;

fn p(s: &str) -> Expr {
    s.parse().unwrap()
}

#[test]
fn single_precision_tracks_double() {
    let c = p("x*phi + y*phi^3 - 1");
    let f64_fam = ImplicitFamily::<f64>::new(c.clone(), &["x", "y"]).unwrap().with_branch(Branch::Bracket { lo: 0.0, hi: 2.0 });
    let f32_fam = ImplicitFamily::<f32>::new(c, &["x", "y"]).unwrap().with_branch(Branch::Bracket { lo: 0.0, hi: 2.0 });
    for x in random_points(&[(0.5, 1.5), (0.5, 1.5)], 20, 3) {
        let a = f64_fam.solve(&x).unwrap();
        let xs: Vec<f32> = x.iter().map(|v| *v as f32).collect();
        let b = f32_fam.solve(&xs).unwrap();
        assert_relative_eq!(a.phi(), b.phi() as f64, max_relative = 1e-5);
        for k in 0..2 {
            assert_relative_eq!(a.d(k), b.d(k) as f64, max_relative = 1e-4);
            assert_relative_eq!(a.dd(k, 1 - k), b.dd(k, 1 - k) as f64, max_relative = 1e-3);
        }
        assert!(bateman_residual(&b).unwrap().normalized() < 1e-4);
    }
}

#[test]
fn bateman_solutions_survive_reparametrization() {
    let spec = FamilySpec::bateman(p("phi"), p("phi^2 + 1")).unwrap();
    let fam = match spec.to_constraint().unwrap() {
        implicit_pde::families::Field::Implicit(f) => f,
        _ => unreachable!(),
    };
    for sp in fam.solve_points(random_points(&[(0.5, 1.5), (0.5, 1.5)], 30, 4)) {
        let Ok(j) = sp.outcome else { continue };
        assert!(bateman_residual(&j).unwrap().normalized() <= 1e-7);
        let e = j.phi().exp();
        let wrapped = j.compose(e, e, e);
        assert!(bateman_residual(&wrapped).unwrap().normalized() <= 1e-7);
        let c = j.phi().cos();
        let wrapped = j.compose(j.phi().sin(), c, -j.phi().sin());
        assert!(ufe_residual(&wrapped).unwrap().normalized() <= 1e-7);
    }
}

#[test]
fn singular_points_are_reported() {
    let fam = ImplicitFamily::<f64>::new(p("phi^2 - x - y"), &["x", "y"]).unwrap().with_branch(Branch::Guess(0.0));
    assert!(fam.solve(&[0.0, 0.0]).is_err());
}
