use super::{Expr, Func};

pub(super) fn derivative(e: &Expr, var: &str) -> Expr {
    if !e.depends_on(var) {
        return Expr::zero();
    }
    let d = |x: &Expr| derivative(x, var);
    match e {
        Expr::Num(_) => Expr::zero(),
        Expr::Var(v) => {
            if v == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Neg(a) => Expr::neg(d(a)),
        Expr::Add(a, b) => Expr::add(d(a), d(b)),
        Expr::Sub(a, b) => Expr::sub(d(a), d(b)),
        Expr::Mul(a, b) => Expr::add(
            Expr::mul(d(a), (**b).clone()),
            Expr::mul((**a).clone(), d(b)),
        ),
        Expr::Div(a, b) => {
            let a_ = (**a).clone();
            let b_ = (**b).clone();
            let num = Expr::sub(Expr::mul(d(a), b_.clone()), Expr::mul(a_, d(b)));
            Expr::div(num, Expr::pow(b_, Expr::num(2.0)))
        }
        Expr::Pow(a, b) => {
            let a_ = (**a).clone();
            let b_ = (**b).clone();
            if !b.depends_on(var) {
                // b * a^(b-1) * a'
                let lowered = Expr::sub(b_.clone(), Expr::one());
                Expr::mul(Expr::mul(b_, Expr::pow(a_, lowered)), d(a))
            } else {
                // a^b * (b' ln a + b a'/a)
                let log_term = Expr::mul(d(b), Expr::call(Func::Log, a_.clone()));
                let ratio = Expr::div(Expr::mul(b_, d(a)), a_);
                Expr::mul((*e).clone(), Expr::add(log_term, ratio))
            }
        }
        Expr::Call(func, a) => {
            let a_ = (**a).clone();
            let outer = match func {
                Func::Sin => Expr::call(Func::Cos, a_),
                Func::Cos => Expr::neg(Expr::call(Func::Sin, a_)),
                Func::Exp => Expr::call(Func::Exp, a_),
                Func::Log => Expr::div(Expr::one(), a_),
                Func::Sqrt => Expr::div(
                    Expr::one(),
                    Expr::mul(Expr::num(2.0), Expr::call(Func::Sqrt, a_)),
                ),
            };
            Expr::mul(outer, d(a))
        }
    }
}
