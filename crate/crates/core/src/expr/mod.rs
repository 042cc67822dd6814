//! Scalar expression DSL.
//!
//! Expressions are immutable trees over named variables. They are parsed
//! from text, printed back in a form that re-parses to the same tree,
//! evaluated over any [`Numeric`] carrier (plain scalars or second-order
//! jets), and differentiated symbolically.

use std::collections::BTreeSet;
use std::fmt;

mod diff;
mod eval;
mod parse;
mod print;

pub use eval::Numeric;
pub use parse::{parse, ParseError, ParseErrorKind};

use crate::error::{Error, Result};
use crate::Scalar;

/// Unary functions known to the DSL.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Value, first and second derivative at `x`. This table is the whole
    /// chain-rule knowledge of the jet engine.
    pub fn triple<T: Scalar>(self, x: T) -> Result<(T, T, T)> {
        let two = T::lit(2.0);
        match self {
            Func::Sin => {
                let (s, c) = x.sin_cos();
                Ok((s, c, -s))
            }
            Func::Cos => {
                let (s, c) = x.sin_cos();
                Ok((c, -s, -c))
            }
            Func::Exp => {
                let e = x.exp();
                Ok((e, e, e))
            }
            Func::Log => {
                if x <= T::zero() {
                    return Err(Error::Domain(format!("log of nonpositive value {x}")));
                }
                let r = x.recip();
                Ok((x.ln(), r, -r * r))
            }
            Func::Sqrt => {
                if x < T::zero() {
                    return Err(Error::Domain(format!("sqrt of negative value {x}")));
                }
                let s = x.sqrt();
                let d1 = (two * s).recip();
                Ok((s, d1, -d1 / (two * x)))
            }
        }
    }

    /// Plain evaluation; unlike [`Func::triple`] this accepts `sqrt(0)`.
    pub fn apply<T: Scalar>(self, x: T) -> Result<T> {
        match self {
            Func::Sqrt if x == T::zero() => Ok(x),
            _ => self.triple(x).map(|t| t.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// Nonnegative literal. Negative constants are spelled `Neg(Num(c))`
    /// so that printing and re-parsing is the identity on trees.
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Constant node; negative values become `Neg(Num(|c|))`.
    pub fn num(c: f64) -> Expr {
        if c == 0.0 {
            Expr::Num(0.0)
        } else if c < 0.0 {
            Expr::Neg(Box::new(Expr::Num(-c)))
        } else {
            Expr::Num(c)
        }
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    pub fn one() -> Expr {
        Expr::Num(1.0)
    }

    /// The constant value of a literal or a negated literal.
    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Num(c) => Some(*c),
            Expr::Neg(inner) => match inner.as_ref() {
                Expr::Num(c) => Some(-c),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn depends_on(&self, var: &str) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Replaces every occurrence of the named variables.
    pub fn substitute(&self, subs: &[(&str, &Expr)]) -> Expr {
        let rec = |e: &Expr| Box::new(e.substitute(subs));
        match self {
            Expr::Num(c) => Expr::Num(*c),
            Expr::Var(v) => subs
                .iter()
                .find(|(name, _)| name == v)
                .map(|(_, e)| (*e).clone())
                .unwrap_or_else(|| self.clone()),
            Expr::Neg(a) => Expr::Neg(rec(a)),
            Expr::Call(f, a) => Expr::Call(*f, rec(a)),
            Expr::Add(a, b) => Expr::Add(rec(a), rec(b)),
            Expr::Sub(a, b) => Expr::Sub(rec(a), rec(b)),
            Expr::Mul(a, b) => Expr::Mul(rec(a), rec(b)),
            Expr::Div(a, b) => Expr::Div(rec(a), rec(b)),
            Expr::Pow(a, b) => Expr::Pow(rec(a), rec(b)),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Evaluates at a full binding of the free variables.
    pub fn eval<T: Scalar>(&self, bindings: &[(&str, T)]) -> Result<T> {
        eval::evaluate(self, (), &|name| {
            bindings.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
        })
    }

    /// Evaluates with an arbitrary variable lookup.
    pub fn eval_with<T: Scalar>(&self, lookup: &dyn Fn(&str) -> Option<T>) -> Result<T> {
        eval::evaluate(self, (), lookup)
    }

    /// Evaluates over any [`Numeric`] carrier.
    pub fn eval_numeric<T: Scalar, N: Numeric<T>>(
        &self,
        ctx: N::Ctx,
        lookup: &dyn Fn(&str) -> Option<N>,
    ) -> Result<N> {
        eval::evaluate(self, ctx, lookup)
    }

    /// Symbolic derivative with respect to `var`.
    pub fn diff(&self, var: &str) -> Expr {
        diff::derivative(self, var)
    }

    pub fn parse(text: &str) -> std::result::Result<Expr, ParseError> {
        parse(text)
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_expr(self, f)
    }
}

// Smart constructors with constant folding, used by the differentiator and
// by code that assembles constraints.

fn fold(e: Expr) -> Expr {
    let all_const = match &e {
        Expr::Neg(a) | Expr::Call(_, a) => a.as_const().is_some(),
        Expr::Add(a, b)
        | Expr::Sub(a, b)
        | Expr::Mul(a, b)
        | Expr::Div(a, b)
        | Expr::Pow(a, b) => a.as_const().is_some() && b.as_const().is_some(),
        _ => false,
    };
    if all_const {
        // Folding goes through the evaluator itself, so a folded node has
        // exactly the value the unfolded one would have had.
        if let Ok(v) = e.eval::<f64>(&[]) {
            if v.is_finite() {
                return Expr::num(v);
            }
        }
    }
    e
}

impl Expr {
    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Num(c) if c == 0.0 => Expr::zero(),
            Expr::Neg(inner) => *inner,
            a => Expr::Neg(Box::new(a)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        fold(Expr::Add(Box::new(a), Box::new(b)))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return Expr::neg(b);
        }
        fold(Expr::Sub(Box::new(a), Box::new(b)))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::zero();
        }
        if a.as_const() == Some(1.0) {
            return b;
        }
        if b.as_const() == Some(1.0) {
            return a;
        }
        fold(Expr::Mul(Box::new(a), Box::new(b)))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if b.as_const() == Some(1.0) {
            return a;
        }
        if a.is_zero() && !b.is_zero() {
            return Expr::zero();
        }
        fold(Expr::Div(Box::new(a), Box::new(b)))
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            return Expr::one();
        }
        if b.as_const() == Some(1.0) {
            return a;
        }
        fold(Expr::Pow(Box::new(a), Box::new(b)))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        fold(Expr::Call(f, Box::new(a)))
    }

    /// Sum of a sequence of terms; the empty sum is zero.
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        terms.into_iter().fold(Expr::zero(), Expr::add)
    }
}
