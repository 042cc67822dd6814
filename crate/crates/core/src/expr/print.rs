//! Minimal-parenthesis printer. The output re-parses to the same tree.

use std::fmt;

use super::Expr;

const ADD: u8 = 1;
const MUL: u8 = 2;
const NEG: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => ADD,
        Expr::Mul(..) | Expr::Div(..) => MUL,
        Expr::Neg(..) => NEG,
        Expr::Pow(..) => POW,
        Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => ATOM,
    }
}

fn child(e: &Expr, parens: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if parens {
        write!(f, "(")?;
        write_expr(e, f)?;
        write!(f, ")")
    } else {
        write_expr(e, f)
    }
}

pub(super) fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Num(c) => write!(f, "{c}"),
        Expr::Var(v) => write!(f, "{v}"),
        Expr::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(a, f)?;
            write!(f, ")")
        }
        // `-` applies to a whole factor, so anything looser than `^` needs
        // parentheses underneath it.
        Expr::Neg(a) => {
            write!(f, "-")?;
            child(a, precedence(a) < NEG, f)
        }
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            let op = if matches!(e, Expr::Add(..)) { "+" } else { "-" };
            child(a, precedence(a) < ADD, f)?;
            write!(f, " {op} ")?;
            child(b, precedence(b) <= ADD, f)
        }
        Expr::Mul(a, b) | Expr::Div(a, b) => {
            let op = if matches!(e, Expr::Mul(..)) { "*" } else { "/" };
            child(a, precedence(a) < MUL, f)?;
            write!(f, "{op}")?;
            child(b, precedence(b) <= MUL, f)
        }
        Expr::Pow(a, b) => {
            child(a, precedence(a) <= POW, f)?;
            write!(f, "^")?;
            child(b, precedence(b) < NEG, f)
        }
    }
}
