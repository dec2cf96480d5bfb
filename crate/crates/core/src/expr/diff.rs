use std::sync::Arc;

use super::ast::{Expr, Func};
use super::build::*;

/// Symbolic partial derivative with respect to the variable `x`.
pub fn derivative(e: &Arc<Expr>, x: &str) -> Arc<Expr> {
    match &**e {
        Expr::Num(_) => Expr::num(0.0),
        Expr::Var(s) => Expr::num(if &**s == x { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(derivative(a, x)),
        Expr::Add(a, b) => add(derivative(a, x), derivative(b, x)),
        Expr::Sub(a, b) => sub(derivative(a, x), derivative(b, x)),
        Expr::Mul(a, b) => add(
            mul(derivative(a, x), b.clone()),
            mul(a.clone(), derivative(b, x)),
        ),
        Expr::Div(a, b) => {
            let da = derivative(a, x);
            let db = derivative(b, x);
            if db.is_zero() {
                div(da, b.clone())
            } else {
                div(
                    sub(mul(da, b.clone()), mul(a.clone(), db)),
                    pow(b.clone(), 2),
                )
            }
        }
        Expr::Pow(a, n) => {
            let da = derivative(a, x);
            if da.is_zero() {
                return Expr::num(0.0);
            }
            mul(mul(Expr::num(*n as f64), pow(a.clone(), n - 1)), da)
        }
        Expr::Call(f, a) => {
            let da = derivative(a, x);
            if da.is_zero() {
                return Expr::num(0.0);
            }
            let outer = match f {
                Func::Sin => call(Func::Cos, a.clone()),
                Func::Cos => neg(call(Func::Sin, a.clone())),
                Func::Exp => call(Func::Exp, a.clone()),
                Func::Log => return div(da, a.clone()),
                Func::Sqrt => {
                    return div(da, mul(Expr::num(2.0), call(Func::Sqrt, a.clone())));
                }
                Func::Tanh => sub(Expr::num(1.0), pow(call(Func::Tanh, a.clone()), 2)),
            };
            mul(outer, da)
        }
    }
}
