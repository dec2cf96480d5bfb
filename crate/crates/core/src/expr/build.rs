//! Smart constructors: constant folding and 0/1 absorption, nothing more.

use std::sync::Arc;

use super::ast::{Expr, Func};

type E = Arc<Expr>;

fn fold(v: f64) -> Option<E> {
    v.is_finite().then(|| Expr::num(v))
}

pub fn neg(a: E) -> E {
    match &*a {
        Expr::Num(v) => Expr::num(-v),
        Expr::Neg(inner) => inner.clone(),
        _ => Arc::new(Expr::Neg(a)),
    }
}

pub fn add(a: E, b: E) -> E {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => fold(x + y).unwrap_or_else(|| Arc::new(Expr::Add(a, b))),
        (Some(x), None) if x == 0.0 => b,
        (None, Some(y)) if y == 0.0 => a,
        _ => Arc::new(Expr::Add(a, b)),
    }
}

pub fn sub(a: E, b: E) -> E {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => fold(x - y).unwrap_or_else(|| Arc::new(Expr::Sub(a, b))),
        (Some(x), None) if x == 0.0 => neg(b),
        (None, Some(y)) if y == 0.0 => a,
        _ => Arc::new(Expr::Sub(a, b)),
    }
}

pub fn mul(a: E, b: E) -> E {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => fold(x * y).unwrap_or_else(|| Arc::new(Expr::Mul(a, b))),
        (Some(x), _) if x == 0.0 => Expr::num(0.0),
        (_, Some(y)) if y == 0.0 => Expr::num(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        (Some(x), None) => match &*b {
            // c1 * (c2 * e) -> (c1 c2) * e
            Expr::Mul(c, e) => match c.as_num().and_then(|y| fold(x * y)) {
                Some(prod) => mul(prod, e.clone()),
                None => Arc::new(Expr::Mul(a, b)),
            },
            _ => Arc::new(Expr::Mul(a, b)),
        },
        _ => Arc::new(Expr::Mul(a, b)),
    }
}

pub fn div(a: E, b: E) -> E {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) if y != 0.0 => {
            fold(x / y).unwrap_or_else(|| Arc::new(Expr::Div(a, b)))
        }
        (Some(x), _) if x == 0.0 && b.as_num().is_none() => Expr::num(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Arc::new(Expr::Div(a, b)),
    }
}

pub fn pow(a: E, n: i32) -> E {
    if n == 0 {
        return Expr::num(1.0);
    }
    if n == 1 {
        return a;
    }
    if let Some(x) = a.as_num() {
        if !(x == 0.0 && n < 0) {
            if let Some(e) = fold(x.powi(n)) {
                return e;
            }
        }
    }
    Arc::new(Expr::Pow(a, n))
}

pub fn call(f: Func, a: E) -> E {
    if let Some(x) = a.as_num() {
        if let Ok(y) = f.apply(x) {
            return Expr::num(y);
        }
    }
    Arc::new(Expr::Call(f, a))
}

/// Sum of terms, skipping zeros.
pub fn sum(terms: impl IntoIterator<Item = E>) -> E {
    terms.into_iter().fold(Expr::num(0.0), add)
}
