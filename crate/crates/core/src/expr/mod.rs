//! Scalar expressions over named coordinates: parsing, exact evaluation,
//! symbolic differentiation and printing.

mod ast;
pub mod build;
mod compile;
mod diff;
mod parse;
mod symbols;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

pub use ast::{Expr, Func};
pub use compile::Compiled;
pub use symbols::{CoordRole, SymbolTable};

use crate::error::{FieldError, Result};

/// An expression together with its free symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    expr: Arc<Expr>,
    free: BTreeSet<String>,
}

/// Anything that maps coordinate names to values.
pub trait Assignment {
    fn value(&self, name: &str) -> Option<f64>;
}

impl Assignment for HashMap<String, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Assignment for BTreeMap<String, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Assignment for [(&str, f64)] {
    fn value(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Assignment for [(&str, f64); N] {
    fn value(&self, name: &str) -> Option<f64> {
        self.as_slice().value(name)
    }
}

impl ScalarField {
    pub fn parse(text: &str, symbols: &SymbolTable) -> Result<ScalarField> {
        Ok(Self::from_expr(parse::parse_expr(text, symbols)?))
    }

    pub fn from_expr(expr: Arc<Expr>) -> ScalarField {
        let mut free = BTreeSet::new();
        expr.free_symbols(&mut free);
        ScalarField { expr, free }
    }

    pub fn constant(v: f64) -> ScalarField {
        Self::from_expr(Expr::num(v))
    }

    pub fn var(name: &str) -> ScalarField {
        Self::from_expr(Expr::var(name))
    }

    pub fn expr(&self) -> &Arc<Expr> {
        &self.expr
    }

    pub fn free_symbols(&self) -> &BTreeSet<String> {
        &self.free
    }

    pub fn depends_on(&self, name: &str) -> bool {
        self.free.contains(name)
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.expr.as_num()
    }

    pub fn is_zero(&self) -> bool {
        self.expr.is_zero()
    }

    /// Fails unless every free symbol is declared in `symbols`.
    pub fn check_symbols(&self, symbols: &SymbolTable) -> Result<()> {
        match self.free.iter().find(|s| !symbols.contains(s)) {
            Some(s) => Err(FieldError::UndeclaredIdentifier(s.clone())),
            None => Ok(()),
        }
    }

    /// Partial derivative. Coordinates the field does not depend on give 0.
    pub fn diff(&self, coord: &str) -> ScalarField {
        if !self.depends_on(coord) {
            return ScalarField::constant(0.0);
        }
        Self::from_expr(diff::derivative(&self.expr, coord))
    }

    /// Partial derivative with respect to a coordinate that must be declared.
    pub fn diff_declared(&self, coord: &str, symbols: &SymbolTable) -> Result<ScalarField> {
        if !symbols.contains(coord) {
            return Err(FieldError::UndeclaredIdentifier(coord.to_string()));
        }
        Ok(self.diff(coord))
    }

    pub fn eval(&self, env: &(impl Assignment + ?Sized)) -> Result<f64> {
        self.expr.eval_with(&|n| env.value(n))
    }

    /// Evaluates with values given positionally for `names`.
    pub fn eval_at(&self, names: &[String], values: &[f64]) -> Result<f64> {
        if names.len() != values.len() {
            return Err(FieldError::DimensionMismatch(format!(
                "{} names but {} values",
                names.len(),
                values.len()
            )));
        }
        self.expr
            .eval_with(&|n| names.iter().position(|m| m == n).map(|i| values[i]))
    }

    /// Compiles against a coordinate ordering for repeated evaluation.
    pub fn compile(&self, names: &[String]) -> Result<Compiled> {
        Compiled::new(&self.expr, &|n| names.iter().position(|m| m == n))
    }

    pub fn rename(&self, map: &BTreeMap<String, String>) -> ScalarField {
        Self::from_expr(self.expr.rename(map))
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        Self::from_expr(build::add(self.expr.clone(), other.expr.clone()))
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        Self::from_expr(build::sub(self.expr.clone(), other.expr.clone()))
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        Self::from_expr(build::mul(self.expr.clone(), other.expr.clone()))
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        Self::from_expr(build::mul(Expr::num(c), self.expr.clone()))
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

/// Outcome of comparing a symbolic derivative against a central difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdCheck {
    pub symbolic: f64,
    pub numeric: f64,
    pub difference: f64,
}

/// Central-difference check of `diff(f, coord)` at the point `values`.
pub fn fd_check(
    f: &ScalarField,
    coord: &str,
    names: &[String],
    values: &[f64],
    h: f64,
) -> Result<FdCheck> {
    let idx = names
        .iter()
        .position(|n| n == coord)
        .ok_or_else(|| FieldError::UndeclaredIdentifier(coord.to_string()))?;
    if !(h > 0.0) {
        return Err(FieldError::Config(format!("step must be positive, got {h}")));
    }
    let c = f.compile(names)?;
    let d = f.diff(coord).compile(names)?;
    let mut x = values.to_vec();
    x[idx] = values[idx] + h;
    let fp = c.eval(&x)?;
    x[idx] = values[idx] - h;
    let fm = c.eval(&x)?;
    let numeric = (fp - fm) / (2.0 * h);
    let symbolic = d.eval(values)?;
    Ok(FdCheck { symbolic, numeric, difference: (symbolic - numeric).abs() })
}

#[cfg(test)]
mod tests;
