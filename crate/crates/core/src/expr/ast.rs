use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{FieldError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    pub(crate) fn apply(self, x: f64) -> Result<f64> {
        let y = match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Tanh => x.tanh(),
            Func::Log => {
                if !(x > 0.0) {
                    return Err(FieldError::Domain { func: "log", value: x });
                }
                x.ln()
            }
            Func::Sqrt => {
                if !(x >= 0.0) {
                    return Err(FieldError::Domain { func: "sqrt", value: x });
                }
                x.sqrt()
            }
        };
        finite(y, self.name(), x)
    }
}

pub(crate) fn finite(y: f64, func: &'static str, x: f64) -> Result<f64> {
    if y.is_finite() {
        Ok(y)
    } else {
        Err(FieldError::Domain { func, value: x })
    }
}

/// Expression tree. Subtrees are shared.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Arc<str>),
    Neg(Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Call(Func, Arc<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Arc<Expr> {
        Arc::new(Expr::Num(v))
    }

    pub fn var(name: &str) -> Arc<Expr> {
        Arc::new(Expr::Var(Arc::from(name)))
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_num() == Some(1.0)
    }

    pub fn free_symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(s) => {
                out.insert(s.to_string());
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.free_symbols(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.free_symbols(out);
                b.free_symbols(out);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
        }
    }

    /// Tree-walking evaluation against a name lookup.
    pub fn eval_with(&self, env: &dyn Fn(&str) -> Option<f64>) -> Result<f64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(s) => env(s).ok_or_else(|| FieldError::MissingAssignment(s.to_string()))?,
            Expr::Neg(a) => -a.eval_with(env)?,
            Expr::Add(a, b) => finite(a.eval_with(env)? + b.eval_with(env)?, "addition", f64::NAN)?,
            Expr::Sub(a, b) => {
                finite(a.eval_with(env)? - b.eval_with(env)?, "subtraction", f64::NAN)?
            }
            Expr::Mul(a, b) => {
                finite(a.eval_with(env)? * b.eval_with(env)?, "multiplication", f64::NAN)?
            }
            Expr::Div(a, b) => {
                let x = a.eval_with(env)?;
                let y = b.eval_with(env)?;
                divide(x, y)?
            }
            Expr::Pow(a, n) => powi(a.eval_with(env)?, *n)?,
            Expr::Call(f, a) => f.apply(a.eval_with(env)?)?,
        })
    }

    /// Replaces variables by name. Names absent from `map` are kept.
    pub fn rename(self: &Arc<Expr>, map: &BTreeMap<String, String>) -> Arc<Expr> {
        match &**self {
            Expr::Num(_) => self.clone(),
            Expr::Var(s) => match map.get(&**s) {
                Some(t) => Expr::var(t),
                None => self.clone(),
            },
            Expr::Neg(a) => Arc::new(Expr::Neg(a.rename(map))),
            Expr::Add(a, b) => Arc::new(Expr::Add(a.rename(map), b.rename(map))),
            Expr::Sub(a, b) => Arc::new(Expr::Sub(a.rename(map), b.rename(map))),
            Expr::Mul(a, b) => Arc::new(Expr::Mul(a.rename(map), b.rename(map))),
            Expr::Div(a, b) => Arc::new(Expr::Div(a.rename(map), b.rename(map))),
            Expr::Pow(a, n) => Arc::new(Expr::Pow(a.rename(map), *n)),
            Expr::Call(f, a) => Arc::new(Expr::Call(*f, a.rename(map))),
        }
    }
}

pub(crate) fn divide(x: f64, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Err(FieldError::Domain { func: "division", value: x });
    }
    finite(x / y, "division", y)
}

pub(crate) fn powi(x: f64, n: i32) -> Result<f64> {
    if n < 0 && x == 0.0 {
        return Err(FieldError::Domain { func: "negative power", value: x });
    }
    finite(x.powi(n), "power", x)
}

// Printing -----------------------------------------------------------------

fn fmt_num(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        write!(f, "(-{:?})", -v)
    } else {
        write!(f, "{v:?}")
    }
}

fn is_sum(e: &Expr) -> bool {
    matches!(e, Expr::Add(..) | Expr::Sub(..))
}

fn is_product(e: &Expr) -> bool {
    matches!(e, Expr::Mul(..) | Expr::Div(..))
}

fn is_atom(e: &Expr) -> bool {
    match e {
        Expr::Num(v) => *v >= 0.0 && !v.is_sign_negative(),
        Expr::Var(_) | Expr::Call(..) => true,
        _ => false,
    }
}

struct Paren<'a>(&'a Expr, bool);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Output is accepted by the parser and evaluates to the same value.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => fmt_num(*v, f),
            Expr::Var(s) => f.write_str(s),
            Expr::Neg(a) => {
                let wrap = !(is_atom(a) || matches!(**a, Expr::Pow(..)));
                write!(f, "-{}", Paren(a, wrap))
            }
            Expr::Add(a, b) => write!(f, "{} + {}", a, Paren(b, is_sum(b))),
            Expr::Sub(a, b) => write!(f, "{} - {}", a, Paren(b, is_sum(b))),
            Expr::Mul(a, b) => write!(
                f,
                "{}*{}",
                Paren(a, is_sum(a)),
                Paren(b, is_sum(b) || is_product(b))
            ),
            Expr::Div(a, b) => write!(
                f,
                "{}/{}",
                Paren(a, is_sum(a)),
                Paren(b, is_sum(b) || is_product(b))
            ),
            Expr::Pow(a, n) => write!(f, "{}^{}", Paren(a, !is_atom(a)), n),
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), a),
        }
    }
}
