use super::ast::{divide, finite, powi, Expr, Func};
use crate::error::{FieldError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Load(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow(i32),
    Call(Func),
}

/// Postfix program with variables resolved to slots of a coordinate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    ops: Vec<Op>,
    depth: usize,
}

impl Compiled {
    pub fn new(e: &Expr, slot: &dyn Fn(&str) -> Option<usize>) -> Result<Compiled> {
        let mut ops = Vec::with_capacity(e.node_count());
        emit(e, slot, &mut ops)?;
        let mut d = 0usize;
        let mut depth = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Load(_) => d += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div => d -= 1,
                _ => {}
            }
            depth = depth.max(d);
        }
        Ok(Compiled { ops, depth })
    }

    pub fn is_constant_zero(&self) -> bool {
        self.ops == [Op::Const(0.0)]
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if let [Op::Const(c)] = self.ops.as_slice() {
            return Ok(*c);
        }
        let mut stack: Vec<f64> = Vec::with_capacity(self.depth);
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(c),
                Op::Load(i) => stack.push(x[i]),
                Op::Neg => {
                    let a = stack.last_mut().unwrap();
                    *a = -*a;
                }
                Op::Pow(n) => {
                    let a = stack.last_mut().unwrap();
                    *a = powi(*a, n)?;
                }
                Op::Call(f) => {
                    let a = stack.last_mut().unwrap();
                    *a = f.apply(*a)?;
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    let b = stack.pop().unwrap();
                    let a = stack.last_mut().unwrap();
                    *a = match *op {
                        Op::Add => finite(*a + b, "addition", b)?,
                        Op::Sub => finite(*a - b, "subtraction", b)?,
                        Op::Mul => finite(*a * b, "multiplication", b)?,
                        _ => divide(*a, b)?,
                    };
                }
            }
        }
        Ok(stack[0])
    }
}

fn emit(e: &Expr, slot: &dyn Fn(&str) -> Option<usize>, ops: &mut Vec<Op>) -> Result<()> {
    match e {
        Expr::Num(v) => ops.push(Op::Const(*v)),
        Expr::Var(s) => {
            let i = slot(s).ok_or_else(|| FieldError::MissingAssignment(s.to_string()))?;
            ops.push(Op::Load(i));
        }
        Expr::Neg(a) => {
            emit(a, slot, ops)?;
            ops.push(Op::Neg);
        }
        Expr::Pow(a, n) => {
            emit(a, slot, ops)?;
            ops.push(Op::Pow(*n));
        }
        Expr::Call(f, a) => {
            emit(a, slot, ops)?;
            ops.push(Op::Call(*f));
        }
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            emit(a, slot, ops)?;
            emit(b, slot, ops)?;
            ops.push(match e {
                Expr::Add(..) => Op::Add,
                Expr::Sub(..) => Op::Sub,
                Expr::Mul(..) => Op::Mul,
                _ => Op::Div,
            });
        }
    }
    Ok(())
}
