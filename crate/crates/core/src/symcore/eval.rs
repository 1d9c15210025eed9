//! Numeric evaluation, generic over the floating-point type.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use thiserror::Error;

use super::expr::{Expr, Node, Symbol};
use crate::scalar::{from_rational, Real};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("symbol `{0}` has no value")]
    Unbound(String),
    #[error("unknown function `{0}` cannot be evaluated")]
    UnknownFunction(String),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Clone, Debug)]
enum Op<T> {
    Const(T),
    Var(usize),
    Add(usize),
    Mul(usize),
    PowI(i32),
    PowF,
    Exp,
    Ln,
}

/// An expression flattened to a postfix program over indexed variables.
#[derive(Clone, Debug)]
pub struct Compiled<T> {
    ops: Vec<Op<T>>,
    vars: Vec<Symbol>,
}

impl<T: Real> Compiled<T> {
    pub fn new(e: &Expr, vars: &[Symbol]) -> Result<Self, EvalError> {
        let mut ops = Vec::new();
        emit(e, vars, &mut ops)?;
        Ok(Compiled {
            ops,
            vars: vars.to_vec(),
        })
    }

    pub fn vars(&self) -> &[Symbol] {
        &self.vars
    }

    pub fn eval(&self, values: &[T]) -> Result<T, EvalError> {
        let mut stack: Vec<T> = Vec::with_capacity(16);
        for op in &self.ops {
            match op {
                Op::Const(c) => stack.push(*c),
                Op::Var(i) => stack.push(values[*i]),
                Op::Add(n) => {
                    let at = stack.len() - n;
                    let s = stack.drain(at..).fold(T::zero(), |a, b| a + b);
                    stack.push(s);
                }
                Op::Mul(n) => {
                    let at = stack.len() - n;
                    let s = stack.drain(at..).fold(T::one(), |a, b| a * b);
                    stack.push(s);
                }
                Op::PowI(k) => {
                    let b = stack.pop().unwrap();
                    if b == T::zero() && *k < 0 {
                        return Err(EvalError::Domain("zero to a negative power".into()));
                    }
                    stack.push(b.powi(*k));
                }
                Op::PowF => {
                    let e = stack.pop().unwrap();
                    let b = stack.pop().unwrap();
                    if b < T::zero() && e.fract() != T::zero() {
                        return Err(EvalError::Domain(format!(
                            "negative base {:?} to non-integer power {:?}",
                            b, e
                        )));
                    }
                    if b == T::zero() && e < T::zero() {
                        return Err(EvalError::Domain("zero to a negative power".into()));
                    }
                    stack.push(b.powf(e));
                }
                Op::Exp => {
                    let a = stack.pop().unwrap();
                    stack.push(a.exp());
                }
                Op::Ln => {
                    let a = stack.pop().unwrap();
                    if a <= T::zero() {
                        return Err(EvalError::Domain(format!("log of non-positive {:?}", a)));
                    }
                    stack.push(a.ln());
                }
            }
        }
        let v = stack.pop().unwrap();
        if !v.is_finite() {
            return Err(EvalError::Domain("non-finite value".into()));
        }
        Ok(v)
    }
}

fn emit<T: Real>(e: &Expr, vars: &[Symbol], ops: &mut Vec<Op<T>>) -> Result<(), EvalError> {
    match e.node() {
        Node::Num(r) => ops.push(Op::Const(from_rational(r))),
        Node::Sym(s) => {
            let i = vars
                .iter()
                .position(|v| v == s)
                .ok_or_else(|| EvalError::Unbound(s.to_string()))?;
            ops.push(Op::Var(i));
        }
        Node::Func(f) => return Err(EvalError::UnknownFunction(f.name.to_string())),
        Node::Add(ts) => {
            for t in ts {
                emit(t, vars, ops)?;
            }
            ops.push(Op::Add(ts.len()));
        }
        Node::Mul(fs) => {
            for f in fs {
                emit(f, vars, ops)?;
            }
            ops.push(Op::Mul(fs.len()));
        }
        Node::Pow(b, p) => {
            emit(b, vars, ops)?;
            match p.as_integer().and_then(|k| k.to_i32()) {
                Some(k) => ops.push(Op::PowI(k)),
                None => {
                    emit(p, vars, ops)?;
                    ops.push(Op::PowF);
                }
            }
        }
        Node::Exp(a) => {
            emit(a, vars, ops)?;
            ops.push(Op::Exp);
        }
        Node::Log(a) => {
            emit(a, vars, ops)?;
            ops.push(Op::Ln);
        }
    }
    Ok(())
}

/// One-shot evaluation with named values.
pub fn eval_at<T: Real>(e: &Expr, env: &BTreeMap<Symbol, T>) -> Result<T, EvalError> {
    let vars: Vec<Symbol> = env.keys().cloned().collect();
    let vals: Vec<T> = env.values().copied().collect();
    Compiled::new(e, &vars)?.eval(&vals)
}

/// Evaluates an expression without free symbols.
pub fn eval_const<T: Real>(e: &Expr) -> Result<T, EvalError> {
    Compiled::new(e, &[])?.eval(&[])
}

/// Rational to `f64`, used where the numeric boundary is explicit.
pub fn rational_to_f64(r: &crate::Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
