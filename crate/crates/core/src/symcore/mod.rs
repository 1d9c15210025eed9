//! Symbolic expressions over exact rationals.

mod collect;
mod diff;
mod eval;
mod expr;
mod format;
mod parse;
mod subst;
mod zero;

use thiserror::Error;

pub use collect::{collect_by_exponent, MonomialMap};
pub use diff::differentiate;
pub use eval::{eval_at, eval_const, rational_to_f64, Compiled, EvalError};
pub use expr::{Expr, FuncRef, Node, Symbol};
pub use format::format_expr;
pub use parse::parse_expr;
pub use subst::{subs1, substitute, substitute_unchecked, Bindings};
pub use zero::{is_zero, Verdict, ZeroTest};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SymError {
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown function `{name}` at {pos}")]
    UnknownFunction { name: String, pos: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cyclic bindings through `{0}`")]
    CyclicBindings(String),
    #[error("`{term}` is not a monomial in `{var}`")]
    NonSeparable { var: String, term: String },
}

/// Re-canonicalises bottom-up and rejects zero denominators.
pub fn normalize(e: &Expr) -> Result<Expr, SymError> {
    fn go(e: &Expr) -> Expr {
        Expr::rebuild(e.node(), go)
    }
    let out = go(e);
    match out.zero_division() {
        Some(bad) => Err(SymError::Domain(format!("division by zero in `{bad}`"))),
        None => Ok(out),
    }
}

/// `d^n e / dx^n`.
pub fn differentiate_n(e: &Expr, x: &Symbol, n: usize) -> Expr {
    (0..n).fold(e.clone(), |acc, _| differentiate(&acc, x))
}
