use std::fmt;

use num_traits::{One, Signed, Zero};

use super::expr::{Expr, Node};
use crate::Rational;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_expr(self))
    }
}

/// Renders an expression in the input syntax; the output parses back to the same expression.
pub fn format_expr(e: &Expr) -> String {
    let mut out = String::new();
    for (i, t) in e.terms().iter().enumerate() {
        let (c, m) = t.split_coeff();
        let neg = c.is_negative();
        match (i, neg) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        out.push_str(&term(&c.abs(), &m));
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

fn term(c: &Rational, m: &Expr) -> String {
    let mut num: Vec<String> = Vec::new();
    let mut den: Vec<String> = Vec::new();
    if !m.is_one() {
        for f in m.factors() {
            match f.node() {
                // a sum to a power above one re-expands when parsed, so it stays on top
                Node::Pow(b, k)
                    if k.as_num().is_some_and(|r| {
                        r.is_negative()
                            && (r.is_integer() || -r < Rational::one() || !matches!(b.node(), Node::Add(_)))
                    }) =>
                {
                    let r = -k.as_num().unwrap();
                    if r.is_one() {
                        den.push(atom(b));
                    } else {
                        den.push(power(b, &Expr::num(r)));
                    }
                }
                _ => num.push(factor(&f)),
            }
        }
    }
    let numer = c.numer();
    let denom = c.denom();
    if !numer.is_one() || num.is_empty() {
        num.insert(0, numer.to_string());
    }
    if !denom.is_one() {
        den.insert(0, denom.to_string());
    }
    let mut s = num.join("*");
    match den.len() {
        0 => {}
        1 => {
            s.push('/');
            s.push_str(&den[0]);
        }
        _ => {
            s.push_str("/(");
            s.push_str(&den.join("*"));
            s.push(')');
        }
    }
    s
}

fn factor(f: &Expr) -> String {
    match f.node() {
        Node::Pow(b, k) => power(b, k),
        _ => atom(f),
    }
}

fn power(b: &Expr, k: &Expr) -> String {
    let exp = match k.as_num() {
        Some(r) if r.is_integer() && !r.is_negative() => r.to_string(),
        _ => format!("({})", format_expr(k)),
    };
    format!("{}^{}", atom(b), exp)
}

/// A subexpression that can sit next to `*`, `/` or `^` without ambiguity.
fn atom(e: &Expr) -> String {
    match e.node() {
        Node::Sym(s) => s.to_string(),
        Node::Func(fr) => format!("{}{}({})", fr.name, "'".repeat(fr.order as usize), fr.arg),
        Node::Exp(a) => format!("exp({})", format_expr(a)),
        Node::Log(a) => format!("log({})", format_expr(a)),
        Node::Num(r) if r.is_integer() && !r.is_negative() => r.to_string(),
        Node::Num(r) if r.is_zero() => "0".into(),
        _ => format!("({})", format_expr(e)),
    }
}
