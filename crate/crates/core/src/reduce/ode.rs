//! Closed forms for the scalar state equations reached by the reductions.

use num_traits::{One, Zero};

use crate::poly::{ExactPoly, ExpPoly};
use crate::symcore::{collect_by_exponent, differentiate, Expr, Node, Symbol};
use crate::Rational;

/// Reads `e` as `Σ c · tᵏ · e^{λt}` with `c` free of `t`.
pub fn exp_poly_of(e: &Expr, t: &Symbol) -> Option<ExpPoly> {
    let mut out = ExpPoly::zero();
    for term in e.terms() {
        let mut rate = Rational::zero();
        let mut k = 0u32;
        let mut rest = Vec::new();
        for f in term.factors() {
            if !f.contains(t) {
                rest.push(f);
                continue;
            }
            match f.node() {
                Node::Exp(a) => {
                    let l = differentiate(a, t);
                    let l = l.as_num()?.clone();
                    if !(a - &(Expr::num(l.clone()) * Expr::symbol(t))).is_zero() {
                        return None;
                    }
                    rate += l;
                }
                Node::Sym(_) => k += 1,
                Node::Pow(b, n) if b.as_symbol() == Some(t) => {
                    let n = n.as_integer()?;
                    k += u32::try_from(n).ok()?;
                }
                _ => return None,
            }
        }
        out.push(rate, k, Expr::mul(rest));
    }
    Some(out)
}

/// Recognised shape of `ẋ = f(t, x)`.
#[derive(Clone, Debug, PartialEq)]
pub enum OdeShape {
    /// `ẋ = a·x + g(t)` with exponential-polynomial forcing.
    Linear { a: Rational, forcing: ExpPoly },
    /// `ẋ = a·x + b·xⁿ`, `n ∉ {0, 1}`.
    Bernoulli { a: Rational, b: Expr, n: Rational },
}

impl OdeShape {
    pub fn name(&self) -> &'static str {
        match self {
            OdeShape::Linear { .. } => "linear first-order",
            OdeShape::Bernoulli { .. } => "Bernoulli",
        }
    }
}

pub fn classify(f: &Expr, x: &Symbol, t: &Symbol) -> Option<OdeShape> {
    let m = collect_by_exponent(f, x).ok()?;
    let a = match m.get(&Expr::one()) {
        Some(c) => c.as_num()?.clone(),
        None => Rational::zero(),
    };
    let others: Vec<(&Expr, &Expr)> = m.terms.iter().filter(|(k, _)| !k.is_one() && !k.is_zero()).collect();
    let g = m.get(&Expr::zero());
    match (others.as_slice(), g) {
        ([], g) => {
            let forcing = match g {
                Some(g) => exp_poly_of(g, t)?,
                None => ExpPoly::zero(),
            };
            Some(OdeShape::Linear { a, forcing })
        }
        ([(n, b)], None) if !b.contains(t) && !a.is_zero() => Some(OdeShape::Bernoulli {
            a,
            b: (*b).clone(),
            n: n.as_num()?.clone(),
        }),
        _ => None,
    }
}

/// General solution of a linear equation, `C·e^{at}` plus a particular part.
pub fn solve_linear(a: &Rational, forcing: &ExpPoly, constant: &Symbol, t: &Symbol) -> Expr {
    let op = ExactPoly::new(vec![-a.clone(), Rational::one()]);
    let mut sol = forcing.particular(&op);
    sol.push(a.clone(), 0, Expr::symbol(constant));
    sol.to_expr(t)
}

/// Solution of `ẋ = a·x + b·xⁿ` with `x(0) = x₀` via `v = x^{1−n}`.
pub fn solve_bernoulli(a: &Rational, b: &Expr, n: &Rational, x0: &Symbol, t: &Symbol) -> Expr {
    let m = Rational::one() - n;
    let steady = -(b / &Expr::num(a.clone()));
    let v = &steady
        + &((Expr::pow(Expr::symbol(x0), Expr::num(m.clone())) - &steady)
            * Expr::exp(Expr::num(&m * a) * Expr::symbol(t)));
    Expr::pow(v, Expr::num(m.recip()))
}
