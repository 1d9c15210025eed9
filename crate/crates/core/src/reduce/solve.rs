//! Algebraic inversion inside the supported fragment.

use crate::symcore::{collect_by_exponent, subs1, Expr, Symbol};

/// `var^power = value`, with `value` free of `var`.
#[derive(Clone, Debug, PartialEq)]
pub struct Isolated {
    pub var: Symbol,
    pub power: Expr,
    pub value: Expr,
}

impl Isolated {
    pub fn solution(&self) -> Expr {
        Expr::pow(self.value.clone(), self.power.recip())
    }

    /// Replaces `var` in `e`, mapping each monomial `var^m` to `value^(m/power)`
    /// so that the sum inside `value` is never re-expanded.
    pub fn substitute_into(&self, e: &Expr) -> Expr {
        match collect_by_exponent(e, &self.var) {
            Ok(m) => Expr::add(
                m.terms
                    .iter()
                    .map(|(k, c)| {
                        if k.is_zero() {
                            c.clone()
                        } else {
                            c * &Expr::pow(self.value.clone(), k / &self.power)
                        }
                    })
                    .collect::<Vec<_>>(),
            ),
            Err(_) => subs1(e, &self.var, &self.solution()),
        }
    }
}

/// Solves `e = 0` for `x` when `x` occurs in exactly one power.
pub fn isolate(e: &Expr, x: &Symbol) -> Option<Isolated> {
    let m = collect_by_exponent(e, x).ok()?;
    let g0 = m.get(&Expr::zero()).cloned().unwrap_or_else(Expr::zero);
    let powered: Vec<(&Expr, &Expr)> = m.terms.iter().filter(|(k, _)| !k.is_zero()).collect();
    match powered.as_slice() {
        [(k, gk)] if !g0.is_zero() => Some(Isolated {
            var: x.clone(),
            power: (*k).clone(),
            value: -(&g0 / *gk),
        }),
        _ => None,
    }
}

/// Solves `α xᵐ + β xⁿ = 0` (`m ≠ n`) for the nonzero root `x = (−β/α)^{1/(m−n)}`.
pub fn two_monomial_root(e: &Expr, x: &Symbol) -> Option<Isolated> {
    let m = collect_by_exponent(e, x).ok()?;
    if m.len() != 2 {
        return None;
    }
    let mut it = m.terms.iter();
    let (k1, a) = it.next()?;
    let (k2, b) = it.next()?;
    let d = k1 - k2;
    if d.is_zero() || d.contains(x) {
        return None;
    }
    Some(Isolated {
        var: x.clone(),
        power: d,
        value: -(b / a),
    })
}

/// `e = a₀ + a₁·x` with `a₀, a₁` free of `x`.
pub fn linear_coeffs(e: &Expr, x: &Symbol) -> Option<(Expr, Expr)> {
    let m = collect_by_exponent(e, x).ok()?;
    if m.keys().any(|k| !k.is_zero() && !k.is_one()) {
        return None;
    }
    let a1 = m.get(&Expr::one()).cloned()?;
    Some((m.get(&Expr::zero()).cloned().unwrap_or_else(Expr::zero), a1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse_expr;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn single_power() {
        let iso = isolate(&p("3*x^2 - 12*y"), &Symbol::new("x")).unwrap();
        assert_eq!(iso.value, p("4*y"));
        assert_eq!(iso.solution(), p("2*y^(1/2)"));
        assert!(isolate(&p("x^2 + x + 1"), &Symbol::new("x")).is_none());
        assert!(isolate(&p("x^2"), &Symbol::new("x")).is_none());
    }

    #[test]
    fn monomial_pair() {
        let iso = two_monomial_root(&p("-2*c^(-3) + 6*c^(-4)*k"), &Symbol::new("c")).unwrap();
        assert_eq!(iso.solution(), p("3*k"));
    }

    #[test]
    fn substitution_keeps_sum_base() {
        let iso = isolate(&p("k^(1/2) - (1 + c)"), &Symbol::new("k")).unwrap();
        assert_eq!(iso.substitute_into(&p("k^(-1/2)")), p("(1 + c)^(-1)"));
    }

    #[test]
    fn linear() {
        let (a0, a1) = linear_coeffs(&p("(p - 4*q - 1)*exp(t)"), &Symbol::new("p")).unwrap();
        assert_eq!(a0, p("-(4*q + 1)*exp(t)"));
        assert_eq!(a1, p("exp(t)"));
        assert!(linear_coeffs(&p("p^2"), &Symbol::new("p")).is_none());
    }
}
