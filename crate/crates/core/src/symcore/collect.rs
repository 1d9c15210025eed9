use std::collections::BTreeMap;

use super::expr::{Expr, Node, Symbol};
use super::SymError;

/// A sum split by powers of one variable: `Σ coeff · var^exponent`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialMap {
    pub var: Symbol,
    /// Canonical exponent → coefficient free of `var`.
    pub terms: BTreeMap<Expr, Expr>,
}

impl MonomialMap {
    pub fn reassemble(&self) -> Expr {
        let x = Expr::symbol(&self.var);
        Expr::add(
            self.terms
                .iter()
                .map(|(k, c)| Expr::mul([c.clone(), Expr::pow(x.clone(), k.clone())]))
                .collect::<Vec<_>>(),
        )
    }

    pub fn keys(&self) -> impl Iterator<Item = &Expr> {
        self.terms.keys()
    }

    pub fn get(&self, exponent: &Expr) -> Option<&Expr> {
        self.terms.get(exponent)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Power of `x` carried by one factor, if the factor depends on `x` monomially.
fn factor_exponent(f: &Expr, x: &Symbol) -> Result<Option<Expr>, SymError> {
    if !f.contains(x) {
        return Ok(None);
    }
    match f.node() {
        Node::Sym(s) if s == x => Ok(Some(Expr::one())),
        Node::Pow(b, k) if b.as_symbol() == Some(x) && !k.contains(x) => Ok(Some(k.clone())),
        _ => Err(SymError::NonSeparable {
            var: x.to_string(),
            term: f.to_string(),
        }),
    }
}

/// Groups the terms of `e` by the exponent of `x`.
///
/// Distinct canonical exponents are kept apart even when they could coincide
/// for special parameter values.
pub fn collect_by_exponent(e: &Expr, x: &Symbol) -> Result<MonomialMap, SymError> {
    let mut groups: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
    for t in e.terms() {
        let mut exponent = Expr::zero();
        let mut rest = Vec::new();
        for f in t.factors() {
            match factor_exponent(&f, x)? {
                Some(k) => exponent = exponent + k,
                None => rest.push(f),
            }
        }
        groups.entry(exponent).or_default().push(Expr::mul(rest));
    }
    let terms = groups
        .into_iter()
        .map(|(k, cs)| (k, Expr::add(cs)))
        .filter(|(_, c)| !c.is_zero())
        .collect();
    Ok(MonomialMap { var: x.clone(), terms })
}
