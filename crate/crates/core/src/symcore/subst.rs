use std::collections::{BTreeMap, BTreeSet};

use super::expr::{Expr, Node, Symbol};
use super::SymError;

pub type Bindings = BTreeMap<Symbol, Expr>;

/// Simultaneous substitution followed by normalization.
pub fn substitute(e: &Expr, bindings: &Bindings) -> Result<Expr, SymError> {
    check_acyclic(bindings)?;
    let out = substitute_unchecked(e, bindings);
    if let Some(bad) = out.zero_division() {
        return Err(SymError::Domain(format!("division by zero in {bad}")));
    }
    Ok(out)
}

/// Substitution without the cycle and domain checks; for internal hot paths.
pub fn substitute_unchecked(e: &Expr, bindings: &Bindings) -> Expr {
    if bindings.is_empty() {
        return e.clone();
    }
    match e.node() {
        Node::Sym(s) => bindings.get(s).cloned().unwrap_or_else(|| e.clone()),
        Node::Num(_) | Node::Func(_) => e.clone(),
        n => Expr::rebuild(n, |c| substitute_unchecked(c, bindings)),
    }
}

/// Convenience for a single binding.
pub fn subs1(e: &Expr, x: &Symbol, v: &Expr) -> Expr {
    let mut b = Bindings::new();
    b.insert(x.clone(), v.clone());
    substitute_unchecked(e, &b)
}

fn check_acyclic(bindings: &Bindings) -> Result<(), SymError> {
    // depth-first search over the "key mentions key" graph
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit(
        k: &Symbol,
        bindings: &Bindings,
        marks: &mut BTreeMap<Symbol, Mark>,
    ) -> Result<(), SymError> {
        match marks.get(k) {
            Some(Mark::Done) => return Ok(()),
            Some(Mark::Active) => return Err(SymError::CyclicBindings(k.to_string())),
            None => {}
        }
        marks.insert(k.clone(), Mark::Active);
        if let Some(v) = bindings.get(k) {
            let deps: BTreeSet<Symbol> = v.symbols().into_iter().filter(|s| bindings.contains_key(s)).collect();
            for d in deps {
                visit(&d, bindings, marks)?;
            }
        }
        marks.insert(k.clone(), Mark::Done);
        Ok(())
    }
    let mut marks = BTreeMap::new();
    for k in bindings.keys() {
        visit(k, bindings, &mut marks)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse_expr;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    fn b(pairs: &[(&str, &str)]) -> Bindings {
        pairs.iter().map(|(k, v)| (Symbol::new(k), p(v))).collect()
    }

    #[test]
    fn costate_law_into_product() {
        let out = substitute(&p("p*u"), &b(&[("p", "2*alpha*u + gamma")])).unwrap();
        assert_eq!(out, p("2*alpha*u^2 + gamma*u"));
    }

    #[test]
    fn empty_bindings_identity() {
        assert_eq!(substitute(&p("x"), &Bindings::new()).unwrap(), p("x"));
    }

    #[test]
    fn costate_as_power_of_consumption() {
        let out = substitute(&p("lambda"), &b(&[("lambda", "c^(-theta)")])).unwrap();
        assert_eq!(out, p("c^(-theta)"));
    }

    #[test]
    fn simultaneous_not_sequential() {
        // z in the image of x is not itself rewritten
        let out = substitute(&p("x + z"), &b(&[("x", "z"), ("z", "1")])).unwrap();
        assert_eq!(out, p("z + 1"));
    }

    #[test]
    fn cycles_rejected() {
        let err = substitute(&p("x"), &b(&[("x", "y + 1"), ("y", "x")])).unwrap_err();
        assert!(matches!(err, SymError::CyclicBindings(_)));
        let err = substitute(&p("x"), &b(&[("x", "2*x")])).unwrap_err();
        assert!(matches!(err, SymError::CyclicBindings(_)));
    }

    #[test]
    fn zero_division_is_domain_error() {
        let err = substitute(&p("1/x"), &b(&[("x", "0")])).unwrap_err();
        assert!(matches!(err, SymError::Domain(_)));
    }
}
