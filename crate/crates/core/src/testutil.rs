//! Hand-built catalog models for unit tests.

use crate::dynsys::{ControlModel, Guard, GuardRel};
use crate::symcore::{parse_expr, Symbol};
use crate::Rational;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn model(name: &str, h: &str, gamma: &str, states: (&str, &str, &str), params: &[(&str, Rational)]) -> ControlModel {
    ControlModel {
        name: name.into(),
        time: Symbol::new("t"),
        states: vec![Symbol::new(states.0)],
        costates: vec![Symbol::new(states.1)],
        controls: vec![Symbol::new(states.2)],
        hamiltonian: parse_expr(h).unwrap(),
        discount: vec![parse_expr(gamma).unwrap()],
        params: params.iter().map(|(k, v)| (Symbol::new(k), v.clone())).collect(),
        guards: vec![],
    }
}

pub(crate) fn illustrative() -> ControlModel {
    model(
        "illustrative",
        "alpha*q - beta*q^2 - alpha*u^2 - gamma*u + p*u",
        "r*p",
        ("q", "p", "u"),
        &[("alpha", q(1, 1)), ("beta", q(2, 1)), ("gamma", q(1, 1)), ("r", q(1, 1))],
    )
}

pub(crate) fn ramsey_free_sigma() -> ControlModel {
    let mut m = model(
        "ramsey",
        "c^(1 - sigma) + lambda*(k^beta - delta*k - c)",
        "r*lambda",
        ("k", "lambda", "c"),
        &[("beta", q(3, 10)), ("delta", q(1, 20)), ("r", q(1, 20))],
    );
    m.guards.push(Guard {
        expr: parse_expr("beta*sigma - 1").unwrap(),
        rel: GuardRel::NonZero,
        note: "capital share differs from the elasticity".into(),
    });
    m
}

pub(crate) fn ramsey() -> ControlModel {
    ramsey_free_sigma().with_param(&Symbol::new("sigma"), q(20, 3))
}

pub(crate) fn ak() -> ControlModel {
    model(
        "ak",
        "(c^(1 - theta) - 1)/(1 - theta) + lambda*((A - delta - n)*k - c)",
        "(rho - n)*lambda",
        ("k", "lambda", "c"),
        &[
            ("theta", q(2, 1)),
            ("rho", q(3, 50)),
            ("n", q(1, 100)),
            ("A", q(3, 25)),
            ("delta", q(1, 20)),
        ],
    )
}
