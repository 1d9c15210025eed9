use std::collections::BTreeMap;

use proptest::prelude::*;

use cvham::symcore::{collect_by_exponent, differentiate, eval_at, normalize, parse_expr};
use cvham::{Expr, Symbol};

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        Just(Expr::sym("x")),
        Just(Expr::sym("y")),
        (-6i64..=6, 1i64..=4).prop_map(|(n, d)| Expr::ratio(n, d)),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), 0i64..=3).prop_map(|(a, n)| a.powi(n)),
            inner.clone().prop_map(|a| Expr::exp(a / Expr::int(4))),
            // positive base so fractional powers stay real
            (inner, 1i64..=3).prop_map(|(a, d)| Expr::pow(a.powi(2) + Expr::one(), Expr::ratio(1, d + 1))),
        ]
    })
}

fn at(e: &Expr, x: f64, y: f64) -> Option<f64> {
    let env: BTreeMap<Symbol, f64> = [(Symbol::new("x"), x), (Symbol::new("y"), y)].into();
    eval_at::<f64>(e, &env).ok().filter(|v| v.is_finite() && v.abs() < 1e6)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn display_parses_back(e in expr()) {
        let text = e.to_string();
        let back = parse_expr(&text).unwrap();
        prop_assert_eq!(back, e, "{}", text);
    }

    #[test]
    fn normalize_preserves_value(e in expr(), x in 0.5f64..1.5, y in 0.5f64..1.5) {
        let n = normalize(&e).unwrap();
        if let (Some(a), Some(b)) = (at(&e, x, y), at(&n, x, y)) {
            prop_assert!(close(a, b, 1e-9), "{} = {} vs {}", e, a, b);
        }
    }

    #[test]
    fn derivative_matches_central_difference(
        e in expr(),
        pts in prop::collection::vec((0.5f64..1.5, 0.5f64..1.5), 16),
    ) {
        let d = differentiate(&e, &Symbol::new("x"));
        let h = 1e-6;
        for (x, y) in pts {
            if let (Some(f1), Some(f0), Some(df)) = (at(&e, x + h, y), at(&e, x - h, y), at(&d, x, y)) {
                let fd = (f1 - f0) / (2.0 * h);
                prop_assert!(close(df, fd, 1e-5), "d/dx {} = {}: {} vs {}", e, d, df, fd);
            }
        }
    }

    #[test]
    fn collect_reassembles(cs in prop::collection::vec((-5i64..=5, 0u32..=3), 1..5)) {
        let x = Expr::sym("x");
        let y = Expr::sym("y");
        let e = Expr::add(cs.iter().map(|&(c, k)| Expr::int(c) * y.clone() * x.powi(k as i64)));
        let m = collect_by_exponent(&e, &Symbol::new("x")).unwrap();
        prop_assert_eq!(m.reassemble(), e.clone());
        for k in m.keys() {
            prop_assert!(!m.get(k).unwrap().contains(&Symbol::new("x")));
        }
    }
}

#[test]
fn derivative_of_known_forms() {
    let p = |s: &str| parse_expr(s).unwrap();
    let x = Symbol::new("x");
    assert_eq!(differentiate(&p("x^3*exp(2*x)"), &x), p("3*x^2*exp(2*x) + 2*x^3*exp(2*x)"));
    assert_eq!(differentiate(&p("log(x)"), &x), p("1/x"));
    assert_eq!(differentiate(&p("x^(3/10)"), &x), p("3/10*x^(-7/10)"));
}
