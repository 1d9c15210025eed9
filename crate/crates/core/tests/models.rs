use cvham::catalog;
use cvham::detsolve::AnsatzSpec;
use cvham::dsl::{parse_model, DslError};
use cvham::pipeline::{self, Options};
use cvham::symcore::parse_expr;
use cvham::{Rational, Symbol};

fn load(name: &str) -> cvham::dsl::ModelFile {
    catalog::model(name).unwrap().unwrap()
}

#[test]
fn every_catalog_model_analyzes_cleanly() {
    for (name, _) in catalog::MODELS {
        let a = pipeline::analyze(&load(name), &Options::default()).unwrap();
        assert!(a.failures().is_empty(), "{name}: {:?}", a.failures());
        assert!(!a.derived.integrals.is_empty(), "{name}");
        for i in &a.derived.integrals {
            assert!(i.verification.symbolic, "{name} {}", i.label);
            assert!(i.verification.max_drift.unwrap() < pipeline::DRIFT_TOL, "{name} {}", i.label);
        }
    }
}

#[test]
fn declared_operators_satisfy_the_determining_equation() {
    for (name, _) in catalog::MODELS {
        let file = load(name);
        let prep = pipeline::prepare(&file, &Options::default()).unwrap();
        for op in &file.operators {
            let c = pipeline::check_operator(op, &prep.model, &prep.sys).unwrap();
            assert!(c.passed, "{name} {}: {}", c.label, c.residual);
        }
    }
}

#[test]
fn perturbed_gauge_breaks_conservation() {
    let file = load("illustrative");
    let prep = pipeline::prepare(&file, &Options::default()).unwrap();
    let mut op = file.operators[3].clone();
    op.b = &op.b + &parse_expr("q").unwrap();
    let c = pipeline::check_operator(&op, &prep.model, &prep.sys).unwrap();
    assert!(!c.passed);

    let err = cvham::integrals::build_first_integral(&op, &prep.sys).unwrap_err();
    assert!(err.to_string().contains("not conserved"), "{err}");
}

#[test]
fn constant_one_half_variant_is_not_conserved() {
    let file = load("illustrative");
    let prep = pipeline::prepare(&file, &Options::default()).unwrap();
    let e = parse_expr("(p*q/2 - (q - 2*q^2 - u^2 - u + p*u) + 1/2)*exp(-t)").unwrap();
    let i = pipeline::declared_integral("I1", &e, &prep.model, &prep.sys).unwrap();
    assert!(!i.verification.symbolic);
    let e = parse_expr("(p*q/2 - (q - 2*q^2 - u^2 - u + p*u) + q/2)*exp(-t)").unwrap();
    let i = pipeline::declared_integral("I1", &e, &prep.model, &prep.sys).unwrap();
    assert!(i.verification.symbolic);
}

#[test]
fn ramsey_guard_rejects_unit_product() {
    let file = load("ramsey");
    let m = file.model.with_param(&Symbol::new("sigma"), Rational::new(10.into(), 3.into()));
    assert!(m.check_guards().is_err());
}

#[test]
fn search_degree_is_respected() {
    let file = load("illustrative");
    let prep = pipeline::prepare(&file, &Options::default()).unwrap();
    let spec = AnsatzSpec {
        deg_eta: 0,
        deg_b: 1,
        ..AnsatzSpec::default()
    };
    let d = pipeline::derive_integrals(&prep.sys, &spec).unwrap();
    assert!(d.derivation.operators.len() < 5);
}

#[test]
fn report_json_is_deterministic_without_meta() {
    let run = || {
        let a = pipeline::analyze(&load("ak"), &Options::default()).unwrap();
        a.to_json("report", false).to_string()
    };
    let first = run();
    assert_eq!(first, run());
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["schema"], 1);
    for key in ["model", "operators", "integrals", "independence_rank", "solution", "verdict"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v.get("meta").is_none());
}

#[test]
fn model_file_errors_carry_positions() {
    let src = "model m\ntime t\nstate q\ncostate p\ncontrol u\nhamiltonian = p*u - u^2 + z\ndiscount = 1\n";
    match parse_model(src) {
        Err(DslError::Parse { line, .. }) => assert_eq!(line, 6),
        other => panic!("{other:?}"),
    }
}
