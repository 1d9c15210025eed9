//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cvham::catalog;
use cvham::detsolve::{determining_residual, determining_residual_raw, restriction_solve, AnsatzSpec, PHOperator};
use cvham::dsl::ModelFile;
use cvham::dynsys::{foc_eliminate, point_symmetry_check, ControlModel, StateCostateSystem, SymmetryCandidate};
use cvham::integrals::conservation_residual;
use cvham::numerics::{conservation_drift, drift_of, integrate, max_abs_error};
use cvham::pipeline::{self, Derived, Options, Prepared};
use cvham::poly::root_f64;
use cvham::reduce::{self, separate_factors, transversality_check, SolvePlan, TailOptions};
use cvham::symcore::{differentiate, normalize, parse_expr, subs1, Verdict};
use cvham::{Expr, Rational, Symbol};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const DRIFT_TOL: f64 = 1e-8;
const PATH_TOL: f64 = 1e-9;
const SIGMA_TOL: f64 = 1e-9;
const ORDER_BAND: (f64, f64) = (12.0, 20.0);
const H: f64 = 1e-3;

fn p(s: &str) -> Expr {
    parse_expr(s).unwrap_or_else(|e| panic!("oracle `{s}`: {e}"))
}

fn s(name: &str) -> Symbol {
    Symbol::new(name)
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn load(name: &str) -> ModelFile {
    catalog::model(name).expect("catalog entry").expect("catalog model parses")
}

struct Stage {
    file: ModelFile,
    prep: Prepared,
    derived: Derived,
}

fn stage(name: &str) -> Stage {
    let file = load(name);
    let prep = pipeline::prepare(&file, &Options::default()).expect("prepare");
    let derived = pipeline::derive_integrals(&prep.sys, &AnsatzSpec::default()).expect("derive");
    Stage { file, prep, derived }
}

/// Zero after canonicalisation, or confirmed by sampling on the system's domain.
fn vanishes(e: &Expr, sys: &StateCostateSystem) -> Option<&'static str> {
    let n = normalize(e).ok()?;
    if n.is_zero() {
        return Some("structural");
    }
    // free constants such as k0 are outside the system's own sampler
    (sys.is_zero(&n) || cvham::symcore::is_zero(&n)).then_some("numeric")
}

fn same(a: &Expr, b: &Expr) -> bool {
    a == b
}

fn op_matches(o: &PHOperator, xi: &Expr, eta: &Expr, b: &Expr) -> bool {
    same(&o.xi, xi) && same(&o.eta[0], eta) && same(&o.b, b)
}

fn bound_op(m: &ControlModel, o: &PHOperator) -> (Expr, Expr, Expr) {
    (
        m.bound(&o.xi).unwrap(),
        m.bound(&o.eta[0]).unwrap(),
        m.bound(&o.b).unwrap(),
    )
}

fn param(m: &ControlModel, name: &str) -> Rational {
    m.params.get(&s(name)).cloned().unwrap_or_else(|| panic!("parameter {name}"))
}

fn f64_of(r: &Rational) -> f64 {
    cvham::symcore::rational_to_f64(r)
}

// --- illustrative --------------------------------------------------------

const BASIS: [(&str, &str, &str); 5] = [
    ("exp(-t)", "q*exp(-t)/2", "-q*exp(-t)/2"),
    ("exp(2*t)", "2*q*exp(2*t)", "6*q^2*exp(2*t) + q*exp(2*t)"),
    ("exp(-4*t)", "-q*exp(-4*t)", "3*q^2*exp(-4*t) - 2*q*exp(-4*t)"),
    ("0", "exp(t)", "4*q*exp(t) + exp(t)"),
    ("0", "exp(-2*t)", "-2*q*exp(-2*t) + exp(-2*t)"),
];

// (rate, integral in mixed costate/control form); the first entry carries q/2
// where a constant 1/2 is sometimes quoted; the gauge of the operator gives q/2.
const INTEGRALS: [(i64, &str); 5] = [
    (-1, "(p*q/2 - (q - 2*q^2 - u^2 - u + p*u) + q/2)*exp(-t)"),
    (2, "(2*p*q - (q - 2*q^2 - u^2 - u + p*u) - 6*q^2 - q)*exp(2*t)"),
    (-4, "(-p*q - (q - 2*q^2 - u^2 - u + p*u) - 3*q^2 + 2*q)*exp(-4*t)"),
    (1, "(p - 4*q - 1)*exp(t)"),
    (-2, "(p + 2*q - 1)*exp(-2*t)"),
];
const I1_CONSTANT_TERM: &str = "(p*q/2 - (q - 2*q^2 - u^2 - u + p*u) + 1/2)*exp(-t)";

fn c01_operator_basis() -> Outcome {
    let st = stage("illustrative");
    let ops = &st.derived.derivation.operators;
    ensure(ops.len() == 5, || format!("{} operators, expected 5", ops.len()))?;
    for (xi, eta, b) in BASIS {
        let (xi, eta, b) = (p(xi), p(eta), p(b));
        ensure(ops.iter().any(|o| op_matches(o, &xi, &eta, &b)), || {
            format!("no derived operator with xi = {xi}, eta = {eta}, B = {b}")
        })?;
    }
    Ok("5 operators, each identical to the expected basis".into())
}

fn c02_characteristic_roots() -> Outcome {
    let st = stage("illustrative");
    let sol = st.derived.derivation.solutions.first().ok_or("no coefficient solution")?;
    let ch = sol.characteristic_of("xi_0").ok_or("no characteristic polynomial for xi")?;
    let cubic = ch.poly.coeffs().len() == 4;
    ensure(cubic, || format!("characteristic polynomial {:?} is not a cubic", ch.poly))?;
    let mut roots: Vec<Rational> = ch.roots.roots.iter().map(|r| r.value.clone()).collect();
    roots.sort();
    let expected = vec![q(-4, 1), q(-1, 1), q(2, 1)];
    ensure(ch.roots.roots.iter().all(|r| r.exact), || "a root was only approximated".into())?;
    ensure(roots == expected, || format!("roots {roots:?}"))?;

    // companion matrix of the monic cubic
    let c: Vec<f64> = ch.poly.monic().coeffs().iter().map(f64_of).collect();
    let m = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -c[0], 1.0, 0.0, -c[1], 0.0, 1.0, -c[2]]);
    let mut eig: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.re).collect();
    eig.sort_by(f64::total_cmp);
    let mut exact: Vec<f64> = ch.roots.roots.iter().map(root_f64).collect();
    exact.sort_by(f64::total_cmp);
    let gap = exact.iter().zip(&eig).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(gap < 1e-9, || format!("companion eigenvalues {eig:?} differ by {gap:e}"))?;
    Ok(format!("roots -4, -1, 2 exact; companion eigenvalues agree to {gap:.1e}"))
}

fn c03_integrals_and_rank() -> Outcome {
    let st = stage("illustrative");
    let sys = &st.prep.sys;
    for (rate, form) in INTEGRALS {
        let i = st
            .derived
            .integrals
            .iter()
            .find(|i| i.rate == Some(q(rate, 1)))
            .ok_or_else(|| format!("no integral at rate {rate}"))?;
        let want = sys.to_tqu(&p(form)).map_err(|e| e.to_string())?;
        let got = i.control_form.as_ref().ok_or_else(|| format!("{} has no control form", i.label))?;
        ensure(same(got, &want), || format!("{}: {got} != {want}", i.label))?;
    }
    ensure(st.derived.rank == 2, || format!("independence rank {}", st.derived.rank))?;
    let constant = sys.to_tqp(&p(I1_CONSTANT_TERM)).unwrap();
    let d = conservation_residual(&constant, sys).unwrap();
    println!("      note: with +1/2 in place of +q/2 the rate -1 integral has D(I) = {d}");
    Ok("5 control forms identical; rank 2".into())
}

fn c04_conservation() -> Outcome {
    let st = stage("illustrative");
    let sys = &st.prep.sys;
    let traj = integrate(sys, &[1.0], &[5.0], 0.0, 1.0, H).map_err(|e| e.to_string())?;
    let mut worst = 0.0_f64;
    for i in &st.derived.integrals {
        let di = conservation_residual(&i.costate_form, sys).map_err(|e| e.to_string())?;
        ensure(di.is_zero(), || format!("{}: D(I) = {di}", i.label))?;
        let d = conservation_drift(i, &traj).map_err(|e| e.to_string())?;
        ensure(d.max < DRIFT_TOL, || format!("{} drifts by {:e}", i.label, d.max))?;
        worst = worst.max(d.max);
    }
    Ok(format!("D(I) = 0 for all 5; max drift {worst:.1e}"))
}

fn c05_closed_form() -> Outcome {
    let st = stage("illustrative");
    let sys = &st.prep.sys;
    let sol = pipeline::solve(&st.file, sys, &st.derived.integrals, &Options::default()).map_err(|e| e.to_string())?;
    let red = &sol.reduction;
    let ode = red.ode.as_ref().ok_or("no scalar state equation")?;
    ensure(same(&ode.rhs, &p("(4*q + A1*exp(-t))/2")), || format!("state equation q' = {}", ode.rhs))?;
    let qt = &red.family.state[0];
    let t = s("t");
    let residual = normalize(&(differentiate(qt, &t) - subs1(&ode.rhs, &s("q"), qt))).unwrap();
    ensure(residual.is_zero(), || format!("residual {residual}"))?;

    // the family as usually quoted, with its first constant rescaled
    let quoted = p("A1/2*exp(-t) + A2*exp(2*t)");
    let relabelled = subs1(&quoted, &s("A1"), &p("-A1/3"));
    ensure(same(qt, &relabelled), || format!("{qt} is not A1/2 e^-t + A2 e^2t under A1 -> -A1/3"))?;
    let literal = normalize(&(differentiate(&quoted, &t) - subs1(&ode.rhs, &s("q"), &quoted))).unwrap();
    println!("      note: A1/2 e^-t + A2 e^2t taken literally leaves residual {literal}");

    let fam = red.family.bind(&[(s("A1"), q(0, 1)), (s("A2"), q(1, 1))].into());
    let (qs, ps, _) = fam.evaluated_paths();
    let at0 = |e: &Expr| cvham::symcore::eval_const::<f64>(&subs1(e, &t, &Expr::zero())).unwrap();
    let traj = integrate(sys, &[at0(&qs[0])], &[at0(&ps[0])], 0.0, 1.0, H).map_err(|e| e.to_string())?;
    let err = max_abs_error(&traj, &qs, &ps).map_err(|e| e.to_string())?;
    ensure(err < PATH_TOL, || format!("RK4 error {err:e}"))?;
    Ok(format!("residual 0; q = {qt}; RK4 error {err:.1e} at A1=0, A2=1"))
}

fn c06_x4_not_a_symmetry() -> Outcome {
    let st = stage("illustrative");
    let sys = &st.prep.sys;
    let x4 = SymmetryCandidate {
        xi: Expr::zero(),
        eta: vec![p("exp(t)")],
        zeta: None,
    };
    let rep = point_symmetry_check(&x4, sys).map_err(|e| e.to_string())?;
    let zeta = rep.derived_zeta.as_ref().ok_or("zeta not derived")?;
    ensure(same(&zeta[0], &p("2*exp(t)")), || format!("zeta = {}", zeta[0]))?;
    ensure(vanishes(&rep.residuals[0], sys).is_some(), || format!("first condition residual {}", rep.residuals[0]))?;
    let second = &rep.residuals[1];
    ensure(matches!(sys.zero_verdict(second), Verdict::NonZero { .. }), || {
        format!("second condition residual {second} is not reported nonzero")
    })?;
    ensure(!rep.holds, || "reported as a symmetry".into())?;
    Ok(format!("zeta = 2*exp(t); second condition residual {second}"))
}

// --- Ramsey --------------------------------------------------------------

fn c07_ramsey_restriction() -> Outcome {
    let file = load("ramsey");
    let scan = file.scan.as_ref().ok_or("no scan line")?;
    let rep = restriction_solve(&file.model, &AnsatzSpec::default(), &scan.param, scan.lo, scan.hi, &Default::default())
        .map_err(|e| e.to_string())?;
    let m = &file.model;
    let (b, d, r) = (param(m, "beta"), param(m, "delta"), param(m, "r"));
    let oracle = (&r + &d) / (&b * &d);
    ensure(oracle == q(20, 3), || format!("(r+delta)/(beta*delta) = {oracle}"))?;
    let root = rep.roots.iter().find(|r| r.validated).ok_or("no validated root")?;
    let err = (root.value - 20.0 / 3.0).abs();
    ensure(err < SIGMA_TOL, || format!("sigma = {} (error {err:e})", root.value))?;
    ensure(root.exact == Some(oracle.clone()), || format!("exact value {:?}", root.exact))?;
    Ok(format!("sigma = 20/3, |error| = {err:.1e}, {} root(s) in [{}, {}]", rep.roots.len(), scan.lo, scan.hi))
}

fn ramsey_start_from_control(sys: &StateCostateSystem, k: f64, c: f64) -> (f64, f64) {
    // lambda = (1 - sigma) c^(-sigma), the first-order condition
    let law = &sys.costate_laws.as_ref().expect("costate law")[0];
    let env: BTreeMap<Symbol, f64> = [(s("t"), 0.0), (s("k"), k), (s("c"), c)].into();
    (k, cvham::symcore::eval_at::<f64>(law, &env).unwrap())
}

fn c08_ramsey_operator() -> Outcome {
    let st = stage("ramsey");
    let sys = &st.prep.sys;
    let ops = &st.derived.derivation.operators;
    ensure(ops.len() == 1, || format!("{} operators", ops.len()))?;
    let (xi, eta, b) = bound_op(&st.prep.model, &st.file.operators[0]);
    ensure(same(&xi, &p("exp(-17*t/200)")), || format!("declared xi binds to {xi}"))?;
    ensure(b.is_zero(), || format!("declared B binds to {b}"))?;
    ensure(op_matches(&ops[0], &xi, &eta, &b), || {
        format!("derived ({}, {}, {}) vs ({xi}, {eta}, {b})", ops[0].xi, ops[0].eta[0], ops[0].b)
    })?;

    let i = &st.derived.integrals[0];
    let declared = sys.to_tqp(&st.prep.model.bound(&st.file.integrals[0].expr).unwrap()).unwrap();
    ensure(vanishes(&(&i.costate_form - &declared), sys).is_some(), || {
        format!("derived integral {} vs {declared}", i.costate_form)
    })?;
    let di = conservation_residual(&i.costate_form, sys).map_err(|e| e.to_string())?;
    ensure(vanishes(&di, sys).is_some(), || format!("D(I) = {di}"))?;

    let mut worst = 0.0_f64;
    for (k, c) in [(1.0, 17.0 / 20.0), (1.0, 0.8), (2.0, 1.0)] {
        let (k0, l0) = ramsey_start_from_control(sys, k, c);
        let traj = integrate(sys, &[k0], &[l0], 0.0, 10.0, H).map_err(|e| e.to_string())?;
        ensure(traj.error.is_none(), || format!("run from (k, c) = ({k}, {c}) stopped: {:?}", traj.error))?;
        let d = drift_of(&i.costate_form, &traj).map_err(|e| e.to_string())?;
        ensure(d.max < DRIFT_TOL, || format!("drift {:e} from (k, c) = ({k}, {c})", d.max))?;
        worst = worst.max(d.max);
    }
    Ok(format!("operator and integral match, D(I) = 0, max drift {worst:.1e} on [0, 10]"))
}

fn c09_ramsey_closed_form() -> Outcome {
    let st = stage("ramsey");
    let sys = &st.prep.sys;
    let m = &st.prep.model;
    let sol = pipeline::solve(&st.file, sys, &st.derived.integrals, &Options::default()).map_err(|e| e.to_string())?;
    let red = &sol.reduction;
    let (b, d, r) = (param(m, "beta"), param(m, "delta"), param(m, "r"));
    let one = q(1, 1);

    // c = (1 - beta*delta/(r+delta)) k^beta
    let coef = &one - &(&b * &d / (&r + &d));
    let k = Expr::sym("k");
    let e30 = Expr::num(coef) * Expr::pow(k.clone(), Expr::num(b.clone()));
    let law = red
        .steps
        .iter()
        .find(|e| e.label.starts_with("control law"))
        .ok_or("no control law step")?;
    ensure(same(&law.rhs, &e30), || format!("control law c = {}, expected {e30}", law.rhs))?;

    // k(t) = [beta/(r+delta) + (k0^(1-beta) - beta/(r+delta)) e^{-(1-beta) delta t}]^(1/(1-beta))
    let a = Expr::num(&b / (&r + &d));
    let k0 = Expr::sym("k0");
    let t = Expr::sym("t");
    let e32 = Expr::pow(
        &a + &((Expr::pow(k0.clone(), Expr::num(&one - &b)) - a.clone())
            * Expr::exp(Expr::num(-(&one - &b) * &d) * t.clone())),
        Expr::num(&one / &(&one - &b)),
    );
    let kt = &red.family.state[0];
    ensure(same(kt, &e32), || format!("k(t) = {kt}, expected {e32}"))?;

    // k' + delta k - beta delta/(r+delta) k^beta = 0 along k(t)
    let rhs31 = Expr::num(&b * &d / (&r + &d)) * Expr::pow(k.clone(), Expr::num(b.clone())) - Expr::num(d.clone()) * k.clone();
    let res = differentiate(kt, &s("t")) - subs1(&rhs31, &s("k"), kt);
    let how = vanishes(&res, sys).ok_or_else(|| format!("residual {res}"))?;
    let at0 = normalize(&subs1(kt, &s("t"), &Expr::zero())).unwrap();
    let k0_ok = vanishes(&(&at0 - &k0), sys).ok_or_else(|| format!("k(0) = {at0}"))?;

    let tr = sol.transversality.as_ref().ok_or("no tail test")?;
    ensure(tr.passed, || format!("tail test failed: {:?}", tr.diagnostics))?;
    Ok(format!(
        "c = {e30}; k(t) matches; residual zero ({how}); k(0) = k0 ({k0_ok}); tail limit {:.1e}",
        tr.limit_estimate
    ))
}

fn c10_ramsey_quadrature() -> Outcome {
    let st = stage("ramsey");
    let sys = &st.prep.sys;
    let m = &st.prep.model;
    let plan = SolvePlan {
        values: BTreeMap::new(),
        ..st.file.plan.clone()
    };
    let red = reduce::reduce(sys, &st.derived.integrals, &plan).map_err(|e| e.to_string())?;
    let quad = red.quadrature.as_ref().ok_or("no quadrature for A1 != 0")?;
    ensure(quad.validated, || "quadrature not validated against the control equation".into())?;

    let (b, d, sigma) = (param(m, "beta"), param(m, "delta"), param(m, "sigma"));
    let one = q(1, 1);
    let (t, c, sv) = (Expr::sym("t"), Expr::sym("c"), Expr::sym(quad.symbol.as_str()));
    let subst = &c * &Expr::exp(Expr::num(&b * &d) * t.clone());
    ensure(same(&quad.substitution, &subst), || format!("substitution {} vs {subst}", quad.substitution))?;

    // dS/dt = beta/sigma e^{delta(1-beta)t} S [A1/(sigma-1) S^sigma + sigma/(sigma-1) S]^(1-1/beta)
    let a1 = Expr::sym("A1");
    let bracket = Expr::num(&one / &(&sigma - &one)) * a1 * Expr::pow(sv.clone(), Expr::num(sigma.clone()))
        + Expr::num(&sigma / &(&sigma - &one)) * sv.clone();
    let oracle = Expr::num(&b / &sigma)
        * Expr::exp(Expr::num(&d * &(&one - &b)) * t)
        * sv.clone()
        * Expr::pow(bracket, Expr::num(&one - &(&one / &b)));
    let (ts, ss) = separate_factors(&oracle, &s("t"), &quad.symbol).map_err(|e| e.to_string())?;
    ensure(same(&quad.time_side, &ts), || format!("time side {} vs {ts}", quad.time_side))?;
    ensure(same(&quad.state_side, &ss), || format!("state side {} vs {ss}", quad.state_side))?;
    Ok(format!("dt-side {ts}; dS-side 1/({ss})"))
}

// --- AK ------------------------------------------------------------------

fn ak_start(sys: &StateCostateSystem, k: f64, c: f64) -> (f64, f64) {
    let law = &sys.costate_laws.as_ref().expect("costate law")[0];
    let env: BTreeMap<Symbol, f64> = [(s("t"), 0.0), (s("k"), k), (s("c"), c)].into();
    (k, cvham::symcore::eval_at::<f64>(law, &env).unwrap())
}

fn c11_ak_operators() -> Outcome {
    let st = stage("ak");
    let sys = &st.prep.sys;
    let m = &st.prep.model;
    let ops = &st.derived.derivation.operators;
    ensure(ops.len() == 3, || format!("{} operators", ops.len()))?;
    for o in &st.file.operators {
        let (xi, eta, b) = bound_op(m, o);
        ensure(ops.iter().any(|d| op_matches(d, &xi, &eta, &b)), || {
            format!("{} = ({xi}, {eta}, {b}) not derived", o.label)
        })?;
    }
    ensure(st.file.integrals.len() == 3, || "expected 3 declared integrals".into())?;
    let runs: Vec<_> = [(1.0, 11.0 / 200.0), (1.0, 1.0), (3.0, 0.2)]
        .iter()
        .map(|&(k, c)| {
            let (k0, l0) = ak_start(sys, k, c);
            integrate(sys, &[k0], &[l0], 0.0, 1.0, H).unwrap()
        })
        .collect();
    let mut worst = 0.0_f64;
    for decl in &st.file.integrals {
        let want = sys.to_tqp(&m.bound(&decl.expr).unwrap()).unwrap();
        let i = st
            .derived
            .integrals
            .iter()
            .find(|i| vanishes(&(&i.costate_form - &want), sys).is_some())
            .ok_or_else(|| format!("{} = {want} not among the derived integrals", decl.label))?;
        let di = conservation_residual(&i.costate_form, sys).map_err(|e| e.to_string())?;
        ensure(vanishes(&di, sys).is_some(), || format!("{}: D(I) = {di}", i.label))?;
        for traj in &runs {
            let d = drift_of(&i.costate_form, traj).map_err(|e| e.to_string())?;
            ensure(d.max < DRIFT_TOL, || format!("{} drifts by {:e}", i.label, d.max))?;
            worst = worst.max(d.max);
        }
    }
    Ok(format!("3 operators and 3 integrals match; max drift {worst:.1e}"))
}

fn c12_ak_solution() -> Outcome {
    let st = stage("ak");
    let sys = &st.prep.sys;
    let m = &st.prep.model;
    let (theta, rho, n, a, d) = (param(m, "theta"), param(m, "rho"), param(m, "n"), param(m, "A"), param(m, "delta"));
    let one = q(1, 1);
    let phi = (&rho - &(&n * &theta) + (&theta - &one) * (&a - &d)) / &theta;
    ensure(phi == q(11, 200), || format!("phi = {phi}"))?;
    // rho + delta > (1 - theta)(A - delta) + n theta + delta
    let lhs = &rho + &d;
    let rhs = (&one - &theta) * (&a - &d) + &n * &theta + &d;
    ensure(lhs > rhs, || format!("restriction fails: {lhs} <= {rhs}"))?;

    let sol = pipeline::solve(&st.file, sys, &st.derived.integrals, &Options::default()).map_err(|e| e.to_string())?;
    let fam = &sol.reduction.family;
    let t = Expr::sym("t");
    let c0 = Expr::sym("c0");
    let a1 = Expr::sym("a1");
    let ct = &c0 * &Expr::exp(Expr::num((&a - &d - &rho) / &theta) * t.clone());
    ensure(same(&fam.control[0], &ct), || format!("c(t) = {}, expected {ct}", fam.control[0]))?;
    let kt = Expr::num((&one - &theta) / (&phi * &theta))
        * a1
        * Expr::pow(c0.clone(), Expr::num(theta.clone()))
        * Expr::exp(Expr::num(&a - &d - &n) * t.clone())
        + Expr::num(&one / &phi) * ct.clone();
    ensure(same(&fam.state[0], &kt), || format!("k(t) = {}, expected {kt}", fam.state[0]))?;

    let tail = TailOptions {
        horizon: st.file.horizon.unwrap_or(400.0),
        ..TailOptions::default()
    };
    let tr = transversality_check(fam, sys, &tail).map_err(|e| e.to_string())?;
    ensure(tr.forced == vec![s("a1")], || format!("forced {:?}", tr.forced))?;
    ensure(tr.decay_rate == Some(phi.clone()), || format!("decay rate {:?}, phi = {phi}", tr.decay_rate))?;
    ensure(tr.passed, || format!("tail test failed: {:?}", tr.diagnostics))?;
    let k_over = &tr.family.state[0] - &(&tr.family.control[0] * &Expr::num(&one / &phi));
    ensure(normalize(&k_over).unwrap().is_zero(), || format!("k - c/phi = {k_over}"))?;
    Ok(format!(
        "c = {ct}; a1 forced to 0; decay {phi} = phi; {lhs} > {rhs}; k = {}",
        tr.family.state[0]
    ))
}

// --- properties ----------------------------------------------------------

/// A random element of the polynomial-exponential fragment in `vars`, total degree <= 2.
fn random_term(rng: &mut ChaCha8Rng, vars: &[&str]) -> Expr {
    let terms = rng.gen_range(1..=3);
    Expr::add((0..terms).map(|_| {
        let coef = Expr::ratio(rng.gen_range(-5..=5), rng.gen_range(1..=3));
        let mut f = vec![coef];
        let deg = rng.gen_range(0..=2);
        for _ in 0..deg {
            f.push(Expr::sym(vars[rng.gen_range(0..vars.len())]));
        }
        let rate = rng.gen_range(-2..=2);
        if rate != 0 {
            f.push(Expr::exp(Expr::int(rate) * Expr::sym("t")));
        }
        Expr::mul(f)
    }))
}

fn c13_integral_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (t, qs, ps) = (s("t"), s("q"), s("p"));
    let (qd, pd) = (Expr::sym("qd"), Expr::sym("pd"));
    let tqp = ["t", "q", "p"];
    let total = |f: &Expr| differentiate(f, &t) + &qd * &differentiate(f, &qs) + &pd * &differentiate(f, &ps);
    let cases = 24;
    for case in 0..cases {
        let [h, xi, eta, zeta, b, gamma] = std::array::from_fn(|_| random_term(&mut rng, &tqp));
        let pe = Expr::sym("p");
        let (ht, hq, hp) = (differentiate(&h, &t), differentiate(&h, &qs), differentiate(&h, &ps));
        let xh = &xi * &ht + &eta * &hq + &zeta * &hp;
        let lhs = &zeta * &qd + &pe * &total(&eta) - xh - &h * &total(&xi) - total(&b) + (&eta - &(&xi * &hp)) * gamma.clone();
        let rhs = &xi * &(total(&h) - ht.clone() - &gamma * &hp) - &eta * &(&pd + &hq - gamma.clone())
            + &zeta * &(&qd - &hp)
            + total(&(&pe * &eta - &xi * &h - b.clone()));
        let diff = normalize(&(lhs - rhs)).map_err(|e| e.to_string())?;
        ensure(diff.is_zero(), || format!("case {case}: H = {h}, xi = {xi}: LHS - RHS = {diff}"))?;
    }
    Ok(format!("{cases} random tuples, LHS - RHS canonicalises to 0"))
}

fn bare_model(h: Expr) -> ControlModel {
    ControlModel {
        name: "random".into(),
        time: s("t"),
        states: vec![s("q")],
        costates: vec![s("p")],
        controls: vec![],
        hamiltonian: h,
        discount: vec![Expr::zero()],
        params: BTreeMap::new(),
        guards: vec![],
    }
}

fn c14_gamma_zero() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (t, qs, ps) = (s("t"), s("q"), s("p"));
    let cases = 10;
    for case in 0..cases {
        let h = random_term(&mut rng, &["t", "q", "p"]) + Expr::sym("p") * Expr::sym("p");
        let sys = foc_eliminate(&bare_model(h.clone())).map_err(|e| e.to_string())?;
        let [xi, eta, b] = std::array::from_fn(|_| random_term(&mut rng, &["t", "q"]));
        let zeta = random_term(&mut rng, &["t", "q", "p"]);
        let (hq, hp) = (differentiate(&h, &qs), differentiate(&h, &ps));
        let total = |f: &Expr| differentiate(f, &t) + &hp * &differentiate(f, &qs) - &hq * &differentiate(f, &ps);
        let xh = &xi * &differentiate(&h, &t) + &eta * &hq + &zeta * &hp;
        let invariance = &zeta * &hp + Expr::sym("p") * total(&eta) - xh - &h * &total(&xi) - total(&b);
        let det = determining_residual_raw(&sys, &xi, std::slice::from_ref(&eta), &b).map_err(|e| e.to_string())?;
        let diff = normalize(&(det - invariance)).map_err(|e| e.to_string())?;
        ensure(diff.is_zero(), || format!("case {case}: difference {diff}"))?;
    }
    Ok(format!("{cases} random inputs agree with the invariance condition"))
}

fn c15_linear_closure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut checked = 0;
    for name in ["illustrative", "ramsey", "ak"] {
        let st = stage(name);
        let sys = &st.prep.sys;
        let ops = &st.derived.derivation.operators;
        for trial in 0..6 {
            let w: Vec<Expr> = ops
                .iter()
                .map(|_| Expr::ratio(rng.gen_range(-9..=9), rng.gen_range(1..=7)))
                .collect();
            let comb = |f: &dyn Fn(&PHOperator) -> Expr| Expr::add(ops.iter().zip(&w).map(|(o, c)| c * &f(o)));
            let xi = comb(&|o| o.xi.clone());
            let eta = comb(&|o| o.eta[0].clone());
            let b = comb(&|o| o.b.clone());
            let r = determining_residual(sys, &xi, &[eta], &b).map_err(|e| e.to_string())?;
            ensure(vanishes(&r, sys).is_some(), || format!("{name} trial {trial}: residual {r}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} random combinations over 3 models satisfy the determining equation"))
}

fn c16_rk4_order() -> Outcome {
    let st = stage("illustrative");
    let sys = &st.prep.sys;
    let (qe, pe) = (vec![p("exp(2*t)")], vec![p("4*exp(2*t) + 1")]);
    let err = |h: f64| -> Result<f64, String> {
        let traj = integrate(sys, &[1.0], &[5.0], 0.0, 1.0, h).map_err(|e| e.to_string())?;
        max_abs_error(&traj, &qe, &pe).map_err(|e| e.to_string())
    };
    let (e1, e2) = (err(0.1)?, err(0.05)?);
    let ratio = e1 / e2;
    ensure((ORDER_BAND.0..=ORDER_BAND.1).contains(&ratio), || {
        format!("error ratio {ratio:.3} ({e1:e} / {e2:e})")
    })?;
    Ok(format!("h = 0.1: {e1:.2e}, h = 0.05: {e2:.2e}, ratio {ratio:.2}"))
}

fn main() {
    let criteria: [Criterion; 16] = [
        ("illustrative operator basis", c01_operator_basis),
        ("illustrative characteristic roots", c02_characteristic_roots),
        ("illustrative integrals and independence", c03_integrals_and_rank),
        ("illustrative conservation", c04_conservation),
        ("illustrative closed-form solution", c05_closed_form),
        ("X4 is not a point symmetry", c06_x4_not_a_symmetry),
        ("Ramsey restriction on sigma", c07_ramsey_restriction),
        ("Ramsey operator and integral", c08_ramsey_operator),
        ("Ramsey closed form at A1 = 0", c09_ramsey_closed_form),
        ("Ramsey quadrature for A1 != 0", c10_ramsey_quadrature),
        ("AK operators and integrals", c11_ak_operators),
        ("AK solution and transversality", c12_ak_solution),
        ("first-integral identity on random tuples", c13_integral_identity),
        ("Gamma = 0 degeneration", c14_gamma_zero),
        ("linear-combination closure", c15_linear_closure),
        ("RK4 order", c16_rk4_order),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let ms = clock.elapsed().as_secs_f64() * 1e3;
        match outcome {
            Ok(detail) => println!("PASS [{:02}] {name} ({ms:.0} ms): {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{:02}] {name} ({ms:.0} ms): {detail}", k + 1)
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
