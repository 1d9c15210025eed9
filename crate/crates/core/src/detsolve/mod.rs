//! Partial-Hamiltonian operators from the determining equation.
//!
//! The residual is built in control form, separated by monomials in the
//! controls and states, and the resulting constant-coefficient linear ODE
//! system in the unknown coefficient functions of `t` is solved by
//! triangular elimination over `Q[d/dt]`.

mod basis;
mod linsys;
mod restrict;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dynsys::{DynError, StateCostateSystem};
use crate::symcore::{collect_by_exponent, differentiate, Expr, SymError, Symbol};

pub use basis::{operator_basis, PHOperator, Provenance};
pub use linsys::{solve_coefficients, CharacteristicPolynomial, CoefficientSolution, FreeConstant};
pub use restrict::{restriction_solve, RestrictionReport, RestrictionRoot, ScanOptions};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DetError {
    #[error(transparent)]
    Dyn(#[from] DynError),
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error("unsupported ansatz: {0}")]
    UnsupportedAnsatz(String),
    #[error("unsupported coefficient ODE: {0}")]
    UnsupportedCoefficientOde(String),
    #[error("coefficient function `{0}` is left undetermined")]
    Underdetermined(String),
    #[error("internal consistency: {0}")]
    Internal(String),
}

/// Shape of the undetermined generator `(ξ, η, B)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnsatzSpec {
    pub deg_xi: u32,
    pub deg_eta: u32,
    pub deg_b: u32,
    /// Let `B` depend on the costates; rejected in this version.
    pub b_depends_on_p: bool,
}

impl Default for AnsatzSpec {
    fn default() -> Self {
        AnsatzSpec {
            deg_xi: 0,
            deg_eta: 1,
            deg_b: 2,
            b_depends_on_p: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Xi,
    Eta(usize),
    B,
}

/// One unknown coefficient function: the factor of `q^monomial` in a component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Column {
    pub func: Symbol,
    pub role: Role,
    pub monomial: Vec<u32>,
}

/// `ξ, ηⁱ, B` as polynomials in the states with unknown coefficient functions of `t`.
#[derive(Clone, Debug)]
pub struct Ansatz {
    pub time: Symbol,
    pub states: Vec<Symbol>,
    pub xi: Expr,
    pub eta: Vec<Expr>,
    pub b: Expr,
    /// Elimination order: `B` (high degree first), then each `ηⁱ`, then `ξ`.
    pub columns: Vec<Column>,
}

fn monomials(n: usize, deg: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(n, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, deg, &mut Vec::new(), &mut out);
    out.sort_by(|a, b| {
        let (da, db): (u32, u32) = (a.iter().sum(), b.iter().sum());
        db.cmp(&da).then(b.cmp(a))
    });
    out
}

fn monomial_expr(states: &[Symbol], m: &[u32]) -> Expr {
    Expr::mul(
        states
            .iter()
            .zip(m)
            .map(|(q, k)| Expr::symbol(q).powi(*k as i64))
            .collect::<Vec<_>>(),
    )
}

fn label(m: &[u32]) -> String {
    m.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("_")
}

pub fn build_ansatz(sys: &StateCostateSystem, spec: &AnsatzSpec) -> Result<Ansatz, DetError> {
    if spec.b_depends_on_p {
        return Err(DetError::UnsupportedAnsatz(
            "a gauge depending on the costates is not supported; use B(t, q)".into(),
        ));
    }
    let t = sys.time().clone();
    let states = sys.states().to_vec();
    let n = states.len();
    let mut columns = Vec::new();
    let mut component = |role: Role, base: String, deg: u32| -> Expr {
        let mut terms = Vec::new();
        for m in monomials(n, deg) {
            let func = Symbol::new(&format!("{base}{}", label(&m)));
            terms.push(Expr::func(&func, &t, 0) * monomial_expr(&states, &m));
            columns.push(Column { func, role, monomial: m });
        }
        Expr::add(terms)
    };
    let b = component(Role::B, "b_".into(), spec.deg_b);
    let eta: Vec<Expr> = (0..n)
        .map(|i| {
            let base = if n == 1 { "eta_".to_string() } else { format!("eta{}_", i + 1) };
            component(Role::Eta(i), base, spec.deg_eta)
        })
        .collect();
    let xi = component(Role::Xi, "xi_".into(), spec.deg_xi);
    Ok(Ansatz { time: t, states, xi, eta, b, columns })
}

/// The determining residual in `(t, q, p, u)`, before the costates are eliminated.
///
/// `Σ pᵢD(ηⁱ) − ξH_t − Σ ηⁱH_{qⁱ} − H·D(ξ) − D(B) + Σ (ηⁱ − ξH_{pᵢ})Γᵢ`
/// with `D f = f_t + Σ H_{pᵢ} f_{qⁱ}`.
pub fn determining_residual_raw(
    sys: &StateCostateSystem,
    xi: &Expr,
    eta: &[Expr],
    b: &Expr,
) -> Result<Expr, DetError> {
    let m = &sys.model;
    for (name, e) in std::iter::once(("xi", xi)).chain(eta.iter().map(|e| ("eta", e))).chain([("B", b)]) {
        if m.costates.iter().chain(&m.controls).any(|v| e.contains(v)) {
            return Err(DetError::UnsupportedAnsatz(format!(
                "{name} may depend only on time and the states"
            )));
        }
    }
    if eta.len() != sys.n() {
        return Err(DetError::UnsupportedAnsatz("eta has the wrong length".into()));
    }
    let h = &sys.hamiltonian;
    let t = sys.time();
    let hp: Vec<Expr> = m.costates.iter().map(|p| differentiate(h, p)).collect();
    let d = |f: &Expr| -> Expr {
        let mut terms = vec![differentiate(f, t)];
        for (i, q) in m.states.iter().enumerate() {
            terms.push(&hp[i] * &differentiate(f, q));
        }
        Expr::add(terms)
    };
    let dxi = d(xi);
    let mut terms = vec![-(xi * &differentiate(h, t)), -(h * &dxi), -d(b)];
    for i in 0..sys.n() {
        let p = Expr::symbol(&m.costates[i]);
        terms.push(&p * &d(&eta[i]));
        terms.push(-(&eta[i] * &differentiate(h, &m.states[i])));
        terms.push((&eta[i] - &(xi * &hp[i])) * &sys.gamma[i]);
    }
    Ok(Expr::add(terms))
}

/// The determining residual in control form: costates replaced through the
/// inverted first-order conditions.
pub fn determining_residual(
    sys: &StateCostateSystem,
    xi: &Expr,
    eta: &[Expr],
    b: &Expr,
) -> Result<Expr, DetError> {
    let raw = determining_residual_raw(sys, xi, eta, b)?;
    Ok(sys.to_tqu(&raw)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    Algebraic,
    Ode,
}

/// One separated coefficient equation, tagged with its monomial key.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub key: Vec<(Symbol, Expr)>,
    pub expr: Expr,
    pub kind: ConstraintKind,
}

impl Constraint {
    pub fn key_text(&self) -> String {
        let parts: Vec<String> = self
            .key
            .iter()
            .filter(|(_, k)| !k.is_zero())
            .map(|(v, k)| if k.is_one() { v.to_string() } else { format!("{v}^({k})") })
            .collect();
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("*")
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeterminingSystem {
    pub constraints: Vec<Constraint>,
}

impl DeterminingSystem {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn find(&self, key: &[(&str, Expr)]) -> Option<&Constraint> {
        self.constraints.iter().find(|c| {
            let mut want: BTreeMap<Symbol, Expr> =
                key.iter().map(|(s, e)| (Symbol::new(s), e.clone())).collect();
            for (v, k) in &c.key {
                let w = want.remove(v).unwrap_or_else(Expr::zero);
                if w != *k {
                    return false;
                }
            }
            want.values().all(Expr::is_zero)
        })
    }
}

fn has_derivative(e: &Expr) -> bool {
    e.funcs().iter().any(|f| f.order > 0)
}

/// Splits the residual by powers of each control, then of each state.
pub fn separate(residual: &Expr, controls: &[Symbol], states: &[Symbol]) -> Result<DeterminingSystem, DetError> {
    fn rec(
        e: &Expr,
        vars: &[Symbol],
        key: &mut Vec<(Symbol, Expr)>,
        out: &mut Vec<Constraint>,
    ) -> Result<(), DetError> {
        let Some((v, rest)) = vars.split_first() else {
            if !e.is_zero() {
                let kind = if has_derivative(e) { ConstraintKind::Ode } else { ConstraintKind::Algebraic };
                out.push(Constraint { key: key.clone(), expr: e.clone(), kind });
            }
            return Ok(());
        };
        let m = collect_by_exponent(e, v)?;
        for (k, c) in &m.terms {
            key.push((v.clone(), k.clone()));
            rec(c, rest, key, out)?;
            key.pop();
        }
        Ok(())
    }
    let vars: Vec<Symbol> = controls.iter().chain(states).cloned().collect();
    let mut out = Vec::new();
    rec(residual, &vars, &mut Vec::new(), &mut out)?;
    Ok(DeterminingSystem { constraints: out })
}

/// Everything produced by one operator search.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub ansatz: Ansatz,
    pub residual: Expr,
    pub system: DeterminingSystem,
    pub solutions: Vec<CoefficientSolution>,
    pub operators: Vec<PHOperator>,
}

/// Ansatz → residual → separation → coefficient solve → verified basis.
pub fn derive(sys: &StateCostateSystem, spec: &AnsatzSpec) -> Result<Derivation, DetError> {
    let ansatz = build_ansatz(sys, spec)?;
    let residual = determining_residual(sys, &ansatz.xi, &ansatz.eta, &ansatz.b)?;
    let system = separate(&residual, sys.controls(), sys.states())?;
    let solutions = solve_coefficients(&system, &ansatz, sys)?;
    let operators = operator_basis(&solutions, &ansatz, sys)?;
    Ok(Derivation {
        ansatz,
        residual,
        system,
        solutions,
        operators,
    })
}


#[cfg(test)]
mod search_tests {
    use super::*;
    use crate::dynsys::foc_eliminate;
    use crate::poly::ExactPoly;
    use crate::symcore::parse_expr;
    use crate::testutil::*;
    use crate::Rational;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    fn has(ops: &[PHOperator], xi: &str, eta: &str, b: &str) -> bool {
        ops.iter().any(|o| o.xi == p(xi) && o.eta[0] == p(eta) && o.b == p(b))
    }

    #[test]
    fn illustrative_five_operators() {
        let sys = foc_eliminate(&illustrative()).unwrap();
        let d = derive(&sys, &AnsatzSpec::default()).unwrap();
        assert_eq!(d.operators.len(), 5);
        assert!(has(&d.operators, "exp(-t)", "q*exp(-t)/2", "-q*exp(-t)/2"));
        assert!(has(&d.operators, "exp(2*t)", "2*q*exp(2*t)", "6*q^2*exp(2*t) + q*exp(2*t)"));
        assert!(has(&d.operators, "exp(-4*t)", "-q*exp(-4*t)", "3*q^2*exp(-4*t) - 2*q*exp(-4*t)"));
        assert!(has(&d.operators, "0", "exp(t)", "4*q*exp(t) + exp(t)"));
        assert!(has(&d.operators, "0", "exp(-2*t)", "-2*q*exp(-2*t) + exp(-2*t)"));
        let rates: Vec<i64> = d.operators.iter().map(|o| o.rate.clone().unwrap().to_integer().try_into().unwrap()).collect();
        assert_eq!(rates, vec![-4, -2, -1, 1, 2]);
        let ch = d.solutions[0].characteristic_of("xi_0").unwrap();
        assert_eq!(ch.poly, ExactPoly::from_ints(&[-8, -6, 3, 1]));
    }

    #[test]
    fn ak_three_operators() {
        let sys = foc_eliminate(&ak()).unwrap();
        let d = derive(&sys, &AnsatzSpec::default()).unwrap();
        assert_eq!(d.operators.len(), 3);
        assert!(has(&d.operators, "exp(-t/20)", "-k*exp(-t/20)/20", "-exp(-t/20)"));
        assert!(has(&d.operators, "exp(t/200)", "3*k*exp(t/200)/50", "-exp(t/200)"));
        assert!(has(&d.operators, "0", "exp(t/100)", "0"));
    }

    #[test]
    fn ramsey_single_operator_at_restriction() {
        let sys = foc_eliminate(&ramsey()).unwrap();
        let d = derive(&sys, &AnsatzSpec::default()).unwrap();
        assert_eq!(d.operators.len(), 1);
        assert!(has(&d.operators, "exp(-17*t/200)", "-k*exp(-17*t/200)/20", "0"));
    }

    #[test]
    fn ramsey_off_restriction_has_no_operator() {
        let m = ramsey_free_sigma().with_param(&Symbol::new("sigma"), Rational::from_integer(5.into()));
        let sys = foc_eliminate(&m).unwrap();
        assert!(derive(&sys, &AnsatzSpec::default()).unwrap().operators.is_empty());
    }

    #[test]
    fn restriction_roots() {
        let spec = AnsatzSpec::default();
        let sigma = Symbol::new("sigma");
        let r = restriction_solve(&ramsey_free_sigma(), &spec, &sigma, 1.5, 20.0, &ScanOptions::default()).unwrap();
        assert_eq!(r.roots.len(), 1);
        assert_eq!(r.roots[0].exact, Some(Rational::new(20.into(), 3.into())));
        assert!(r.roots[0].validated);

        let half = ramsey_free_sigma().with_param(&Symbol::new("beta"), Rational::new(1.into(), 2.into()));
        let r = restriction_solve(&half, &spec, &sigma, 1.5, 20.0, &ScanOptions::default()).unwrap();
        assert_eq!(r.roots.len(), 1);
        assert_eq!(r.roots[0].exact, Some(Rational::from_integer(4.into())));
    }

    #[test]
    fn ak_needs_no_restriction() {
        let m = ak().without_param(&Symbol::new("theta"));
        let r = restriction_solve(&m, &AnsatzSpec::default(), &Symbol::new("theta"), 1.5, 5.0, &ScanOptions::default()).unwrap();
        assert!(r.unrestricted);
        assert!(r.roots.is_empty());
    }
}
