//! Current-value Hamiltonian models and their state–costate systems.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::symcore::{
    collect_by_exponent, differentiate, eval_at, substitute, Bindings, Expr, SymError, Symbol,
    Verdict, ZeroTest,
};
use crate::Rational;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DynError {
    #[error("invalid model: {0}")]
    Model(String),
    #[error("guard `{guard}` violated{note}")]
    Guard { guard: String, note: String },
    #[error("manual control law required for `{control}`: {reason}")]
    ManualControlLaw { control: String, reason: String },
    #[error("costate law unavailable: {0}")]
    CostateLaw(String),
    #[error("zeta underdetermined: {0}")]
    ZetaUnderdetermined(String),
    #[error(transparent)]
    Sym(#[from] SymError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GuardRel {
    NonZero,
    Positive,
    Negative,
}

/// A parameter condition such as `beta*sigma - 1 != 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Guard {
    pub expr: Expr,
    pub rel: GuardRel,
    pub note: String,
}

impl Guard {
    pub fn describe(&self) -> String {
        let op = match self.rel {
            GuardRel::NonZero => "!=",
            GuardRel::Positive => ">",
            GuardRel::Negative => "<",
        };
        format!("{} {} 0", self.expr, op)
    }

    /// `None` when the guard still has free symbols.
    pub fn holds(&self, params: &Bindings) -> Option<bool> {
        let v = substitute(&self.expr, params).ok()?;
        if !v.symbols().is_empty() {
            return None;
        }
        let x: f64 = match v.as_num() {
            Some(r) => {
                let z = num_traits::Signed::signum(r);
                crate::symcore::rational_to_f64(&z)
            }
            None => crate::symcore::eval_const(&v).ok()?,
        };
        Some(match self.rel {
            GuardRel::NonZero => x != 0.0,
            GuardRel::Positive => x > 0.0,
            GuardRel::Negative => x < 0.0,
        })
    }
}

/// A current-value Hamiltonian control problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlModel {
    pub name: String,
    pub time: Symbol,
    pub states: Vec<Symbol>,
    pub costates: Vec<Symbol>,
    pub controls: Vec<Symbol>,
    /// `H(t, q, p, u)`, parameters left symbolic.
    pub hamiltonian: Expr,
    /// `Γᵢ`, one per costate.
    pub discount: Vec<Expr>,
    pub params: BTreeMap<Symbol, Rational>,
    pub guards: Vec<Guard>,
}

impl ControlModel {
    pub fn validate(&self) -> Result<(), DynError> {
        if self.states.is_empty() || self.states.len() != self.costates.len() {
            return Err(DynError::Model("need one costate per state".into()));
        }
        if self.discount.len() != self.costates.len() {
            return Err(DynError::Model("need one discount term per costate".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        let vars = std::iter::once(&self.time)
            .chain(&self.states)
            .chain(&self.costates)
            .chain(&self.controls);
        for v in vars {
            if !seen.insert(v.clone()) {
                return Err(DynError::Model(format!("symbol `{v}` declared twice")));
            }
            if self.params.contains_key(v) {
                return Err(DynError::Model(format!("variable `{v}` is also a parameter")));
            }
        }
        self.check_guards()
    }

    pub fn check_guards(&self) -> Result<(), DynError> {
        let b = self.bindings();
        for g in &self.guards {
            if g.holds(&b) == Some(false) {
                return Err(DynError::Guard {
                    guard: g.describe(),
                    note: if g.note.is_empty() { String::new() } else { format!(" ({})", g.note) },
                });
            }
        }
        Ok(())
    }

    pub fn bindings(&self) -> Bindings {
        self.params.iter().map(|(k, v)| (k.clone(), Expr::num(v.clone()))).collect()
    }

    pub fn with_param(&self, name: &Symbol, value: Rational) -> ControlModel {
        let mut m = self.clone();
        m.params.insert(name.clone(), value);
        m
    }

    pub fn without_param(&self, name: &Symbol) -> ControlModel {
        let mut m = self.clone();
        m.params.remove(name);
        m
    }

    pub fn is_variable(&self, s: &Symbol) -> bool {
        *s == self.time || self.states.contains(s) || self.costates.contains(s) || self.controls.contains(s)
    }

    /// Symbols of the Hamiltonian and discount terms that are neither variables nor bound.
    pub fn free_params(&self) -> Vec<Symbol> {
        let mut out = std::collections::BTreeSet::new();
        for e in std::iter::once(&self.hamiltonian).chain(&self.discount) {
            for s in e.symbols() {
                if !self.is_variable(&s) && !self.params.contains_key(&s) {
                    out.insert(s);
                }
            }
        }
        out.into_iter().collect()
    }

    pub fn bound(&self, e: &Expr) -> Result<Expr, SymError> {
        substitute(e, &self.bindings())
    }
}

/// The canonical system (11) after the controls have been eliminated.
#[derive(Clone, Debug)]
pub struct StateCostateSystem {
    pub model: ControlModel,
    /// Bound `H(t, q, p, u)`.
    pub hamiltonian: Expr,
    /// Bound `Γᵢ`.
    pub gamma: Vec<Expr>,
    /// `uₐ = Uₐ(t, q, p)`.
    pub control_laws: Vec<Expr>,
    /// `pᵢ = Pᵢ(t, q, u)` when the first-order conditions are linear in the costates.
    pub costate_laws: Option<Vec<Expr>>,
    pub qdot: Vec<Expr>,
    pub pdot: Vec<Expr>,
}

fn solve_single_power(g: &Expr, u: &Symbol) -> Result<Expr, String> {
    let m = collect_by_exponent(g, u).map_err(|e| e.to_string())?;
    let keys: Vec<Expr> = m.keys().cloned().collect();
    let g0 = m.get(&Expr::zero()).cloned().unwrap_or_else(Expr::zero);
    let powered: Vec<&Expr> = keys.iter().filter(|k| !k.is_zero()).collect();
    match powered.as_slice() {
        [k] => {
            let gk = m.get(k).unwrap();
            // u^k = -g0/gk
            let rhs = -(g0 / gk);
            if k.is_one() {
                Ok(rhs)
            } else {
                Ok(Expr::pow(rhs, Expr::one() / *k))
            }
        }
        [] => Err("first-order condition does not involve the control".into()),
        _ => Err(format!(
            "first-order condition has {} distinct powers of the control",
            powered.len()
        )),
    }
}

/// Solves the linear system `Σⱼ a[i][j] xⱼ = b[i]` symbolically.
fn symbolic_linear_solve(mut a: Vec<Vec<Expr>>, mut b: Vec<Expr>) -> Option<Vec<Expr>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col].recip();
        for j in 0..n {
            a[col][j] = &a[col][j] * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..n {
                    a[r][j] = &a[r][j] - &(&f * &a[col][j]);
                }
                b[r] = &b[r] - &(&f * &b[col]);
            }
        }
    }
    Some(b)
}

/// Eliminates the controls via `∂H/∂u = 0` and assembles system (11).
pub fn foc_eliminate(model: &ControlModel) -> Result<StateCostateSystem, DynError> {
    foc_eliminate_with(model, None)
}

/// As [`foc_eliminate`], optionally with caller-supplied control laws `u = U(t,q,p)`.
pub fn foc_eliminate_with(
    model: &ControlModel,
    manual: Option<Vec<Expr>>,
) -> Result<StateCostateSystem, DynError> {
    model.validate()?;
    let h = model.bound(&model.hamiltonian)?;
    let gamma = model
        .discount
        .iter()
        .map(|g| model.bound(g))
        .collect::<Result<Vec<_>, _>>()?;
    let focs: Vec<Expr> = model.controls.iter().map(|u| differentiate(&h, u)).collect();

    let control_laws = match manual {
        Some(laws) => laws,
        None => {
            let mut laws = Vec::new();
            for (u, g) in model.controls.iter().zip(&focs) {
                if model.controls.iter().any(|v| v != u && g.contains(v)) {
                    return Err(DynError::ManualControlLaw {
                        control: u.to_string(),
                        reason: "first-order conditions are coupled".into(),
                    });
                }
                let law = solve_single_power(g, u).map_err(|reason| DynError::ManualControlLaw {
                    control: u.to_string(),
                    reason,
                })?;
                laws.push(law);
            }
            laws
        }
    };
    let ubind: Bindings = model.controls.iter().cloned().zip(control_laws.iter().cloned()).collect();

    // p = P(t, q, u) when the conditions are linear in the costates
    let costate_laws = if focs.len() == model.costates.len() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        let zero_p: Bindings = model.costates.iter().map(|p| (p.clone(), Expr::zero())).collect();
        let mut linear = true;
        for g in &focs {
            let row: Vec<Expr> = model.costates.iter().map(|p| differentiate(g, p)).collect();
            if row.iter().any(|c| model.costates.iter().any(|p| c.contains(p))) {
                linear = false;
            }
            a.push(row);
            b.push(-substitute(g, &zero_p)?);
        }
        if linear {
            symbolic_linear_solve(a, b)
        } else {
            None
        }
    } else {
        None
    };

    let mut qdot = Vec::new();
    let mut pdot = Vec::new();
    for (i, (q, p)) in model.states.iter().zip(&model.costates).enumerate() {
        qdot.push(substitute(&differentiate(&h, p), &ubind)?);
        pdot.push(substitute(&(gamma[i].clone() - differentiate(&h, q)), &ubind)?);
    }
    let sys = StateCostateSystem {
        model: model.clone(),
        hamiltonian: h,
        gamma,
        control_laws,
        costate_laws,
        qdot,
        pdot,
    };
    for (u, g) in model.controls.iter().zip(&focs) {
        let r = sys.to_tqp(g)?;
        if !sys.is_zero(&r) {
            return Err(DynError::ManualControlLaw {
                control: u.to_string(),
                reason: format!("control law does not satisfy the first-order condition (residual {r})"),
            });
        }
    }
    Ok(sys)
}

impl StateCostateSystem {
    pub fn n(&self) -> usize {
        self.model.states.len()
    }

    pub fn time(&self) -> &Symbol {
        &self.model.time
    }

    pub fn states(&self) -> &[Symbol] {
        &self.model.states
    }

    pub fn costates(&self) -> &[Symbol] {
        &self.model.costates
    }

    pub fn controls(&self) -> &[Symbol] {
        &self.model.controls
    }

    /// Replaces controls by their laws: an expression in `(t, q, p)`.
    pub fn to_tqp(&self, e: &Expr) -> Result<Expr, SymError> {
        let b: Bindings = self
            .controls()
            .iter()
            .cloned()
            .zip(self.control_laws.iter().cloned())
            .collect();
        substitute(e, &b)
    }

    /// Replaces costates by the inverted first-order conditions: an expression in `(t, q, u)`.
    pub fn to_tqu(&self, e: &Expr) -> Result<Expr, DynError> {
        let laws = self
            .costate_laws
            .as_ref()
            .ok_or_else(|| DynError::CostateLaw("first-order conditions are not linear in the costates".into()))?;
        let b: Bindings = self.costates().iter().cloned().zip(laws.iter().cloned()).collect();
        Ok(substitute(e, &b)?)
    }

    /// `H(t, q, p)` with the controls eliminated.
    pub fn hamiltonian_tqp(&self) -> Result<Expr, SymError> {
        self.to_tqp(&self.hamiltonian)
    }

    /// Draws `(t, q, u)` on `[1/2, 2]` and maps to `p` through the costate laws,
    /// so fractional powers of costates stay in their real domain.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Option<BTreeMap<Symbol, f64>> {
        let mut env: BTreeMap<Symbol, f64> = BTreeMap::new();
        env.insert(self.time().clone(), rng.gen_range(0.5..2.0));
        for s in self.states().iter().chain(self.model.free_params().iter()) {
            env.insert(s.clone(), rng.gen_range(0.5..2.0));
        }
        match &self.costate_laws {
            Some(laws) => {
                for u in self.controls() {
                    env.insert(u.clone(), rng.gen_range(0.5..2.0));
                }
                for (p, law) in self.costates().iter().zip(laws) {
                    let v = eval_at(law, &env).ok()?;
                    env.insert(p.clone(), v);
                }
            }
            None => {
                for p in self.costates() {
                    env.insert(p.clone(), rng.gen_range(0.5..2.0));
                }
                for (u, law) in self.controls().iter().zip(&self.control_laws) {
                    let v = eval_at(law, &env).ok()?;
                    env.insert(u.clone(), v);
                }
            }
        }
        Some(env)
    }

    pub fn zero_verdict(&self, e: &Expr) -> Verdict {
        ZeroTest::default().check_with(e, |rng| self.sample(rng))
    }

    pub fn is_zero(&self, e: &Expr) -> bool {
        self.zero_verdict(e).is_zero()
    }
}

/// `∂e/∂t + Σ q̇ⁱ ∂e/∂qⁱ + Σ ṗᵢ ∂e/∂pᵢ` on the solutions of `sys`.
pub fn total_derivative_on_solutions(e: &Expr, sys: &StateCostateSystem) -> Result<Expr, SymError> {
    let e = sys.to_tqp(e)?;
    let mut terms = vec![differentiate(&e, sys.time())];
    for (i, q) in sys.states().iter().enumerate() {
        terms.push(&sys.qdot[i] * &differentiate(&e, q));
    }
    for (i, p) in sys.costates().iter().enumerate() {
        terms.push(&sys.pdot[i] * &differentiate(&e, p));
    }
    Ok(Expr::add(terms))
}

/// A generator `ξ∂ₜ + ηⁱ∂_{qⁱ} + ζᵢ∂_{pᵢ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryCandidate {
    pub xi: Expr,
    pub eta: Vec<Expr>,
    pub zeta: Option<Vec<Expr>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointSymmetryReport {
    pub holds: bool,
    /// First-condition residuals, then second-condition residuals.
    pub residuals: Vec<Expr>,
    pub derived_zeta: Option<Vec<Expr>>,
}

fn apply_generator(x: &SymmetryCandidate, zeta: &[Expr], f: &Expr, sys: &StateCostateSystem) -> Expr {
    let mut terms = vec![&x.xi * &differentiate(f, sys.time())];
    for (i, q) in sys.states().iter().enumerate() {
        terms.push(&x.eta[i] * &differentiate(f, q));
    }
    for (i, p) in sys.costates().iter().enumerate() {
        terms.push(&zeta[i] * &differentiate(f, p));
    }
    Expr::add(terms)
}

/// Evaluates both point-symmetry conditions of the current-value system.
///
/// With `ζ` absent and one state, `ζ` is solved from the first condition.
pub fn point_symmetry_check(
    x: &SymmetryCandidate,
    sys: &StateCostateSystem,
) -> Result<PointSymmetryReport, DynError> {
    let n = sys.n();
    if x.eta.len() != n {
        return Err(DynError::Model("eta has the wrong length".into()));
    }
    let dxi = total_derivative_on_solutions(&x.xi, sys)?;
    let (zeta, derived) = match &x.zeta {
        Some(z) => (z.clone(), None),
        None => {
            if n != 1 {
                return Err(DynError::ZetaUnderdetermined(
                    "zeta must be supplied when there is more than one state".into(),
                ));
            }
            let f = &sys.qdot[0];
            let fp = differentiate(f, &sys.costates()[0]);
            if sys.is_zero(&fp) {
                return Err(DynError::ZetaUnderdetermined(
                    "the state equation does not depend on the costate".into(),
                ));
            }
            // D(η) − F·D(ξ) − ξF_t − ηF_q − ζF_p = 0
            let a = total_derivative_on_solutions(&x.eta[0], sys)?
                - f * &dxi
                - &x.xi * &differentiate(f, sys.time())
                - &x.eta[0] * &differentiate(f, &sys.states()[0]);
            let z = vec![a / fp];
            (z.clone(), Some(z))
        }
    };
    let mut residuals = Vec::with_capacity(2 * n);
    for i in 0..n {
        let r = total_derivative_on_solutions(&x.eta[i], sys)?
            - &sys.qdot[i] * &dxi
            - apply_generator(x, &zeta, &sys.qdot[i], sys);
        residuals.push(r);
    }
    for i in 0..n {
        let r = total_derivative_on_solutions(&zeta[i], sys)?
            - &sys.pdot[i] * &dxi
            - apply_generator(x, &zeta, &sys.pdot[i], sys);
        residuals.push(r);
    }
    let holds = residuals.iter().all(|r| sys.is_zero(r));
    Ok(PointSymmetryReport {
        holds,
        residuals,
        derived_zeta: derived,
    })
}
