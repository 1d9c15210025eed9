//! Reductions driven by first integrals: costate (or state) inversion, the
//! scalar state equation, closed forms, quadrature and transversality.

pub mod ode;
pub mod quadrature;
pub mod solve;
pub mod transversality;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use ode::{classify, exp_poly_of, OdeShape};
pub use quadrature::{consumption_growth, control_growth, quadrature_form, separate_factors, Quadrature};
pub use solve::{isolate, linear_coeffs, two_monomial_root, Isolated};
pub use transversality::{transversality_check, TailOptions, Transversality};

use crate::dynsys::{DynError, StateCostateSystem};
use crate::integrals::FirstIntegral;
use crate::symcore::{differentiate, subs1, substitute, Bindings, Expr, SymError, Symbol, Verdict, ZeroTest};
use crate::Rational;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ReduceError {
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error(transparent)]
    Dyn(#[from] DynError),
    #[error("reduction requires manual inversion: {0}")]
    ManualInversion(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("no first integral matches `{0}`")]
    UnknownIntegral(String),
}

/// Picks an integral by operator rate or by label (`I4`, `X4`).
#[derive(Clone, Debug, PartialEq)]
pub enum Selector {
    Rate(Rational),
    Label(String),
}

impl Selector {
    fn matches(&self, i: &FirstIntegral) -> bool {
        match self {
            Selector::Rate(r) => i.rate.as_ref() == Some(r),
            Selector::Label(l) => &i.label == l || &i.source == l,
        }
    }
}

impl std::fmt::Display for Selector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Selector::Rate(r) => write!(f, "rate {}", crate::poly::rational_text(r)),
            Selector::Label(l) => f.write_str(l),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegralChoice {
    pub selector: Selector,
    pub constant: Symbol,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolvePlan {
    pub uses: Vec<IntegralChoice>,
    /// Values of integration constants (`A1 = 0`).
    pub values: BTreeMap<Symbol, Rational>,
    /// Initial data keyed by state, costate or control name.
    pub initial: BTreeMap<Symbol, Rational>,
}

/// What `I = A` was solved for.
#[derive(Clone, Debug, PartialEq)]
pub enum Solved {
    Costate { index: usize, expr: Expr },
    State(Isolated),
    Control(Isolated),
}

impl Solved {
    pub fn equation(&self, sys: &StateCostateSystem) -> (Expr, Expr) {
        match self {
            Solved::Costate { index, expr } => (Expr::symbol(&sys.costates()[*index]), expr.clone()),
            Solved::State(iso) | Solved::Control(iso) => {
                (Expr::pow(Expr::symbol(&iso.var), iso.power.clone()), iso.value.clone())
            }
        }
    }
}

/// Solves `I = a` for one costate (linear case) or, through the control form,
/// for a state or a control occurring in a single power.
pub fn costate_from_integral(i: &FirstIntegral, a: &Symbol, sys: &StateCostateSystem) -> Result<Solved, ReduceError> {
    let rel = &i.costate_form - &Expr::symbol(a);
    for (idx, p) in sys.costates().iter().enumerate() {
        if let Some((a0, a1)) = linear_coeffs(&rel, p) {
            if a1.is_zero() || sys.costates().iter().any(|r| a1.contains(r) || a0.contains(r)) {
                continue;
            }
            let expr = -(&a0 / &a1);
            check_zero(&subs1(&rel, p, &expr), "costate inversion")?;
            return Ok(Solved::Costate { index: idx, expr });
        }
    }
    let Some(iu) = &i.control_form else {
        return Err(ReduceError::ManualInversion(format!(
            "{} is not linear in a costate and has no control form",
            i.label
        )));
    };
    let rel = iu - &Expr::symbol(a);
    for q in sys.states() {
        if let Some(iso) = isolate(&rel, q) {
            check_zero(&iso.substitute_into(&rel), "state inversion")?;
            return Ok(Solved::State(iso));
        }
    }
    for u in sys.controls() {
        if let Some(iso) = isolate(&rel, u) {
            check_zero(&iso.substitute_into(&rel), "control inversion")?;
            return Ok(Solved::Control(iso));
        }
    }
    Err(ReduceError::ManualInversion(format!("{} = {a} is outside the solvable fragment", i.label)))
}

fn check_zero(e: &Expr, what: &str) -> Result<(), ReduceError> {
    if e.is_zero() || ZeroTest::default().check(e).is_zero() {
        Ok(())
    } else {
        Err(ReduceError::ManualInversion(format!("{what} does not satisfy the relation (residual {e})")))
    }
}

/// Relation closing the state equation.
#[derive(Clone, Debug, PartialEq)]
pub enum Closure {
    /// `p = P(t, q)`.
    Costate(Expr),
    /// `u = C(t, q)`.
    Control(Expr),
}

/// `q̇ = f(t, q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarOde {
    pub time: Symbol,
    pub state: Symbol,
    pub rhs: Expr,
}

impl ScalarOde {
    pub fn equation(&self) -> (Expr, Expr) {
        (Expr::func(&self.state, &self.time, 1), self.rhs.clone())
    }
}

fn one_dimensional(sys: &StateCostateSystem) -> Result<(), ReduceError> {
    if sys.n() != 1 || sys.controls().len() != 1 {
        return Err(ReduceError::Unsupported(
            "closed-form reduction is implemented for one state and one control".into(),
        ));
    }
    Ok(())
}

/// `∂H/∂p` and `Γ − ∂H/∂q` with the controls left in place.
pub(crate) fn raw_rhs(sys: &StateCostateSystem) -> (Vec<Expr>, Vec<Expr>) {
    let h = &sys.hamiltonian;
    let qdot = sys.costates().iter().map(|p| differentiate(h, p)).collect();
    let pdot = sys
        .states()
        .iter()
        .zip(&sys.gamma)
        .map(|(q, g)| g - &differentiate(h, q))
        .collect();
    (qdot, pdot)
}

/// Eliminates the costate (or the control) from the state equation.
pub fn reduce_state_ode(sys: &StateCostateSystem, closure: &Closure) -> Result<ScalarOde, ReduceError> {
    one_dimensional(sys)?;
    let (q, p, u) = (&sys.states()[0], &sys.costates()[0], &sys.controls()[0]);
    let rhs = match closure {
        Closure::Costate(pe) => subs1(&sys.qdot[0], p, pe),
        Closure::Control(ce) => {
            let (qdot, _) = raw_rhs(sys);
            let mut f = qdot[0].clone();
            if f.contains(p) {
                f = sys.to_tqu(&f)?;
            }
            subs1(&f, u, ce)
        }
    };
    if rhs.contains(p) || rhs.contains(u) {
        return Err(ReduceError::Unsupported(format!("state equation still depends on {p} or {u}: {rhs}")));
    }
    Ok(ScalarOde {
        time: sys.time().clone(),
        state: q.clone(),
        rhs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionKind {
    ClosedForm,
    Quadrature,
    Numeric,
}

impl SolutionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolutionKind::ClosedForm => "closed-form",
            SolutionKind::Quadrature => "quadrature",
            SolutionKind::Numeric => "numeric",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathRef {
    State(usize),
    Control(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstantRole {
    /// Value of a first integral.
    Integral,
    /// Constant of integration of the reduced equation.
    Integration,
    /// Initial value of a path.
    Initial(PathRef),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyConstant {
    pub symbol: Symbol,
    pub role: ConstantRole,
    pub value: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionFamily {
    pub kind: SolutionKind,
    pub time: Symbol,
    /// Paths in `t` and the constants; empty unless closed-form.
    pub state: Vec<Expr>,
    pub costate: Vec<Expr>,
    pub control: Vec<Expr>,
    pub constants: Vec<FamilyConstant>,
    pub conditions: Vec<String>,
}

impl SolutionFamily {
    fn numeric(sys: &StateCostateSystem) -> Self {
        SolutionFamily {
            kind: SolutionKind::Numeric,
            time: sys.time().clone(),
            state: Vec::new(),
            costate: Vec::new(),
            control: Vec::new(),
            constants: Vec::new(),
            conditions: Vec::new(),
        }
    }

    pub fn constant(&self, s: &Symbol) -> Option<&FamilyConstant> {
        self.constants.iter().find(|c| &c.symbol == s)
    }

    /// Constants without a value that the tail test may select.
    pub fn unbound(&self) -> Vec<Symbol> {
        self.constants
            .iter()
            .filter(|c| c.value.is_none() && !matches!(c.role, ConstantRole::Initial(_)))
            .map(|c| c.symbol.clone())
            .collect()
    }

    /// Records values for constants; paths stay symbolic.
    pub fn bind(&self, values: &BTreeMap<Symbol, Rational>) -> SolutionFamily {
        let mut out = self.clone();
        for c in &mut out.constants {
            if let Some(v) = values.get(&c.symbol) {
                c.value = Some(v.clone());
            }
        }
        out
    }

    /// Substitutes a constant everywhere and drops it from the list.
    pub fn fix(&self, s: &Symbol, value: &Expr) -> SolutionFamily {
        let mut out = self.clone();
        for e in out.state.iter_mut().chain(out.costate.iter_mut()).chain(out.control.iter_mut()) {
            *e = subs1(e, s, value);
        }
        out.constants.retain(|c| &c.symbol != s);
        out
    }

    /// Paths with every valued constant substituted.
    pub fn evaluated_paths(&self) -> (Vec<Expr>, Vec<Expr>, Vec<Expr>) {
        let b: Bindings = self
            .constants
            .iter()
            .filter_map(|c| c.value.as_ref().map(|v| (c.symbol.clone(), Expr::num(v.clone()))))
            .collect();
        let f = |v: &[Expr]| v.iter().map(|e| crate::symcore::substitute_unchecked(e, &b)).collect();
        (f(&self.state), f(&self.costate), f(&self.control))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn verdict_check(name: &str, residual: &Expr) -> Check {
    let v = if residual.is_zero() {
        Verdict::Structural
    } else {
        ZeroTest::default().check(residual)
    };
    let detail = match &v {
        Verdict::Structural => "residual 0".to_string(),
        Verdict::Numeric { max_scaled } => format!("residual vanishes numerically (max {max_scaled:.1e})"),
        other => format!("residual {residual} ({other:?})"),
    };
    Check {
        name: name.into(),
        passed: v.is_zero(),
        detail,
    }
}

/// Substitutes the closed-form paths into the canonical system, the reduced
/// equation and the initial conditions.
pub fn closed_form_check(family: &SolutionFamily, sys: &StateCostateSystem, ode: Option<&ScalarOde>) -> Vec<Check> {
    let mut out = Vec::new();
    if family.kind != SolutionKind::ClosedForm {
        return out;
    }
    let t = &family.time;
    let mut b = Bindings::new();
    for (s, e) in sys.states().iter().zip(&family.state) {
        b.insert(s.clone(), e.clone());
    }
    for (s, e) in sys.costates().iter().zip(&family.costate) {
        b.insert(s.clone(), e.clone());
    }
    for (s, e) in sys.controls().iter().zip(&family.control) {
        b.insert(s.clone(), e.clone());
    }
    let on_path = |e: &Expr| crate::symcore::substitute_unchecked(e, &b);
    let (qdot, pdot) = raw_rhs(sys);
    for (i, q) in sys.states().iter().enumerate() {
        if let Some(path) = family.state.get(i) {
            let r = differentiate(path, t) - on_path(&qdot[i]);
            out.push(verdict_check(&format!("{q} equation"), &r));
        }
    }
    for (i, p) in sys.costates().iter().enumerate() {
        if let Some(path) = family.costate.get(i) {
            let r = differentiate(path, t) - on_path(&pdot[i]);
            out.push(verdict_check(&format!("{p} equation"), &r));
        }
    }
    for u in sys.controls() {
        if family.control.is_empty() {
            break;
        }
        let r = on_path(&differentiate(&sys.hamiltonian, u));
        out.push(verdict_check(&format!("first-order condition for {u}"), &r));
    }
    if let (Some(ode), Some(path)) = (ode, family.state.first()) {
        let r = differentiate(path, t) - subs1(&ode.rhs, &ode.state, path);
        out.push(verdict_check(&format!("reduced {} equation", ode.state), &r));
    }
    for c in &family.constants {
        if let ConstantRole::Initial(which) = c.role {
            let (name, path) = match which {
                PathRef::State(i) => (&sys.states()[i], &family.state[i]),
                PathRef::Control(a) => (&sys.controls()[a], &family.control[a]),
            };
            let at0 = subs1(path, t, &Expr::zero());
            let mut ck = verdict_check(&format!("{name}(0) = {}", c.symbol), &(&at0 - &Expr::symbol(&c.symbol)));
            if ck.passed {
                ck.detail = format!("{name}(0) = {at0}");
            }
            out.push(ck);
        }
    }
    out
}

/// Value of each state path at `t = 0`.
pub fn initial_values(family: &SolutionFamily) -> Vec<Expr> {
    family.state.iter().map(|e| subs1(e, &family.time, &Expr::zero())).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equation {
    pub label: String,
    pub lhs: Expr,
    pub rhs: Expr,
}

impl Equation {
    fn new(label: &str, lhs: Expr, rhs: Expr) -> Self {
        Equation { label: label.into(), lhs, rhs }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    pub integrals_used: Vec<(String, Symbol)>,
    pub steps: Vec<Equation>,
    pub ode: Option<ScalarOde>,
    pub shape: Option<String>,
    pub family: SolutionFamily,
    pub quadrature: Option<Quadrature>,
    pub checks: Vec<Check>,
    pub notices: Vec<String>,
}

struct Names {
    taken: BTreeSet<Symbol>,
}

impl Names {
    fn new(sys: &StateCostateSystem, integrals: &[FirstIntegral]) -> Self {
        let mut taken: BTreeSet<Symbol> = BTreeSet::new();
        let m = &sys.model;
        taken.insert(m.time.clone());
        taken.extend(m.states.iter().cloned());
        taken.extend(m.costates.iter().cloned());
        taken.extend(m.controls.iter().cloned());
        taken.extend(m.params.keys().cloned());
        taken.extend(m.free_params());
        for i in integrals {
            taken.extend(i.costate_form.symbols());
        }
        Names { taken }
    }

    fn claim(&mut self, s: &Symbol) {
        self.taken.insert(s.clone());
    }

    fn fresh(&mut self, preferred: &[String]) -> Symbol {
        for p in preferred {
            let s = Symbol::new(p);
            if !self.taken.contains(&s) {
                self.taken.insert(s.clone());
                return s;
            }
        }
        let mut k = 1;
        loop {
            let s = Symbol::new(&format!("C{k}"));
            if !self.taken.contains(&s) {
                self.taken.insert(s.clone());
                return s;
            }
            k += 1;
        }
    }

    /// `A1 → A2`, `a1 → a3` when `a2` is taken, …
    fn next_after(&mut self, used: &[Symbol]) -> Symbol {
        let mut prefix = "A".to_string();
        let mut max = 0;
        for s in used {
            let name = s.as_str();
            let digits = name.trim_start_matches(|c: char| !c.is_ascii_digit());
            if let Ok(k) = digits.parse::<u32>() {
                prefix = name[..name.len() - digits.len()].to_string();
                max = max.max(k);
            }
        }
        let candidates: Vec<String> = (max + 1..max + 20).map(|k| format!("{prefix}{k}")).collect();
        self.fresh(&candidates)
    }
}

fn select<'a>(integrals: &'a [FirstIntegral], sel: &Selector) -> Result<&'a FirstIntegral, ReduceError> {
    integrals
        .iter()
        .find(|i| sel.matches(i))
        .ok_or_else(|| ReduceError::UnknownIntegral(sel.to_string()))
}

/// Chooses integrals when the model gives no hint: a costate-linear integral,
/// then a pair solvable for the control and the state, then any invertible one.
pub fn auto_plan(sys: &StateCostateSystem, integrals: &[FirstIntegral]) -> Vec<IntegralChoice> {
    let c = |i: &FirstIntegral, k: usize| IntegralChoice {
        selector: Selector::Label(i.label.clone()),
        constant: Symbol::new(&format!("A{k}")),
    };
    let a = Symbol::new("A1");
    for i in integrals {
        if let Ok(Solved::Costate { .. }) = costate_from_integral(i, &a, sys) {
            return vec![c(i, 1)];
        }
    }
    for i in integrals {
        if let Ok(Solved::Control(_)) = costate_from_integral(i, &a, sys) {
            for j in integrals {
                if let Ok(Solved::State(_)) = costate_from_integral(j, &a, sys) {
                    return vec![c(j, 1), c(i, 2)];
                }
            }
        }
    }
    for i in integrals {
        if costate_from_integral(i, &a, sys).is_ok() {
            return vec![c(i, 1)];
        }
    }
    Vec::new()
}

/// Runs the reduction chosen by `plan` (or [`auto_plan`] when it names none).
pub fn reduce(sys: &StateCostateSystem, integrals: &[FirstIntegral], plan: &SolvePlan) -> Result<Reduction, ReduceError> {
    one_dimensional(sys)?;
    let uses = if plan.uses.is_empty() {
        auto_plan(sys, integrals)
    } else {
        plan.uses.clone()
    };
    if uses.is_empty() {
        return Err(ReduceError::ManualInversion("no first integral can be inverted".into()));
    }
    let mut names = Names::new(sys, integrals);
    let chosen: Vec<(&FirstIntegral, Symbol)> = uses
        .iter()
        .map(|u| select(integrals, &u.selector).map(|i| (i, u.constant.clone())))
        .collect::<Result<_, _>>()?;
    for (_, a) in &chosen {
        names.claim(a);
    }
    let mut red = Reduction {
        integrals_used: chosen.iter().map(|(i, a)| (i.label.clone(), a.clone())).collect(),
        steps: Vec::new(),
        ode: None,
        shape: None,
        family: SolutionFamily::numeric(sys),
        quadrature: None,
        checks: Vec::new(),
        notices: Vec::new(),
    };
    for (i, a) in &chosen {
        let lhs = i.control_form.clone().unwrap_or_else(|| i.costate_form.clone());
        red.steps.push(Equation::new(&format!("{} integral", i.label), lhs, Expr::symbol(a)));
    }
    let integral_constants: Vec<FamilyConstant> = chosen
        .iter()
        .map(|(_, a)| FamilyConstant {
            symbol: a.clone(),
            role: ConstantRole::Integral,
            value: plan.values.get(a).cloned(),
        })
        .collect();

    match chosen.as_slice() {
        [(i, a)] => reduce_one(sys, i, a, plan, &mut names, integral_constants, &mut red)?,
        [(i1, a1), (i2, a2)] => reduce_two(sys, (i1, a1), (i2, a2), &mut names, integral_constants, &mut red)?,
        _ => {
            return Err(ReduceError::Unsupported(
                "at most two integrals are used for one-state models".into(),
            ))
        }
    }
    red.family = red.family.bind(&plan.values);
    red.checks = closed_form_check(&red.family, sys, red.ode.as_ref());
    Ok(red)
}

/// Finishes a closure into a scalar equation and, when a pattern applies, a closed form.
fn close_with(
    sys: &StateCostateSystem,
    closure: Closure,
    constants: Vec<FamilyConstant>,
    names: &mut Names,
    red: &mut Reduction,
) -> Result<(), ReduceError> {
    let (q, u, t) = (&sys.states()[0], &sys.controls()[0], sys.time());
    let ode = reduce_state_ode(sys, &closure)?;
    red.steps.push(Equation::new("state equation", ode.equation().0, ode.rhs.clone()));
    let mut constants = constants;
    let shape = classify(&ode.rhs, q, t);
    let path = match &shape {
        Some(OdeShape::Linear { a, forcing }) => {
            let used: Vec<Symbol> = constants.iter().map(|c| c.symbol.clone()).collect();
            let c = names.next_after(&used);
            constants.push(FamilyConstant {
                symbol: c.clone(),
                role: ConstantRole::Integration,
                value: None,
            });
            Some(ode::solve_linear(a, forcing, &c, t))
        }
        Some(OdeShape::Bernoulli { a, b, n }) => {
            let x0 = names.fresh(&[format!("{q}0"), format!("{q}_0")]);
            constants.push(FamilyConstant {
                symbol: x0.clone(),
                role: ConstantRole::Initial(PathRef::State(0)),
                value: None,
            });
            Some(ode::solve_bernoulli(a, b, n, &x0, t))
        }
        None => None,
    };
    red.shape = shape.as_ref().map(|s| s.name().to_string());
    red.ode = Some(ode);
    let Some(qt) = path else {
        red.notices
            .push("no closed-form pattern for the state equation; solutions are numeric".into());
        red.family.constants = constants;
        return Ok(());
    };
    red.steps.push(Equation::new("state path", Expr::func(q, t, 0), qt.clone()));
    let (pt, ut) = match &closure {
        Closure::Costate(pe) => {
            let pt = subs1(pe, q, &qt);
            let mut b = Bindings::new();
            b.insert(q.clone(), qt.clone());
            b.insert(sys.costates()[0].clone(), pt.clone());
            (pt, substitute(&sys.control_laws[0], &b)?)
        }
        Closure::Control(ce) => {
            let ut = subs1(ce, q, &qt);
            let law = sys
                .costate_laws
                .as_ref()
                .ok_or_else(|| ReduceError::Unsupported("costate law unavailable".into()))?;
            let mut b = Bindings::new();
            b.insert(q.clone(), qt.clone());
            b.insert(u.clone(), ut.clone());
            (substitute(&law[0], &b)?, ut)
        }
    };
    red.family = SolutionFamily {
        kind: SolutionKind::ClosedForm,
        time: t.clone(),
        state: vec![qt],
        costate: vec![pt],
        control: vec![ut],
        constants,
        conditions: sys.model.guards.iter().map(|g| g.describe()).collect(),
    };
    Ok(())
}

fn reduce_one(
    sys: &StateCostateSystem,
    i: &FirstIntegral,
    a: &Symbol,
    plan: &SolvePlan,
    names: &mut Names,
    constants: Vec<FamilyConstant>,
    red: &mut Reduction,
) -> Result<(), ReduceError> {
    let u = &sys.controls()[0];
    let solved = costate_from_integral(i, a, sys)?;
    let (lhs, rhs) = solved.equation(sys);
    match &solved {
        Solved::Costate { expr, .. } => {
            red.steps.push(Equation::new("costate law", lhs, rhs));
            close_with(sys, Closure::Costate(expr.clone()), constants, names, red)
        }
        Solved::Control(iso) => {
            red.steps.push(Equation::new("control law", lhs, rhs));
            close_with(sys, Closure::Control(iso.solution()), constants, names, red)
        }
        Solved::State(iso) => {
            red.steps.push(Equation::new("state law", lhs, rhs));
            match quadrature_form(sys, iso, names.fresh(&["S".into(), "S_".into()])) {
                Ok(q) => red.quadrature = Some(q),
                Err(e) => red.notices.push(format!("no quadrature pattern: {e}")),
            }
            let zero = plan.values.get(a).is_some_and(num_traits::Zero::is_zero);
            let iu = i.control_form.as_ref().expect("state inversion uses the control form");
            match two_monomial_root(iu, u).filter(|_| zero) {
                Some(root) => {
                    red.steps
                        .push(Equation::new(&format!("control law ({a} = 0)"), Expr::symbol(u), root.solution()));
                    let constants = constants.into_iter().filter(|c| &c.symbol != a).collect();
                    close_with(sys, Closure::Control(root.solution()), constants, names, red)
                }
                None => {
                    red.family.kind = if red.quadrature.is_some() {
                        SolutionKind::Quadrature
                    } else {
                        SolutionKind::Numeric
                    };
                    red.family.constants = constants;
                    red.notices
                        .push(format!("for {a} != 0 the solution is given by quadrature and numerically"));
                    Ok(())
                }
            }
        }
    }
}

fn reduce_two(
    sys: &StateCostateSystem,
    first: (&FirstIntegral, &Symbol),
    second: (&FirstIntegral, &Symbol),
    names: &mut Names,
    mut constants: Vec<FamilyConstant>,
    red: &mut Reduction,
) -> Result<(), ReduceError> {
    let (q, u, t) = (&sys.states()[0], &sys.controls()[0], sys.time());
    let form = |i: &FirstIntegral| {
        i.control_form
            .clone()
            .ok_or_else(|| ReduceError::ManualInversion(format!("{} has no control form", i.label)))
    };
    let f1 = form(first.0)?;
    let f2 = form(second.0)?;
    // the integral free of the state gives the control path
    let ((ci, ca, cf), (si, sa, sf)) = if !f2.contains(q) {
        ((second.0, second.1, f2), (first.0, first.1, f1))
    } else if !f1.contains(q) {
        ((first.0, first.1, f1), (second.0, second.1, f2))
    } else {
        return Err(ReduceError::ManualInversion("neither integral is free of the state".into()));
    };
    let c_iso = isolate(&(&cf - &Expr::symbol(ca)), u)
        .ok_or_else(|| ReduceError::ManualInversion(format!("{} = {ca} cannot be solved for {u}", ci.label)))?;
    let q_iso = isolate(&(&sf - &Expr::symbol(sa)), q)
        .ok_or_else(|| ReduceError::ManualInversion(format!("{} = {sa} cannot be solved for {q}", si.label)))?;
    let mut ut = c_iso.solution();
    let law = q_iso.solution();
    red.steps.push(Equation::new("state law", Expr::symbol(q), law.clone()));

    // name the initial control and eliminate the integral constant it fixes
    let at0 = subs1(&ut, t, &Expr::zero());
    let u0 = names.fresh(&[format!("{u}0"), format!("{u}_0")]);
    let mut renamed = None;
    if at0.symbols() == vec![ca.clone()] {
        if let Some(iso) = isolate(&(&at0 - &Expr::symbol(&u0)), ca) {
            red.steps.push(Equation::new("initial control", Expr::symbol(ca), iso.solution()));
            ut = iso.substitute_into(&ut);
            renamed = Some(iso);
        }
    }
    let mut qt = subs1(&law, u, &ut);
    if let Some(iso) = &renamed {
        qt = iso.substitute_into(&qt);
        constants.retain(|c| c.symbol != iso.var);
        constants.push(FamilyConstant {
            symbol: u0.clone(),
            role: ConstantRole::Initial(PathRef::Control(0)),
            value: None,
        });
    }
    red.steps.push(Equation::new("control path", Expr::func(u, t, 0), ut.clone()));
    red.steps.push(Equation::new("state path", Expr::func(q, t, 0), qt.clone()));
    let laws = sys
        .costate_laws
        .as_ref()
        .ok_or_else(|| ReduceError::Unsupported("costate law unavailable".into()))?;
    let mut b = Bindings::new();
    b.insert(q.clone(), qt.clone());
    b.insert(u.clone(), ut.clone());
    let pt = substitute(&laws[0], &b)?;
    red.family = SolutionFamily {
        kind: SolutionKind::ClosedForm,
        time: t.clone(),
        state: vec![qt],
        costate: vec![pt],
        control: vec![ut],
        constants,
        conditions: sys.model.guards.iter().map(|g| g.describe()).collect(),
    };
    Ok(())
}
