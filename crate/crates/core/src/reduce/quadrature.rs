//! Growth-rate equation of the control and the separated quadrature.

use super::solve::Isolated;
use super::{one_dimensional, raw_rhs, ReduceError};
use crate::dynsys::StateCostateSystem;
use crate::symcore::{collect_by_exponent, differentiate, subs1, Expr, Node, Symbol, ZeroTest};

/// `u̇` as a function of `(t, q, u)`, from `ṗ` through the costate law `p = P(t, q, u)`.
pub fn control_growth(sys: &StateCostateSystem) -> Result<Expr, ReduceError> {
    one_dimensional(sys)?;
    let laws = sys
        .costate_laws
        .as_ref()
        .ok_or_else(|| ReduceError::Unsupported("costate law unavailable".into()))?;
    let (t, q, u) = (sys.time(), &sys.states()[0], &sys.controls()[0]);
    let law = &laws[0];
    let (qdot, pdot) = raw_rhs(sys);
    let qdot = sys.to_tqu(&qdot[0])?;
    let pdot = sys.to_tqu(&pdot[0])?;
    let pu = differentiate(law, u);
    if pu.is_zero() {
        return Err(ReduceError::Unsupported("costate law does not involve the control".into()));
    }
    let num = pdot - differentiate(law, t) - differentiate(law, q) * qdot;
    Ok(num / pu)
}

/// `u̇/u`.
pub fn consumption_growth(sys: &StateCostateSystem) -> Result<Expr, ReduceError> {
    let u = Expr::symbol(&sys.controls()[0]);
    Ok(control_growth(sys)? / u)
}

/// `S = u·e^{bt}` turning the growth equation into `T(t) dt = dS / Σ(S)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    pub symbol: Symbol,
    pub rate: crate::Rational,
    /// `u·e^{bt}`.
    pub substitution: Expr,
    /// `d/dt (u e^{bt})` along solutions, in `(t, u)`.
    pub growth: Expr,
    pub time_side: Expr,
    pub state_side: Expr,
    pub validated: bool,
}

impl Quadrature {
    /// `dS/dt = T(t) Σ(S)`.
    pub fn rhs(&self) -> Expr {
        &self.time_side * &self.state_side
    }
}

/// Splits a product `T(t)·Σ(S)`; numeric factors go with `T`.
pub fn separate_factors(rhs: &Expr, t: &Symbol, s: &Symbol) -> Result<(Expr, Expr), ReduceError> {
    if matches!(rhs.node(), Node::Add(_)) {
        return Err(ReduceError::Unsupported(format!("d{s}/d{t} = {rhs} does not factor")));
    }
    let mut time_side = Vec::new();
    let mut state_side = Vec::new();
    for f in rhs.factors() {
        match (f.contains(t), f.contains(s)) {
            (true, true) => return Err(ReduceError::Unsupported(format!("factor `{f}` mixes {t} and {s}"))),
            (false, true) => state_side.push(f),
            _ => time_side.push(f),
        }
    }
    Ok((Expr::mul(time_side), Expr::mul(state_side)))
}

/// Builds the separated form from the state law `qᵏ = V(t, u)`.
pub fn quadrature_form(sys: &StateCostateSystem, law: &Isolated, s: Symbol) -> Result<Quadrature, ReduceError> {
    sys.model.check_guards()?;
    let (t, u) = (sys.time(), &sys.controls()[0]);
    let growth = control_growth(sys)?;
    // b is minus the constant part of the coefficient of u
    let m = collect_by_exponent(&growth, u).map_err(|e| ReduceError::Unsupported(e.to_string()))?;
    let coeff = m
        .get(&Expr::one())
        .ok_or_else(|| ReduceError::Unsupported("growth equation has no term linear in the control".into()))?;
    let b = coeff
        .terms()
        .iter()
        .filter_map(|t| t.as_num().cloned())
        .fold(crate::Rational::from_integer(0.into()), |a, v| a + v);
    let b = -b;
    if num_traits::Zero::is_zero(&b) {
        return Err(ReduceError::Unsupported("growth equation has no constant rate".into()));
    }
    let eb = Expr::exp(Expr::num(b.clone()) * Expr::symbol(t));
    let growth_tu = law.substitute_into(&growth);
    let lifted = &eb * &(&growth_tu + &(Expr::num(b.clone()) * Expr::symbol(u)));
    let back = Expr::symbol(&s) * Expr::exp(Expr::num(-b.clone()) * Expr::symbol(t));
    let rhs = subs1(&lifted, u, &back);

    let (time_side, state_side) = separate_factors(&rhs, t, &s)?;
    let substitution = Expr::symbol(u) * eb.clone();
    // differentiate S = u e^{bt} back along the growth equation
    let check = subs1(&(&time_side * &state_side), &s, &substitution) - lifted.clone();
    let validated = check.is_zero() || ZeroTest::default().check(&check).is_zero();
    Ok(Quadrature {
        symbol: s,
        rate: b,
        substitution,
        growth: lifted,
        time_side,
        state_side,
        validated,
    })
}
