//! First integrals `I = pᵢηⁱ − ξH − B` of partial-Hamiltonian operators.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::detsolve::PHOperator;
use crate::dynsys::{total_derivative_on_solutions, DynError, StateCostateSystem};
use crate::symcore::{differentiate, Compiled, Expr, SymError, Symbol};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum IntegralError {
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error(transparent)]
    Dyn(#[from] DynError),
    #[error("internal consistency: {0}")]
    Internal(String),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Verification {
    pub symbolic: bool,
    pub max_drift: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FirstIntegral {
    pub label: String,
    /// `I(t, q, p)`.
    pub costate_form: Expr,
    /// `I(t, q, u)` through the inverted first-order conditions, when available.
    pub control_form: Option<Expr>,
    /// Label of the generating operator.
    pub source: String,
    pub rate: Option<crate::Rational>,
    pub verification: Verification,
}

/// `Σ pᵢηⁱ − ξH − B` before the controls are eliminated.
fn raw_integral(x: &PHOperator, sys: &StateCostateSystem) -> Expr {
    let mut terms = vec![-(&x.xi * &sys.hamiltonian), -x.b.clone()];
    for (p, eta) in sys.costates().iter().zip(&x.eta) {
        terms.push(Expr::symbol(p) * eta);
    }
    Expr::add(terms)
}

/// Builds the integral of an operator and checks `D(I) = 0` on solutions.
pub fn build_first_integral(x: &PHOperator, sys: &StateCostateSystem) -> Result<FirstIntegral, IntegralError> {
    let raw = raw_integral(x, sys);
    let costate_form = sys.to_tqp(&raw)?;
    let control_form = match sys.to_tqu(&raw) {
        Ok(e) => Some(e),
        Err(DynError::CostateLaw(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let di = total_derivative_on_solutions(&costate_form, sys)?;
    if !sys.is_zero(&di) {
        return Err(IntegralError::Internal(format!(
            "integral of {} is not conserved: D(I) = {di}",
            x.label
        )));
    }
    let label = match x.label.strip_prefix('X') {
        Some(rest) => format!("I{rest}"),
        None => format!("I[{}]", x.label),
    };
    Ok(FirstIntegral {
        label,
        costate_form,
        control_form,
        source: x.label.clone(),
        rate: x.rate.clone(),
        verification: Verification { symbolic: true, max_drift: None },
    })
}

/// Symbolic conservation residual `D(I)` on solutions, without the release check.
pub fn conservation_residual(i: &Expr, sys: &StateCostateSystem) -> Result<Expr, IntegralError> {
    Ok(total_derivative_on_solutions(i, sys)?)
}

/// Numeric rank of `∂(I₁..I_m)/∂(q, p)`, maximised over random sample points.
pub fn independence_rank(integrals: &[Expr], sys: &StateCostateSystem) -> Result<usize, IntegralError> {
    if integrals.is_empty() {
        return Ok(0);
    }
    let mut vars: Vec<Symbol> = vec![sys.time().clone()];
    vars.extend(sys.states().iter().cloned());
    vars.extend(sys.costates().iter().cloned());
    for s in sys.model.free_params() {
        vars.push(s);
    }
    let coords: Vec<Symbol> = sys.states().iter().chain(sys.costates()).cloned().collect();
    let mut jac: Vec<Vec<Compiled<f64>>> = Vec::new();
    for i in integrals {
        let i = sys.to_tqp(i)?;
        let row = coords
            .iter()
            .map(|x| {
                Compiled::new(&differentiate(&i, x), &vars)
                    .map_err(|e| IntegralError::Internal(format!("cannot evaluate Jacobian: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        jac.push(row);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x4a4b);
    let mut best = 0;
    let mut good = 0;
    for _ in 0..200 {
        if good >= 8 {
            break;
        }
        let Some(env) = sys.sample(&mut rng) else { continue };
        let vals: Vec<f64> = vars.iter().map(|v| env.get(v).copied().unwrap_or(1.0)).collect();
        let mut m = DMatrix::<f64>::zeros(jac.len(), coords.len());
        let mut ok = true;
        for (r, row) in jac.iter().enumerate() {
            for (c, f) in row.iter().enumerate() {
                match f.eval(&vals) {
                    Ok(v) => m[(r, c)] = v,
                    Err(_) => ok = false,
                }
            }
        }
        if !ok {
            continue;
        }
        good += 1;
        let sv = m.singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let rank = sv.iter().filter(|s| **s > 1e-8 * smax && smax > 0.0).count();
        best = best.max(rank);
    }
    if good == 0 {
        return Err(IntegralError::Internal("no valid sample point for the Jacobian".into()));
    }
    Ok(best)
}
