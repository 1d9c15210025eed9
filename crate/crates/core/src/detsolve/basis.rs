use std::collections::BTreeMap;

use num_traits::Zero;

use super::linsys::CoefficientSolution;
use super::{determining_residual, monomial_expr, Ansatz, DetError, Role};
use crate::dynsys::StateCostateSystem;
use crate::poly::ExpPoly;
use crate::symcore::{differentiate, Expr, ZeroTest};
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Searched,
    Catalog,
}

/// A verified partial-Hamiltonian operator `ξ∂ₜ + ηⁱ∂_{qⁱ}` with gauge `B`.
#[derive(Clone, Debug, PartialEq)]
pub struct PHOperator {
    pub label: String,
    pub xi: Expr,
    pub eta: Vec<Expr>,
    pub b: Expr,
    /// Common growth rate `λ` of the `e^{λt}` factors (searched operators).
    pub rate: Option<Rational>,
    pub provenance: Provenance,
    /// Verified only numerically because a rate is an approximation.
    pub approximate: bool,
}

impl PHOperator {
    pub fn new(label: &str, xi: Expr, eta: Vec<Expr>, b: Expr) -> Self {
        PHOperator {
            label: label.into(),
            xi,
            eta,
            b,
            rate: None,
            provenance: Provenance::Catalog,
            approximate: false,
        }
    }

    /// `a·X + b·Y` with combined gauge.
    pub fn combine(a: &Expr, x: &PHOperator, b: &Expr, y: &PHOperator) -> PHOperator {
        PHOperator {
            label: format!("{a}*{} + {b}*{}", x.label, y.label),
            xi: a * &x.xi + b * &y.xi,
            eta: x.eta.iter().zip(&y.eta).map(|(p, q)| a * p + b * q).collect(),
            b: a * &x.b + b * &y.b,
            rate: None,
            provenance: Provenance::Catalog,
            approximate: x.approximate || y.approximate,
        }
    }

    pub fn is_xi_bearing(&self) -> bool {
        !self.xi.is_zero()
    }
}

/// Coordinate of a solution vector: role (ξ < η < B), column, then `(λ, k)`.
type Coord = (Role, usize, Rational, u32);

fn rref(rows: &mut Vec<BTreeMap<Coord, Rational>>) {
    let coords: Vec<Coord> = {
        let mut all: Vec<Coord> = rows.iter().flat_map(|r| r.keys().cloned()).collect();
        all.sort();
        all.dedup();
        all
    };
    let mut lead = 0;
    for c in coords {
        if lead == rows.len() {
            break;
        }
        let Some(p) = (lead..rows.len()).find(|&i| rows[i].get(&c).is_some_and(|v| !v.is_zero())) else {
            continue;
        };
        rows.swap(lead, p);
        let inv = rows[lead][&c].recip();
        for v in rows[lead].values_mut() {
            *v *= &inv;
        }
        let prow = rows[lead].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == lead {
                continue;
            }
            let f = row.get(&c).cloned().unwrap_or_else(Rational::zero);
            if f.is_zero() {
                continue;
            }
            for (k, v) in &prow {
                let e = row.entry(k.clone()).or_insert_with(Rational::zero);
                *e -= &f * v;
            }
            row.retain(|_, v| !v.is_zero());
        }
        lead += 1;
    }
    rows.retain(|r| !r.is_empty());
}

/// One operator per free constant, normalised within each growth rate,
/// verified against the determining equation before release.
pub fn operator_basis(
    solutions: &[CoefficientSolution],
    ansatz: &Ansatz,
    sys: &StateCostateSystem,
) -> Result<Vec<PHOperator>, DetError> {
    let mut out = Vec::new();
    for sol in solutions {
        let mut groups: BTreeMap<Rational, Vec<BTreeMap<Coord, Rational>>> = BTreeMap::new();
        for c in &sol.constants {
            let mut v = BTreeMap::new();
            for (j, f) in sol.functions.iter().enumerate() {
                let role = ansatz.columns[j].role;
                for ((rate, k), coeff) in &f.terms {
                    let d = differentiate(coeff, &c.symbol);
                    let Some(r) = d.as_num() else {
                        return Err(DetError::Internal(format!("coefficient `{coeff}` is not linear in {}", c.symbol)));
                    };
                    if !r.is_zero() {
                        v.insert((role, j, rate.clone(), *k), r.clone());
                    }
                }
            }
            groups.entry(c.rate.clone()).or_default().push(v);
        }
        let mut ops = Vec::new();
        for (rate, mut rows) in groups {
            rref(&mut rows);
            for row in rows {
                let mut funcs = vec![ExpPoly::zero(); ansatz.columns.len()];
                for ((_, j, r, k), v) in &row {
                    funcs[*j].push(r.clone(), *k, Expr::num(v.clone()));
                }
                let component = |want: &dyn Fn(Role) -> bool| -> Expr {
                    Expr::add(
                        ansatz
                            .columns
                            .iter()
                            .enumerate()
                            .filter(|(_, c)| want(c.role))
                            .map(|(j, c)| funcs[j].to_expr(&ansatz.time) * monomial_expr(&ansatz.states, &c.monomial))
                            .collect::<Vec<_>>(),
                    )
                };
                let xi = component(&|r| r == Role::Xi);
                let eta: Vec<Expr> = (0..ansatz.states.len()).map(|i| component(&|r| r == Role::Eta(i))).collect();
                let b = component(&|r| r == Role::B);
                if xi.is_zero() && eta.iter().all(Expr::is_zero) {
                    continue;
                }
                ops.push(PHOperator {
                    label: String::new(),
                    xi,
                    eta,
                    b,
                    rate: Some(rate.clone()),
                    provenance: super::Provenance::Searched,
                    approximate: sol.approximate,
                });
            }
        }
        ops.sort_by(|a, b| a.rate.cmp(&b.rate).then(b.is_xi_bearing().cmp(&a.is_xi_bearing())));
        for op in ops {
            verify_operator(&op, sys)?;
            out.push(op);
        }
    }
    for (i, op) in out.iter_mut().enumerate() {
        op.label = format!("X{}", i + 1);
    }
    Ok(out)
}

/// Checks the determining residual symbolically and at 16 sample points.
pub(crate) fn verify_operator(op: &PHOperator, sys: &StateCostateSystem) -> Result<(), DetError> {
    let r = determining_residual(sys, &op.xi, &op.eta, &op.b)?;
    let test = ZeroTest {
        points: 16,
        confirm: if op.approximate { 1e-6 } else { 1e-10 },
        ..ZeroTest::default()
    };
    let structural = r.is_zero();
    let numeric = test.check_with(&r, |rng| sys.sample(rng));
    if (structural || op.approximate) && numeric.is_zero() {
        Ok(())
    } else {
        Err(DetError::Internal(format!(
            "operator xi = {}, eta = {:?}, B = {} fails verification: residual {r} ({numeric:?})",
            op.xi, op.eta, op.b
        )))
    }
}
