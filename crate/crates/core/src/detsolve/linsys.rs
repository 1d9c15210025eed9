use std::collections::BTreeMap;

use num_traits::Zero;

use super::{Ansatz, DetError, DeterminingSystem};
use crate::dynsys::StateCostateSystem;
use crate::poly::{real_roots, ExactPoly, ExpPoly, RootReport};
use crate::symcore::{substitute, Bindings, Expr, Node, Symbol};
use crate::Rational;

/// Row of the operator matrix: column → (derivative order → coefficient).
pub(crate) type SymRow = BTreeMap<usize, BTreeMap<u32, Expr>>;

/// Reads each constraint as `Σ coeff · f⁽ᵏ⁾` over the ansatz columns.
pub(crate) fn linear_rows(sys: &DeterminingSystem, ansatz: &Ansatz) -> Result<Vec<SymRow>, DetError> {
    let index: BTreeMap<&Symbol, usize> = ansatz.columns.iter().enumerate().map(|(i, c)| (&c.func, i)).collect();
    let mut rows = Vec::new();
    for c in &sys.constraints {
        let mut row = SymRow::new();
        for term in c.expr.terms() {
            let mut func = None;
            let mut rest = Vec::new();
            for f in term.factors() {
                match f.node() {
                    Node::Func(fr) if func.is_none() => func = Some(fr.clone()),
                    _ => rest.push(f),
                }
            }
            let coeff = Expr::mul(rest);
            let Some(fr) = func else {
                return Err(DetError::Internal(format!("term `{term}` is free of the unknowns")));
            };
            if coeff.contains_func() {
                return Err(DetError::Internal(format!("term `{term}` is nonlinear in the unknowns")));
            }
            if coeff.contains(&ansatz.time) || ansatz.states.iter().any(|q| coeff.contains(q)) {
                return Err(DetError::UnsupportedCoefficientOde(format!(
                    "coefficient `{coeff}` of {}{} depends on the variables",
                    fr.name,
                    "'".repeat(fr.order as usize)
                )));
            }
            let col = *index
                .get(&fr.name)
                .ok_or_else(|| DetError::Internal(format!("unknown function `{}`", fr.name)))?;
            let slot = row.entry(col).or_default().entry(fr.order).or_insert_with(Expr::zero);
            *slot = &*slot + &coeff;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Binds remaining symbols and converts a row to exact polynomials in `d/dt`.
pub(crate) fn instantiate(rows: &[SymRow], ncols: usize, b: &Bindings) -> Result<Vec<Vec<ExactPoly>>, DetError> {
    rows.iter()
        .map(|row| {
            let mut out = vec![ExactPoly::zero(); ncols];
            for (col, orders) in row {
                let mut coeffs = Vec::new();
                for (k, e) in orders {
                    let v = substitute(e, b)?;
                    let r = v.as_num().cloned().ok_or_else(|| {
                        DetError::UnsupportedCoefficientOde(format!("coefficient `{v}` is not a bound constant"))
                    })?;
                    let k = *k as usize;
                    if coeffs.len() <= k {
                        coeffs.resize(k + 1, Rational::zero());
                    }
                    coeffs[k] = r;
                }
                out[*col] = ExactPoly::new(coeffs);
            }
            Ok(out)
        })
        .collect()
}

pub(crate) struct Triangular {
    /// Pivot row per eliminated column, `None` when the column is unconstrained.
    pub pivots: Vec<Option<Vec<ExactPoly>>>,
    /// Rows left after eliminating the first `limit` columns.
    pub leftover: Vec<Vec<ExactPoly>>,
}

fn row_axpy(target: &mut [ExactPoly], q: &ExactPoly, src: &[ExactPoly]) {
    for (t, s) in target.iter_mut().zip(src) {
        if !s.is_zero() {
            *t = &*t - &(q * s);
        }
    }
}

/// Unimodular row reduction over `Q[s]`: Euclid on each of the first `limit` columns.
pub(crate) fn triangularize(mut pool: Vec<Vec<ExactPoly>>, limit: usize) -> Triangular {
    let mut pivots = Vec::with_capacity(limit);
    for col in 0..limit {
        loop {
            let active: Vec<usize> = (0..pool.len()).filter(|&r| !pool[r][col].is_zero()).collect();
            match active.len() {
                0 => {
                    pivots.push(None);
                    break;
                }
                1 => {
                    pivots.push(Some(pool.remove(active[0])));
                    break;
                }
                _ => {
                    let p = *active
                        .iter()
                        .min_by_key(|&&r| (pool[r][col].degree().unwrap(), r))
                        .unwrap();
                    let prow = pool[p].clone();
                    for &r in &active {
                        if r != p {
                            let (q, _) = pool[r][col].div_rem(&prow[col]);
                            row_axpy(&mut pool[r], &q, &prow);
                        }
                    }
                }
            }
        }
    }
    pool.retain(|row| row.iter().any(|e| !e.is_zero()));
    Triangular { pivots, leftover: pool }
}

/// A free integration constant multiplying `t^power e^{rate t}` in one column.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeConstant {
    pub symbol: Symbol,
    pub rate: Rational,
    pub power: u32,
    pub column: usize,
}

/// Characteristic polynomial of one column's pivot and its real roots.
#[derive(Clone, Debug, PartialEq)]
pub struct CharacteristicPolynomial {
    pub column: Symbol,
    pub poly: ExactPoly,
    pub roots: RootReport,
}

/// General solution of the coefficient system.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSolution {
    /// One exponential polynomial per ansatz column.
    pub functions: Vec<ExpPoly>,
    pub constants: Vec<FreeConstant>,
    pub characteristic: Vec<CharacteristicPolynomial>,
    /// Some root was irrational and kept as a rational approximation.
    pub approximate: bool,
    pub notices: Vec<String>,
}

impl CoefficientSolution {
    pub fn characteristic_of(&self, column: &str) -> Option<&CharacteristicPolynomial> {
        self.characteristic.iter().find(|c| c.column.as_str() == column)
    }
}

fn constant_name(k: usize, taken: &dyn Fn(&str) -> bool) -> Symbol {
    let lower = format!("c{k}");
    if taken(&lower) {
        Symbol::new(&format!("C{k}"))
    } else {
        Symbol::new(&lower)
    }
}

pub(crate) fn back_substitute(
    tri: &Triangular,
    ansatz: &Ansatz,
    taken: &dyn Fn(&str) -> bool,
) -> Result<CoefficientSolution, DetError> {
    let ncols = ansatz.columns.len();
    let mut functions = vec![ExpPoly::zero(); ncols];
    let mut constants = Vec::new();
    let mut characteristic = Vec::new();
    let mut notices = Vec::new();
    let mut approximate = false;
    for j in (0..ncols).rev() {
        let Some(row) = &tri.pivots[j] else {
            return Err(DetError::Underdetermined(ansatz.columns[j].func.to_string()));
        };
        let mut forcing = ExpPoly::zero();
        for k in j + 1..ncols {
            if !row[k].is_zero() {
                forcing = forcing.add(&functions[k].apply(&row[k]));
            }
        }
        let forcing = forcing.scale(&Expr::int(-1));
        let pivot = &row[j];
        let mut sol = forcing.particular(pivot);
        let roots = real_roots(pivot);
        if roots.complex_dropped > 0 {
            notices.push(format!(
                "{} complex characteristic root(s) of {} dropped",
                roots.complex_dropped, ansatz.columns[j].func
            ));
        }
        for r in &roots.roots {
            if !r.exact {
                approximate = true;
                notices.push(format!(
                    "irrational root near {:.12} for {} kept approximately",
                    crate::poly::root_f64(r),
                    ansatz.columns[j].func
                ));
            }
            for power in 0..r.multiplicity as u32 {
                let symbol = constant_name(constants.len() + 1, taken);
                sol.push(r.value.clone(), power, Expr::symbol(&symbol));
                constants.push(FreeConstant {
                    symbol,
                    rate: r.value.clone(),
                    power,
                    column: j,
                });
            }
        }
        if pivot.degree().unwrap_or(0) > 0 {
            characteristic.push(CharacteristicPolynomial {
                column: ansatz.columns[j].func.clone(),
                poly: pivot.monic(),
                roots,
            });
        }
        functions[j] = sol;
    }
    Ok(CoefficientSolution {
        functions,
        constants,
        characteristic,
        approximate,
        notices,
    })
}

/// Solves the separated system; an empty list means only the trivial solution.
pub fn solve_coefficients(
    sys: &DeterminingSystem,
    ansatz: &Ansatz,
    dynsys: &StateCostateSystem,
) -> Result<Vec<CoefficientSolution>, DetError> {
    let ncols = ansatz.columns.len();
    let rows = linear_rows(sys, ansatz)?;
    let rows = instantiate(&rows, ncols, &Bindings::new())?;
    let tri = triangularize(rows, ncols);
    if !tri.leftover.is_empty() {
        return Err(DetError::Internal("rows left after full elimination".into()));
    }
    let m = &dynsys.model;
    let taken = |s: &str| {
        let s = Symbol::new(s);
        m.is_variable(&s) || m.params.contains_key(&s) || m.free_params().contains(&s)
    };
    let sol = back_substitute(&tri, ansatz, &taken)?;
    if sol.constants.is_empty() {
        Ok(Vec::new())
    } else {
        Ok(vec![sol])
    }
}
