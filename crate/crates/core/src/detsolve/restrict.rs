use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use super::linsys::{instantiate, linear_rows, triangularize, SymRow};
use super::{build_ansatz, derive, determining_residual, separate, AnsatzSpec, DetError};
use crate::dynsys::{foc_eliminate, ControlModel};
use crate::poly::ExactPoly;
use crate::scalar::{rational_from_f64, recognize_rational};
use crate::symcore::{Bindings, Expr, Symbol};
use crate::Rational;

#[derive(Clone, Debug)]
pub struct ScanOptions {
    pub grid: usize,
    pub tol: f64,
    pub max_bisections: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            grid: 200,
            tol: 1e-12,
            max_bisections: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestrictionRoot {
    pub value: f64,
    /// Exact value when recognised as a small rational.
    pub exact: Option<Rational>,
    /// A rerun of the exact search at this value found a nontrivial operator.
    pub validated: bool,
    pub operators: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RestrictionReport {
    pub parameter: String,
    pub roots: Vec<RestrictionRoot>,
    /// The coefficient system is not overdetermined in the parameter.
    pub unrestricted: bool,
    pub notices: Vec<String>,
}

struct Compat {
    rows: Vec<SymRow>,
    ncols: usize,
    target: Symbol,
}

enum Leftover {
    /// No compatibility condition at this value.
    Free,
    Value(f64),
}

impl Compat {
    fn leftover_polys(&self, x: &Rational) -> Result<Vec<ExactPoly>, DetError> {
        let mut b = Bindings::new();
        b.insert(self.target.clone(), Expr::num(x.clone()));
        let rows = instantiate(&self.rows, self.ncols, &b)?;
        let tri = triangularize(rows, self.ncols - 1);
        Ok(tri
            .leftover
            .into_iter()
            .map(|r| r[self.ncols - 1].clone())
            .filter(|p| !p.is_zero())
            .collect())
    }

    /// Compatibility function: zero iff the leftover polynomials share a root.
    fn g(&self, x: &Rational) -> Result<Leftover, DetError> {
        let mut polys = self.leftover_polys(x)?;
        if polys.len() < 2 {
            return Ok(Leftover::Free);
        }
        polys.sort_by_key(|p| p.degree());
        let (first, rest) = polys.split_first().unwrap();
        let other = &rest[0];
        let v = if first.degree() == Some(1) {
            let root = -first.coeff(0) / first.coeff(1);
            other.eval(&root) / other.lc()
        } else {
            ExactPoly::resultant(&first.monic(), &other.monic())
        };
        Ok(Leftover::Value(v.to_f64().unwrap_or(f64::NAN)))
    }

    fn all_divisible(&self, x: &Rational) -> Result<bool, DetError> {
        let mut polys = self.leftover_polys(x)?;
        if polys.len() < 2 {
            return Ok(true);
        }
        polys.sort_by_key(|p| p.degree());
        let g = &polys[0];
        Ok(polys[1..].iter().all(|p| p.div_rem(g).1.is_zero()))
    }
}

/// Scans a target parameter for values where the overdetermined coefficient
/// system admits a nontrivial solution.
pub fn restriction_solve(
    model: &ControlModel,
    spec: &AnsatzSpec,
    target: &Symbol,
    lo: f64,
    hi: f64,
    opts: &ScanOptions,
) -> Result<RestrictionReport, DetError> {
    let free = model.without_param(target);
    let others: Vec<Symbol> = free.free_params().into_iter().filter(|s| s != target).collect();
    if !others.is_empty() {
        return Err(DetError::UnsupportedCoefficientOde(format!(
            "parameters {others:?} must be bound for a restriction scan"
        )));
    }
    let sys = foc_eliminate(&free)?;
    let ansatz = build_ansatz(&sys, spec)?;
    let residual = determining_residual(&sys, &ansatz.xi, &ansatz.eta, &ansatz.b)?;
    let system = separate(&residual, sys.controls(), sys.states())?;
    let compat = Compat {
        rows: linear_rows(&system, &ansatz)?,
        ncols: ansatz.columns.len(),
        target: target.clone(),
    };
    let mut report = RestrictionReport {
        parameter: target.to_string(),
        ..Default::default()
    };

    let probe = rational_from_f64(lo + (hi - lo) * 0.618_033_988_749_894_8).unwrap_or_else(Rational::zero);
    if compat.all_divisible(&probe)? {
        report.unrestricted = true;
        report.notices.push(format!(
            "the coefficient system is not overdetermined in {target}; no restriction needed"
        ));
        return Ok(report);
    }

    let eval = |x: f64| -> Option<f64> {
        let r = rational_from_f64(x)?;
        match compat.g(&r) {
            Ok(Leftover::Value(v)) if v.is_finite() => Some(v),
            _ => None,
        }
    };
    let n = opts.grid.max(2);
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let gs: Vec<Option<f64>> = xs.par_iter().map(|&x| eval(x)).collect();

    let mut brackets = Vec::new();
    for i in 0..n - 1 {
        match (gs[i], gs[i + 1]) {
            (Some(a), _) if a == 0.0 => brackets.push((xs[i], xs[i])),
            (Some(a), Some(b)) if a * b < 0.0 => brackets.push((xs[i], xs[i + 1])),
            _ => {}
        }
    }
    if let Some(Some(b)) = gs.last() {
        if *b == 0.0 {
            brackets.push((xs[n - 1], xs[n - 1]));
        }
    }
    let found: Vec<Option<f64>> = brackets
        .par_iter()
        .map(|&(mut a, mut b)| {
            let mut ga = eval(a)?;
            for _ in 0..opts.max_bisections {
                if ga.abs() < opts.tol || a == b {
                    return (ga.abs() < opts.tol).then_some(a);
                }
                let m = 0.5 * (a + b);
                let gm = eval(m)?;
                if gm.abs() < opts.tol {
                    return Some(m);
                }
                if ga * gm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    ga = gm;
                }
            }
            None
        })
        .collect();
    for (bracket, root) in brackets.iter().zip(found) {
        let Some(x) = root else {
            report.notices.push(format!(
                "sign change in [{}, {}] is a pole, discarded",
                bracket.0, bracket.1
            ));
            continue;
        };
        let exact = recognize_rational(x, 64, 1e-8);
        let value = exact.clone().or_else(|| rational_from_f64(x)).unwrap_or_else(Rational::zero);
        let bound = model.with_param(target, value.clone());
        if let Err(e) = bound.check_guards() {
            report.notices.push(format!("root {x} discarded: {e}"));
            continue;
        }
        let (validated, operators) = match &exact {
            Some(_) => match foc_eliminate(&bound).map_err(DetError::from).and_then(|s| derive(&s, spec)) {
                Ok(d) => (!d.operators.is_empty(), d.operators.len()),
                Err(e) => {
                    report.notices.push(format!("cross-validation at {value} failed: {e}"));
                    (false, 0)
                }
            },
            None => {
                report.notices.push(format!("root {x} is not a small rational; not cross-validated"));
                (false, 0)
            }
        };
        let value_f = exact.as_ref().and_then(|r| r.to_f64()).unwrap_or(x);
        report.roots.push(RestrictionRoot {
            value: value_f,
            exact,
            validated,
            operators,
        });
    }
    report.roots.dedup_by(|a, b| (a.value - b.value).abs() < 1e-9);
    Ok(report)
}
