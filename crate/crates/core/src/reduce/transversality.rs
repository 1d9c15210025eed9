//! Geometric tail test of `e^{−rt} Σ pᵢ(t) qᵢ(t) → 0`.

use num_traits::{Signed, Zero};
use rayon::prelude::*;

use super::{exp_poly_of, ReduceError, SolutionFamily, SolutionKind};
use crate::dynsys::StateCostateSystem;
use crate::symcore::{substitute_unchecked, Bindings, Compiled, Expr, Symbol};
use crate::Rational;

#[derive(Clone, Debug, PartialEq)]
pub struct TailOptions {
    pub horizon: f64,
    pub samples: usize,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions {
            horizon: 200.0,
            samples: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transversality {
    pub discount: Rational,
    /// Tail expression before forcing.
    pub tail: Expr,
    /// Constants set to zero so that no term of the tail fails to decay.
    pub forced: Vec<Symbol>,
    /// Slowest decay rate of the tail once forced, when it is exponential.
    pub decay_rate: Option<Rational>,
    pub limit_estimate: f64,
    pub samples: Vec<(f64, f64)>,
    pub passed: bool,
    pub family: SolutionFamily,
    pub diagnostics: Vec<String>,
}

/// Common discount rate `r` with `Γᵢ = r·pᵢ`.
pub fn discount_rate(sys: &StateCostateSystem) -> Result<Rational, ReduceError> {
    let mut rate: Option<Rational> = None;
    for (g, p) in sys.gamma.iter().zip(sys.costates()) {
        let r = g / &Expr::symbol(p);
        let r = r
            .as_num()
            .cloned()
            .ok_or_else(|| ReduceError::Unsupported(format!("Γ = {g} is not a constant multiple of {p}")))?;
        match &rate {
            Some(x) if *x != r => return Err(ReduceError::Unsupported("discount rates differ across costates".into())),
            _ => rate = Some(r),
        }
    }
    rate.ok_or_else(|| ReduceError::Unsupported("model has no costates".into()))
}

fn tail_of(family: &SolutionFamily, r: &Rational) -> Expr {
    let t = Expr::symbol(&family.time);
    let pq = Expr::add(
        family
            .state
            .iter()
            .zip(&family.costate)
            .map(|(q, p)| q * p)
            .collect::<Vec<_>>(),
    );
    Expr::exp(Expr::num(-r.clone()) * t) * pq
}

/// Unbound constants alone on a non-decaying exponential term must vanish.
fn forcing_round(tail: &Expr, family: &SolutionFamily) -> Option<Vec<Symbol>> {
    let ep = exp_poly_of(tail, &family.time)?;
    let free = family.unbound();
    let mut out = Vec::new();
    for ((rate, _), c) in &ep.terms {
        if rate.is_negative() {
            continue;
        }
        let syms: Vec<Symbol> = c.symbols().into_iter().filter(|s| free.contains(s)).collect();
        if let [s] = syms.as_slice() {
            if !out.contains(s) {
                out.push(s.clone());
            }
        }
    }
    Some(out)
}

/// Tail test on `[T/2, T]`, forcing constants where the symbolic tail shows
/// a non-decaying exponential carried by a single free constant.
pub fn transversality_check(
    family: &SolutionFamily,
    sys: &StateCostateSystem,
    opts: &TailOptions,
) -> Result<Transversality, ReduceError> {
    if family.kind != SolutionKind::ClosedForm {
        return Err(ReduceError::Unsupported("transversality needs closed-form paths".into()));
    }
    let r = discount_rate(sys)?;
    let tail = tail_of(family, &r);
    let mut fam = family.clone();
    let mut forced = Vec::new();
    let mut diagnostics = Vec::new();
    loop {
        let cur = tail_of(&fam, &r);
        match forcing_round(&cur, &fam) {
            Some(v) if !v.is_empty() => {
                for s in v {
                    fam = fam.fix(&s, &Expr::zero());
                    diagnostics.push(format!("{s} forced to 0: it multiplies a non-decaying term"));
                    forced.push(s);
                }
            }
            Some(_) => break,
            None => {
                diagnostics.push("tail is not an exponential polynomial; numeric test only".into());
                break;
            }
        }
    }
    let cur = tail_of(&fam, &r);
    let decay_rate = exp_poly_of(&cur, &fam.time).and_then(|ep| {
        let max = ep.terms.keys().map(|(l, _)| l.clone()).max()?;
        max.is_negative().then(|| -max)
    });

    let mut b = Bindings::new();
    for c in &fam.constants {
        let v = match &c.value {
            Some(v) => Expr::num(v.clone()),
            None => {
                diagnostics.push(format!("{} unbound; tail evaluated with {} = 1", c.symbol, c.symbol));
                Expr::one()
            }
        };
        b.insert(c.symbol.clone(), v);
    }
    let numeric = substitute_unchecked(&cur, &b);
    let f = Compiled::<f64>::new(&numeric, &[fam.time.clone()])
        .map_err(|e| ReduceError::Unsupported(format!("tail cannot be evaluated: {e}")))?;
    let big = opts.horizon;
    let n = opts.samples.max(2);
    let ts: Vec<f64> = (0..n)
        .map(|j| 0.5 * big * 2f64.powf(j as f64 / (n - 1) as f64))
        .collect();
    let samples: Vec<(f64, f64)> = ts
        .par_iter()
        .map(|&t| (t, f.eval(&[t]).unwrap_or(f64::NAN)))
        .collect();
    let f1 = f.eval(&[1.0]).unwrap_or(f64::NAN);
    let last = samples.last().map(|s| s.1).unwrap_or(f64::NAN);
    let finite = f1.is_finite() && samples.iter().all(|s| s.1.is_finite());
    if !finite {
        diagnostics.push("non-finite tail value".into());
    }
    let monotone = samples
        .windows(2)
        .all(|w| w[1].1.abs() <= w[0].1.abs() * (1.0 + 1e-12));
    if !monotone {
        diagnostics.push("tail is not monotonically decreasing".into());
    }
    let small = if f1 == 0.0 { last == 0.0 } else { last.abs() < 1e-6 * f1.abs() };
    if !small {
        diagnostics.push(format!("tail at T = {big} is {last:e}, at t = 1 it is {f1:e}"));
    }
    if let Some(phi) = &decay_rate {
        if !phi.is_zero() {
            diagnostics.push(format!("tail decays like exp(-{} t)", crate::poly::rational_text(phi)));
        }
    }
    Ok(Transversality {
        discount: r,
        tail,
        forced,
        decay_rate,
        limit_estimate: last,
        samples,
        passed: finite && monotone && small,
        family: fam,
        diagnostics,
    })
}
