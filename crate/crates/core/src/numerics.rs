//! Fixed-step RK4 on the state–costate system, drift and closed-form comparison.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dynsys::StateCostateSystem;
use crate::integrals::FirstIntegral;
use crate::scalar::Real;
use crate::symcore::{differentiate, Compiled, EvalError, Expr, Symbol};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumError {
    #[error("precondition: {0}")]
    Precondition(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("cannot evaluate at sample {index} (t = {t}): {msg}")]
    Sample { index: usize, t: f64, msg: String },
}

#[derive(Clone, Debug)]
pub struct Trajectory<T = f64> {
    pub t0: T,
    pub h: T,
    pub times: Vec<T>,
    /// Per node: `(q¹..qⁿ)`, `(p₁..pₙ)`, `(u¹..uᵐ)`.
    pub q: Vec<Vec<T>>,
    pub p: Vec<Vec<T>>,
    pub u: Vec<Vec<T>>,
    pub time: Symbol,
    pub states: Vec<Symbol>,
    pub costates: Vec<Symbol>,
    pub model: String,
    pub max_foc_residual: T,
    /// Set when the run stopped early on a non-finite value or FOC violation.
    pub error: Option<String>,
}

pub type Trajectory64 = Trajectory<f64>;

impl<T: Real> Trajectory<T> {
    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn to_csv(&self) -> String {
        let n = self.q.first().map_or(0, Vec::len);
        let m = self.u.first().map_or(0, Vec::len);
        let mut head = vec!["t".to_string()];
        head.extend((1..=n).map(|i| format!("q{i}")));
        head.extend((1..=n).map(|i| format!("p{i}")));
        head.extend((1..=m).map(|i| format!("u{i}")));
        let mut out = head.join(",");
        out.push('\n');
        let f = |x: &T| x.to_f64().unwrap_or(f64::NAN);
        for k in 0..self.times.len() {
            let row: Vec<String> = std::iter::once(&self.times[k])
                .chain(&self.q[k])
                .chain(&self.p[k])
                .chain(&self.u[k])
                .map(|x| format!("{:?}", f(x)))
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

struct Rhs<T> {
    f: Vec<Compiled<T>>,
    controls: Vec<Compiled<T>>,
    foc: Vec<Compiled<T>>,
}

fn compile_rhs<T: Real>(sys: &StateCostateSystem) -> Result<Rhs<T>, NumError> {
    let free = sys.model.free_params();
    if !free.is_empty() {
        return Err(NumError::Precondition(format!("parameters {free:?} are unbound")));
    }
    let tqp = tqp_vars(sys);
    let mut tqpu = tqp.clone();
    tqpu.extend(sys.controls().iter().cloned());
    let f = sys
        .qdot
        .iter()
        .chain(&sys.pdot)
        .map(|e| Compiled::new(e, &tqp))
        .collect::<Result<_, _>>()?;
    let controls = sys
        .control_laws
        .iter()
        .map(|e| Compiled::new(e, &tqp))
        .collect::<Result<_, _>>()?;
    let foc = sys
        .controls()
        .iter()
        .map(|u| Compiled::new(&differentiate(&sys.hamiltonian, u), &tqpu))
        .collect::<Result<_, _>>()?;
    Ok(Rhs { f, controls, foc })
}

fn tqp_vars(sys: &StateCostateSystem) -> Vec<Symbol> {
    let mut v = vec![sys.time().clone()];
    v.extend(sys.states().iter().cloned());
    v.extend(sys.costates().iter().cloned());
    v
}

impl<T: Real> Rhs<T> {
    fn eval(&self, t: T, y: &[T], out: &mut [T], buf: &mut Vec<T>) -> Result<(), EvalError> {
        buf.clear();
        buf.push(t);
        buf.extend_from_slice(y);
        for (o, f) in out.iter_mut().zip(&self.f) {
            *o = f.eval(buf)?;
        }
        Ok(())
    }
}

/// Classical RK4 from `(q₀, p₀)` at `t₀` to `T` with step `h`.
pub fn integrate<T: Real>(
    sys: &StateCostateSystem,
    q0: &[T],
    p0: &[T],
    t0: T,
    t_end: T,
    h: T,
) -> Result<Trajectory<T>, NumError> {
    let n = sys.n();
    if q0.len() != n || p0.len() != n {
        return Err(NumError::Precondition(format!("expected {n} states and {n} costates")));
    }
    if !(h > T::zero()) || h > (t_end - t0) / T::from_f64(10.0).unwrap() {
        return Err(NumError::Precondition("step must satisfy 0 < h <= (T - t0)/10".into()));
    }
    let rhs = compile_rhs::<T>(sys)?;
    let steps = ((t_end - t0) / h).round().to_usize().unwrap_or(0);
    let two = T::from_f64(2.0).unwrap();
    let six = T::from_f64(6.0).unwrap();
    let tol = T::from_f64(1e-8).unwrap();

    let mut traj = Trajectory {
        t0,
        h,
        times: Vec::with_capacity(steps + 1),
        q: Vec::with_capacity(steps + 1),
        p: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        time: sys.time().clone(),
        states: sys.states().to_vec(),
        costates: sys.costates().to_vec(),
        model: sys.model.name.clone(),
        max_foc_residual: T::zero(),
        error: None,
    };
    let mut y: Vec<T> = q0.iter().chain(p0).copied().collect();
    let mut buf = Vec::with_capacity(2 * n + 1 + sys.controls().len());
    let (mut k1, mut k2, mut k3, mut k4) = (vec![T::zero(); 2 * n], vec![T::zero(); 2 * n], vec![T::zero(); 2 * n], vec![T::zero(); 2 * n]);
    let mut tmp = vec![T::zero(); 2 * n];

    for i in 0..=steps {
        let t = t0 + h * T::from_usize(i).unwrap();
        if y.iter().any(|v| !v.is_finite()) {
            traj.error = Some(format!("non-finite state at t = {:?}", t));
            break;
        }
        // controls and FOC residual at the node
        buf.clear();
        buf.push(t);
        buf.extend_from_slice(&y);
        let mut u = Vec::with_capacity(rhs.controls.len());
        let mut bad = None;
        for c in &rhs.controls {
            match c.eval(&buf) {
                Ok(v) if v.is_finite() => u.push(v),
                Ok(_) => bad = Some("non-finite control".to_string()),
                Err(e) => bad = Some(e.to_string()),
            }
        }
        if bad.is_none() {
            let scale = y[n..].iter().fold(T::one(), |a, p| a.max(p.abs()));
            buf.extend_from_slice(&u);
            for g in &rhs.foc {
                match g.eval(&buf) {
                    Ok(r) => traj.max_foc_residual = traj.max_foc_residual.max(r.abs() / scale),
                    Err(e) => bad = Some(e.to_string()),
                }
            }
            if traj.max_foc_residual > tol {
                bad = Some(format!("first-order condition residual {:?}", traj.max_foc_residual));
            }
        }
        if let Some(msg) = bad {
            traj.error = Some(format!("at t = {:?}: {msg}", t));
            break;
        }
        traj.times.push(t);
        traj.q.push(y[..n].to_vec());
        traj.p.push(y[n..].to_vec());
        traj.u.push(u);
        if i == steps {
            break;
        }

        let step = (|| -> Result<(), EvalError> {
            rhs.eval(t, &y, &mut k1, &mut buf)?;
            for j in 0..2 * n {
                tmp[j] = y[j] + h / two * k1[j];
            }
            rhs.eval(t + h / two, &tmp, &mut k2, &mut buf)?;
            for j in 0..2 * n {
                tmp[j] = y[j] + h / two * k2[j];
            }
            rhs.eval(t + h / two, &tmp, &mut k3, &mut buf)?;
            for j in 0..2 * n {
                tmp[j] = y[j] + h * k3[j];
            }
            rhs.eval(t + h, &tmp, &mut k4, &mut buf)?;
            Ok(())
        })();
        if let Err(e) = step {
            traj.error = Some(format!("at t = {:?}: {e}", t));
            break;
        }
        for j in 0..2 * n {
            y[j] = y[j] + h / six * (k1[j] + two * k2[j] + two * k3[j] + k4[j]);
        }
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Drift {
    pub max: f64,
    pub series: Vec<f64>,
}

/// `|I(t) − I(t₀)| / max(1, |I(t₀)|)` along the trajectory.
pub fn conservation_drift(i: &FirstIntegral, traj: &Trajectory64) -> Result<Drift, NumError> {
    drift_of(&i.costate_form, traj)
}

/// As [`conservation_drift`] for a bare expression in `(t, q, p)`.
pub fn drift_of(i: &Expr, traj: &Trajectory64) -> Result<Drift, NumError> {
    let mut vars = vec![traj.time.clone()];
    vars.extend(traj.states.iter().cloned());
    vars.extend(traj.costates.iter().cloned());
    let f = Compiled::<f64>::new(i, &vars)?;
    let mut series = Vec::with_capacity(traj.times.len());
    let mut buf = Vec::with_capacity(vars.len());
    let mut i0 = None;
    let mut max = 0.0_f64;
    for k in 0..traj.times.len() {
        buf.clear();
        buf.push(traj.times[k]);
        buf.extend_from_slice(&traj.q[k]);
        buf.extend_from_slice(&traj.p[k]);
        let v = f.eval(&buf).map_err(|e| NumError::Sample {
            index: k,
            t: traj.times[k],
            msg: e.to_string(),
        })?;
        let base = *i0.get_or_insert(v);
        let d = (v - base).abs() / base.abs().max(1.0);
        max = max.max(d);
        series.push(d);
    }
    Ok(Drift { max, series })
}

/// Largest absolute deviation of the trajectory from exact paths `q(t)`, `p(t)`.
/// Either list may be empty; the expressions may contain only the time symbol.
pub fn max_abs_error(traj: &Trajectory64, q_exact: &[Expr], p_exact: &[Expr]) -> Result<f64, NumError> {
    let vars = [traj.time.clone()];
    let qs = q_exact.iter().map(|e| Compiled::<f64>::new(e, &vars)).collect::<Result<Vec<_>, _>>()?;
    let ps = p_exact.iter().map(|e| Compiled::<f64>::new(e, &vars)).collect::<Result<Vec<_>, _>>()?;
    let mut err = 0.0_f64;
    for k in 0..traj.times.len() {
        let t = [traj.times[k]];
        for (j, f) in qs.iter().enumerate() {
            err = err.max((f.eval(&t)? - traj.q[k][j]).abs());
        }
        for (j, f) in ps.iter().enumerate() {
            err = err.max((f.eval(&t)? - traj.p[k][j]).abs());
        }
    }
    Ok(err)
}
