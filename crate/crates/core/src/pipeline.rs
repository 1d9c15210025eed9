//! Restriction → operator search → integrals → reduction → tail test → numerics,
//! and the JSON report built from the result.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::detsolve::{derive, determining_residual, restriction_solve, AnsatzSpec, DetError, Derivation, PHOperator};
use crate::detsolve::{RestrictionReport, ScanOptions};
use crate::dsl::ModelFile;
use crate::dynsys::{foc_eliminate, ControlModel, DynError, StateCostateSystem};
use crate::integrals::{build_first_integral, conservation_residual, independence_rank, FirstIntegral, IntegralError};
use crate::numerics::{drift_of, integrate, max_abs_error, NumError, Trajectory64};
use crate::poly::rational_text;
use crate::reduce::{
    isolate, linear_coeffs, reduce, transversality_check, ConstantRole, Reduction, SolutionFamily, SolutionKind,
    TailOptions, Transversality,
};
use crate::symcore::{eval_const, rational_to_f64, subs1, Expr, Symbol};
use crate::Rational;

/// Drift and closed-form tolerances used for verdicts.
pub const DRIFT_TOL: f64 = 1e-8;
pub const PATH_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Det(#[from] DetError),
    #[error(transparent)]
    Dyn(#[from] DynError),
    #[error(transparent)]
    Integral(#[from] IntegralError),
    #[error("{0}")]
    Restriction(String),
}

#[derive(Clone, Debug)]
pub struct Options {
    pub spec: AnsatzSpec,
    pub h: f64,
    /// Length of verification runs; the model file's `span`, else 1.
    pub span: Option<f64>,
    pub q0: Option<Vec<f64>>,
    pub p0: Option<Vec<f64>>,
    /// Merged over the model file's `constants`.
    pub constants: BTreeMap<Symbol, Rational>,
    /// The model file's `horizon`, else the default.
    pub horizon: Option<f64>,
    pub scan: ScanOptions,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            spec: AnsatzSpec::default(),
            h: 1e-3,
            span: None,
            q0: None,
            p0: None,
            constants: BTreeMap::new(),
            horizon: None,
            scan: ScanOptions::default(),
        }
    }
}

/// The model with every parameter bound, fixing a free one by the restriction scan.
pub struct Prepared {
    pub model: ControlModel,
    pub restriction: Option<RestrictionReport>,
    pub sys: StateCostateSystem,
}

pub fn prepare(file: &ModelFile, opts: &Options) -> Result<Prepared, PipelineError> {
    let mut model = file.model.clone();
    let mut restriction = None;
    if file.restriction_mode() {
        let scan = file
            .scan
            .as_ref()
            .ok_or_else(|| PipelineError::Restriction("free parameter without a `scan` line".into()))?;
        let rep = restriction_solve(&model, &opts.spec, &scan.param, scan.lo, scan.hi, &opts.scan)?;
        let root = rep
            .roots
            .iter()
            .find(|r| r.validated && r.exact.is_some())
            .ok_or_else(|| {
                PipelineError::Restriction(format!(
                    "no exact value of {} in [{}, {}] admits an operator",
                    scan.param, scan.lo, scan.hi
                ))
            })?;
        model = model.with_param(&scan.param, root.exact.clone().unwrap());
        model.check_guards()?;
        restriction = Some(rep);
    }
    let sys = foc_eliminate(&model)?;
    Ok(Prepared { model, restriction, sys })
}

/// Operators found by the search and their integrals.
pub struct Derived {
    pub derivation: Derivation,
    pub integrals: Vec<FirstIntegral>,
    pub rank: usize,
}

pub fn derive_integrals(sys: &StateCostateSystem, spec: &AnsatzSpec) -> Result<Derived, PipelineError> {
    let derivation = derive(sys, spec)?;
    let integrals = derivation
        .operators
        .iter()
        .map(|o| build_first_integral(o, sys))
        .collect::<Result<Vec<_>, _>>()?;
    let forms: Vec<Expr> = integrals.iter().map(|i| i.costate_form.clone()).collect();
    let rank = independence_rank(&forms, sys)?;
    Ok(Derived {
        derivation,
        integrals,
        rank,
    })
}

#[derive(Clone, Debug)]
pub struct OperatorCheck {
    pub label: String,
    pub residual: Expr,
    pub passed: bool,
}

/// Determining-equation check of a declared operator with the model's bindings.
pub fn check_operator(op: &PHOperator, model: &ControlModel, sys: &StateCostateSystem) -> Result<OperatorCheck, PipelineError> {
    let xi = model.bound(&op.xi).map_err(DynError::from)?;
    let eta = op
        .eta
        .iter()
        .map(|e| model.bound(e))
        .collect::<Result<Vec<_>, _>>()
        .map_err(DynError::from)?;
    let b = model.bound(&op.b).map_err(DynError::from)?;
    let residual = determining_residual(sys, &xi, &eta, &b)?;
    Ok(OperatorCheck {
        label: op.label.clone(),
        passed: residual.is_zero() || sys.is_zero(&residual),
        residual,
    })
}

/// A declared integral turned into `I(t, q, p)` and checked symbolically.
pub fn declared_integral(
    label: &str,
    expr: &Expr,
    model: &ControlModel,
    sys: &StateCostateSystem,
) -> Result<FirstIntegral, PipelineError> {
    let bound = model.bound(expr).map_err(DynError::from)?;
    let costate_form = sys.to_tqp(&bound).map_err(DynError::from)?;
    let has_control = sys.controls().iter().any(|u| bound.contains(u));
    let di = conservation_residual(&costate_form, sys)?;
    Ok(FirstIntegral {
        label: label.to_string(),
        costate_form,
        control_form: has_control.then_some(bound),
        source: "declared".into(),
        rate: None,
        verification: crate::integrals::Verification {
            symbolic: di.is_zero() || sys.is_zero(&di),
            max_drift: None,
        },
    })
}

/// Fills in `max_drift` along `traj`, in parallel.
pub fn measure_drifts(integrals: &mut [FirstIntegral], traj: &Trajectory64) -> Vec<Option<String>> {
    integrals
        .par_iter_mut()
        .map(|i| match drift_of(&i.costate_form, traj) {
            Ok(d) => {
                i.verification.max_drift = Some(d.max);
                None
            }
            Err(e) => Some(format!("{}: {e}", i.label)),
        })
        .collect()
}

/// Where a numeric run starts and why.
#[derive(Clone, Debug, PartialEq)]
pub struct Start {
    pub q0: Vec<f64>,
    pub p0: Vec<f64>,
    pub source: &'static str,
}

fn path_start(family: &SolutionFamily) -> Option<(Vec<f64>, Vec<f64>)> {
    if family.kind != SolutionKind::ClosedForm {
        return None;
    }
    let (q, p, _) = family.evaluated_paths();
    let at0 = |v: &[Expr]| -> Option<Vec<f64>> {
        v.iter()
            .map(|e| eval_const::<f64>(&subs1(e, &family.time, &Expr::zero())).ok())
            .collect()
    };
    Some((at0(&q)?, at0(&p)?))
}

/// Binds family constants to the model's initial data, one constant per datum.
pub fn bind_initial(
    family: &SolutionFamily,
    sys: &StateCostateSystem,
    initial: &BTreeMap<Symbol, Rational>,
) -> (SolutionFamily, Vec<String>) {
    let mut fam = family.clone();
    let mut notes = Vec::new();
    if fam.kind != SolutionKind::ClosedForm {
        return (fam, notes);
    }
    // states first, then controls, then costates
    let rank = |v: &Symbol| {
        if sys.states().contains(v) {
            0
        } else if sys.controls().contains(v) {
            1
        } else {
            2
        }
    };
    let mut order: Vec<(&Symbol, &Rational)> = initial.iter().collect();
    order.sort_by_key(|(v, _)| rank(v));
    for (var, value) in order {
        let (q, p, u) = fam.evaluated_paths();
        let path = if let Some(i) = sys.states().iter().position(|s| s == var) {
            q.get(i)
        } else if let Some(i) = sys.costates().iter().position(|s| s == var) {
            p.get(i)
        } else if let Some(i) = sys.controls().iter().position(|s| s == var) {
            u.get(i)
        } else {
            None
        };
        let Some(path) = path else { continue };
        let at0 = subs1(path, &fam.time, &Expr::zero());
        let open: Vec<Symbol> = at0
            .symbols()
            .into_iter()
            .filter(|s| fam.constant(s).is_some_and(|c| c.value.is_none()))
            .collect();
        let [c] = open.as_slice() else {
            if open.is_empty() {
                if let Some(v) = eval_const::<f64>(&at0).ok().filter(|v| (v - rational_to_f64(value)).abs() > 1e-12) {
                    notes.push(format!("{var}(0) = {} is off the selected solution, which has {var}(0) = {v}", rational_text(value)));
                }
            }
            continue;
        };
        let target = Expr::num(value.clone());
        let solved = match linear_coeffs(&at0, c) {
            Some((a0, a1)) if !a1.is_zero() => Some((&target - &a0) / a1),
            _ => isolate(&(&at0 - &target), c).map(|iso| iso.solution()),
        };
        if let Some(r) = solved.as_ref().and_then(|e| e.as_num()) {
            notes.push(format!("{var}(0) = {} gives {c} = {}", rational_text(value), rational_text(r)));
            fam = fam.bind(&[(c.clone(), r.clone())].into());
        }
    }
    let rest: Vec<Symbol> = fam
        .constants
        .iter()
        .filter(|c| c.value.is_none())
        .map(|c| c.symbol.clone())
        .collect();
    if !rest.is_empty() {
        let one = Rational::from_integer(1.into());
        for c in &rest {
            notes.push(format!("{c} unbound; numeric checks use {c} = 1"));
        }
        fam = fam.bind(&rest.iter().map(|c| (c.clone(), one.clone())).collect());
    }
    (fam, notes)
}

/// Closed form against an RK4 run from its own initial values.
#[derive(Clone, Debug)]
pub struct CrossCheck {
    pub start: Start,
    pub span: f64,
    pub max_abs_error: f64,
    pub passed: bool,
    pub trajectory: Trajectory64,
}

pub struct Solution {
    pub reduction: Reduction,
    pub transversality: Option<Transversality>,
    /// Family after forcing and binding initial data.
    pub bound: SolutionFamily,
    pub notes: Vec<String>,
}

pub fn solve(
    file: &ModelFile,
    sys: &StateCostateSystem,
    integrals: &[FirstIntegral],
    opts: &Options,
) -> Result<Solution, crate::reduce::ReduceError> {
    let mut plan = file.plan.clone();
    plan.values.extend(opts.constants.clone());
    plan.initial = file.initial.clone();
    let reduction = reduce(sys, integrals, &plan)?;
    let tail = TailOptions {
        horizon: opts.horizon.or(file.horizon).unwrap_or(TailOptions::default().horizon),
        ..TailOptions::default()
    };
    let mut notes = Vec::new();
    if reduction.family.kind != SolutionKind::ClosedForm {
        return Ok(Solution {
            bound: reduction.family.clone(),
            reduction,
            transversality: None,
            notes,
        });
    }
    let first = transversality_check(&reduction.family, sys, &tail)?;
    let (bound, n) = bind_initial(&first.family, sys, &plan.initial);
    notes.extend(n);
    let mut tr = transversality_check(&bound, sys, &tail)?;
    tr.forced = first.forced.clone();
    tr.tail = first.tail.clone();
    let mut diagnostics = first.diagnostics.clone();
    diagnostics.extend(tr.diagnostics.iter().filter(|d| !diagnostics.contains(d)).cloned().collect::<Vec<_>>());
    tr.diagnostics = diagnostics;
    Ok(Solution {
        reduction,
        transversality: Some(tr),
        bound,
        notes,
    })
}

/// Initial point for verification runs: flags, then the model file, then the solution.
pub fn start_point(
    file: &ModelFile,
    sys: &StateCostateSystem,
    solution: Option<&SolutionFamily>,
    opts: &Options,
) -> Option<Start> {
    if let (Some(q0), Some(p0)) = (&opts.q0, &opts.p0) {
        return Some(Start {
            q0: q0.clone(),
            p0: p0.clone(),
            source: "flags",
        });
    }
    let from_file = |vs: &[Symbol]| -> Option<Vec<f64>> {
        vs.iter()
            .map(|v| file.initial.get(v).map(rational_to_f64))
            .collect()
    };
    if let (Some(q0), Some(p0)) = (from_file(sys.states()), from_file(sys.costates())) {
        return Some(Start { q0, p0, source: "model file" });
    }
    let (q0, p0) = path_start(solution?)?;
    Some(Start {
        q0,
        p0,
        source: "solution",
    })
}

pub fn run(sys: &StateCostateSystem, start: &Start, span: f64, h: f64) -> Result<Trajectory64, NumError> {
    integrate(sys, &start.q0, &start.p0, 0.0, span, h)
}

pub fn cross_check(sys: &StateCostateSystem, family: &SolutionFamily, span: f64, h: f64) -> Option<Result<CrossCheck, NumError>> {
    let (q0, p0) = path_start(family)?;
    let start = Start {
        q0,
        p0,
        source: "solution",
    };
    Some(run(sys, &start, span, h).and_then(|traj| {
        let (q, p, _) = family.evaluated_paths();
        let err = max_abs_error(&traj, &q, &p)?;
        Ok(CrossCheck {
            start,
            span,
            max_abs_error: err,
            passed: traj.error.is_none() && err < PATH_TOL,
            trajectory: traj,
        })
    }))
}

/// Everything the `report` command gathers.
pub struct Analysis {
    pub file: ModelFile,
    pub model: ControlModel,
    pub restriction: Option<RestrictionReport>,
    pub derived: Derived,
    pub declared_operators: Vec<OperatorCheck>,
    pub declared_integrals: Vec<FirstIntegral>,
    pub start: Option<Start>,
    pub span: f64,
    pub trajectory: Option<Trajectory64>,
    pub solution: Result<Solution, String>,
    pub cross_check: Option<Result<CrossCheck, String>>,
    pub notices: Vec<String>,
    pub timings: Vec<(&'static str, f64)>,
}

pub fn analyze(file: &ModelFile, opts: &Options) -> Result<Analysis, PipelineError> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, timings: &mut Vec<(&'static str, f64)>| {
        timings.push((name, clock.elapsed().as_secs_f64() * 1e3));
        clock = Instant::now();
    };
    let prep = prepare(file, opts)?;
    lap("restriction", &mut timings);
    let derived = derive_integrals(&prep.sys, &opts.spec)?;
    lap("derive", &mut timings);
    let declared_operators = file
        .operators
        .iter()
        .map(|o| check_operator(o, &prep.model, &prep.sys))
        .collect::<Result<Vec<_>, _>>()?;
    let mut declared_integrals = file
        .integrals
        .iter()
        .map(|i| declared_integral(&i.label, &i.expr, &prep.model, &prep.sys))
        .collect::<Result<Vec<_>, _>>()?;
    lap("declared", &mut timings);
    let solution = solve(file, &prep.sys, &derived.integrals, opts).map_err(|e| e.to_string());
    lap("reduce", &mut timings);

    let span = opts.span.or(file.span).unwrap_or(1.0);
    let family = solution.as_ref().ok().map(|s| &s.bound);
    let start = start_point(file, &prep.sys, family, opts);
    let mut notices = Vec::new();
    let (trajectory, cross) = rayon::join(
        || start.as_ref().map(|s| run(&prep.sys, s, span, opts.h)),
        || family.and_then(|f| cross_check(&prep.sys, f, span, opts.h)),
    );
    let trajectory = match trajectory {
        Some(Ok(t)) => Some(t),
        Some(Err(e)) => {
            notices.push(format!("verification run failed: {e}"));
            None
        }
        None => {
            notices.push("no initial point for verification runs".into());
            None
        }
    };
    let mut derived = derived;
    if let Some(traj) = &trajectory {
        if let Some(e) = &traj.error {
            notices.push(format!("verification run stopped early: {e}"));
        }
        for e in measure_drifts(&mut derived.integrals, traj)
            .into_iter()
            .chain(measure_drifts(&mut declared_integrals, traj))
            .flatten()
        {
            notices.push(e);
        }
    }
    lap("numerics", &mut timings);
    Ok(Analysis {
        file: file.clone(),
        model: prep.model,
        restriction: prep.restriction,
        derived,
        declared_operators,
        declared_integrals,
        start,
        span,
        trajectory,
        solution,
        cross_check: cross.map(|r| r.map_err(|e| e.to_string())),
        notices,
        timings,
    })
}

fn drift_ok(i: &FirstIntegral) -> bool {
    i.verification.symbolic && i.verification.max_drift.is_none_or(|d| d < DRIFT_TOL)
}

impl Analysis {
    /// Reasons the run counts as a verification failure.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in self.derived.integrals.iter().chain(&self.declared_integrals) {
            if !drift_ok(i) {
                out.push(format!("integral {} not conserved", i.label));
            }
        }
        for o in &self.declared_operators {
            if !o.passed {
                out.push(format!("operator {} fails the determining equation", o.label));
            }
        }
        match &self.solution {
            Err(e) => out.push(format!("reduction failed: {e}")),
            Ok(s) => {
                for c in s.reduction.checks.iter().filter(|c| !c.passed) {
                    out.push(format!("check `{}` failed: {}", c.name, c.detail));
                }
                if let Some(q) = &s.reduction.quadrature {
                    if !q.validated {
                        out.push("quadrature does not differentiate back".into());
                    }
                }
                if let Some(tr) = &s.transversality {
                    if !tr.passed {
                        out.push("transversality tail test failed".into());
                    }
                }
            }
        }
        match &self.cross_check {
            Some(Ok(c)) if !c.passed => out.push(format!("closed form deviates from RK4 by {:e}", c.max_abs_error)),
            Some(Err(e)) => out.push(format!("cross-check run failed: {e}")),
            _ => {}
        }
        out
    }

    pub fn to_json(&self, command: &str, meta: bool) -> Value {
        let mut v = json!({
            "schema": 1,
            "command": command,
            "model": model_json(&self.model, &self.file),
            "restriction": self.restriction.as_ref().map(restriction_json),
            "operators": self.derived.derivation.operators.iter().map(operator_json).collect::<Vec<_>>(),
            "integrals": self.derived.integrals.iter().map(integral_json).collect::<Vec<_>>(),
            "independence_rank": self.derived.rank,
            "declared": {
                "operators": self.declared_operators.iter().map(|o| json!({
                    "label": o.label,
                    "passed": o.passed,
                    "residual": if o.passed { "0".to_string() } else { o.residual.to_string() },
                })).collect::<Vec<_>>(),
                "integrals": self.declared_integrals.iter().map(integral_json).collect::<Vec<_>>(),
            },
            "verification_run": {
                "start": self.start.as_ref().map(start_json),
                "span": self.span,
                "steps": self.trajectory.as_ref().map(|t| t.steps()),
                "max_foc_residual": self.trajectory.as_ref().map(|t| t.max_foc_residual),
                "error": self.trajectory.as_ref().and_then(|t| t.error.clone()),
            },
            "solution": match &self.solution {
                Ok(s) => solution_json(s),
                Err(e) => json!({ "error": e }),
            },
            "cross_check": match &self.cross_check {
                Some(Ok(c)) => json!({
                    "start": start_json(&c.start),
                    "span": c.span,
                    "max_abs_error": c.max_abs_error,
                    "passed": c.passed,
                }),
                Some(Err(e)) => json!({ "error": e }),
                None => Value::Null,
            },
            "notices": self.notices,
            "verdict": {
                "passed": self.failures().is_empty(),
                "failures": self.failures(),
            },
        });
        if meta {
            v["meta"] = json!({
                "version": env!("CARGO_PKG_VERSION"),
                "timings_ms": self.timings.iter().map(|(k, t)| (k.to_string(), json!(t))).collect::<serde_json::Map<_, _>>(),
            });
        }
        v
    }
}

fn rat(r: &Rational) -> String {
    rational_text(r)
}

/// Stable digest of the bound model.
pub fn model_digest(model: &ControlModel) -> String {
    let mut text = format!(
        "{}|{}|{:?}|{:?}|{:?}|{}",
        model.name, model.time, model.states, model.costates, model.controls, model.hamiltonian
    );
    for g in &model.discount {
        text.push_str(&format!("|{g}"));
    }
    for (k, v) in &model.params {
        text.push_str(&format!("|{k}={}", rat(v)));
    }
    let d = Sha256::digest(text.as_bytes());
    d.iter().map(|b| format!("{b:02x}")).collect()
}

fn model_json(model: &ControlModel, file: &ModelFile) -> Value {
    json!({
        "name": model.name,
        "digest": model_digest(model),
        "time": model.time.to_string(),
        "states": model.states.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "costates": model.costates.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "controls": model.controls.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "hamiltonian": model.hamiltonian.to_string(),
        "discount": model.discount.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "params": model.params.iter().map(|(k, v)| (k.to_string(), json!(rat(v)))).collect::<serde_json::Map<_, _>>(),
        "restricted": file.free.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "guards": model.guards.iter().map(|g| g.describe()).collect::<Vec<_>>(),
    })
}

fn restriction_json(r: &RestrictionReport) -> Value {
    json!({
        "parameter": r.parameter,
        "unrestricted": r.unrestricted,
        "roots": r.roots.iter().map(|x| json!({
            "value": x.value,
            "exact": x.exact.as_ref().map(rat),
            "validated": x.validated,
            "operators": x.operators,
        })).collect::<Vec<_>>(),
        "notices": r.notices,
    })
}

pub fn operator_json(o: &PHOperator) -> Value {
    json!({
        "label": o.label,
        "xi": o.xi.to_string(),
        "eta": o.eta.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        "B": o.b.to_string(),
        "rate": o.rate.as_ref().map(rat),
        "approximate": o.approximate,
    })
}

pub fn integral_json(i: &FirstIntegral) -> Value {
    json!({
        "label": i.label,
        "source": i.source,
        "costate_form": i.costate_form.to_string(),
        "control_form": i.control_form.as_ref().map(|e| e.to_string()),
        "symbolic": i.verification.symbolic,
        "max_drift": i.verification.max_drift,
    })
}

fn start_json(s: &Start) -> Value {
    json!({ "q0": s.q0, "p0": s.p0, "source": s.source })
}

fn family_json(f: &SolutionFamily) -> Value {
    json!({
        "kind": f.kind.as_str(),
        "state": f.state.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        "costate": f.costate.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        "control": f.control.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        "constants": f.constants.iter().map(|c| json!({
            "symbol": c.symbol.to_string(),
            "role": match &c.role {
                ConstantRole::Integral => "integral".to_string(),
                ConstantRole::Integration => "integration".to_string(),
                ConstantRole::Initial(p) => format!("initial {p:?}").to_lowercase(),
            },
            "value": c.value.as_ref().map(rat),
        })).collect::<Vec<_>>(),
        "conditions": f.conditions,
    })
}

pub fn solution_json(s: &Solution) -> Value {
    let r = &s.reduction;
    json!({
        "integrals_used": r.integrals_used.iter().map(|(l, a)| json!({ "integral": l, "constant": a.to_string() })).collect::<Vec<_>>(),
        "steps": r.steps.iter().map(|e| json!({ "label": e.label, "lhs": e.lhs.to_string(), "rhs": e.rhs.to_string() })).collect::<Vec<_>>(),
        "ode": r.ode.as_ref().map(|o| json!({ "state": o.state.to_string(), "rhs": o.rhs.to_string() })),
        "shape": r.shape,
        "family": family_json(&r.family),
        "quadrature": r.quadrature.as_ref().map(|q| json!({
            "symbol": q.symbol.to_string(),
            "substitution": q.substitution.to_string(),
            "time_side": q.time_side.to_string(),
            "state_side": q.state_side.to_string(),
            "validated": q.validated,
        })),
        "checks": r.checks.iter().map(|c| json!({ "name": c.name, "passed": c.passed, "detail": c.detail })).collect::<Vec<_>>(),
        "transversality": s.transversality.as_ref().map(|t| json!({
            "discount": rat(&t.discount),
            "tail": t.tail.to_string(),
            "forced": t.forced.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "decay_rate": t.decay_rate.as_ref().map(rat),
            "limit_estimate": t.limit_estimate,
            "passed": t.passed,
            "diagnostics": t.diagnostics,
        })),
        "bound": family_json(&s.bound),
        "notices": r.notices.iter().chain(&s.notes).collect::<Vec<_>>(),
    })
}
