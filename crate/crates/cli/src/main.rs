use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use cvham::catalog;
use cvham::detsolve::{restriction_solve, AnsatzSpec, ScanOptions};
use cvham::dsl::{load, DslError, ModelFile};
use cvham::pipeline::{self, Analysis, Options, DRIFT_TOL};
use cvham::symcore::{parse_expr, Symbol};
use cvham::Rational;

#[derive(Parser)]
#[command(name = "cvham", version, about = "Partial-Hamiltonian operators, first integrals and reductions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the bundled models.
    List,
    /// Search for operators and print them with their integrals.
    Derive {
        model: String,
        #[arg(long, default_value_t = 0)]
        deg_xi: u32,
        #[arg(long, default_value_t = 1)]
        deg_eta: u32,
        #[arg(long, default_value_t = 2)]
        deg_b: u32,
    },
    /// Check declared operators and integrals symbolically and by drift.
    Verify {
        model: String,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long = "T")]
        t_end: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "p0")]
        q0: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "q0")]
        p0: Option<Vec<f64>>,
    },
    /// Scan a parameter for values admitting an operator.
    Restrict {
        model: String,
        #[arg(long)]
        param: String,
        #[arg(long, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, allow_hyphen_values = true)]
        hi: f64,
    },
    /// Reduce with first integrals and test transversality.
    Solve {
        model: String,
        /// Values of integration constants, e.g. `A1=0,A2=1`.
        #[arg(long, value_delimiter = ',')]
        constants: Vec<String>,
    },
    /// Run the whole pipeline and write a JSON report.
    Report {
        model: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write trajectories as CSV into this directory.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Omit timings and version so that reports compare byte for byte.
        #[arg(long)]
        no_meta: bool,
    },
}

/// Usage and parse problems exit with 2, verification failures with 1.
enum Failure {
    Usage(anyhow::Error),
    Verify(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Verify(e.into())
    }
}

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow::anyhow!("{msg}"))
}

fn resolve(model: &str) -> Result<ModelFile, Failure> {
    let parsed = match catalog::model(model) {
        Some(m) => m,
        None if Path::new(model).exists() => load(Path::new(model)),
        None => {
            let names: Vec<&str> = catalog::MODELS.iter().map(|(n, _)| *n).collect();
            return Err(usage(format!("unknown model `{model}` (bundled: {})", names.join(", "))));
        }
    };
    parsed.map_err(|e| match e {
        DslError::Io { .. } => usage(e),
        other => Failure::Usage(anyhow::Error::new(other).context(format!("loading {model}"))),
    })
}

fn parse_constants(items: &[String]) -> Result<BTreeMap<Symbol, Rational>, Failure> {
    let mut out = BTreeMap::new();
    for item in items.iter().filter(|s| !s.trim().is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("constant `{item}` is not NAME=VALUE")))?;
        let value = parse_expr(v.trim())
            .ok()
            .and_then(|e| e.as_num().cloned())
            .ok_or_else(|| usage(format!("`{v}` is not a rational number")))?;
        if out.insert(Symbol::new(k.trim()), value).is_some() {
            return Err(usage(format!("constant `{}` given twice", k.trim())));
        }
    }
    Ok(out)
}

fn list() -> Result<(), Failure> {
    for (name, _) in catalog::MODELS {
        let m = catalog::model(name).expect("bundled")?;
        let mode = if m.restriction_mode() { "  [restriction]" } else { "" };
        println!("{name:<14} {}{mode}", catalog::summary(name).unwrap_or(""));
        println!("{:<14} H = {}", "", m.model.hamiltonian);
    }
    Ok(())
}

fn derive(model: &str, spec: AnsatzSpec) -> Result<(), Failure> {
    let file = resolve(model)?;
    let opts = Options { spec: spec.clone(), ..Options::default() };
    let prep = pipeline::prepare(&file, &opts)?;
    if let Some(r) = &prep.restriction {
        for root in r.roots.iter().filter(|r| r.validated) {
            println!("restriction: {} = {}", r.parameter, fmt_root(root.value, root.exact.as_ref()));
        }
    }
    let d = pipeline::derive_integrals(&prep.sys, &spec)?;
    println!("{} operator(s)", d.derivation.operators.len());
    for o in &d.derivation.operators {
        let eta: Vec<String> = o.eta.iter().map(|e| e.to_string()).collect();
        println!("  {}: xi = {}; eta = {}; B = {}", o.label, o.xi, eta.join(", "), o.b);
    }
    println!("{} integral(s)", d.integrals.len());
    for i in &d.integrals {
        println!("  {} = {}", i.label, i.costate_form);
        if let Some(c) = &i.control_form {
            println!("  {:width$}= {}", "", c, width = i.label.len() + 1);
        }
    }
    println!("independence rank {}", d.rank);
    Ok(())
}

fn fmt_root(v: f64, exact: Option<&Rational>) -> String {
    match exact {
        Some(r) => format!("{v:.12} (= {})", cvham::poly::rational_text(r)),
        None => format!("{v:.12}"),
    }
}

fn drift_text(d: Option<f64>) -> String {
    d.map_or("-".into(), |d| format!("{d:.2e}"))
}

fn verify(model: &str, opts: Options) -> Result<(), Failure> {
    let file = resolve(model)?;
    let a = pipeline::analyze(&file, &opts)?;
    if let Some(s) = &a.start {
        println!(
            "RK4 h = {} on [0, {}] from q0 = {:?}, p0 = {:?} ({})",
            opts.h, a.span, s.q0, s.p0, s.source
        );
    }
    let mut failed = Vec::new();
    let (ops_label, ints) = if a.declared_operators.is_empty() && a.declared_integrals.is_empty() {
        ("derived", &a.derived.integrals)
    } else {
        ("declared", &a.declared_integrals)
    };
    for o in &a.declared_operators {
        println!("operator {:<6} determining residual {}", o.label, if o.passed { "0" } else { "NONZERO" });
        if !o.passed {
            failed.push(o.label.clone());
        }
    }
    for i in ints {
        let ok = i.verification.symbolic && i.verification.max_drift.is_some_and(|d| d < DRIFT_TOL);
        println!(
            "integral {:<6} D(I) = 0: {:<5}  max drift {}",
            i.label,
            i.verification.symbolic,
            drift_text(i.verification.max_drift)
        );
        if !ok {
            failed.push(i.label.clone());
        }
    }
    for n in &a.notices {
        println!("note: {n}");
    }
    if failed.is_empty() {
        println!("all {ops_label} objects verified");
        Ok(())
    } else {
        Err(Failure::Verify(anyhow::anyhow!("verification failed for {}", failed.join(", "))))
    }
}

fn restrict(model: &str, param: &str, lo: f64, hi: f64) -> Result<(), Failure> {
    if !(lo < hi) {
        return Err(usage("--lo must be below --hi"));
    }
    let file = resolve(model)?;
    let target = Symbol::new(param);
    if !file.free.contains(&target) && !file.model.params.contains_key(&target) {
        return Err(usage(format!("`{param}` is not a parameter of {}", file.model.name)));
    }
    let rep = restriction_solve(&file.model, &AnsatzSpec::default(), &target, lo, hi, &ScanOptions::default())?;
    if rep.unrestricted {
        println!("{param} is unrestricted on [{lo}, {hi}]");
    }
    for r in &rep.roots {
        println!(
            "root {param} = {}  validated: {}  operators: {}",
            fmt_root(r.value, r.exact.as_ref()),
            r.validated,
            r.operators
        );
    }
    for n in &rep.notices {
        println!("note: {n}");
    }
    if rep.roots.is_empty() && !rep.unrestricted {
        return Err(Failure::Verify(anyhow::anyhow!("no root in [{lo}, {hi}]")));
    }
    Ok(())
}

fn print_solution(a: &Analysis) {
    let Ok(s) = &a.solution else { return };
    let r = &s.reduction;
    for e in &r.steps {
        println!("{}: {} = {}", e.label, e.lhs, e.rhs);
    }
    if let Some(shape) = &r.shape {
        println!("state equation shape: {shape}");
    }
    if let Some(q) = &r.quadrature {
        println!(
            "quadrature with {} = {}: ({}) dt = d{} / ({})  [validated: {}]",
            q.symbol, q.substitution, q.time_side, q.symbol, q.state_side, q.validated
        );
    }
    println!("solution ({})", r.family.kind.as_str());
    for c in &r.checks {
        println!("  check {:<28} {}  {}", c.name, if c.passed { "ok" } else { "FAILED" }, c.detail);
    }
    if let Some(t) = &s.transversality {
        let forced: Vec<String> = t.forced.iter().map(|s| format!("{s} = 0")).collect();
        if !forced.is_empty() {
            println!("transversality forces {}", forced.join(", "));
        }
        let f = &t.family;
        for (name, v) in [("state", &f.state), ("costate", &f.costate), ("control", &f.control)] {
            for e in v {
                println!("  {name}: {e}");
            }
        }
        if let Some(d) = &t.decay_rate {
            println!("tail decays at rate {}", cvham::poly::rational_text(d));
        }
        println!("transversality: {}", if t.passed { "satisfied" } else { "VIOLATED" });
        for d in &t.diagnostics {
            println!("  {d}");
        }
    }
    for n in r.notices.iter().chain(&s.notes) {
        println!("note: {n}");
    }
    if let Some(Ok(c)) = &a.cross_check {
        println!("closed form vs RK4 on [0, {}]: max abs error {:.2e}", c.span, c.max_abs_error);
    }
}

fn solve(model: &str, opts: Options) -> Result<(), Failure> {
    let file = resolve(model)?;
    let a = pipeline::analyze(&file, &opts)?;
    if let Err(e) = &a.solution {
        return Err(Failure::Verify(anyhow::anyhow!("reduction failed: {e}")));
    }
    print_solution(&a);
    let fails: Vec<String> = a
        .failures()
        .into_iter()
        .filter(|f| !f.starts_with("integral"))
        .collect();
    if fails.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(anyhow::anyhow!(fails.join("; "))))
    }
}

fn report(model: &str, out: &Path, csv: Option<&Path>, no_meta: bool, echo: String) -> Result<(), Failure> {
    let file = resolve(model)?;
    let a = pipeline::analyze(&file, &Options::default())?;
    let json = a.to_json(&echo, !no_meta);
    let text = serde_json::to_string_pretty(&json)? + "\n";
    std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    if let Some(dir) = csv {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        if let Some(t) = &a.trajectory {
            let p = dir.join(format!("{}_verify.csv", a.model.name));
            std::fs::write(&p, t.to_csv()).with_context(|| format!("writing {}", p.display()))?;
        }
        if let Some(Ok(c)) = &a.cross_check {
            let p = dir.join(format!("{}_solution.csv", a.model.name));
            std::fs::write(&p, c.trajectory.to_csv()).with_context(|| format!("writing {}", p.display()))?;
        }
    }
    let fails = a.failures();
    println!("wrote {}", out.display());
    if fails.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(anyhow::anyhow!(fails.join("; "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let echo = std::env::args().skip(1).collect::<Vec<_>>().join(" ");
    let res = match cli.cmd {
        Cmd::List => list(),
        Cmd::Derive { model, deg_xi, deg_eta, deg_b } => derive(
            &model,
            AnsatzSpec {
                deg_xi,
                deg_eta,
                deg_b,
                ..AnsatzSpec::default()
            },
        ),
        Cmd::Verify { model, h, t_end, q0, p0 } => verify(
            &model,
            Options {
                h,
                span: t_end,
                q0,
                p0,
                ..Options::default()
            },
        ),
        Cmd::Restrict { model, param, lo, hi } => restrict(&model, &param, lo, hi),
        Cmd::Solve { model, constants } => match parse_constants(&constants) {
            Ok(constants) => solve(&model, Options { constants, ..Options::default() }),
            Err(e) => Err(e),
        },
        Cmd::Report { model, out, csv, no_meta } => report(&model, &out, csv.as_deref(), no_meta, echo),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
