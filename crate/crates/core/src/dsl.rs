//! Line-oriented model files.
//!
//! ```text
//! # comment
//! model ramsey
//! time t
//! state k
//! costate lambda
//! control c
//! param beta = 3/10
//! param sigma                      # left free: restriction mode
//! guard beta*sigma - 1 != 0 "capital share differs from the elasticity"
//! hamiltonian = c^(1 - sigma) + lambda*(k^beta - delta*k - c)
//! discount = r                     # Γᵢ = r·pᵢ
//! initial k = 1
//! horizon 400
//! span 10
//! scan sigma 3/2 20
//! operator X: xi = exp(-t); eta = -k*exp(-t); B = 0
//! integral I = c^(-2)*exp(-t)
//! solve using -17/200 as A1, I3 as A2
//! constants A1 = 0
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

use crate::detsolve::PHOperator;
use crate::dynsys::{ControlModel, DynError, Guard, GuardRel};
use crate::reduce::{IntegralChoice, Selector, SolvePlan};
use crate::symcore::{parse_expr, Expr, SymError, Symbol};
use crate::Rational;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DslError {
    #[error("line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error(transparent)]
    Model(#[from] DynError),
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

/// A declared integral, in control or costate form.
#[derive(Clone, Debug, PartialEq)]
pub struct DeclaredIntegral {
    pub label: String,
    pub expr: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    pub param: Symbol,
    pub lo: f64,
    pub hi: f64,
}

/// Everything a model file declares.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub model: ControlModel,
    /// Parameters declared without a value.
    pub free: Vec<Symbol>,
    pub operators: Vec<PHOperator>,
    pub integrals: Vec<DeclaredIntegral>,
    pub initial: BTreeMap<Symbol, Rational>,
    /// Tail-test horizon.
    pub horizon: Option<f64>,
    /// Length of verification runs.
    pub span: Option<f64>,
    pub scan: Option<Scan>,
    pub plan: SolvePlan,
}

impl ModelFile {
    /// Some parameter is left for the restriction scan.
    pub fn restriction_mode(&self) -> bool {
        !self.free.is_empty()
    }
}

struct Line<'a> {
    no: usize,
    text: &'a str,
}

impl Line<'_> {
    fn err(&self, at: &str, msg: impl Into<String>) -> DslError {
        // `at` is normally a subslice of the line
        let (base, p) = (self.text.as_ptr() as usize, at.as_ptr() as usize);
        let off = if p >= base && p <= base + self.text.len() { p - base } else { 0 };
        DslError::Parse {
            line: self.no,
            col: self.text[..off.min(self.text.len())].chars().count() + 1,
            msg: msg.into(),
        }
    }

    fn expr(&self, src: &str) -> Result<Expr, DslError> {
        parse_expr(src).map_err(|e| match e {
            SymError::Parse { pos, msg } => self.err(skip_chars(src, pos), msg),
            SymError::UnknownFunction { name, pos } => self.err(skip_chars(src, pos), format!("unknown function `{name}`")),
            other => self.err(src, other.to_string()),
        })
    }

    fn number(&self, src: &str) -> Result<Rational, DslError> {
        let e = self.expr(src.trim())?;
        e.as_num().cloned().ok_or_else(|| self.err(src, format!("`{}` is not a number", src.trim())))
    }

    fn float(&self, src: &str) -> Result<f64, DslError> {
        let src = src.trim();
        if let Ok(x) = src.parse::<f64>() {
            return Ok(x);
        }
        let r = self.number(src)?;
        Ok(crate::symcore::rational_to_f64(&r))
    }
}

fn skip_chars(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[i..],
        None => &s[s.len()..],
    }
}

/// Splits off the first word; the rest keeps its position in the line.
fn word(s: &str) -> (&str, &str) {
    let s = s.trim_start();
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, &s[s.len()..]),
    }
}

fn after_eq<'a>(line: &Line<'_>, rest: &'a str) -> Result<&'a str, DslError> {
    let r = rest.trim_start();
    r.strip_prefix('=')
        .map(str::trim_start)
        .ok_or_else(|| line.err(r, "expected `=`"))
}

fn ident(line: &Line<'_>, s: &str) -> Result<Symbol, DslError> {
    let s = s.trim();
    let ok = s.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_alphanumeric() || c == '_');
    if ok {
        Ok(Symbol::new(s))
    } else {
        Err(line.err(s, format!("`{s}` is not a name")))
    }
}

/// Column of a symbol inside `src`, for undeclared-use errors.
fn symbol_at<'a>(src: &'a str, s: &Symbol) -> &'a str {
    let name = s.as_str();
    let mut from = 0;
    while let Some(i) = src[from..].find(name) {
        let at = from + i;
        let before = src[..at].chars().next_back();
        let after = src[at + name.len()..].chars().next();
        let boundary = |c: Option<char>| !c.is_some_and(|c| c.is_alphanumeric() || c == '_');
        if boundary(before) && boundary(after) {
            return &src[at..];
        }
        from = at + name.len();
    }
    src
}

#[derive(Default)]
struct Builder {
    name: Option<String>,
    time: Option<Symbol>,
    states: Vec<Symbol>,
    costates: Vec<Symbol>,
    controls: Vec<Symbol>,
    params: BTreeMap<Symbol, Rational>,
    free: Vec<Symbol>,
    guards: Vec<Guard>,
    hamiltonian: Option<Expr>,
    discount: Option<Expr>,
    operators: Vec<PHOperator>,
    integrals: Vec<DeclaredIntegral>,
    initial: BTreeMap<Symbol, Rational>,
    horizon: Option<f64>,
    span: Option<f64>,
    scan: Option<Scan>,
    plan: SolvePlan,
    declared: BTreeSet<Symbol>,
}

impl Builder {
    fn declare(&mut self, line: &Line<'_>, at: &str, s: Symbol) -> Result<Symbol, DslError> {
        if !self.declared.insert(s.clone()) {
            return Err(line.err(at, format!("`{s}` declared twice")));
        }
        Ok(s)
    }

    fn is_variable(&self, s: &Symbol) -> bool {
        self.time.as_ref() == Some(s) || self.states.contains(s) || self.costates.contains(s) || self.controls.contains(s)
    }

    /// An expression over declared symbols.
    fn checked(&self, line: &Line<'_>, src: &str) -> Result<Expr, DslError> {
        let e = line.expr(src)?;
        for s in e.symbols() {
            if !self.declared.contains(&s) {
                return Err(line.err(symbol_at(src, &s), format!("`{s}` is not declared")));
            }
        }
        Ok(e)
    }

    fn names(&mut self, line: &Line<'_>, rest: &str) -> Result<Vec<Symbol>, DslError> {
        let mut out = Vec::new();
        for part in rest.split([',', ' ', '\t']).filter(|s| !s.is_empty()) {
            let s = ident(line, part)?;
            out.push(self.declare(line, part, s)?);
        }
        if out.is_empty() {
            return Err(line.err(rest, "expected a name"));
        }
        Ok(out)
    }

    fn directive(&mut self, line: &Line<'_>, body: &str) -> Result<(), DslError> {
        let (kw, rest) = word(body);
        match kw {
            "model" => {
                let name = rest.trim();
                if name.is_empty() {
                    return Err(line.err(rest, "expected a model name"));
                }
                self.name = Some(name.to_string());
            }
            "time" => {
                if self.time.is_some() {
                    return Err(line.err(kw, "time declared twice"));
                }
                let v = self.names(line, rest)?;
                if v.len() != 1 {
                    return Err(line.err(rest, "exactly one time variable"));
                }
                self.time = Some(v[0].clone());
            }
            "state" => {
                let v = self.names(line, rest)?;
                self.states.extend(v);
            }
            "costate" => {
                let v = self.names(line, rest)?;
                self.costates.extend(v);
            }
            "control" => {
                let v = self.names(line, rest)?;
                self.controls.extend(v);
            }
            "param" => {
                let (name, value) = match rest.find('=') {
                    Some(i) => (&rest[..i], Some(&rest[i + 1..])),
                    None => (rest, None),
                };
                let s = ident(line, name)?;
                let s = self.declare(line, name.trim_start(), s)?;
                match value {
                    Some(v) => {
                        let r = line.number(v)?;
                        self.params.insert(s, r);
                    }
                    None => self.free.push(s),
                }
            }
            "guard" => self.guard(line, rest)?,
            "hamiltonian" => {
                let src = after_eq(line, rest)?;
                self.hamiltonian = Some(self.checked(line, src)?);
            }
            "discount" => {
                let src = after_eq(line, rest)?;
                let e = self.checked(line, src)?;
                if let Some(s) = e.symbols().iter().find(|s| self.is_variable(s)) {
                    return Err(line.err(symbol_at(src, s), "the discount rate must not depend on the variables"));
                }
                self.discount = Some(e);
            }
            "initial" => {
                let i = rest.find('=').ok_or_else(|| line.err(rest, "expected `name = value`"))?;
                let s = ident(line, &rest[..i])?;
                if !(self.states.contains(&s) || self.costates.contains(&s) || self.controls.contains(&s)) {
                    return Err(line.err(rest.trim_start(), format!("`{s}` is not a state, costate or control")));
                }
                let v = line.number(&rest[i + 1..])?;
                self.initial.insert(s, v);
            }
            "horizon" => self.horizon = Some(positive(line, rest)?),
            "span" => self.span = Some(positive(line, rest)?),
            "scan" => {
                let (p, r) = word(rest);
                let (lo, r) = word(r);
                let (hi, r) = word(r);
                if hi.is_empty() || !r.trim().is_empty() {
                    return Err(line.err(rest, "expected `scan <param> <lo> <hi>`"));
                }
                let param = ident(line, p)?;
                if !self.free.contains(&param) {
                    return Err(line.err(p, format!("`{param}` is not a free parameter")));
                }
                let (lo, hi) = (line.float(lo)?, line.float(hi)?);
                if lo >= hi {
                    return Err(line.err(rest, "empty scan interval"));
                }
                self.scan = Some(Scan { param, lo, hi });
            }
            "operator" => self.operator(line, rest)?,
            "integral" => {
                let i = rest.find('=').ok_or_else(|| line.err(rest, "expected `integral <label> = <expr>`"))?;
                let label = ident(line, &rest[..i])?;
                let expr = self.checked(line, &rest[i + 1..])?;
                self.integrals.push(DeclaredIntegral {
                    label: label.to_string(),
                    expr,
                });
            }
            "solve" => {
                let r = rest.trim_start();
                let r = r.strip_prefix("using").ok_or_else(|| line.err(r, "expected `solve using ...`"))?;
                for part in r.split(',') {
                    let (sel, c) = part
                        .split_once(" as ")
                        .ok_or_else(|| line.err(part, "expected `<rate or label> as <constant>`"))?;
                    let sel_t = sel.trim();
                    let selector = if sel_t.starts_with(|c: char| c.is_alphabetic()) {
                        Selector::Label(sel_t.to_string())
                    } else {
                        Selector::Rate(line.number(sel)?)
                    };
                    self.plan.uses.push(IntegralChoice {
                        selector,
                        constant: ident(line, c)?,
                    });
                }
            }
            "constants" => {
                for part in rest.split(',') {
                    let (name, v) = part
                        .split_once('=')
                        .ok_or_else(|| line.err(part, "expected `name = value`"))?;
                    let s = ident(line, name)?;
                    self.plan.values.insert(s, line.number(v)?);
                }
            }
            "" => {}
            other => return Err(line.err(other, format!("unknown directive `{other}`"))),
        }
        Ok(())
    }

    fn guard(&mut self, line: &Line<'_>, rest: &str) -> Result<(), DslError> {
        let (body, note) = match rest.find('"') {
            Some(i) => {
                let tail = &rest[i + 1..];
                let j = tail.find('"').ok_or_else(|| line.err(&rest[i..], "unterminated note"))?;
                if !tail[j + 1..].trim().is_empty() {
                    return Err(line.err(&tail[j + 1..], "text after the note"));
                }
                (&rest[..i], tail[..j].to_string())
            }
            None => (rest, String::new()),
        };
        let (at, rel, len) = if let Some(i) = body.find("!=") {
            (i, GuardRel::NonZero, 2)
        } else if let Some(i) = body.find('>') {
            (i, GuardRel::Positive, 1)
        } else if let Some(i) = body.find('<') {
            (i, GuardRel::Negative, 1)
        } else {
            return Err(line.err(body, "expected `!=`, `>` or `<`"));
        };
        let lhs = self.checked(line, &body[..at])?;
        let rhs = self.checked(line, &body[at + len..])?;
        self.guards.push(Guard {
            expr: lhs - rhs,
            rel,
            note,
        });
        Ok(())
    }

    fn operator(&mut self, line: &Line<'_>, rest: &str) -> Result<(), DslError> {
        let (label, body) = rest
            .split_once(':')
            .ok_or_else(|| line.err(rest, "expected `operator <label>: xi = ...; eta = ...; B = ...`"))?;
        let label = ident(line, label)?;
        let mut xi = None;
        let mut eta = Vec::new();
        let mut b = None;
        for part in body.split(';') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| line.err(part, "expected `component = expression`"))?;
            let e = self.checked(line, v)?;
            match k.trim() {
                "xi" => xi = Some(e),
                "eta" => eta.push(e),
                "B" => b = Some(e),
                other => return Err(line.err(k.trim_start(), format!("unknown component `{other}`"))),
            }
        }
        if eta.len() != self.states.len() {
            return Err(line.err(body, format!("expected {} eta component(s)", self.states.len())));
        }
        self.operators.push(PHOperator::new(
            label.as_str(),
            xi.unwrap_or_else(Expr::zero),
            eta,
            b.unwrap_or_else(Expr::zero),
        ));
        Ok(())
    }

    fn finish(self, last: usize) -> Result<ModelFile, DslError> {
        let missing = |what: &str| DslError::Parse {
            line: last.max(1),
            col: 1,
            msg: format!("missing `{what}`"),
        };
        let name = self.name.ok_or_else(|| missing("model"))?;
        let time = self.time.ok_or_else(|| missing("time"))?;
        let hamiltonian = self.hamiltonian.ok_or_else(|| missing("hamiltonian"))?;
        let rate = self.discount.unwrap_or_else(Expr::zero);
        if self.states.is_empty() {
            return Err(missing("state"));
        }
        if self.controls.is_empty() {
            return Err(missing("control"));
        }
        let model = ControlModel {
            name,
            time,
            discount: self.costates.iter().map(|p| &rate * &Expr::symbol(p)).collect(),
            states: self.states,
            costates: self.costates,
            controls: self.controls,
            hamiltonian,
            params: self.params,
            guards: self.guards,
        };
        model.validate()?;
        Ok(ModelFile {
            model,
            free: self.free,
            operators: self.operators,
            integrals: self.integrals,
            initial: self.initial,
            horizon: self.horizon,
            span: self.span,
            scan: self.scan,
            plan: self.plan,
        })
    }
}

fn positive(line: &Line<'_>, rest: &str) -> Result<f64, DslError> {
    let x = line.float(rest)?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(line.err(rest.trim_start(), "expected a positive number"))
    }
}

/// Parses model-file text.
pub fn parse_model(src: &str) -> Result<ModelFile, DslError> {
    let mut b = Builder::default();
    let mut last = 0;
    for (i, text) in src.lines().enumerate() {
        let line = Line { no: i + 1, text };
        let body = match text.find('#') {
            Some(j) => &text[..j],
            None => text,
        };
        if body.trim().is_empty() {
            continue;
        }
        last = i + 1;
        b.directive(&line, body)?;
    }
    if last == 0 {
        return Err(DslError::Parse {
            line: 1,
            col: 1,
            msg: "empty model file".into(),
        });
    }
    b.finish(last)
}

/// Reads and parses a model file.
pub fn load(path: &Path) -> Result<ModelFile, DslError> {
    let src = std::fs::read_to_string(path).map_err(|e| DslError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_model(&src)
}
