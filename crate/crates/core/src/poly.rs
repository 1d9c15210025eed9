//! Univariate polynomials, characteristic roots and exponential-polynomial
//! solutions of constant-coefficient linear ODEs.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::scalar::{recognize_rational, Field};
use crate::symcore::{Expr, Symbol};
use crate::Rational;

/// Dense polynomial with coefficients in ascending degree, no trailing zeros.
#[derive(Clone, PartialEq)]
pub struct Poly<F: Field> {
    coeffs: Vec<F>,
}

pub type ExactPoly = Poly<Rational>;
pub type Poly64 = Poly<f64>;

impl<F: Field> Poly<F> {
    pub fn new(mut coeffs: Vec<F>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: F) -> Self {
        Poly::new(vec![c])
    }

    pub fn monomial(c: F, k: usize) -> Self {
        let mut v = vec![F::zero(); k + 1];
        v[k] = c;
        Poly::new(v)
    }

    /// The polynomial `s`.
    pub fn x() -> Self {
        Poly::monomial(F::one(), 1)
    }

    pub fn coeffs(&self) -> &[F] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> F {
        self.coeffs.get(k).cloned().unwrap_or_else(F::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn lc(&self) -> F {
        self.coeffs.last().cloned().unwrap_or_else(F::zero)
    }

    pub fn scale(&self, c: &F) -> Self {
        Poly::new(self.coeffs.iter().map(|a| a.clone() * c.clone()).collect())
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let l = self.lc();
        Poly::new(self.coeffs.iter().map(|a| a.clone() / l.clone()).collect())
    }

    pub fn eval(&self, x: &F) -> F {
        self.coeffs
            .iter()
            .rev()
            .fold(F::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    pub fn derivative(&self) -> Self {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c.clone() * F::from_rational(&Rational::from_integer(BigInt::from(k))))
                .collect(),
        )
    }

    /// Quotient and remainder; panics on a zero divisor.
    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "polynomial division by zero");
        let dd = d.coeffs.len() - 1;
        let mut r = self.coeffs.clone();
        if r.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let mut q = vec![F::zero(); r.len() - dd];
        let l = d.lc();
        for k in (0..q.len()).rev() {
            let c = r[k + dd].clone() / l.clone();
            for (j, dj) in d.coeffs.iter().enumerate() {
                r[k + j] = r[k + j].clone() - c.clone() * dj.clone();
            }
            q[k] = c;
        }
        r.truncate(dd);
        (Poly::new(q), Poly::new(r))
    }

    pub fn gcd(a: &Self, b: &Self) -> Self {
        let (mut a, mut b) = (a.clone(), b.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// `p(s + a)`.
    pub fn shift(&self, a: &F) -> Self {
        let base = Poly::new(vec![a.clone(), F::one()]);
        self.coeffs
            .iter()
            .rev()
            .fold(Poly::zero(), |acc, c| &(&acc * &base) + &Poly::constant(c.clone()))
    }

    pub fn map<G: Field>(&self, f: impl Fn(&F) -> G) -> Poly<G> {
        Poly::new(self.coeffs.iter().map(f).collect())
    }
}

impl<F: Field> std::ops::Add for &Poly<F> {
    type Output = Poly<F>;
    fn add(self, o: &Poly<F>) -> Poly<F> {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }
}

impl<F: Field> std::ops::Sub for &Poly<F> {
    type Output = Poly<F>;
    fn sub(self, o: &Poly<F>) -> Poly<F> {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }
}

impl<F: Field> std::ops::Mul for &Poly<F> {
    type Output = Poly<F>;
    fn mul(self, o: &Poly<F>) -> Poly<F> {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![F::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                v[i + j] = v[i + j].clone() + a.clone() * b.clone();
            }
        }
        Poly::new(v)
    }
}

impl<F: Field> std::ops::Neg for &Poly<F> {
    type Output = Poly<F>;
    fn neg(self) -> Poly<F> {
        Poly::new(self.coeffs.iter().map(|c| -c.clone()).collect())
    }
}

impl<F: Field + fmt::Display> fmt::Debug for Poly<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl<F: Field + fmt::Display> fmt::Display for Poly<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})*s")?,
                _ => write!(f, "({c})*s^{k}")?,
            }
        }
        Ok(())
    }
}

impl ExactPoly {
    pub fn from_ints(c: &[i64]) -> Self {
        Poly::new(c.iter().map(|&x| Rational::from_integer(x.into())).collect())
    }

    pub fn to_f64(&self) -> Poly64 {
        self.map(|c| c.to_f64().unwrap_or(f64::NAN))
    }

    /// Yun's algorithm: `p = lc · Π fᵢ^i` with each `fᵢ` squarefree and monic.
    pub fn squarefree(&self) -> Vec<(ExactPoly, usize)> {
        let mut out = Vec::new();
        if self.degree().unwrap_or(0) == 0 {
            return out;
        }
        let f = self.monic();
        let df = f.derivative();
        let a0 = Poly::gcd(&f, &df);
        let mut b = f.div_rem(&a0).0;
        let mut c = df.div_rem(&a0).0;
        let mut d = &c - &b.derivative();
        let mut i = 1;
        while b.degree().unwrap_or(0) > 0 {
            let a = Poly::gcd(&b, &d);
            if a.degree().unwrap_or(0) > 0 {
                out.push((a.clone(), i));
            }
            b = b.div_rem(&a).0;
            c = d.div_rem(&a).0;
            d = &c - &b.derivative();
            i += 1;
        }
        out
    }

    /// Resultant via the Euclidean remainder sequence.
    pub fn resultant(a: &Self, b: &Self) -> Rational {
        if a.is_zero() || b.is_zero() {
            return Rational::zero();
        }
        let (da, db) = (a.degree().unwrap(), b.degree().unwrap());
        if db == 0 {
            return num_traits::pow(b.lc(), da);
        }
        let (_, r) = a.div_rem(b);
        if r.is_zero() {
            return Rational::zero();
        }
        let dr = r.degree().unwrap();
        let sign = if (da * db) % 2 == 1 { -Rational::one() } else { Rational::one() };
        sign * num_traits::pow(b.lc(), da - dr) * ExactPoly::resultant(b, &r)
    }
}

/// A real characteristic root.
#[derive(Clone, Debug, PartialEq)]
pub struct Root {
    pub value: Rational,
    /// `false` when `value` is only a rational approximation of an irrational root.
    pub exact: bool,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RootReport {
    pub roots: Vec<Root>,
    /// Complex-conjugate roots, counted with multiplicity, that were dropped.
    pub complex_dropped: usize,
}

fn newton(p: &Poly64, mut x: f64) -> f64 {
    let dp = p.derivative();
    for _ in 0..50 {
        let d = dp.eval(&x);
        if d == 0.0 {
            break;
        }
        let step = p.eval(&x) / d;
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Candidate rationals for `x`: small denominators first, then continued-fraction convergents.
fn rational_candidates(x: f64) -> Vec<Rational> {
    let mut out: Vec<Rational> = recognize_rational(x, 64, 1e-9).into_iter().collect();
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut y = x;
    for _ in 0..24 {
        let a = y.floor();
        let ai = BigInt::from(a as i64);
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if k1.bits() > 40 {
            break;
        }
        out.push(Rational::new(h1.clone(), k1.clone()));
        let frac = y - a;
        if frac.abs() < 1e-15 {
            break;
        }
        y = 1.0 / frac;
    }
    out
}

fn squarefree_real_roots(f: &ExactPoly, mult: usize, report: &mut RootReport) {
    let n = f.degree().unwrap_or(0);
    if n == 0 {
        return;
    }
    if n == 1 {
        let v = -f.coeff(0) / f.coeff(1);
        report.roots.push(Root { value: v, exact: true, multiplicity: mult });
        return;
    }
    let m = f.monic();
    let fm = m.to_f64();
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -fm.coeff(i);
    }
    let mut remaining = m.clone();
    let mut approx = Vec::new();
    for z in comp.complex_eigenvalues().iter() {
        if z.im.abs() > 1e-8 * z.re.abs().max(1.0) {
            report.complex_dropped += mult;
            continue;
        }
        let x = newton(&fm, z.re);
        let hit = rational_candidates(x)
            .into_iter()
            .find(|r| remaining.degree().unwrap_or(0) > 0 && remaining.eval(r).is_zero());
        match hit {
            Some(r) => {
                let lin = ExactPoly::new(vec![-r.clone(), Rational::one()]);
                remaining = remaining.div_rem(&lin).0;
                report.roots.push(Root { value: r, exact: true, multiplicity: mult });
            }
            None => approx.push(x),
        }
    }
    for x in approx {
        let v = Rational::from_float(x).unwrap_or_default();
        report.roots.push(Root { value: v, exact: false, multiplicity: mult });
    }
}

/// Real roots with multiplicity: squarefree split, companion eigenvalues,
/// Newton polish, then exact rational recognition.
pub fn real_roots(p: &ExactPoly) -> RootReport {
    let mut report = RootReport::default();
    for (f, mult) in p.squarefree() {
        squarefree_real_roots(&f, mult, &mut report);
    }
    report.roots.sort_by(|a, b| a.value.cmp(&b.value));
    report
}

/// `Σ coeff · t^k · e^{λt}` with rational rates and symbolic coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpPoly {
    /// `(λ, k)` → coefficient.
    pub terms: BTreeMap<(Rational, u32), Expr>,
}

impl ExpPoly {
    pub fn zero() -> Self {
        ExpPoly::default()
    }

    pub fn term(rate: Rational, k: u32, c: Expr) -> Self {
        let mut e = ExpPoly::zero();
        e.push(rate, k, c);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, rate: Rational, k: u32, c: Expr) {
        let key = (rate, k);
        let v = match self.terms.remove(&key) {
            Some(old) => old + c,
            None => c,
        };
        if !v.is_zero() {
            self.terms.insert(key, v);
        }
    }

    pub fn add(&self, o: &ExpPoly) -> ExpPoly {
        let mut out = self.clone();
        for ((r, k), c) in &o.terms {
            out.push(r.clone(), *k, c.clone());
        }
        out
    }

    pub fn scale(&self, c: &Expr) -> ExpPoly {
        let mut out = ExpPoly::zero();
        for ((r, k), v) in &self.terms {
            out.push(r.clone(), *k, v * c);
        }
        out
    }

    /// `d/dt`.
    pub fn derivative(&self) -> ExpPoly {
        let mut out = ExpPoly::zero();
        for ((r, k), c) in &self.terms {
            if !r.is_zero() {
                out.push(r.clone(), *k, Expr::num(r.clone()) * c);
            }
            if *k > 0 {
                out.push(r.clone(), k - 1, Expr::int(*k as i64) * c);
            }
        }
        out
    }

    /// `P(d/dt)` applied to `self`.
    pub fn apply(&self, p: &ExactPoly) -> ExpPoly {
        let mut out = ExpPoly::zero();
        let mut d = self.clone();
        for c in p.coeffs() {
            if !c.is_zero() {
                out = out.add(&d.scale(&Expr::num(c.clone())));
            }
            d = d.derivative();
        }
        out
    }

    pub fn to_expr(&self, t: &Symbol) -> Expr {
        let tt = Expr::symbol(t);
        Expr::add(
            self.terms
                .iter()
                .map(|((r, k), c)| {
                    Expr::mul([
                        c.clone(),
                        tt.powi(*k as i64),
                        Expr::exp(Expr::num(r.clone()) * &tt),
                    ])
                })
                .collect::<Vec<_>>(),
        )
    }

    /// A particular solution `y` of `P(d/dt) y = self`.
    pub fn particular(&self, p: &ExactPoly) -> ExpPoly {
        let mut out = ExpPoly::zero();
        for ((rate, k), c) in &self.terms {
            // e^{λt} z with P(D+λ) z = c t^k; P(s+λ) = s^m R(s)
            let q = p.shift(rate);
            let m = q.coeffs().iter().take_while(|a| a.is_zero()).count();
            let r = ExactPoly::new(q.coeffs()[m..].to_vec());
            let inv = series_inverse(&r, *k as usize + 1);
            // w = R(D)^{-1} t^k as a polynomial in t (ascending coefficients)
            let mut w = vec![Rational::zero(); *k as usize + 1];
            let mut dk = vec![Rational::zero(); *k as usize + 1];
            dk[*k as usize] = Rational::one();
            for a in &inv {
                for (i, v) in dk.iter().enumerate() {
                    w[i] += a * v;
                }
                dk = (1..dk.len())
                    .map(|i| &dk[i] * Rational::from_integer(BigInt::from(i)))
                    .chain(std::iter::once(Rational::zero()))
                    .collect();
            }
            // m-fold antiderivative
            for _ in 0..m {
                let mut nw = vec![Rational::zero(); w.len() + 1];
                for (i, v) in w.iter().enumerate() {
                    nw[i + 1] = v / Rational::from_integer(BigInt::from(i + 1));
                }
                w = nw;
            }
            for (i, v) in w.iter().enumerate() {
                if !v.is_zero() {
                    out.push(rate.clone(), i as u32, Expr::num(v.clone()) * c);
                }
            }
        }
        out
    }
}

/// First `n` coefficients of `1/r(s)` as a power series; `r(0) ≠ 0`.
fn series_inverse(r: &ExactPoly, n: usize) -> Vec<Rational> {
    let r0 = r.coeff(0);
    let mut out: Vec<Rational> = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = if i == 0 { Rational::one() } else { Rational::zero() };
        for j in 1..=i {
            acc -= r.coeff(j) * &out[i - j];
        }
        out.push(acc / &r0);
    }
    out
}

/// Sign-aware rational display used in reports.
pub fn rational_text(r: &Rational) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else if r.is_negative() {
        format!("-{}/{}", r.numer().abs(), r.denom())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Nearest `f64` of a root, for numeric consumers.
pub fn root_f64(r: &Root) -> f64 {
    r.value.to_f64().unwrap_or(f64::NAN)
}
