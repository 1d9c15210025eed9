//! Expression tree and canonicalizing constructors.
//!
//! Every `Expr` produced by the constructors in this module is already in
//! normal form: sums and products are flattened and sorted, like terms and
//! like bases are merged, rational arithmetic is folded, and products are
//! distributed over sums. Non-integer powers follow the positive-real
//! convention: `x^(1/2)` is only defined for `x > 0`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::Rational;

/// Interned-by-value symbol name. Cheap to clone and safe to share.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

/// The `order`-th derivative of an unknown scalar function of `arg`.
///
/// Used for the undetermined coefficient functions of an ansatz; the
/// differentiator maps `d/d arg` to `order + 1`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct FuncRef {
    pub name: Symbol,
    pub arg: Symbol,
    pub order: u32,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Node {
    Num(Rational),
    Sym(Symbol),
    Func(FuncRef),
    Pow(Expr, Expr),
    Exp(Expr),
    Log(Expr),
    Mul(Vec<Expr>),
    Add(Vec<Expr>),
}

/// Immutable, reference-counted expression in canonical form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl Node {
    fn rank(&self) -> u8 {
        match self {
            Node::Num(_) => 0,
            Node::Sym(_) => 1,
            Node::Func(_) => 2,
            Node::Pow(..) => 3,
            Node::Exp(_) => 4,
            Node::Log(_) => 5,
            Node::Mul(_) => 6,
            Node::Add(_) => 7,
        }
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        use Node::*;
        match (self.node(), other.node()) {
            (Num(a), Num(b)) => a.cmp(b),
            (Sym(a), Sym(b)) => a.cmp(b),
            (Func(a), Func(b)) => a.cmp(b),
            (Pow(b1, e1), Pow(b2, e2)) => b1.cmp(b2).then_with(|| e1.cmp(e2)),
            (Exp(a), Exp(b)) | (Log(a), Log(b)) => a.cmp(b),
            (Mul(a), Mul(b)) | (Add(a), Add(b)) => a.cmp(b),
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn raw(node: Node) -> Expr {
    Expr(Arc::new(node))
}

/// Largest integer exponent expanded or folded eagerly.
const MAX_EXPAND: u32 = 64;

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn num(r: Rational) -> Expr {
        raw(Node::Num(r))
    }

    pub fn int(i: i64) -> Expr {
        Expr::num(Rational::from_integer(BigInt::from(i)))
    }

    pub fn ratio(n: i64, d: i64) -> Expr {
        Expr::num(Rational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn sym(name: &str) -> Expr {
        raw(Node::Sym(Symbol::new(name)))
    }

    pub fn symbol(s: &Symbol) -> Expr {
        raw(Node::Sym(s.clone()))
    }

    pub fn func(name: &Symbol, arg: &Symbol, order: u32) -> Expr {
        raw(Node::Func(FuncRef {
            name: name.clone(),
            arg: arg.clone(),
            order,
        }))
    }

    pub fn as_num(&self) -> Option<&Rational> {
        match self.node() {
            Node::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self.node() {
            Node::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_integer(&self) -> Option<BigInt> {
        self.as_num().filter(|r| r.is_integer()).map(|r| r.to_integer())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Num(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Num(r) if r.is_one())
    }

    /// Terms of a sum, or the expression itself.
    pub fn terms(&self) -> Vec<Expr> {
        match self.node() {
            Node::Add(ts) => ts.clone(),
            _ if self.is_zero() => Vec::new(),
            _ => vec![self.clone()],
        }
    }

    /// Factors of a product (including a leading rational), or the expression itself.
    pub fn factors(&self) -> Vec<Expr> {
        match self.node() {
            Node::Mul(fs) => fs.clone(),
            _ => vec![self.clone()],
        }
    }

    /// Splits a term into its rational coefficient and the remaining monomial.
    pub fn split_coeff(&self) -> (Rational, Expr) {
        match self.node() {
            Node::Num(r) => (r.clone(), Expr::one()),
            Node::Mul(fs) => match fs[0].node() {
                Node::Num(r) => {
                    let rest = if fs.len() == 2 {
                        fs[1].clone()
                    } else {
                        raw(Node::Mul(fs[1..].to_vec()))
                    };
                    (r.clone(), rest)
                }
                _ => (Rational::one(), self.clone()),
            },
            _ => (Rational::one(), self.clone()),
        }
    }

    /// Whether the symbol occurs anywhere (unknown functions of it count).
    pub fn contains(&self, x: &Symbol) -> bool {
        match self.node() {
            Node::Num(_) => false,
            Node::Sym(s) => s == x,
            Node::Func(f) => &f.arg == x || &f.name == x,
            Node::Pow(b, e) => b.contains(x) || e.contains(x),
            Node::Exp(a) | Node::Log(a) => a.contains(x),
            Node::Mul(v) | Node::Add(v) => v.iter().any(|c| c.contains(x)),
        }
    }

    pub fn contains_func(&self) -> bool {
        match self.node() {
            Node::Num(_) | Node::Sym(_) => false,
            Node::Func(_) => true,
            Node::Pow(b, e) => b.contains_func() || e.contains_func(),
            Node::Exp(a) | Node::Log(a) => a.contains_func(),
            Node::Mul(v) | Node::Add(v) => v.iter().any(|c| c.contains_func()),
        }
    }

    /// Free symbols, sorted.
    pub fn symbols(&self) -> Vec<Symbol> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_symbols(&mut out);
        out.into_iter().collect()
    }

    fn collect_symbols(&self, out: &mut std::collections::BTreeSet<Symbol>) {
        match self.node() {
            Node::Num(_) => {}
            Node::Sym(s) => {
                out.insert(s.clone());
            }
            Node::Func(f) => {
                out.insert(f.arg.clone());
            }
            Node::Pow(b, e) => {
                b.collect_symbols(out);
                e.collect_symbols(out);
            }
            Node::Exp(a) | Node::Log(a) => a.collect_symbols(out),
            Node::Mul(v) | Node::Add(v) => v.iter().for_each(|c| c.collect_symbols(out)),
        }
    }

    /// Unknown-function atoms occurring in the expression.
    pub fn funcs(&self) -> Vec<FuncRef> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_funcs(&mut out);
        out.into_iter().collect()
    }

    fn collect_funcs(&self, out: &mut std::collections::BTreeSet<FuncRef>) {
        match self.node() {
            Node::Num(_) | Node::Sym(_) => {}
            Node::Func(f) => {
                out.insert(f.clone());
            }
            Node::Pow(b, e) => {
                b.collect_funcs(out);
                e.collect_funcs(out);
            }
            Node::Exp(a) | Node::Log(a) => a.collect_funcs(out),
            Node::Mul(v) | Node::Add(v) => v.iter().for_each(|c| c.collect_funcs(out)),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Num(_) | Node::Sym(_) | Node::Func(_) => 1,
            Node::Pow(b, e) => 1 + b.size() + e.size(),
            Node::Exp(a) | Node::Log(a) => 1 + a.size(),
            Node::Mul(v) | Node::Add(v) => 1 + v.iter().map(Expr::size).sum::<usize>(),
        }
    }

    // ---- canonical constructors -------------------------------------------

    pub fn add<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut constant = Rational::zero();
        let mut like: BTreeMap<Expr, Rational> = BTreeMap::new();
        let mut stack: Vec<Expr> = terms.into_iter().collect();
        while let Some(t) = stack.pop() {
            match t.node() {
                Node::Num(r) => constant += r,
                Node::Add(ts) => stack.extend(ts.iter().cloned()),
                _ => {
                    let (c, m) = t.split_coeff();
                    *like.entry(m).or_insert_with(Rational::zero) += c;
                }
            }
        }
        let mut out = Vec::with_capacity(like.len() + 1);
        if !constant.is_zero() {
            out.push(Expr::num(constant));
        }
        for (m, c) in like {
            if !c.is_zero() {
                out.push(make_term(c, m));
            }
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => raw(Node::Add(out)),
        }
    }

    pub fn mul<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut coeff = Rational::one();
        let mut exp_args: Vec<Expr> = Vec::new();
        let mut powers: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
        let mut sums: Vec<Expr> = Vec::new();
        let mut stack: Vec<Expr> = factors.into_iter().collect();
        while let Some(f) = stack.pop() {
            match f.node() {
                Node::Num(r) => {
                    if r.is_zero() {
                        return Expr::zero();
                    }
                    coeff *= r;
                }
                Node::Mul(fs) => stack.extend(fs.iter().cloned()),
                Node::Exp(a) => exp_args.push(a.clone()),
                Node::Pow(b, e) => powers.entry(b.clone()).or_default().push(e.clone()),
                Node::Add(_) => sums.push(f),
                _ => powers.entry(f).or_default().push(Expr::one()),
            }
        }
        // a sum that also appears as a power base merges with it
        sums.retain(|s| {
            if let Some(v) = powers.get_mut(s) {
                v.push(Expr::one());
                false
            } else {
                true
            }
        });

        let mut out: Vec<Expr> = Vec::new();
        let mut extra: Vec<Expr> = Vec::new();
        for (base, exps) in powers {
            let e = Expr::add(exps);
            // s^(n + f) with a sum s: keep s^f and expand the integer part
            if let (Node::Add(_), Some(q)) = (base.node(), e.as_num()) {
                if !q.is_integer() && *q > Rational::one() && q.floor() <= Rational::from_integer(BigInt::from(MAX_EXPAND)) {
                    let whole = q.floor();
                    out.push(raw(Node::Pow(base.clone(), Expr::num(q - &whole))));
                    let n = whole.to_integer().to_usize().unwrap_or(0);
                    sums.extend(std::iter::repeat_n(base.clone(), n));
                    continue;
                }
            }
            let r = Expr::pow(base.clone(), e);
            match r.node() {
                Node::Num(n) => {
                    if n.is_zero() {
                        return Expr::zero();
                    }
                    coeff *= n;
                }
                Node::Exp(a) => exp_args.push(a.clone()),
                Node::Pow(b, _) if *b == base => out.push(r),
                Node::Add(_) => sums.push(r),
                _ if r == base => out.push(r),
                _ => extra.push(r),
            }
        }
        if !exp_args.is_empty() {
            let a = Expr::add(exp_args);
            if !a.is_zero() {
                out.push(raw(Node::Exp(a)));
            }
        }
        if !extra.is_empty() {
            extra.extend(out);
            extra.extend(sums);
            extra.push(Expr::num(coeff));
            return Expr::mul(extra);
        }
        out.sort();
        let head = if out.is_empty() {
            Expr::num(coeff)
        } else if coeff.is_one() && out.len() == 1 {
            out.pop().unwrap()
        } else {
            let mut v = Vec::with_capacity(out.len() + 1);
            if !coeff.is_one() {
                v.push(Expr::num(coeff));
            }
            v.extend(out);
            raw(Node::Mul(v))
        };
        if sums.is_empty() {
            return head;
        }
        let mut acc = vec![head];
        for s in sums {
            let ts = s.terms();
            let mut next = Vec::with_capacity(acc.len() * ts.len());
            for a in &acc {
                for t in &ts {
                    next.push(Expr::mul([a.clone(), t.clone()]));
                }
            }
            acc = Expr::add(next).terms();
        }
        Expr::add(acc)
    }

    pub fn pow(base: Expr, e: Expr) -> Expr {
        if e.is_zero() {
            return Expr::one();
        }
        if e.is_one() {
            return base;
        }
        match base.node() {
            Node::Num(b) => pow_num(b, &e),
            Node::Exp(a) => Expr::exp(Expr::mul([a.clone(), e])),
            Node::Pow(b, a) => {
                let e_int = e.as_integer().is_some();
                let a_int = a.as_integer().is_some();
                if e_int || !a_int {
                    Expr::pow(b.clone(), Expr::mul([a.clone(), e]))
                } else {
                    raw(Node::Pow(base.clone(), e))
                }
            }
            Node::Mul(fs) => pow_mul(&base, fs, e),
            Node::Add(_) => pow_add(base.clone(), e),
            _ => raw(Node::Pow(base, e)),
        }
    }

    pub fn exp(a: Expr) -> Expr {
        if a.is_zero() {
            return Expr::one();
        }
        raw(Node::Exp(a))
    }

    pub fn log(a: Expr) -> Expr {
        if a.is_one() {
            return Expr::zero();
        }
        if let Node::Exp(x) = a.node() {
            return x.clone();
        }
        raw(Node::Log(a))
    }

    pub fn neg(&self) -> Expr {
        Expr::mul([Expr::int(-1), self.clone()])
    }

    pub fn recip(&self) -> Expr {
        Expr::pow(self.clone(), Expr::int(-1))
    }

    pub fn powi(&self, n: i64) -> Expr {
        Expr::pow(self.clone(), Expr::int(n))
    }

    /// Rebuilds a node from (already canonical) children through the constructors.
    pub(crate) fn rebuild(node: &Node, mut f: impl FnMut(&Expr) -> Expr) -> Expr {
        match node {
            Node::Num(_) | Node::Sym(_) | Node::Func(_) => raw(node.clone()),
            Node::Pow(b, e) => Expr::pow(f(b), f(e)),
            Node::Exp(a) => Expr::exp(f(a)),
            Node::Log(a) => Expr::log(f(a)),
            Node::Mul(v) => Expr::mul(v.iter().map(&mut f).collect::<Vec<_>>()),
            Node::Add(v) => Expr::add(v.iter().map(&mut f).collect::<Vec<_>>()),
        }
    }

    /// A power node with a zero base and negative exponent somewhere in the tree.
    pub fn zero_division(&self) -> Option<Expr> {
        match self.node() {
            Node::Pow(b, e) => {
                if b.is_zero() {
                    return Some(self.clone());
                }
                b.zero_division().or_else(|| e.zero_division())
            }
            Node::Exp(a) | Node::Log(a) => a.zero_division(),
            Node::Mul(v) | Node::Add(v) => v.iter().find_map(Expr::zero_division),
            _ => None,
        }
    }
}

fn make_term(c: Rational, m: Expr) -> Expr {
    if c.is_one() {
        return m;
    }
    if m.is_one() {
        return Expr::num(c);
    }
    match m.node() {
        Node::Mul(fs) => {
            let mut v = Vec::with_capacity(fs.len() + 1);
            v.push(Expr::num(c));
            v.extend(fs.iter().cloned());
            raw(Node::Mul(v))
        }
        _ => raw(Node::Mul(vec![Expr::num(c), m])),
    }
}

fn rational_powi(b: &Rational, n: &BigInt) -> Option<Rational> {
    let k = n.abs().to_u32().filter(|k| *k <= 4096)?;
    let p = num_traits::pow(b.clone(), k as usize);
    if n.is_negative() {
        if p.is_zero() {
            None
        } else {
            Some(p.recip())
        }
    } else {
        Some(p)
    }
}

fn pow_num(b: &Rational, e: &Expr) -> Expr {
    if b.is_one() {
        return Expr::one();
    }
    let Some(r) = e.as_num() else {
        return raw(Node::Pow(Expr::num(b.clone()), e.clone()));
    };
    if b.is_zero() {
        return if r.is_positive() {
            Expr::zero()
        } else {
            raw(Node::Pow(Expr::num(b.clone()), e.clone()))
        };
    }
    if r.is_integer() {
        return match rational_powi(b, &r.to_integer()) {
            Some(v) => Expr::num(v),
            None => raw(Node::Pow(Expr::num(b.clone()), e.clone())),
        };
    }
    if b.is_negative() {
        return raw(Node::Pow(Expr::num(b.clone()), e.clone()));
    }
    // b > 0, non-integer exponent: prime by prime, integer parts into the coefficient
    let mut coeff = Rational::one();
    let mut pows: Vec<Expr> = Vec::new();
    let factors = factor_int(b.numer())
        .into_iter()
        .map(|(p, m)| (p, Rational::from_integer(BigInt::from(m))))
        .chain(
            factor_int(b.denom())
                .into_iter()
                .map(|(p, m)| (p, -Rational::from_integer(BigInt::from(m)))),
        );
    for (p, m) in factors {
        let ex = m * r;
        let whole = ex.floor();
        let frac = &ex - &whole;
        let base = Rational::from_integer(p);
        match rational_powi(&base, &whole.to_integer()) {
            Some(v) => coeff *= v,
            None => return raw(Node::Pow(Expr::num(b.clone()), e.clone())),
        }
        if !frac.is_zero() {
            pows.push(raw(Node::Pow(Expr::num(base), Expr::num(frac))));
        }
    }
    pows.sort();
    match (coeff.is_one(), pows.len()) {
        (_, 0) => Expr::num(coeff),
        (true, 1) => pows.pop().unwrap(),
        (true, _) => raw(Node::Mul(pows)),
        (false, _) => {
            let mut v = vec![Expr::num(coeff)];
            v.extend(pows);
            raw(Node::Mul(v))
        }
    }
}

/// Trial-division factorisation; a cofactor left after the bound is kept whole.
fn factor_int(n: &BigInt) -> Vec<(BigInt, u32)> {
    let mut out = Vec::new();
    let mut n = n.abs();
    let one = BigInt::one();
    let mut d = BigInt::from(2);
    let mut steps = 0u32;
    while n > one && &d * &d <= n && steps < 1_000_000 {
        let mut m = 0;
        while (&n % &d).is_zero() {
            n /= &d;
            m += 1;
        }
        if m > 0 {
            out.push((d.clone(), m));
        }
        d += if d == BigInt::from(2) { 1 } else { 2 };
        steps += 1;
    }
    if n > one {
        match out.iter_mut().find(|(p, _)| *p == n) {
            Some((_, m)) => *m += 1,
            None => out.push((n, 1)),
        }
    }
    out
}

/// Factor that is positive wherever it is defined.
fn positive_factor(f: &Expr) -> bool {
    match f.node() {
        Node::Num(r) => r.is_positive(),
        Node::Exp(_) => true,
        Node::Pow(_, e) => e.as_integer().is_none(),
        _ => false,
    }
}

fn pow_mul(base: &Expr, fs: &[Expr], e: Expr) -> Expr {
    if e.as_integer().is_some() {
        return Expr::mul(fs.iter().map(|f| Expr::pow(f.clone(), e.clone())).collect::<Vec<_>>());
    }
    let (safe, rest): (Vec<Expr>, Vec<Expr>) = fs.iter().cloned().partition(positive_factor);
    if safe.is_empty() {
        return raw(Node::Pow(base.clone(), e));
    }
    let mut out: Vec<Expr> = safe.into_iter().map(|f| Expr::pow(f, e.clone())).collect();
    if !rest.is_empty() {
        out.push(Expr::pow(Expr::mul(rest), e));
    }
    Expr::mul(out)
}

fn pow_add(base: Expr, e: Expr) -> Expr {
    if let Some(n) = e.as_integer() {
        if n.is_positive() {
            if let Some(k) = n.to_u32().filter(|k| *k <= MAX_EXPAND) {
                let mut acc = base.clone();
                for _ in 1..k {
                    acc = Expr::mul([acc, base.clone()]);
                }
                return acc;
            }
        }
    }
    let e_int = e.as_integer().is_some();
    let mut content: Vec<Expr> = Vec::new();
    let mut s = base;

    // common exponential factor
    let ts = s.terms();
    let all_exp = ts.iter().all(|t| t.factors().iter().any(|f| matches!(f.node(), Node::Exp(_))));
    if all_exp {
        let first_exp = ts[0]
            .factors()
            .into_iter()
            .find_map(|f| match f.node() {
                Node::Exp(a) => Some(a.clone()),
                _ => None,
            })
            .unwrap();
        let inv = Expr::exp(first_exp.neg());
        s = Expr::add(ts.iter().map(|t| Expr::mul([t.clone(), inv.clone()])).collect::<Vec<_>>());
        content.push(Expr::exp(first_exp));
    }

    // rational content of the leading term
    let ts = s.terms();
    if !ts.is_empty() {
        let (c, _) = ts[0].split_coeff();
        if !c.is_one() && (e_int || c.is_positive()) {
            let inv = Expr::num(c.recip());
            s = Expr::add(ts.iter().map(|t| Expr::mul([t.clone(), inv.clone()])).collect::<Vec<_>>());
            content.push(Expr::num(c));
        }
    }

    if !matches!(s.node(), Node::Add(_)) {
        let mut out: Vec<Expr> = content.into_iter().map(|c| Expr::pow(c, e.clone())).collect();
        out.push(Expr::pow(s, e));
        return Expr::mul(out);
    }

    let core = match e.as_num() {
        Some(r) if !r.is_integer() && *r > Rational::one() && r.floor() <= Rational::from_integer(BigInt::from(MAX_EXPAND)) => {
            let whole = r.floor().to_integer().to_usize().unwrap_or(0);
            let frac = r - r.floor();
            let mut fs = vec![raw(Node::Pow(s.clone(), Expr::num(frac)))];
            fs.extend(std::iter::repeat_n(s, whole));
            Expr::mul(fs)
        }
        _ => raw(Node::Pow(s, e.clone())),
    };
    if content.is_empty() {
        return core;
    }
    let mut out: Vec<Expr> = content.into_iter().map(|c| Expr::pow(c, e.clone())).collect();
    out.push(core);
    Expr::mul(out)
}

// ---- operator sugar ---------------------------------------------------------

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs.clone())
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs.clone())
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::add([a, b]));
binop!(Sub, sub, |a, b| Expr::add([a, b.neg()]));
binop!(Mul, mul, |a, b| Expr::mul([a, b]));
binop!(Div, div, |a, b| Expr::mul([a, b.recip()]));

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl From<i64> for Expr {
    fn from(i: i64) -> Self {
        Expr::int(i)
    }
}

impl From<Rational> for Expr {
    fn from(r: Rational) -> Self {
        Expr::num(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: &str) -> Expr {
        Expr::sym(n)
    }

    #[test]
    fn like_terms_merge() {
        let q = s("q");
        assert_eq!(Expr::int(2) * &q + Expr::int(3) * &q, Expr::int(5) * &q);
    }

    #[test]
    fn exponentials_combine() {
        let t = s("t");
        let e = Expr::exp(t.clone()) * Expr::exp(Expr::int(2) * &t);
        assert_eq!(e, Expr::exp(Expr::int(3) * &t));
    }

    #[test]
    fn cancellation_to_zero() {
        let p = s("p");
        let h = Expr::ratio(1, 2);
        let e = &h * &p - &h + &h - &h * &p;
        assert!(e.is_zero());
    }

    #[test]
    fn integer_power_of_sum_expands() {
        let (a, b) = (s("a"), s("b"));
        let sq = Expr::pow(&a + &b, Expr::int(2));
        let expected = &a * &a + Expr::int(2) * &a * &b + &b * &b;
        assert_eq!(sq, expected);
    }

    #[test]
    fn nested_fractional_powers_combine() {
        let c = s("c");
        let inner = Expr::pow(c.clone(), Expr::ratio(-20, 3));
        assert_eq!(Expr::pow(inner, Expr::ratio(-3, 20)), c);
        // (x^2)^(1/2) must not collapse to x
        let x2 = Expr::pow(s("x"), Expr::int(2));
        let h = Expr::pow(x2, Expr::ratio(1, 2));
        assert!(matches!(h.node(), Node::Pow(..)));
    }

    #[test]
    fn rational_powers_fold() {
        assert_eq!(Expr::pow(Expr::int(4), Expr::ratio(1, 2)), Expr::int(2));
        assert_eq!(Expr::pow(Expr::ratio(2, 3), Expr::int(-2)), Expr::ratio(9, 4));
        let r = Expr::pow(Expr::int(2), Expr::ratio(3, 2));
        assert_eq!(r, Expr::int(2) * Expr::pow(Expr::int(2), Expr::ratio(1, 2)));
    }

    #[test]
    fn same_sum_base_merges_and_splits() {
        let sum = s("a") + Expr::int(1);
        let f = Expr::pow(sum.clone(), Expr::ratio(10, 7));
        let g = Expr::mul([sum.clone(), Expr::pow(sum.clone(), Expr::ratio(3, 7))]);
        assert_eq!(f, g);
    }

    #[test]
    fn exp_content_leaves_power_of_sum() {
        let t = s("t");
        let x = s("x");
        let sum = &x * Expr::exp(t.clone()) + Expr::exp(t.clone());
        let p = Expr::pow(sum, Expr::ratio(1, 2));
        let expected = Expr::exp(Expr::ratio(1, 2) * &t) * Expr::pow(&x + Expr::int(1), Expr::ratio(1, 2));
        assert_eq!(p, expected);
    }

    #[test]
    fn division_by_exp() {
        let t = s("t");
        let e = Expr::one() / Expr::exp(t.clone());
        assert_eq!(e, Expr::exp(t.neg()));
    }

    #[test]
    fn zero_base_negative_power_is_kept_for_domain_check() {
        let e = Expr::pow(Expr::zero(), Expr::int(-1));
        assert!(e.zero_division().is_some());
    }
}
