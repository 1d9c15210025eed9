use super::expr::{Expr, Node, Symbol};

/// Exact partial derivative with respect to `x`; other symbols are constants.
pub fn differentiate(e: &Expr, x: &Symbol) -> Expr {
    if !e.contains(x) {
        return Expr::zero();
    }
    match e.node() {
        Node::Num(_) => Expr::zero(),
        Node::Sym(s) => {
            if s == x {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Func(f) => {
            if &f.arg == x {
                Expr::func(&f.name, &f.arg, f.order + 1)
            } else {
                Expr::zero()
            }
        }
        Node::Add(ts) => Expr::add(ts.iter().map(|t| differentiate(t, x)).collect::<Vec<_>>()),
        Node::Mul(fs) => {
            let mut terms = Vec::new();
            for (i, f) in fs.iter().enumerate() {
                let df = differentiate(f, x);
                if df.is_zero() {
                    continue;
                }
                let mut prod: Vec<Expr> = Vec::with_capacity(fs.len());
                prod.extend(fs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g.clone()));
                prod.push(df);
                terms.push(Expr::mul(prod));
            }
            Expr::add(terms)
        }
        Node::Pow(b, p) => {
            if !p.contains(x) {
                let db = differentiate(b, x);
                Expr::mul([p.clone(), Expr::pow(b.clone(), p - Expr::one()), db])
            } else {
                // b^p * (p' log b + p b'/b)
                let dp = differentiate(p, x);
                let db = differentiate(b, x);
                let inner = Expr::mul([dp, Expr::log(b.clone())]) + Expr::mul([p.clone(), db, b.recip()]);
                Expr::mul([e.clone(), inner])
            }
        }
        Node::Exp(a) => Expr::mul([e.clone(), differentiate(a, x)]),
        Node::Log(a) => Expr::mul([differentiate(a, x), a.recip()]),
    }
}
