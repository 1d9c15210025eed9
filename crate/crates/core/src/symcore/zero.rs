use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eval::Compiled;
use super::expr::{Expr, Symbol};

/// Outcome of a zero test.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// Canonicalised to the literal zero.
    Structural,
    /// Every sample below the confirm threshold.
    Numeric { max_scaled: f64 },
    /// Some sample at or above the refute threshold.
    NonZero { max_scaled: f64 },
    /// Samples in the grey zone, or too few valid samples.
    Inconclusive { max_scaled: f64 },
}

impl Verdict {
    pub fn is_zero(&self) -> bool {
        matches!(self, Verdict::Structural | Verdict::Numeric { .. })
    }
}

/// Structural-then-numeric zero test.
///
/// Residuals are compared relative to the sum of the magnitudes of their
/// terms, so large cancelling terms do not look like a nonzero residual.
#[derive(Clone, Debug)]
pub struct ZeroTest {
    pub points: usize,
    pub lo: f64,
    pub hi: f64,
    pub confirm: f64,
    pub refute: f64,
    pub seed: u64,
}

impl Default for ZeroTest {
    fn default() -> Self {
        ZeroTest {
            points: 8,
            lo: 0.5,
            hi: 2.0,
            confirm: 1e-10,
            refute: 1e-6,
            seed: 0x5eed,
        }
    }
}

impl ZeroTest {
    /// Samples every free symbol uniformly on `[lo, hi]`.
    pub fn check(&self, e: &Expr) -> Verdict {
        let syms = e.symbols();
        let (lo, hi) = (self.lo, self.hi);
        self.check_with(e, |rng| {
            Some(syms.iter().map(|s| (s.clone(), rng.gen_range(lo..hi))).collect())
        })
    }

    /// Like [`check`](Self::check), with a caller-supplied sampler; returning
    /// `None` skips the draw.
    pub fn check_with<F>(&self, e: &Expr, mut sampler: F) -> Verdict
    where
        F: FnMut(&mut ChaCha8Rng) -> Option<BTreeMap<Symbol, f64>>,
    {
        if e.is_zero() {
            return Verdict::Structural;
        }
        let terms = e.terms();
        let vars = e.symbols();
        let compiled: Option<Vec<Compiled<f64>>> =
            terms.iter().map(|t| Compiled::new(t, &vars).ok()).collect();
        let Some(compiled) = compiled else {
            return Verdict::Inconclusive { max_scaled: f64::NAN };
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut got = 0;
        let mut worst = 0.0f64;
        for _ in 0..self.points * 20 {
            if got == self.points {
                break;
            }
            let Some(env) = sampler(&mut rng) else { continue };
            let Some(vals) = vars.iter().map(|v| env.get(v).copied()).collect::<Option<Vec<f64>>>()
            else {
                continue;
            };
            let Ok(tv) = compiled.iter().map(|c| c.eval(&vals)).collect::<Result<Vec<f64>, _>>()
            else {
                continue;
            };
            let sum: f64 = tv.iter().sum();
            let scale: f64 = tv.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            worst = worst.max(sum.abs() / scale);
            got += 1;
        }
        if got < self.points {
            Verdict::Inconclusive { max_scaled: worst }
        } else if worst < self.confirm {
            Verdict::Numeric { max_scaled: worst }
        } else if worst >= self.refute {
            Verdict::NonZero { max_scaled: worst }
        } else {
            Verdict::Inconclusive { max_scaled: worst }
        }
    }
}

/// Default zero test: structural or numerically confirmed.
pub fn is_zero(e: &Expr) -> bool {
    ZeroTest::default().check(e).is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse_expr;

    #[test]
    fn structural_and_numeric() {
        assert_eq!(ZeroTest::default().check(&Expr::zero()), Verdict::Structural);
        // log(a*b) - log(a) - log(b) does not canonicalise to zero
        let e = parse_expr("log(a*b) - log(a) - log(b)").unwrap();
        assert!(!e.is_zero());
        assert!(matches!(ZeroTest::default().check(&e), Verdict::Numeric { .. }));
        assert!(!is_zero(&parse_expr("x - 1").unwrap()));
    }

    #[test]
    fn unknown_functions_are_inconclusive() {
        let f = Expr::func(&Symbol::new("f"), &Symbol::new("t"), 0);
        assert!(matches!(ZeroTest::default().check(&f), Verdict::Inconclusive { .. }));
    }
}
