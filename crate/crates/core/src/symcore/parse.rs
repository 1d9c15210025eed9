use num_bigint::BigInt;
use num_traits::{Pow, Signed};

use super::expr::Expr;
use super::SymError;
use crate::Rational;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, SymError> {
    let b = src.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    while i < b.len() {
        let c = b[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && b.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let int_end = i;
            let mut frac = "";
            if i < b.len() && b[i] == b'.' {
                i += 1;
                let fs = i;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                frac = &src[fs..i];
            }
            let digits = format!("{}{frac}", &src[start..int_end]);
            let mut r = Rational::new(
                digits.parse::<BigInt>().unwrap_or_default(),
                BigInt::from(10).pow(frac.len() as u32),
            );
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                let neg = j < b.len() && b[j] == b'-';
                if j < b.len() && (b[j] == b'-' || b[j] == b'+') {
                    j += 1;
                }
                let es = j;
                while j < b.len() && b[j].is_ascii_digit() {
                    j += 1;
                }
                if j > es {
                    let k: u32 = src[es..j]
                        .parse()
                        .map_err(|_| SymError::Parse { pos: i, msg: "exponent too large".into() })?;
                    let p = Rational::from_integer(BigInt::from(10).pow(k));
                    r = if neg { r / p } else { r * p };
                    i = j;
                }
            }
            out.push((start, Tok::Num(r)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(SymError::Parse {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.1)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.0)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), SymError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(SymError::Parse {
                pos: self.pos(),
                msg: format!("expected `{c}`"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, SymError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat('+') {
                terms.push(self.term()?);
            } else if self.eat('-') {
                terms.push(-self.term()?);
            } else {
                return Ok(Expr::add(terms));
            }
        }
    }

    fn term(&mut self) -> Result<Expr, SymError> {
        let mut fs = vec![self.unary()?];
        loop {
            if self.eat('*') {
                fs.push(self.unary()?);
            } else if self.eat('/') {
                let pos = self.pos();
                let d = self.unary()?;
                if d.is_zero() {
                    return Err(SymError::Domain(format!("division by zero at {pos}")));
                }
                fs.push(d.recip());
            } else {
                return Ok(Expr::mul(fs));
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, SymError> {
        if self.eat('-') {
            Ok(-self.unary()?)
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, SymError> {
        let base = self.atom()?;
        if self.eat('^') {
            let pos = self.pos();
            let k = self.unary()?;
            if base.is_zero() && k.as_num().is_some_and(|r| r.is_negative()) {
                return Err(SymError::Domain(format!("zero to a negative power at {pos}")));
            }
            Ok(Expr::pow(base, k))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, SymError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Num(r)) => {
                self.at += 1;
                Ok(Expr::num(r))
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                if self.eat('(') {
                    let a = self.expr()?;
                    self.expect(')')?;
                    match name.as_str() {
                        "exp" => Ok(Expr::exp(a)),
                        "log" | "ln" => Ok(Expr::log(a)),
                        "sqrt" => Ok(Expr::pow(a, Expr::ratio(1, 2))),
                        _ => Err(SymError::UnknownFunction { name, pos }),
                    }
                } else {
                    Ok(Expr::sym(&name))
                }
            }
            Some(Tok::Op('(')) => {
                self.at += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Op(c)) => Err(SymError::Parse {
                pos,
                msg: format!("unexpected `{c}`"),
            }),
            None => Err(SymError::Parse {
                pos,
                msg: "unexpected end of input".into(),
            }),
        }
    }
}

/// Parses the expression syntax used in model files.
///
/// `/` is ordinary division, `^` binds tighter than unary minus and is
/// right-associative, and decimals are read as exact rationals.
pub fn parse_expr(src: &str) -> Result<Expr, SymError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: src.len(),
    };
    let e = p.expr()?;
    if p.at < p.toks.len() {
        return Err(SymError::Parse {
            pos: p.pos(),
            msg: "trailing input".into(),
        });
    }
    Ok(e)
}
