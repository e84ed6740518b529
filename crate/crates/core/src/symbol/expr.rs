//! Expression grammar for scalar symbols.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' '-'? integer)?
//! atom    := number | 'x' | 'i' | 'pi' | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ident   := exp | sin | cos | tanh | abs | sqrt | log | gauss | bump | piecewise
//! ```
//!
//! `gauss(y) = exp(-y²)`, `bump(y)` is the smooth cutoff equal to one on `|y| ≤ 1` and zero
//! on `|y| ≥ 2`, and `piecewise(a, l, r)` is `l` where `a < 0` and `r` elsewhere.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::jet::Jet;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Tanh,
    Abs,
    Sqrt,
    Log,
    Gauss,
    Bump,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
            Func::Gauss => "gauss",
            Func::Bump => "bump",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "log" | "ln" => Func::Log,
            "gauss" => Func::Gauss,
            "bump" => Func::Bump,
            _ => return None,
        })
    }

    /// True if the function is smooth at every point of its real domain.
    pub fn is_smooth(self) -> bool {
        !matches!(self, Func::Abs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(C64),
    X,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
    Piecewise(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { s: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn constant(c: C64) -> Expr {
        Expr::Const(c)
    }

    /// Taylor jet of length `n` at the real point `x`.
    pub fn jet(&self, x: f64, n: usize) -> Jet {
        match self {
            Expr::Const(c) => Jet::constant(*c, n),
            Expr::X => Jet::variable(x, n),
            Expr::Add(a, b) => a.jet(x, n) + b.jet(x, n),
            Expr::Sub(a, b) => a.jet(x, n) - b.jet(x, n),
            Expr::Mul(a, b) => a.jet(x, n) * b.jet(x, n),
            Expr::Div(a, b) => a.jet(x, n).div(&b.jet(x, n)),
            Expr::Neg(a) => -a.jet(x, n),
            Expr::Pow(a, e) => a.jet(x, n).powi(*e),
            Expr::Call(f, a) => {
                let j = a.jet(x, n);
                match f {
                    Func::Exp => j.exp(),
                    Func::Sin => j.sin_cos().0,
                    Func::Cos => j.sin_cos().1,
                    Func::Tanh => j.tanh(),
                    Func::Abs => j.abs(),
                    Func::Sqrt => j.sqrt(),
                    Func::Log => j.ln(),
                    Func::Gauss => (-(j * j)).exp(),
                    Func::Bump => j.bump(),
                }
            }
            Expr::Piecewise(a, l, r) => {
                if a.value(x).re < 0.0 {
                    l.jet(x, n)
                } else {
                    r.jet(x, n)
                }
            }
        }
    }

    pub fn value(&self, x: f64) -> C64 {
        self.jet(x, 1).value()
    }

    /// Coefficients `c_0, c_1, …` if the expression is a polynomial in `x`.
    pub fn as_polynomial(&self) -> Option<Vec<C64>> {
        let p = match self {
            Expr::Const(c) => vec![*c],
            Expr::X => vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            Expr::Add(a, b) => poly_add(&a.as_polynomial()?, &b.as_polynomial()?, 1.0),
            Expr::Sub(a, b) => poly_add(&a.as_polynomial()?, &b.as_polynomial()?, -1.0),
            Expr::Mul(a, b) => poly_mul(&a.as_polynomial()?, &b.as_polynomial()?),
            Expr::Div(a, b) => {
                let d = b.as_polynomial()?;
                if trim(d.clone()).len() != 1 || d[0] == C64::new(0.0, 0.0) {
                    return None;
                }
                a.as_polynomial()?.into_iter().map(|c| c / d[0]).collect()
            }
            Expr::Neg(a) => a.as_polynomial()?.into_iter().map(|c| -c).collect(),
            Expr::Pow(a, e) if *e >= 0 => {
                let base = a.as_polynomial()?;
                let mut acc = vec![C64::new(1.0, 0.0)];
                for _ in 0..*e {
                    acc = poly_mul(&acc, &base);
                }
                acc
            }
            _ => return None,
        };
        Some(trim(p))
    }

    /// True if no non-smooth construct (`abs`, `piecewise`) appears.
    pub fn is_smooth(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::X => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_smooth() && b.is_smooth()
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.is_smooth(),
            Expr::Call(f, a) => f.is_smooth() && a.is_smooth(),
            Expr::Piecewise(..) => false,
        }
    }
}

fn trim(mut p: Vec<C64>) -> Vec<C64> {
    while p.len() > 1 && *p.last().unwrap() == C64::new(0.0, 0.0) {
        p.pop();
    }
    p
}

fn poly_add(a: &[C64], b: &[C64], sign: f64) -> Vec<C64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| a.get(k).copied().unwrap_or_default() + b.get(k).copied().unwrap_or_default() * sign)
        .collect()
}

fn poly_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.im == 0.0 {
                    write!(f, "{}", c.re)
                } else if c.re == 0.0 {
                    write!(f, "({}*i)", c.im)
                } else {
                    write!(f, "({}+{}*i)", c.re, c.im)
                }
            }
            Expr::X => write!(f, "x"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Pow(a, e) => write!(f, "({a})^{e}"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Piecewise(a, l, r) => write!(f, "piecewise({a}, {l}, {r})"),
        }
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: String::from(msg) }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let paren = self.eat(b'(');
            let neg = self.eat(b'-');
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected an integer exponent"));
            }
            let txt = core::str::from_utf8(&self.s[start..self.pos]).unwrap_or("0");
            let mut e: i32 = txt.parse().map_err(|_| self.err("exponent out of range"))?;
            if neg {
                e = -e;
            }
            if paren {
                self.expect(b')')?;
            }
            return Ok(Expr::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len()
                    && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = core::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
                match name {
                    "x" => Ok(Expr::X),
                    "i" => Ok(Expr::Const(C64::new(0.0, 1.0))),
                    "pi" => Ok(Expr::Const(C64::new(core::f64::consts::PI, 0.0))),
                    "piecewise" => {
                        self.expect(b'(')?;
                        let a = self.expr()?;
                        self.expect(b',')?;
                        let l = self.expr()?;
                        self.expect(b',')?;
                        let r = self.expr()?;
                        self.expect(b')')?;
                        Ok(Expr::Piecewise(Box::new(a), Box::new(l), Box::new(r)))
                    }
                    _ => {
                        let f = Func::from_name(name).ok_or_else(|| {
                            Error::Parse { pos: start, msg: format!("unknown identifier '{name}'") }
                        })?;
                        self.expect(b'(')?;
                        let a = self.expr()?;
                        self.expect(b')')?;
                        Ok(Expr::Call(f, Box::new(a)))
                    }
                }
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.s;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        self.pos = i;
        let txt = core::str::from_utf8(&s[start..i]).unwrap_or("");
        let v: f64 = txt.parse().map_err(|_| Error::Parse { pos: start, msg: format!("bad number '{txt}'") })?;
        Ok(Expr::Const(C64::new(v, 0.0)))
    }
}
