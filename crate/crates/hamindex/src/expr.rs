//! A small arithmetic expression language for user-supplied Hamiltonians.
//!
//! Grammar (see docs/grammar.ebnf):
//!
//! ```text
//! expr    := term { ("+" | "-") term }
//! term    := factor { ("*" | "/") factor }
//! factor  := "-" factor | power
//! power   := atom [ "^" exponent ]
//! exponent:= "-" exponent | power            (right-associative)
//! atom    := number | "pi" | "e" | variable
//!          | function "(" expr ")" | "(" expr ")"
//! ```
//!
//! `^` binds tighter than unary minus, so `-x1^2` parses as `-(x1^2)`.
//! Variables are `t` and `x1`..`xd` for the declared dimension d; functions
//! are sin, cos, tan, atan, exp, log, sqrt, abs. Unknown identifiers are
//! rejected at parse time with their byte position.

use crate::error::{Error, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    /// 1-based coordinate index (x1..xd).
    X(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Atan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "atan" => Func::Atan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn apply(&self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Atan => v.atan(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Num(f64),
    Var(Var),
    Neg(Box<ExprAst>),
    Binary(BinOp, Box<ExprAst>, Box<ExprAst>),
    Call(Func, Box<ExprAst>),
}

impl ExprAst {
    /// Parse against the declared variable set {t, x1..xdim}.
    pub fn parse(src: &str, dim: usize) -> Result<ExprAst> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            dim,
            src,
        };
        let ast = p.expr()?;
        if p.pos != p.tokens.len() {
            let (tok_pos, _) = p.tokens[p.pos];
            return Err(Error::spec(format!(
                "unexpected input at position {tok_pos} in \"{src}\""
            )));
        }
        Ok(ast)
    }

    /// Evaluation is total on the declared variable set; domain violations
    /// propagate as NaN/inf rather than panicking.
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            ExprAst::Num(v) => *v,
            ExprAst::Var(Var::T) => t,
            ExprAst::Var(Var::X(i)) => x[i - 1],
            ExprAst::Neg(e) => -e.eval(t, x),
            ExprAst::Binary(op, a, b) => {
                let (a, b) = (a.eval(t, x), b.eval(t, x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            ExprAst::Call(f, e) => f.apply(e.eval(t, x)),
        }
    }
}

impl fmt::Display for ExprAst {
    /// Fully parenthesized form; reparsing it reproduces the tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprAst::Num(v) => {
                if *v < 0.0 {
                    write!(f, "({v})")
                } else {
                    write!(f, "{v}")
                }
            }
            ExprAst::Var(Var::T) => write!(f, "t"),
            ExprAst::Var(Var::X(i)) => write!(f, "x{i}"),
            ExprAst::Neg(e) => write!(f, "(-{e})"),
            ExprAst::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a}{sym}{b})")
            }
            ExprAst::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((i, Tok::Plus));
                i += 1;
            }
            '-' => {
                out.push((i, Tok::Minus));
                i += 1;
            }
            '*' => {
                out.push((i, Tok::Star));
                i += 1;
            }
            '/' => {
                out.push((i, Tok::Slash));
                i += 1;
            }
            '^' => {
                out.push((i, Tok::Caret));
                i += 1;
            }
            '(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == b'.'
                        || bytes[i] == b'e'
                        || bytes[i] == b'E'
                        || ((bytes[i] == b'+' || bytes[i] == b'-')
                            && i > start
                            && (bytes[i - 1] == b'e' || bytes[i - 1] == b'E')))
                {
                    i += 1;
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| {
                    Error::spec(format!("bad number \"{text}\" at position {start}"))
                })?;
                out.push((start, Tok::Num(v)));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            _ => {
                return Err(Error::spec(format!(
                    "unexpected character '{c}' at position {i}"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    dim: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn next(&mut self) -> Option<(usize, Tok)> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        match self.next() {
            Some((_, t)) if t == want => Ok(()),
            Some((p, t)) => Err(Error::spec(format!(
                "expected {want:?} at position {p}, found {t:?} in \"{}\"",
                self.src
            ))),
            None => Err(Error::spec(format!(
                "unexpected end of input in \"{}\"",
                self.src
            ))),
        }
    }

    fn expr(&mut self) -> Result<ExprAst> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = ExprAst::Binary(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = ExprAst::Binary(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<ExprAst> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = ExprAst::Binary(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = ExprAst::Binary(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<ExprAst> {
        if let Some(Tok::Minus) = self.peek() {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(ExprAst::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprAst> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            let exp = self.exponent()?;
            return Ok(ExprAst::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<ExprAst> {
        if let Some(Tok::Minus) = self.peek() {
            self.pos += 1;
            let inner = self.exponent()?;
            return Ok(ExprAst::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn atom(&mut self) -> Result<ExprAst> {
        match self.next() {
            Some((_, Tok::Num(v))) => Ok(ExprAst::Num(v)),
            Some((_, Tok::LParen)) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some((p, Tok::Ident(name))) => self.ident(p, &name),
            Some((p, t)) => Err(Error::spec(format!(
                "unexpected {t:?} at position {p} in \"{}\"",
                self.src
            ))),
            None => Err(Error::spec(format!(
                "unexpected end of input in \"{}\"",
                self.src
            ))),
        }
    }

    fn ident(&mut self, p: usize, name: &str) -> Result<ExprAst> {
        match name {
            "pi" => return Ok(ExprAst::Num(std::f64::consts::PI)),
            "e" => return Ok(ExprAst::Num(std::f64::consts::E)),
            "t" => return Ok(ExprAst::Var(Var::T)),
            _ => {}
        }
        if let Some(f) = Func::from_name(name) {
            self.expect(Tok::LParen)?;
            let arg = self.expr()?;
            self.expect(Tok::RParen)?;
            return Ok(ExprAst::Call(f, Box::new(arg)));
        }
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(i) = rest.parse::<usize>() {
                if i >= 1 && i <= self.dim {
                    return Ok(ExprAst::Var(Var::X(i)));
                }
                return Err(Error::spec(format!(
                    "variable x{i} out of range 1..={} at position {p} in \"{}\"",
                    self.dim, self.src
                )));
            }
        }
        Err(Error::spec(format!(
            "unknown identifier \"{name}\" at position {p} in \"{}\"",
            self.src
        )))
    }
}
