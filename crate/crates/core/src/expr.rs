//! Expressions over named chart coordinates.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' factor)?
//! base   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' base
//! ```
//!
//! Unary minus sits inside `base`, so `-x^2` reads as `(-x)^2`. Write
//! `-(x^2)` or `0 - x^2` for the other meaning.

use std::fmt::Write as _;

use thiserror::Error;

use crate::jets::{Func, JetError, Number};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected token {0:?}")]
    UnexpectedToken(String),
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("arity mismatch: {0}")]
    Arity(String),
    #[error("malformed number {0:?}")]
    BadNumber(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("expression refers to coordinate {index} but the point has {dim} coordinates")]
    MissingCoordinate { index: usize, dim: usize },
}

/// Expression tree with coordinates resolved to indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str, coord_names: &[String]) -> Result<Expr, ParseError> {
        let tokens = tokenize(src)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            names: coord_names,
            src_len: src.len(),
        };
        let expr = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(ParseError {
                kind: ParseErrorKind::UnexpectedToken(tok.kind.describe()),
                offset: tok.offset,
            });
        }
        Ok(expr)
    }

    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        Expr::Pow(Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// True when the expression has no coordinate references.
    pub fn is_constant(&self) -> bool {
        self.max_var().is_none()
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn free_vars(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(i) => out.push(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Replace every `Var(i)` by `replacements[i]`.
    pub fn substitute(&self, replacements: &[Expr]) -> Expr {
        let bx = |e: &Expr| Box::new(e.substitute(replacements));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => replacements[*i].clone(),
            Expr::Neg(a) => Expr::Neg(bx(a)),
            Expr::Call(f, a) => Expr::Call(*f, bx(a)),
            Expr::Add(a, b) => Expr::Add(bx(a), bx(b)),
            Expr::Sub(a, b) => Expr::Sub(bx(a), bx(b)),
            Expr::Mul(a, b) => Expr::Mul(bx(a), bx(b)),
            Expr::Div(a, b) => Expr::Div(bx(a), bx(b)),
            Expr::Pow(a, b) => Expr::Pow(bx(a), bx(b)),
        }
    }

    pub fn eval<N: Number>(&self, coords: &[f64]) -> Result<N, EvalError> {
        Ok(match self {
            Expr::Const(c) => N::from_const(*c),
            Expr::Var(i) => {
                if *i >= coords.len() {
                    return Err(EvalError::MissingCoordinate {
                        index: *i,
                        dim: coords.len(),
                    });
                }
                N::coordinate(*i, coords)?
            }
            Expr::Neg(a) => -a.eval::<N>(coords)?,
            Expr::Add(a, b) => a.eval::<N>(coords)? + b.eval::<N>(coords)?,
            Expr::Sub(a, b) => a.eval::<N>(coords)? - b.eval::<N>(coords)?,
            Expr::Mul(a, b) => a.eval::<N>(coords)? * b.eval::<N>(coords)?,
            Expr::Div(a, b) => a.eval::<N>(coords)?.checked_div(&b.eval::<N>(coords)?)?,
            Expr::Pow(a, b) => a.eval::<N>(coords)?.pow(&b.eval::<N>(coords)?)?,
            Expr::Call(f, a) => a.eval::<N>(coords)?.apply(*f)?,
        })
    }

    pub fn value(&self, coords: &[f64]) -> Result<f64, EvalError> {
        self.eval::<f64>(coords)
    }

    /// Render back to source text using the given coordinate names.
    pub fn render(&self, names: &[String]) -> String {
        let mut out = String::new();
        self.render_into(names, &mut out);
        out
    }

    fn render_into(&self, names: &[String], out: &mut String) {
        let bin = |out: &mut String, a: &Expr, op: &str, b: &Expr| {
            out.push('(');
            a.render_into(names, out);
            out.push_str(op);
            b.render_into(names, out);
            out.push(')');
        };
        match self {
            Expr::Const(c) => {
                let text = if *c != 0.0 && (c.abs() >= 1e15 || c.abs() < 1e-5) {
                    format!("{:e}", c.abs())
                } else {
                    format!("{}", c.abs())
                };
                if *c < 0.0 {
                    let _ = write!(out, "(-{text})");
                } else {
                    out.push_str(&text);
                }
            }
            Expr::Var(i) => match names.get(*i) {
                Some(n) => out.push_str(n),
                None => {
                    let _ = write!(out, "x{i}");
                }
            },
            Expr::Neg(a) => {
                out.push_str("(-");
                a.render_into(names, out);
                out.push(')');
            }
            Expr::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.render_into(names, out);
                out.push(')');
            }
            Expr::Add(a, b) => bin(out, a, " + ", b),
            Expr::Sub(a, b) => bin(out, a, " - ", b),
            Expr::Mul(a, b) => bin(out, a, "*", b),
            Expr::Div(a, b) => bin(out, a, "/", b),
            Expr::Pow(a, b) => bin(out, a, "^", b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Number(v) => v.to_string(),
            TokenKind::Ident(s) => s.clone(),
            TokenKind::Plus => "+".into(),
            TokenKind::Minus => "-".into(),
            TokenKind::Star => "*".into(),
            TokenKind::Slash => "/".into(),
            TokenKind::Caret => "^".into(),
            TokenKind::LParen => "(".into(),
            TokenKind::RParen => ")".into(),
            TokenKind::Comma => ",".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b'+' => Some(TokenKind::Plus),
            b'-' => Some(TokenKind::Minus),
            b'*' => Some(TokenKind::Star),
            b'/' => Some(TokenKind::Slash),
            b'^' => Some(TokenKind::Caret),
            b'(' => Some(TokenKind::LParen),
            b')' => Some(TokenKind::RParen),
            b',' => Some(TokenKind::Comma),
            _ => None,
        };
        if let Some(kind) = single {
            tokens.push(Token {
                kind,
                offset: start,
            });
            i += 1;
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError {
                kind: ParseErrorKind::BadNumber(text.to_string()),
                offset: start,
            })?;
            tokens.push(Token {
                kind: TokenKind::Number(value),
                offset: start,
            });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Ident(src[start..i].to_string()),
                offset: start,
            });
        } else {
            let ch = src[start..].chars().next().unwrap_or('?');
            return Err(ParseError {
                kind: ParseErrorKind::UnexpectedChar(ch),
                offset: start,
            });
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    names: &'a [String],
    src_len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn next(&mut self) -> Result<Token, ParseError> {
        let tok = self.tokens.get(self.pos).cloned().ok_or(ParseError {
            kind: ParseErrorKind::UnexpectedEnd,
            offset: self.src_len,
        })?;
        self.pos += 1;
        Ok(tok)
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), ParseError> {
        let tok = self.next()?;
        if tok.kind == kind {
            Ok(())
        } else if tok.kind == TokenKind::Comma {
            Err(ParseError {
                kind: ParseErrorKind::Arity("functions take exactly one argument".into()),
                offset: tok.offset,
            })
        } else {
            Err(ParseError {
                kind: ParseErrorKind::UnexpectedToken(tok.kind.describe()),
                offset: tok.offset,
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek_kind() {
                Some(TokenKind::Plus) => {
                    self.pos += 1;
                    lhs = Expr::add(lhs, self.term()?);
                }
                Some(TokenKind::Minus) => {
                    self.pos += 1;
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek_kind() {
                Some(TokenKind::Star) => {
                    self.pos += 1;
                    lhs = Expr::mul(lhs, self.factor()?);
                }
                Some(TokenKind::Slash) => {
                    self.pos += 1;
                    lhs = Expr::div(lhs, self.factor()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if let Some(TokenKind::Caret) = self.peek_kind() {
            self.pos += 1;
            let exponent = self.factor()?;
            return Ok(Expr::pow(base, exponent));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let tok = self.next()?;
        match tok.kind {
            TokenKind::Number(v) => Ok(Expr::Const(v)),
            TokenKind::Minus => Ok(Expr::Neg(Box::new(self.base()?))),
            TokenKind::LParen => {
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                let is_call = matches!(self.peek_kind(), Some(TokenKind::LParen));
                if let Some(func) = Func::from_name(&name) {
                    if !is_call {
                        return Err(ParseError {
                            kind: ParseErrorKind::Arity(format!("{name} needs one argument")),
                            offset: tok.offset,
                        });
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(TokenKind::RParen)?;
                    return Ok(Expr::call(func, arg));
                }
                let coord = self.names.iter().position(|n| *n == name);
                match (coord, is_call) {
                    (Some(_), true) => Err(ParseError {
                        kind: ParseErrorKind::Arity(format!("coordinate {name} is not a function")),
                        offset: tok.offset,
                    }),
                    (Some(i), false) => Ok(Expr::Var(i)),
                    (None, false) if name == "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    (None, _) => Err(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier(name),
                        offset: tok.offset,
                    }),
                }
            }
            other => Err(ParseError {
                kind: ParseErrorKind::UnexpectedToken(other.describe()),
                offset: tok.offset,
            }),
        }
    }
}
