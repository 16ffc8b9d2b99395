//! Infix expression parser.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' args ')' | '(' expr ')'
//! ```
//!
//! Identifiers are the coordinates `x1..xN`, the constant `pi`, and named
//! parameters. Functions: `sin cos exp sqrt abs` and
//! `bump(r1, r2, radius)`.

use std::collections::BTreeMap;

use super::{Expr, Func, Node};
use crate::error::{Error, Result};

/// Where an expression lives, for variable validation and error positions.
#[derive(Debug, Clone, Default)]
pub struct ParseContext {
    pub dim: usize,
    pub params: BTreeMap<String, f64>,
    /// Line reported in errors (1-based).
    pub line: usize,
    /// Column of the first character of the source (1-based).
    pub column: usize,
}

impl ParseContext {
    pub fn new(dim: usize) -> Self {
        ParseContext {
            dim,
            params: BTreeMap::new(),
            line: 1,
            column: 1,
        }
    }

    pub fn with_params(mut self, params: &BTreeMap<String, f64>) -> Self {
        self.params = params.clone();
        self
    }

    pub fn at(mut self, line: usize, column: usize) -> Self {
        self.line = line;
        self.column = column;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> std::result::Result<Vec<(Tok, usize)>, (usize, String)> {
        let mut lexer = Lexer {
            src: src.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            while lexer.pos < lexer.src.len() && lexer.src[lexer.pos].is_ascii_whitespace() {
                lexer.pos += 1;
            }
            let start = lexer.pos;
            let Some(&c) = lexer.src.get(start) else {
                out.push((Tok::End, start));
                return Ok(out);
            };
            if c.is_ascii_digit() || c == b'.' {
                out.push((lexer.number()?, start));
            } else if c.is_ascii_alphabetic() || c == b'_' {
                while lexer.pos < lexer.src.len()
                    && (lexer.src[lexer.pos].is_ascii_alphanumeric() || lexer.src[lexer.pos] == b'_')
                {
                    lexer.pos += 1;
                }
                let word = String::from_utf8_lossy(&lexer.src[start..lexer.pos]).into_owned();
                out.push((Tok::Ident(word), start));
            } else if b"+-*/^(),".contains(&c) {
                lexer.pos += 1;
                out.push((Tok::Op(c as char), start));
            } else {
                return Err((start, format!("unexpected character `{}`", c as char)));
            }
        }
    }

    fn number(&mut self) -> std::result::Result<Tok, (usize, String)> {
        let start = self.pos;
        let digits = |l: &mut Self| {
            while l.pos < l.src.len() && l.src[l.pos].is_ascii_digit() {
                l.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>()
            .map(Tok::Num)
            .map_err(|_| (start, format!("malformed number `{text}`")))
    }
}

struct Parser<'c> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    ctx: &'c ParseContext,
}

type PResult<T> = std::result::Result<T, (usize, String)>;

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump_tok(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, op: char) -> PResult<()> {
        if *self.peek() == Tok::Op(op) {
            self.bump_tok();
            Ok(())
        } else {
            Err((self.offset(), format!("expected `{op}`")))
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump_tok();
                    lhs = lhs.add(&self.term()?);
                }
                Tok::Op('-') => {
                    self.bump_tok();
                    lhs = lhs.sub(&self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump_tok();
                    lhs = lhs.mul(&self.unary()?);
                }
                Tok::Op('/') => {
                    self.bump_tok();
                    lhs = lhs.div(&self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Op('-') {
            self.bump_tok();
            return Ok(self.unary()?.neg());
        }
        if *self.peek() == Tok::Op('+') {
            self.bump_tok();
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump_tok();
            let at = self.offset();
            let exponent = self.unary()?;
            let Some(p) = exponent.as_const() else {
                return Err((at, "exponent must be a constant".into()));
            };
            return Ok(base.powf(p));
        }
        Ok(base)
    }

    fn atom(&mut self) -> PResult<Expr> {
        let at = self.offset();
        match self.bump_tok() {
            Tok::Num(v) => Ok(Expr::constant(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::Op('(') {
                    self.bump_tok();
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Op(',') {
                        self.bump_tok();
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    return call(&name, args, at);
                }
                self.identifier(&name, at)
            }
            Tok::End => Err((at, "unexpected end of expression".into())),
            Tok::Op(c) => Err((at, format!("unexpected `{c}`"))),
        }
    }

    fn identifier(&self, name: &str, at: usize) -> PResult<Expr> {
        if let Some(v) = self.ctx.params.get(name) {
            return Ok(Expr::constant(*v));
        }
        if name == "pi" {
            return Ok(Expr::constant(std::f64::consts::PI));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if let Ok(i) = digits.parse::<usize>() {
                if i >= 1 && i <= self.ctx.dim {
                    return Ok(Expr::var(i - 1));
                }
                return Err((
                    at,
                    format!("coordinate `{name}` out of range x1..x{}", self.ctx.dim),
                ));
            }
        }
        Err((at, format!("unknown identifier `{name}`")))
    }
}

fn call(name: &str, args: Vec<Expr>, at: usize) -> PResult<Expr> {
    let unary = |f: Func, args: Vec<Expr>| -> PResult<Expr> {
        if args.len() != 1 {
            return Err((at, format!("`{name}` takes one argument")));
        }
        Ok(args[0].apply(f))
    };
    match name {
        "sin" => unary(Func::Sin, args),
        "cos" => unary(Func::Cos, args),
        "exp" => unary(Func::Exp, args),
        "sqrt" => unary(Func::Sqrt, args),
        "abs" => unary(Func::Abs, args),
        "bump" => {
            if args.len() != 3 {
                return Err((at, "`bump` takes (r1, r2, radius)".into()));
            }
            let (Some(r1), Some(r2)) = (args[0].as_const(), args[1].as_const()) else {
                return Err((at, "bump radii must be constants".into()));
            };
            if !(r1 >= 0.0 && r2 > r1) {
                return Err((at, "bump radii must satisfy 0 <= r1 < r2".into()));
            }
            // The bump depends on the squared radius, so sqrt(q) is unwrapped
            // to keep it smooth at the centre.
            let radius_sq = match args[2].node() {
                Node::Unary(Func::Sqrt, inner) => inner.clone(),
                _ => args[2].mul(&args[2]),
            };
            Ok(Expr::bump(r1, r2, &radius_sq))
        }
        _ => Err((at, format!("unknown function `{name}`"))),
    }
}

/// Parses one expression. Positions in errors are shifted by the context's
/// line and column.
pub fn parse_expr(src: &str, ctx: &ParseContext) -> Result<Expr> {
    let to_error = |(offset, message): (usize, String)| Error::Parse {
        line: ctx.line,
        column: ctx.column + offset,
        message,
    };
    let toks = Lexer::tokens(src).map_err(to_error)?;
    let mut parser = Parser { toks, pos: 0, ctx };
    let e = parser.expr().map_err(to_error)?;
    if *parser.peek() != Tok::End {
        return Err(to_error((parser.offset(), "trailing input".into())));
    }
    Ok(e)
}
