use std::sync::Arc;

use super::ast::{Expr, Func};
use super::symbols::SymbolTable;
use crate::error::{FieldError, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Int(i64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> FieldError {
    FieldError::Syntax { offset, message: message.into() }
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(usize, Tok)> {
        self.skip_ws();
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((start, Tok::End));
        };
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((start, t));
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
            return Ok((start, Tok::Ident(s)));
        }
        Err(syntax(start, format!("unexpected character `{}`", c as char)))
    }

    fn digits(&mut self) -> usize {
        let s = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        self.pos - s
    }

    fn number(&mut self, start: usize) -> Result<(usize, Tok)> {
        let int_digits = self.digits();
        let mut is_int = true;
        let mut frac_digits = 0;
        if self.src.get(self.pos) == Some(&b'.') {
            is_int = false;
            self.pos += 1;
            frac_digits = self.digits();
        }
        if int_digits + frac_digits == 0 {
            return Err(syntax(start, "malformed number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if self.digits() == 0 {
                // Not an exponent; leave the identifier-like suffix to the caller.
                self.pos = save;
            } else {
                is_int = false;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if is_int {
            if let Ok(v) = text.parse::<i64>() {
                return Ok((start, Tok::Int(v)));
            }
        }
        let v: f64 = text.parse().map_err(|_| syntax(start, "malformed number"))?;
        if !v.is_finite() {
            return Err(syntax(start, "number out of range"));
        }
        Ok((start, Tok::Num(v)))
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    at: usize,
    symbols: &'a SymbolTable,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<()> {
        let (at, t) = self.lex.next()?;
        self.at = at;
        self.tok = t;
        Ok(())
    }

    fn expr(&mut self) -> Result<Arc<Expr>> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Plus => {
                    self.bump()?;
                    lhs = Arc::new(Expr::Add(lhs, self.term()?));
                }
                Tok::Minus => {
                    self.bump()?;
                    lhs = Arc::new(Expr::Sub(lhs, self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Arc<Expr>> {
        let mut lhs = self.factor()?;
        loop {
            match self.tok {
                Tok::Star => {
                    self.bump()?;
                    lhs = Arc::new(Expr::Mul(lhs, self.factor()?));
                }
                Tok::Slash => {
                    self.bump()?;
                    lhs = Arc::new(Expr::Div(lhs, self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Arc<Expr>> {
        if self.tok == Tok::Minus {
            self.bump()?;
            let inner = self.factor()?;
            return Ok(match &*inner {
                Expr::Num(v) => Expr::num(-v),
                _ => Arc::new(Expr::Neg(inner)),
            });
        }
        let base = self.atom()?;
        if self.tok != Tok::Caret {
            return Ok(base);
        }
        self.bump()?;
        let negative = if self.tok == Tok::Minus {
            self.bump()?;
            true
        } else {
            false
        };
        let Tok::Int(n) = self.tok else {
            return Err(syntax(self.at, "exponent must be an integer literal"));
        };
        let n = if negative { -n } else { n };
        let n = i32::try_from(n).map_err(|_| syntax(self.at, "exponent out of range"))?;
        self.bump()?;
        if self.tok == Tok::Caret {
            return Err(syntax(self.at, "chained exponents need parentheses"));
        }
        Ok(Arc::new(Expr::Pow(base, n)))
    }

    fn atom(&mut self) -> Result<Arc<Expr>> {
        let at = self.at;
        match std::mem::replace(&mut self.tok, Tok::End) {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::num(v))
            }
            Tok::Int(v) => {
                self.bump()?;
                Ok(Expr::num(v as f64))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump()?;
                if let Some(f) = Func::from_name(&name) {
                    if self.tok != Tok::LParen {
                        return Err(syntax(self.at, format!("`{name}` must be followed by `(`")));
                    }
                    self.bump()?;
                    let e = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Arc::new(Expr::Call(f, e)));
                }
                if !self.symbols.contains(&name) {
                    return Err(FieldError::UndeclaredIdentifier(name));
                }
                Ok(Expr::var(&name))
            }
            Tok::End => Err(syntax(at, "unexpected end of input")),
            other => Err(syntax(at, format!("unexpected token {other:?}"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if self.tok != Tok::RParen {
            return Err(syntax(self.at, "expected `)`"));
        }
        self.bump()
    }
}

/// Parses `text` against the declared `symbols`.
pub fn parse_expr(text: &str, symbols: &SymbolTable) -> Result<Arc<Expr>> {
    let mut p = Parser {
        lex: Lexer { src: text.as_bytes(), pos: 0 },
        tok: Tok::End,
        at: 0,
        symbols,
    };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(syntax(p.at, format!("trailing input {:?}", p.tok)));
    }
    Ok(e)
}
