//! Closed-form initial data: a tiny complex-valued expression language.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Variables are `tau` (alias `t`), `x`, `y`, `z`; constants `i` and `pi`;
//! functions `sin`, `cos`, `exp`, `sqrt`.

use std::fmt;

use egm_core::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    /// Byte offset into the source string.
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at position {}: {}", self.position, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(C64),
    Var(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression in `(τ, x, y, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let mut p = Parser { src, pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr {
            root,
            source: src.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Value at `[τ, x, y, z]`.
    pub fn eval(&self, c: [f64; 4]) -> C64 {
        eval(&self.root, &c)
    }
}

fn eval(n: &Node, c: &[f64; 4]) -> C64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(k) => C64::new(c[*k], 0.0),
        Node::Neg(a) => -eval(a, c),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, c), eval(b, c));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => div(a, b),
                _ => pow(a, b),
            }
        }
        Node::Call(f, a) => {
            let a = eval(a, c);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Sqrt => a.sqrt(),
            }
        }
    }
}

/// Division that yields a non-finite value for a zero divisor.
fn div(a: C64, b: C64) -> C64 {
    if b.norm_sqr() == 0.0 {
        C64::new(f64::INFINITY, f64::INFINITY)
    } else {
        a / b
    }
}

fn pow(a: C64, b: C64) -> C64 {
    if b.im == 0.0 && b.re.fract() == 0.0 && b.re.abs() <= 64.0 {
        let n = b.re as i32;
        if n >= 0 {
            a.powi(n)
        } else {
            div(C64::new(1.0, 0.0), a.powi(-n))
        }
    } else {
        a.powc(b)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> ParseError {
        ParseError {
            position: self.pos,
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, ch: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(ch) {
            self.pos += ch.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Bin('+', Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Bin('-', Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Bin('*', Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Bin('/', Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let name = &self.src[start..self.pos];
                let func = match name {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    "sqrt" => Some(Func::Sqrt),
                    _ => None,
                };
                if let Some(f) = func {
                    if !self.eat('(') {
                        return Err(self.error(&format!("expected '(' after {name}")));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.error("expected ')'"));
                    }
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                match name {
                    "tau" | "t" => Ok(Node::Var(0)),
                    "x" => Ok(Node::Var(1)),
                    "y" => Ok(Node::Var(2)),
                    "z" => Ok(Node::Var(3)),
                    "i" => Ok(Node::Num(C64::new(0.0, 1.0))),
                    "pi" => Ok(Node::Num(C64::new(std::f64::consts::PI, 0.0))),
                    _ => Err(ParseError {
                        position: start,
                        message: format!("unknown identifier '{name}'"),
                    }),
                }
            }
            Some(c) => Err(self.error(&format!("unexpected character '{c}'"))),
        }
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = start;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut k = end + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            if k < bytes.len() && bytes[k].is_ascii_digit() {
                while k < bytes.len() && bytes[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let text = &self.src[start..end];
        let v: f64 = text.parse().map_err(|_| ParseError {
            position: start,
            message: format!("bad number '{text}'"),
        })?;
        self.pos = end;
        Ok(Node::Num(C64::new(v, 0.0)))
    }
}
