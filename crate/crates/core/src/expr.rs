//! Arithmetic expressions over the spin variables `t` and `u`, used to give
//! the interaction function in configuration files.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numeric literals, the
//! constant `pi`, and the functions `pow(a,b)`, `exp(x)`, `ln(x)`, `sign(x)`,
//! `abs(x)`, `sqrt(x)` and `root(n,x)` (real n-th root; odd `n` accepts
//! negative `x`).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    T,
    U,
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Pow,
    Exp,
    Ln,
    Sign,
    Abs,
    Sqrt,
    Root,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "pow" => (Func::Pow, 2),
            "exp" => (Func::Exp, 1),
            "ln" => (Func::Ln, 1),
            "sign" => (Func::Sign, 1),
            "abs" => (Func::Abs, 1),
            "sqrt" => (Func::Sqrt, 1),
            "root" => (Func::Root, 2),
            _ => return None,
        })
    }
}

/// Real n-th root: `sign(x)|x|^(1/n)` for odd n, NaN for negative x with even n.
pub fn real_root(n: f64, x: f64) -> f64 {
    if x >= 0.0 {
        x.powf(1.0 / n)
    } else if n.fract() == 0.0 && (n as i64) % 2 != 0 {
        -(-x).powf(1.0 / n)
    } else {
        f64::NAN
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            toks: tokenize(src)?,
            pos: 0,
        };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::Config(format!(
                "unexpected `{}` in expression",
                p.toks[p.pos]
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        match self {
            Expr::Num(x) => *x,
            Expr::T => t,
            Expr::U => u,
            Expr::Neg(a) => -a.eval(t, u),
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval(t, u), b.eval(t, u));
                match op {
                    Op::Add => x + y,
                    Op::Sub => x - y,
                    Op::Mul => x * y,
                    Op::Div => x / y,
                    Op::Pow => x.powf(y),
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(t, u);
                match f {
                    Func::Pow => a.powf(args[1].eval(t, u)),
                    Func::Exp => a.exp(),
                    Func::Ln => a.ln(),
                    Func::Sign => {
                        if a == 0.0 {
                            0.0
                        } else {
                            a.signum()
                        }
                    }
                    Func::Abs => a.abs(),
                    Func::Sqrt => a.sqrt(),
                    Func::Root => real_root(a, args[1].eval(t, u)),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Num(x) => write!(f, "{x}"),
            Tok::Ident(s) => f.write_str(s),
            Tok::Sym(c) => write!(f, "{c}"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-3
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let x = s
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{s}` in expression")))?;
            out.push(Tok::Num(x));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Config(format!("unexpected character `{c}` in expression")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Config(format!("expected `{c}` in expression")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                Op::Add
            } else if self.eat('-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                Op::Mul
            } else if self.eat('/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            // right associative; binds tighter than unary minus on the left
            let exp = self.unary()?;
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| Error::Config("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(x) => Ok(Expr::Num(x)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "t" => Ok(Expr::T),
                "u" => Ok(Expr::U),
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                _ => {
                    let (func, arity) = Func::lookup(&name).ok_or_else(|| {
                        Error::Config(format!("unknown identifier `{name}` in expression"))
                    })?;
                    self.expect('(')?;
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != arity {
                        return Err(Error::Config(format!(
                            "`{name}` takes {arity} argument(s), got {}",
                            args.len()
                        )));
                    }
                    Ok(Expr::Call(func, args))
                }
            },
            Tok::Sym(c) => Err(Error::Config(format!("unexpected `{c}` in expression"))),
        }
    }
}
