//! Seed expressions in λ: numbers, `lambda` (or `lam`, `l`, `λ`), `pi`,
//! + − * / (also × ÷), parentheses, and sin, cos, exp.

use crate::error::{Result, SrhError};
use crate::taylor::Taylor1;
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Lam,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    src: String,
    root: Node,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn lex(s: &str) -> Result<Vec<Tok>> {
    let cs: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        match c {
            ' ' | '\t' | '\n' => i += 1,
            '+' | '-' | '*' | '/' => {
                out.push(Tok::Op(c));
                i += 1
            }
            '×' => {
                out.push(Tok::Op('*'));
                i += 1
            }
            '÷' => {
                out.push(Tok::Op('/'));
                i += 1
            }
            '−' => {
                out.push(Tok::Op('-'));
                i += 1
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1
            }
            'λ' => {
                out.push(Tok::Ident("lambda".into()));
                i += 1
            }
            c if c.is_ascii_digit() || c == '.' => {
                let st = i;
                while i < cs.len() && (cs[i].is_ascii_digit() || cs[i] == '.') {
                    i += 1;
                }
                if i < cs.len() && (cs[i] == 'e' || cs[i] == 'E') {
                    let mut j = i + 1;
                    if j < cs.len() && (cs[j] == '+' || cs[j] == '-') {
                        j += 1;
                    }
                    if j < cs.len() && cs[j].is_ascii_digit() {
                        i = j;
                        while i < cs.len() && cs[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let t: String = cs[st..i].iter().collect();
                let v = t.parse::<f64>().map_err(|_| SrhError::Parse(format!("bad number '{t}'")))?;
                out.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let st = i;
                while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(cs[st..i].iter().collect()));
            }
            other => return Err(SrhError::Parse(format!("unexpected character '{other}' in '{s}'"))),
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

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            lhs = Node::Bin(c, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            lhs = Node::Bin(c, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Node> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.close()?;
                Ok(e)
            }
            Some(Tok::Ident(id)) => match id.as_str() {
                "lambda" | "lam" | "l" => Ok(Node::Lam),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                "sin" | "cos" | "exp" => {
                    let f = match id.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        _ => Func::Exp,
                    };
                    if self.next() != Some(Tok::LParen) {
                        return Err(SrhError::Parse(format!("expected '(' after {id}")));
                    }
                    let e = self.expr()?;
                    self.close()?;
                    Ok(Node::Call(f, Box::new(e)))
                }
                other => Err(SrhError::Parse(format!("unknown identifier '{other}'"))),
            },
            t => Err(SrhError::Parse(format!("unexpected token {t:?}"))),
        }
    }

    fn close(&mut self) -> Result<()> {
        match self.next() {
            Some(Tok::RParen) => Ok(()),
            _ => Err(SrhError::Parse("expected ')'".into())),
        }
    }
}

impl Expr {
    pub fn parse(s: &str) -> Result<Self> {
        let mut p = Parser { toks: lex(s)?, pos: 0 };
        if p.toks.is_empty() {
            return Err(SrhError::Parse("empty expression".into()));
        }
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(SrhError::Parse(format!("trailing input in '{s}'")));
        }
        Ok(Expr { src: s.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn eval(&self, lam: f64) -> f64 {
        fn go(n: &Node, x: f64) -> f64 {
            match n {
                Node::Num(v) => *v,
                Node::Lam => x,
                Node::Neg(a) => -go(a, x),
                Node::Bin(op, a, b) => {
                    let (a, b) = (go(a, x), go(b, x));
                    match op {
                        '+' => a + b,
                        '-' => a - b,
                        '*' => a * b,
                        _ => a / b,
                    }
                }
                Node::Call(f, a) => {
                    let a = go(a, x);
                    match f {
                        Func::Sin => a.sin(),
                        Func::Cos => a.cos(),
                        Func::Exp => a.exp(),
                    }
                }
            }
        }
        go(&self.root, lam)
    }

    /// Taylor coefficients about lam0 through `order`.
    pub fn taylor(&self, lam0: f64, order: usize) -> Taylor1 {
        fn go(n: &Node, x0: f64, k: usize) -> Taylor1 {
            match n {
                Node::Num(v) => Taylor1::constant(*v, k),
                Node::Lam => Taylor1::variable(x0, k),
                Node::Neg(a) => go(a, x0, k).neg(),
                Node::Bin(op, a, b) => {
                    let (a, b) = (go(a, x0, k), go(b, x0, k));
                    match op {
                        '+' => a.add(&b),
                        '-' => a.sub(&b),
                        '*' => a.mul(&b),
                        _ => a.div(&b),
                    }
                }
                Node::Call(f, a) => {
                    let a = go(a, x0, k);
                    match f {
                        Func::Sin => a.sin_cos().0,
                        Func::Cos => a.sin_cos().1,
                        Func::Exp => a.exp(),
                    }
                }
            }
        }
        go(&self.root, lam0, order)
    }

    /// (value, first derivative).
    pub fn eval_d1(&self, lam: f64) -> (f64, f64) {
        let t = self.taylor(lam, 1);
        (t.0[0], t.0[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("1 + lambda/2").unwrap();
        assert_eq!(e.eval(2.0), 2.0);
        assert_eq!(e.eval_d1(0.3).1, 0.5);
        let s = Expr::parse("0.3*sin(λ)").unwrap();
        assert!((s.eval(1.0) - 0.3 * 1f64.sin()).abs() < 1e-16);
        let c = Expr::parse("-exp(-l*2) × cos(pi*l) ÷ 3").unwrap();
        let x = 0.4f64;
        assert!((c.eval(x) + (-2.0 * x).exp() * (std::f64::consts::PI * x).cos() / 3.0).abs() < 1e-15);
        assert_eq!(Expr::parse("2e-3*lam").unwrap().eval(1.0), 2e-3);
    }

    #[test]
    fn taylor_matches_derivatives() {
        let e = Expr::parse("exp(sin(lambda)) / (1 + lambda*lambda)").unwrap();
        let t = e.taylor(0.7, 3);
        let h = 1e-3;
        let fd1 = (e.eval(0.7 + h) - e.eval(0.7 - h)) / (2.0 * h);
        let fd2 = (e.eval(0.7 + h) - 2.0 * e.eval(0.7) + e.eval(0.7 - h)) / (h * h);
        assert!((t.derivative(1) - fd1).abs() < 1e-5);
        assert!((t.derivative(2) - fd2).abs() < 1e-4);
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "1 +", "sin 2", "foo(1)", "(1", "1 2", "2 $ 3"] {
            assert!(Expr::parse(s).is_err(), "{s}");
        }
    }
}
