//! A small arithmetic-expression grammar for defining scalar fields and
//! form coefficients in config files and on the CLI.
//!
//! Supported: `+ - * / ^`, unary minus, parentheses, the functions
//! `sin cos tan exp ln log sqrt abs sinh cosh tanh asin acos atan`,
//! the constants `pi` and `e`, and free variables (chart coordinates and
//! the time variable `t`). `^` is right-associative.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

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

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut toks = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                toks.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                toks.push(Tok::Star);
                i += 1;
            }
            '/' => {
                toks.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                toks.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                toks.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                toks.push(Tok::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == '.') {
                    i += 1;
                }
                // Scientific notation: 1e-3, 2.5E+4.
                if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == '+' || bytes[j] == '-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = bytes[start..i].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|_| Error::Expr(format!("bad number literal `{s}`")))?;
                toks.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                toks.push(Tok::Ident(bytes[start..i].iter().collect()));
            }
            other => return Err(Error::Expr(format!("unexpected character `{other}`"))),
        }
    }
    Ok(toks)
}

#[derive(Debug, Clone)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Fun(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sinh,
    Cosh,
    Tanh,
    Asin,
    Acos,
    Atan,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "asin" => Func::Asin,
            "acos" => Func::Acos,
            "atan" => Func::Atan,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Asin => x.asin(),
            Func::Acos => x.acos(),
            Func::Atan => x.atan(),
        }
    }
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    vars: &'a [String],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(found) if found == t => Ok(()),
            found => Err(Error::Expr(format!("expected {t:?}, found {found:?}"))),
        }
    }

    // expr := term (("+" | "-") term)*
    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.next();
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // term := factor (("*" | "/") factor)*
    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Tok::Slash) => {
                    self.next();
                    lhs = Node::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // factor := ("-")* power
    fn factor(&mut self) -> Result<Node> {
        if let Some(Tok::Minus) = self.peek() {
            self.next();
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    // power := atom ("^" factor)?   (right-associative)
    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.next();
            let exp = self.factor()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Node::Const(v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                if let Some(Tok::LParen) = self.peek() {
                    let f = Func::from_name(&name)
                        .ok_or_else(|| Error::Expr(format!("unknown function `{name}`")))?;
                    self.next();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Node::Fun(f, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Const(std::f64::consts::PI)),
                    "e" => Ok(Node::Const(std::f64::consts::E)),
                    _ => {
                        let idx = self
                            .vars
                            .iter()
                            .position(|v| v == &name)
                            .ok_or_else(|| Error::Expr(format!("unknown variable `{name}`")))?;
                        Ok(Node::Var(idx))
                    }
                }
            }
            other => Err(Error::Expr(format!("unexpected token {other:?}"))),
        }
    }
}

fn eval_node(node: &Node, vals: &[f64]) -> f64 {
    match node {
        Node::Const(v) => *v,
        Node::Var(i) => vals[*i],
        Node::Neg(a) => -eval_node(a, vals),
        Node::Add(a, b) => eval_node(a, vals) + eval_node(b, vals),
        Node::Sub(a, b) => eval_node(a, vals) - eval_node(b, vals),
        Node::Mul(a, b) => eval_node(a, vals) * eval_node(b, vals),
        Node::Div(a, b) => eval_node(a, vals) / eval_node(b, vals),
        Node::Pow(a, b) => eval_node(a, vals).powf(eval_node(b, vals)),
        Node::Fun(f, a) => f.apply(eval_node(a, vals)),
    }
}

/// An expression compiled against a fixed, ordered variable list.
///
/// Evaluation takes the variable values in the same order. The struct is
/// cheap to clone and safe to share across threads.
#[derive(Clone)]
pub struct CompiledExpr {
    source: String,
    vars: Vec<String>,
    ast: Arc<Node>,
}

impl CompiledExpr {
    /// Parse `src` with the given variable names (coordinates first, then
    /// usually `t`).
    pub fn parse(src: &str, vars: &[String]) -> Result<CompiledExpr> {
        let toks = lex(src)?;
        let mut p = Parser {
            toks: &toks,
            pos: 0,
            vars,
        };
        let ast = p.expr()?;
        if p.pos != toks.len() {
            return Err(Error::Expr(format!(
                "trailing input after expression in `{src}`"
            )));
        }
        Ok(CompiledExpr {
            source: src.to_string(),
            vars: vars.to_vec(),
            ast: Arc::new(ast),
        })
    }

    pub fn eval(&self, vals: &[f64]) -> f64 {
        debug_assert_eq!(vals.len(), self.vars.len());
        eval_node(&self.ast, vals)
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

impl fmt::Debug for CompiledExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CompiledExpr({})", self.source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_polynomial() {
        let e = CompiledExpr::parse("r^2/2", &vars(&["r"])).unwrap();
        assert!((e.eval(&[0.5]) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = CompiledExpr::parse("-2^2 + 3*4", &vars(&[])).unwrap();
        assert!((e.eval(&[]) - 8.0).abs() < 1e-15);
        let f = CompiledExpr::parse("2*-3", &vars(&[])).unwrap();
        assert!((f.eval(&[]) + 6.0).abs() < 1e-15);
    }

    #[test]
    fn right_associative_power() {
        let e = CompiledExpr::parse("2^3^2", &vars(&[])).unwrap();
        assert!((e.eval(&[]) - 512.0).abs() < 1e-12);
    }

    #[test]
    fn functions_and_constants() {
        let e = CompiledExpr::parse("sin(pi/2) + exp(0) + sqrt(4)", &vars(&[])).unwrap();
        assert!((e.eval(&[]) - 4.0).abs() < 1e-14);
        let f = CompiledExpr::parse("cos(theta) * r + t", &vars(&["r", "theta", "z", "t"])).unwrap();
        assert!((f.eval(&[2.0, 0.0, 9.0, 0.25]) - 2.25).abs() < 1e-14);
    }

    #[test]
    fn scientific_notation() {
        let e = CompiledExpr::parse("1e-3 + 2.5E+1", &vars(&[])).unwrap();
        assert!((e.eval(&[]) - 25.001).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_symbols() {
        assert!(CompiledExpr::parse("foo(1)", &vars(&[])).is_err());
        assert!(CompiledExpr::parse("x + 1", &vars(&["y"])).is_err());
        assert!(CompiledExpr::parse("1 +", &vars(&[])).is_err());
        assert!(CompiledExpr::parse("(1", &vars(&[])).is_err());
        assert!(CompiledExpr::parse("1 2", &vars(&[])).is_err());
    }
}
