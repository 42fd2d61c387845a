//! Arithmetic expressions for structural equations.
//!
//! Equations are stored as interpreted trees so networks can be loaded from
//! files. The textual grammar is a small infix language:
//!
//! ```text
//! equation := expr | "N(" expr "," num ")" | "U(" num "," num ")"
//!           | expr "+" "N(" num "," num ")" | expr "+" "U(" num "," num ")"
//! expr     := term (("+" | "-") term)*
//! term     := unary (("*" | "/") unary)*
//! unary    := "-" unary | primary
//! primary  := number | ident | func "(" expr ")" | "(" expr ")"
//! func     := exp | cos | tanh | sigmoid
//! ```
//!
//! Trees are compiled to a flat stack program before sampling.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Cos,
    Tanh,
    Sigmoid,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Sigmoid => "sigmoid",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "cos" => Some(Func::Cos),
            "tanh" => Some(Func::Tanh),
            "sigmoid" => Some(Func::Sigmoid),
            _ => None,
        }
    }

    pub fn apply(self, t: f64) -> f64 {
        match self {
            Func::Exp => t.exp(),
            Func::Cos => t.cos(),
            Func::Tanh => t.tanh(),
            Func::Sigmoid => sigmoid(t),
        }
    }
}

/// Logistic function `1 / (1 + e^-t)`, evaluated without overflow.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// Names of all variables referenced by the expression.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn references(&self, var: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.references(var),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.references(var) || b.references(var)
            }
        }
    }

    /// Number of numeric literals, in depth-first order.
    pub fn constant_count(&self) -> usize {
        let mut n = 0;
        self.visit_constants(&mut |_| n += 1);
        n
    }

    fn visit_constants(&self, f: &mut impl FnMut(f64)) {
        match self {
            Expr::Const(c) => f(*c),
            Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) => a.visit_constants(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit_constants(f);
                b.visit_constants(f);
            }
        }
    }

    pub fn constants(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit_constants(&mut |c| out.push(c));
        out
    }

    /// Rewrite every numeric literal in depth-first order.
    pub fn map_constants(&self, f: &mut impl FnMut(f64) -> f64) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(f(*c)),
            Expr::Var(v) => Expr::Var(v.clone()),
            Expr::Neg(a) => Expr::Neg(Box::new(a.map_constants(f))),
            Expr::Call(g, a) => Expr::Call(*g, Box::new(a.map_constants(f))),
            Expr::Add(a, b) => {
                let a = a.map_constants(f);
                Expr::Add(Box::new(a), Box::new(b.map_constants(f)))
            }
            Expr::Sub(a, b) => {
                let a = a.map_constants(f);
                Expr::Sub(Box::new(a), Box::new(b.map_constants(f)))
            }
            Expr::Mul(a, b) => {
                let a = a.map_constants(f);
                Expr::Mul(Box::new(a), Box::new(b.map_constants(f)))
            }
            Expr::Div(a, b) => {
                let a = a.map_constants(f);
                Expr::Div(Box::new(a), Box::new(b.map_constants(f)))
            }
        }
    }

    /// Remove a variable from the expression.
    ///
    /// Summands that mention `var` are dropped from every sum; any remaining
    /// occurrence (e.g. inside `exp(-x)`) is replaced by zero.
    pub fn drop_variable(&self, var: &str) -> Expr {
        let dropped = match self {
            Expr::Add(..) | Expr::Sub(..) => {
                let mut terms = Vec::new();
                self.flatten_sum(false, &mut terms);
                let kept: Vec<(bool, Expr)> = terms
                    .into_iter()
                    .filter(|(_, t)| !t.references(var))
                    .map(|(neg, t)| (neg, t.drop_variable(var)))
                    .collect();
                rebuild_sum(kept)
            }
            Expr::Var(v) if v == var => Expr::Const(0.0),
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.drop_variable(var))),
            Expr::Call(g, a) => Expr::Call(*g, Box::new(a.drop_variable(var))),
            Expr::Mul(a, b) => Expr::Mul(
                Box::new(a.drop_variable(var)),
                Box::new(b.drop_variable(var)),
            ),
            Expr::Div(a, b) => Expr::Div(
                Box::new(a.drop_variable(var)),
                Box::new(b.drop_variable(var)),
            ),
        };
        dropped.simplified()
    }

    fn flatten_sum(&self, negated: bool, out: &mut Vec<(bool, Expr)>) {
        match self {
            Expr::Add(a, b) => {
                a.flatten_sum(negated, out);
                b.flatten_sum(negated, out);
            }
            Expr::Sub(a, b) => {
                a.flatten_sum(negated, out);
                b.flatten_sum(!negated, out);
            }
            other => out.push((negated, other.clone())),
        }
    }

    /// Fold `-(const)` into a literal so printing round-trips.
    pub fn simplified(&self) -> Expr {
        match self {
            Expr::Neg(a) => match a.simplified() {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            },
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Call(g, a) => Expr::Call(*g, Box::new(a.simplified())),
            Expr::Add(a, b) => Expr::Add(Box::new(a.simplified()), Box::new(b.simplified())),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.simplified()), Box::new(b.simplified())),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.simplified()), Box::new(b.simplified())),
            Expr::Div(a, b) => Expr::Div(Box::new(a.simplified()), Box::new(b.simplified())),
        }
    }

    /// Evaluate with a name lookup. Slow path; sampling uses [`Program`].
    pub fn eval_with(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, String> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => lookup(v).ok_or_else(|| format!("unbound variable `{v}`"))?,
            Expr::Neg(a) => -a.eval_with(lookup)?,
            Expr::Call(g, a) => g.apply(a.eval_with(lookup)?),
            Expr::Add(a, b) => a.eval_with(lookup)? + b.eval_with(lookup)?,
            Expr::Sub(a, b) => a.eval_with(lookup)? - b.eval_with(lookup)?,
            Expr::Mul(a, b) => a.eval_with(lookup)? * b.eval_with(lookup)?,
            Expr::Div(a, b) => {
                let d = b.eval_with(lookup)?;
                if d == 0.0 {
                    return Err("division by zero".into());
                }
                a.eval_with(lookup)? / d
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err("non-finite value".into())
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if c.is_sign_negative() => 3,
            _ => 4,
        }
    }

    /// Compile with variables resolved through `index`; literals stay inline.
    pub fn compile(&self, index: &HashMap<String, usize>) -> Result<Program, String> {
        let mut ops = Vec::new();
        self.emit(index, &mut ops, &mut None)?;
        Ok(Program { ops })
    }

    /// Compile with every literal turned into a parameter slot.
    ///
    /// Returns the program and the initial parameter vector (the literals in
    /// depth-first order).
    pub fn compile_parametric(
        &self,
        index: &HashMap<String, usize>,
    ) -> Result<(Program, Vec<f64>), String> {
        let mut ops = Vec::new();
        let mut params = Some(Vec::new());
        self.emit(index, &mut ops, &mut params)?;
        Ok((Program { ops }, params.unwrap_or_default()))
    }

    fn emit(
        &self,
        index: &HashMap<String, usize>,
        ops: &mut Vec<Op>,
        params: &mut Option<Vec<f64>>,
    ) -> Result<(), String> {
        match self {
            Expr::Const(c) => match params {
                Some(p) => {
                    ops.push(Op::Param(p.len()));
                    p.push(*c);
                }
                None => ops.push(Op::Const(*c)),
            },
            Expr::Var(v) => {
                let i = index
                    .get(v)
                    .ok_or_else(|| format!("unbound variable `{v}`"))?;
                ops.push(Op::Var(*i));
            }
            Expr::Neg(a) => {
                a.emit(index, ops, params)?;
                ops.push(Op::Neg);
            }
            Expr::Call(g, a) => {
                a.emit(index, ops, params)?;
                ops.push(Op::Call(*g));
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.emit(index, ops, params)?;
                b.emit(index, ops, params)?;
                ops.push(match self {
                    Expr::Add(..) => Op::Add,
                    Expr::Sub(..) => Op::Sub,
                    Expr::Mul(..) => Op::Mul,
                    _ => Op::Div,
                });
            }
        }
        Ok(())
    }
}

fn rebuild_sum(terms: Vec<(bool, Expr)>) -> Expr {
    let mut iter = terms.into_iter();
    let Some((neg, first)) = iter.next() else {
        return Expr::Const(0.0);
    };
    let mut acc = if neg {
        Expr::Neg(Box::new(first))
    } else {
        first
    };
    for (neg, t) in iter {
        acc = if neg {
            Expr::Sub(Box::new(acc), Box::new(t))
        } else {
            Expr::Add(Box::new(acc), Box::new(t))
        };
    }
    acc
}

fn write_num(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.fract() == 0.0 && c.abs() < 1e15 {
        write!(f, "{c:.1}")
    } else {
        write!(f, "{c}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_num(f, *c),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                if a.precedence() < 3 || matches!(**a, Expr::Const(_)) {
                    write!(f, "-({a})")
                } else {
                    write!(f, "-{a}")
                }
            }
            Expr::Call(g, a) => write!(f, "{}({a})", g.name()),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let (sym, p) = match self {
                    Expr::Add(..) => ("+", 1),
                    Expr::Sub(..) => ("-", 1),
                    Expr::Mul(..) => ("*", 2),
                    _ => ("/", 2),
                };
                if a.precedence() < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {sym} ")?;
                if b.precedence() <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}

/// Noise attached to a structural equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    None,
    /// Written `N(mean_expr, sd)`: the expression is the mean.
    Gaussian {
        sd: f64,
    },
    /// Written `expr + N(0, sd)`.
    AdditiveGaussian {
        sd: f64,
    },
    /// Written `U(lo, hi)` (or `expr + U(lo, hi)`).
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl NoiseSpec {
    pub fn is_none(&self) -> bool {
        matches!(self, NoiseSpec::None)
    }

    /// Standard deviation of Gaussian forms, if any.
    pub fn gaussian_sd(&self) -> Option<f64> {
        match self {
            NoiseSpec::Gaussian { sd } | NoiseSpec::AdditiveGaussian { sd } => Some(*sd),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            NoiseSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
            _ => 0.0,
        }
    }
}

/// Right-hand side of a structural equation: deterministic part plus noise.
#[derive(Debug, Clone, PartialEq)]
pub struct EquationRhs {
    pub expr: Expr,
    pub noise: NoiseSpec,
}

impl fmt::Display for EquationRhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.noise {
            NoiseSpec::None => write!(f, "{}", self.expr),
            NoiseSpec::Gaussian { sd } => {
                write!(f, "N({}, ", self.expr)?;
                write_num(f, sd)?;
                write!(f, ")")
            }
            NoiseSpec::AdditiveGaussian { sd } => {
                write!(f, "{} + N(0.0, ", Paren(&self.expr))?;
                write_num(f, sd)?;
                write!(f, ")")
            }
            NoiseSpec::Uniform { lo, hi } => {
                if !self.expr.is_zero() {
                    write!(f, "{} + ", Paren(&self.expr))?;
                }
                write!(f, "U(")?;
                write_num(f, lo)?;
                write!(f, ", ")?;
                write_num(f, hi)?;
                write!(f, ")")
            }
        }
    }
}

/// Displays a sum operand, parenthesised when it would re-associate.
struct Paren<'a>(&'a Expr);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // `a + b + N(..)` parses back as ((a + b) + N), so only lower
        // precedence needs guarding, and nothing is lower than a sum.
        write!(f, "{}", self.0)
    }
}

/// Parse an equation right-hand side (expression plus optional noise term).
pub fn parse_equation(src: &str) -> Result<EquationRhs> {
    let mut p = Parser::new(src);
    let rhs = p.equation()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(rhs)
}

/// Parse a plain expression with no noise terms.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let rhs = parse_equation(src)?;
    if !rhs.noise.is_none() {
        return Err(Error::Parse {
            offset: 0,
            message: "noise terms are not allowed here".into(),
        });
    }
    Ok(rhs.expr)
}

/// Intermediate parse tree that may contain noise calls.
enum Node {
    Expr(Expr),
    Noise(NoiseCall, usize),
}

enum NoiseCall {
    Normal(Expr, f64),
    Uniform(f64, f64),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, message: &str) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
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
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn equation(&mut self) -> Result<EquationRhs> {
        let first = self.term_node()?;
        let mut terms: Vec<(bool, Node)> = vec![(false, first)];
        loop {
            if self.eat(b'+') {
                terms.push((false, self.term_node()?));
            } else if self.eat(b'-') {
                terms.push((true, self.term_node()?));
            } else {
                break;
            }
        }
        let last_is_noise = matches!(terms.last(), Some((_, Node::Noise(..))));
        let noise_count = terms
            .iter()
            .filter(|(_, t)| matches!(t, Node::Noise(..)))
            .count();
        if noise_count > 1 || (noise_count == 1 && !last_is_noise) {
            return Err(self.error("a noise term may only appear once, as the final summand"));
        }
        if !last_is_noise {
            let mut acc = None;
            for (neg, t) in terms {
                let Node::Expr(e) = t else { unreachable!() };
                acc = Some(combine(acc, neg, e));
            }
            return Ok(EquationRhs {
                expr: acc.expect("at least one term"),
                noise: NoiseSpec::None,
            });
        }
        let (neg, noise) = terms.pop().expect("noise term");
        let Node::Noise(call, at) = noise else {
            unreachable!()
        };
        if terms.is_empty() {
            return match call {
                NoiseCall::Normal(mean, sd) if !neg => Ok(EquationRhs {
                    expr: mean,
                    noise: NoiseSpec::Gaussian { sd },
                }),
                NoiseCall::Uniform(lo, hi) if !neg => Ok(EquationRhs {
                    expr: Expr::Const(0.0),
                    noise: NoiseSpec::Uniform { lo, hi },
                }),
                _ => Err(Error::Parse {
                    offset: at,
                    message: "a leading noise term cannot be negated".into(),
                }),
            };
        }
        if neg {
            return Err(Error::Parse {
                offset: at,
                message: "additive noise must be added, not subtracted".into(),
            });
        }
        let mut acc = None;
        for (n, t) in terms {
            let Node::Expr(e) = t else { unreachable!() };
            acc = Some(combine(acc, n, e));
        }
        let expr = acc.expect("non-empty");
        match call {
            NoiseCall::Normal(Expr::Const(m), sd) if m == 0.0 => Ok(EquationRhs {
                expr,
                noise: NoiseSpec::AdditiveGaussian { sd },
            }),
            NoiseCall::Normal(..) => Err(Error::Parse {
                offset: at,
                message: "additive Gaussian noise must have mean 0".into(),
            }),
            NoiseCall::Uniform(lo, hi) => Ok(EquationRhs {
                expr,
                noise: NoiseSpec::Uniform { lo, hi },
            }),
        }
    }

    /// A term that may be a noise call.
    fn term_node(&mut self) -> Result<Node> {
        let save = self.pos;
        self.skip_ws();
        let at = self.pos;
        if let Some(name) = self.ident() {
            if (name == "N" || name == "U") && self.peek() == Some(b'(') {
                self.pos += 1;
                let call = if name == "N" {
                    let mean = self.expr()?;
                    self.expect(b',')?;
                    let sd = self.number_literal()?;
                    if !(sd >= 0.0) {
                        return Err(self.error("standard deviation must be >= 0"));
                    }
                    NoiseCall::Normal(mean, sd)
                } else {
                    let lo = self.number_literal()?;
                    self.expect(b',')?;
                    let hi = self.number_literal()?;
                    if !(lo < hi) {
                        return Err(self.error("uniform bounds need lo < hi"));
                    }
                    NoiseCall::Uniform(lo, hi)
                };
                self.expect(b')')?;
                if matches!(self.peek(), Some(b'*') | Some(b'/')) {
                    return Err(self.error("noise terms cannot be scaled"));
                }
                return Ok(Node::Noise(call, at));
            }
        }
        self.pos = save;
        Ok(Node::Expr(self.term()?))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
            } else if self.eat(b'-') {
                acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = Expr::Mul(Box::new(acc), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                acc = Expr::Div(Box::new(acc), Box::new(self.unary()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Expr::Const(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let name = self.ident().expect("identifier start");
                if self.peek() == Some(b'(') {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| self.error(&format!("unknown function `{name}`")))?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(b')')?;
                    Ok(Expr::Call(func, Box::new(arg)))
                } else if name == "N" || name == "U" {
                    Err(self.error("noise terms must be called with arguments"))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        match self.src.get(self.pos) {
            Some(c) if c.is_ascii_alphabetic() || *c == b'_' => {}
            _ => return None,
        }
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        Some(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len()
                && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map_err(|_| Error::Parse {
            offset: start,
            message: format!("invalid number `{text}`"),
        })
    }

    /// Signed numeric literal (noise parameters).
    fn number_literal(&mut self) -> Result<f64> {
        let neg = self.eat(b'-');
        let v = self.number()?;
        Ok(if neg { -v } else { v })
    }
}

fn combine(acc: Option<Expr>, neg: bool, e: Expr) -> Expr {
    match (acc, neg) {
        (None, false) => e,
        (None, true) => match e {
            Expr::Const(c) => Expr::Const(-c),
            other => Expr::Neg(Box::new(other)),
        },
        (Some(a), false) => Expr::Add(Box::new(a), Box::new(e)),
        (Some(a), true) => Expr::Sub(Box::new(a), Box::new(e)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Param(usize),
    Var(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Call(Func),
}

/// Flat stack program compiled from an [`Expr`].
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
}

impl Program {
    pub fn constant(c: f64) -> Program {
        Program {
            ops: vec![Op::Const(c)],
        }
    }

    /// Evaluate against variable values and parameter slots.
    ///
    /// Returns `Err` on division by zero or a non-finite result.
    pub fn eval(
        &self,
        vars: &[f64],
        params: &[f64],
        stack: &mut Vec<f64>,
    ) -> Result<f64, &'static str> {
        stack.clear();
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(c),
                Op::Param(i) => stack.push(params[i]),
                Op::Var(i) => stack.push(vars[i]),
                Op::Neg => {
                    let a = stack.pop().expect("stack underflow");
                    stack.push(-a);
                }
                Op::Call(g) => {
                    let a = stack.pop().expect("stack underflow");
                    stack.push(g.apply(a));
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    let b = stack.pop().expect("stack underflow");
                    let a = stack.pop().expect("stack underflow");
                    stack.push(match op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        _ => {
                            if b == 0.0 {
                                return Err("division by zero");
                            }
                            a / b
                        }
                    });
                }
            }
        }
        let v = stack.pop().expect("empty program");
        if v.is_finite() {
            Ok(v)
        } else {
            Err("non-finite value")
        }
    }
}
