//! Arithmetic expressions over named variables.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | name | func '(' args ')' | '(' expr ')'
//! func    := sin | cos | exp | log | pow   (pow takes two arguments)
//! ```
//!
//! `-x^2` parses as `-(x^2)`; `2^-1` is accepted. The Unicode minus sign
//! `−` is read as `-`. The constant `pi` is predefined.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Index into the variable list the expression was parsed against.
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
    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        match self {
            Expr::Num(v) => T::lit(*v),
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => {
                let base = a.eval(x);
                match b.as_ref() {
                    Expr::Num(k) if k.fract() == 0.0 && k.abs() < 64.0 => base.powi(*k as i32),
                    _ => base.powf(b.eval(x)),
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(x);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                }
            }
        }
    }

    pub fn is_const(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_const(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.is_const() && b.is_const(),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.max_var().max(b.max_var()),
        }
    }

    /// Symbolic partial derivative with respect to variable `var`.
    pub fn derivative(&self, var: usize) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            Var(i) => Num(if *i == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(var)),
            Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.derivative(var), (**b).clone()),
                    mul((**a).clone(), b.derivative(var)),
                ),
                pow((**b).clone(), Num(2.0)),
            ),
            Pow(a, b) => {
                let da = a.derivative(var);
                if let Num(k) = b.as_ref() {
                    // k a^(k-1) a'
                    return mul(mul(Num(*k), pow((**a).clone(), Num(k - 1.0))), da);
                }
                let db = b.derivative(var);
                let ln_a = call(Func::Log, (**a).clone());
                if matches!(da, Num(z) if z == 0.0) {
                    return mul(self.clone(), mul(db, ln_a));
                }
                // a^b (b' ln a + b a'/a)
                mul(
                    self.clone(),
                    add(mul(db, ln_a), div(mul((**b).clone(), da), (**a).clone())),
                )
            }
            Call(f, a) => {
                let da = a.derivative(var);
                let outer = match f {
                    Func::Sin => call(Func::Cos, (**a).clone()),
                    Func::Cos => neg(call(Func::Sin, (**a).clone())),
                    Func::Exp => self.clone(),
                    Func::Log => div(Num(1.0), (**a).clone()),
                };
                mul(outer, da)
            }
        }
    }

    /// Renders with the given variable names; the output parses back to an
    /// equivalent expression.
    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        Shown { e: self, names }
    }
}

struct Shown<'a> {
    e: &'a Expr,
    names: &'a [String],
}

impl<'a> fmt::Display for Shown<'a> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.names;
        let w = |e: &'a Expr| Shown { e, names };
        match self.e {
            Expr::Num(v) if *v < 0.0 => write!(f, "({v:?})"),
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(i) => match self.names.get(*i) {
                Some(n) => write!(f, "{n}"),
                None => write!(f, "x{}", i + 1),
            },
            Expr::Neg(a) => write!(f, "(-{})", w(a)),
            Expr::Add(a, b) => write!(f, "({} + {})", w(a), w(b)),
            Expr::Sub(a, b) => write!(f, "({} - {})", w(a), w(b)),
            Expr::Mul(a, b) => write!(f, "({} * {})", w(a), w(b)),
            Expr::Div(a, b) => write!(f, "({} / {})", w(a), w(b)),
            Expr::Pow(a, b) => write!(f, "({} ^ {})", w(a), w(b)),
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), w(a)),
        }
    }
}

// simplifying constructors

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        _ if is_num(&a, 0.0) => b,
        _ if is_num(&b, 0.0) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        _ if is_num(&b, 0.0) => a,
        _ if is_num(&a, 0.0) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        _ if is_num(&a, 0.0) || is_num(&b, 0.0) => Expr::Num(0.0),
        _ if is_num(&a, 1.0) => b,
        _ if is_num(&b, 1.0) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is_num(&a, 0.0) => Expr::Num(0.0),
        _ if is_num(&b, 1.0) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is_num(&b, 1.0) => a,
        _ if is_num(&b, 0.0) => Expr::Num(1.0),
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [String],
    context: &'a str,
}

fn tokenize(src: &str, context: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
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
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| parse_error(context, col, format!("bad number `{text}`")))?;
            out.push((Tok::Num(v), col));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Op(c), col));
            i += 1;
        } else if c == '\u{2212}' {
            out.push((Tok::Op('-'), col));
            i += 1;
        } else {
            return Err(parse_error(
                context,
                col,
                format!("unexpected character `{c}`"),
            ));
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

fn parse_error(context: &str, column: usize, message: String) -> Error {
    Error::Parse {
        context: context.to_string(),
        line: 1,
        column,
        message,
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(parse_error(self.context, self.column(), message.into()))
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if *self.peek() == Tok::Op(op) {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected `{op}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let col = self.column();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    "log" => Some(Func::Log),
                    _ => None,
                };
                if let Some(f) = func {
                    self.expect('(')?;
                    let a = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(f, Box::new(a)));
                }
                if name == "pow" {
                    self.expect('(')?;
                    let a = self.expr()?;
                    self.expect(',')?;
                    let b = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Pow(Box::new(a), Box::new(b)));
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(Error::UnknownIdentifier {
                        context: format!("{} (column {col})", self.context),
                        name,
                    }),
                }
            }
            Tok::End => Err(parse_error(
                self.context,
                col,
                "unexpected end of expression".into(),
            )),
            Tok::Op(c) => Err(parse_error(self.context, col, format!("unexpected `{c}`"))),
        }
    }
}

/// Parses `src` against the variable names `vars`. `context` labels errors
/// (e.g. `g[2]`).
pub fn parse_expr(src: &str, vars: &[String], context: &str) -> Result<Expr> {
    let toks = tokenize(src, context)?;
    let mut p = Parser {
        toks,
        pos: 0,
        vars,
        context,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.fail("unexpected trailing input");
    }
    Ok(e)
}

/// `x1, …, xn`.
pub fn default_vars(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str) -> Expr {
        parse_expr(src, &default_vars(2), "test").unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        let x = [2.0f64, 3.0];
        assert_eq!(p("1 + 2 * 3").eval(&x), 7.0);
        assert_eq!(p("2 ^ 3 ^ 2").eval(&x), 512.0);
        assert_eq!(p("-x1 ^ 2").eval(&x), -4.0);
        assert_eq!(p("2 ^ -1").eval(&x), 0.5);
        assert_eq!(p("x2 / x1 / 3").eval(&x), 0.5);
        assert_eq!(p("pow(x1, 3) − 1").eval(&x), 7.0);
        assert_eq!(p("1.5e1 + .5").eval(&x), 15.5);
    }

    #[test]
    fn derivative_of_power_flow_terms() {
        let e = p("-x2*sin(x1)");
        let x = [0.3f64, 0.7];
        assert!((e.derivative(0).eval(&x) + 0.7 * 0.3f64.cos()).abs() < 1e-15);
        assert!((e.derivative(1).eval(&x) + 0.3f64.sin()).abs() < 1e-15);
        let q = p("x2*cos(x1) - x2^2");
        assert!((q.derivative(1).eval(&x) - (0.3f64.cos() - 1.4)).abs() < 1e-15);
    }

    #[test]
    fn general_power_rule() {
        let e = p("x1 ^ x2");
        let x = [1.7f64, 2.3];
        let expect = 2.3 * 1.7f64.powf(1.3);
        assert!((e.derivative(0).eval(&x) - expect).abs() < 1e-13);
        let expect = 1.7f64.powf(2.3) * 1.7f64.ln();
        assert!((e.derivative(1).eval(&x) - expect).abs() < 1e-13);
    }

    #[test]
    fn dangling_operator_reported_with_column() {
        match parse_expr("x1 + ", &default_vars(2), "g[1]").unwrap_err() {
            Error::Parse {
                column, context, ..
            } => {
                assert_eq!(column, 6);
                assert_eq!(context, "g[1]");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_expr("(x1", &default_vars(2), "c"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_expr("x1 x2", &default_vars(2), "c"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn unknown_identifier() {
        assert_eq!(
            parse_expr("x3 + 1", &default_vars(2), "h[2]").unwrap_err(),
            Error::UnknownIdentifier {
                context: "h[2] (column 1)".into(),
                name: "x3".into()
            }
        );
    }

    #[test]
    fn display_round_trips() {
        let names = default_vars(2);
        let e = p("-x1^2 + 3/(x2 - 1) * exp(-x1)");
        let back = parse_expr(&e.display(&names).to_string(), &names, "rt").unwrap();
        let x = [0.4f64, 2.5];
        assert_eq!(e.eval(&x), back.eval(&x));
    }
}
