//! Arithmetic expressions over named variables.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Functions: `abs sqrt exp ln log sin cos max min pos`, where `pos(u)` is
//! `max(u, 0)`. The constant `pi` is predefined.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ExprError {
    /// 1-based character column within the expression.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Abs,
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Max,
    Min,
    Pos,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "max" => Func::Max,
            "min" => Func::Min,
            "pos" => Func::Pos,
            _ => return None,
        })
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            Func::Max | Func::Min => n >= 1,
            _ => n == 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression bound to an ordered list of variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    arity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    Name(usize, usize),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
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
            let v: f64 = text
                .parse()
                .map_err(|_| ExprError { column: start + 1, message: format!("malformed number `{text}`") })?;
            out.push((Tok::Num(v), start + 1));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Name(start, i), start + 1));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Op(c), i + 1));
            i += 1;
        } else {
            return Err(ExprError { column: i + 1, message: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    chars: Vec<char>,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [&'a str],
    end_column: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<Tok> {
        self.toks.get(self.pos).map(|t| t.0)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_column, |t| t.1)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError { column: self.column(), message: message.into() })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Tok::Name(s, e)) => {
                let name: String = self.chars[s..e].iter().collect();
                let col = self.column();
                self.pos += 1;
                if self.eat('(') {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(ExprError { column: col, message: format!("unknown function `{name}`") });
                    };
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    if !self.eat(')') {
                        return self.err("expected `)`");
                    }
                    if !func.arity_ok(args.len()) {
                        return Err(ExprError {
                            column: col,
                            message: format!("`{name}` does not take {} arguments", args.len()),
                        });
                    }
                    return Ok(Node::Call(func, args));
                }
                if let Some(k) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(k));
                }
                if name == "pi" {
                    return Ok(Node::Num(std::f64::consts::PI));
                }
                let known = self.vars.join(", ");
                Err(ExprError { column: col, message: format!("unknown variable `{name}` (expected one of: {known})") })
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected `)`");
                }
                Ok(inner)
            }
            Some(Tok::Op(c)) => self.err(format!("unexpected `{c}`")),
            None => self.err("unexpected end of expression"),
        }
    }
}

fn eval(node: &Node, x: &[f64]) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(k) => x[*k],
        Node::Neg(a) => -eval(a, x),
        Node::Add(a, b) => eval(a, x) + eval(b, x),
        Node::Sub(a, b) => eval(a, x) - eval(b, x),
        Node::Mul(a, b) => eval(a, x) * eval(b, x),
        Node::Div(a, b) => eval(a, x) / eval(b, x),
        Node::Pow(a, b) => pow(eval(a, x), eval(b, x)),
        Node::Call(f, args) => {
            let vals: Vec<f64> = args.iter().map(|a| eval(a, x)).collect();
            match f {
                Func::Abs => vals[0].abs(),
                Func::Sqrt => vals[0].sqrt(),
                Func::Exp => vals[0].exp(),
                Func::Ln => vals[0].ln(),
                Func::Sin => vals[0].sin(),
                Func::Cos => vals[0].cos(),
                Func::Max => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                Func::Min => vals.iter().copied().fold(f64::INFINITY, f64::min),
                Func::Pos => vals[0].max(0.0),
            }
        }
    }
}

/// `a^b`, with integer exponents of negative bases allowed.
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() < 1e9 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

fn depends_on(node: &Node, vars: &[usize]) -> bool {
    match node {
        Node::Num(_) => false,
        Node::Var(k) => vars.contains(k),
        Node::Neg(a) => depends_on(a, vars),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            depends_on(a, vars) || depends_on(b, vars)
        }
        Node::Call(_, args) => args.iter().any(|a| depends_on(a, vars)),
    }
}

fn affine_in(node: &Node, vars: &[usize]) -> bool {
    match node {
        Node::Num(_) | Node::Var(_) => true,
        Node::Neg(a) => affine_in(a, vars),
        Node::Add(a, b) | Node::Sub(a, b) => affine_in(a, vars) && affine_in(b, vars),
        Node::Mul(a, b) => (!depends_on(a, vars) && affine_in(b, vars)) || (!depends_on(b, vars) && affine_in(a, vars)),
        Node::Div(a, b) => affine_in(a, vars) && !depends_on(b, vars),
        Node::Pow(..) | Node::Call(..) => !depends_on(node, vars),
    }
}

impl Expr {
    /// Parses `source` with variables named by `vars`, in argument order.
    pub fn parse(source: &str, vars: &[&str]) -> Result<Expr, ExprError> {
        let toks = tokenize(source)?;
        let mut p =
            Parser { chars: source.chars().collect(), toks, pos: 0, vars, end_column: source.chars().count() + 1 };
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return p.err("unexpected trailing input");
        }
        Ok(Expr { root, arity: vars.len() })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.arity);
        eval(&self.root, x)
    }

    /// Whether the expression is affine in the variables at positions `vars`
    /// (the others act as parameters).
    pub fn is_affine_in(&self, vars: &[usize]) -> bool {
        affine_in(&self.root, vars)
    }
}

/// `x1, …, xn`.
pub fn point_vars(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

/// Parses an expression in `x1..xn` (or `x` when `n = 1`).
pub fn parse_point_expr(source: &str, n: usize) -> Result<Expr, ExprError> {
    if n == 1 {
        return Expr::parse(source, &["x"]).or_else(|e| Expr::parse(source, &["x1"]).map_err(|_| e));
    }
    let names = point_vars(n);
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Expr::parse(source, &refs)
}

/// Parses an expression in `t, x1..xn` (or `t, x` when `n = 1`); `t` is
/// argument 0.
pub fn parse_field_expr(source: &str, n: usize) -> Result<Expr, ExprError> {
    if n == 1 {
        return Expr::parse(source, &["t", "x"]).or_else(|e| Expr::parse(source, &["t", "x1"]).map_err(|_| e));
    }
    let names = point_vars(n);
    let mut refs: Vec<&str> = vec!["t"];
    refs.extend(names.iter().map(String::as_str));
    Expr::parse(source, &refs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_power() {
        let e = Expr::parse("1 + 2*x^2 - -x/4", &["x"]).unwrap();
        assert_eq!(e.eval(&[2.0]), 1.0 + 8.0 + 0.5);
        let e = Expr::parse("-x^2", &["x"]).unwrap();
        assert_eq!(e.eval(&[3.0]), -9.0);
        let e = Expr::parse("2^3^2", &[]).unwrap();
        assert_eq!(e.eval(&[]), 512.0);
    }

    #[test]
    fn functions_and_negative_base_powers() {
        let e = Expr::parse("x1^2*x2 + sin(x2) + sqrt(x1)", &["x1", "x2"]).unwrap();
        assert!((e.eval(&[4.0, 0.5]) - (8.0 + 0.5f64.sin() + 2.0)).abs() < 1e-12);
        let e = Expr::parse("max(x, -x, 0.5) + pos(x - 3)", &["x"]).unwrap();
        assert_eq!(e.eval(&[-2.0]), 2.0);
        assert_eq!(e.eval(&[0.1]), 0.5);
        assert_eq!(e.eval(&[4.0]), 5.0);
        assert_eq!(Expr::parse("x^3", &["x"]).unwrap().eval(&[-2.0]), -8.0);
    }

    #[test]
    fn errors_carry_columns() {
        let err = Expr::parse("x + * 2", &["x"]).unwrap_err();
        assert_eq!(err.column, 5);
        let err = Expr::parse("x + y", &["x"]).unwrap_err();
        assert_eq!(err.column, 5);
        assert!(err.message.contains("unknown variable"));
        let err = Expr::parse("foo(x)", &["x"]).unwrap_err();
        assert_eq!(err.column, 1);
        let err = Expr::parse("(x", &["x"]).unwrap_err();
        assert_eq!(err.column, 3);
    }

    #[test]
    fn affinity_detection() {
        let e = parse_field_expr("x - t^2 + 3*x/2", 1).unwrap();
        assert!(e.is_affine_in(&[1]));
        let e = parse_field_expr("t*x^2", 1).unwrap();
        assert!(!e.is_affine_in(&[1]));
        let e = parse_field_expr("sin(t)*x1 + x2", 2).unwrap();
        assert!(e.is_affine_in(&[1, 2]));
    }
}
