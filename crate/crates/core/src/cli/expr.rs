//! Arithmetic expressions over `(t, x, y)` for coefficient fields.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | name | name '[' int ']' | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Names: `t`, `x` (= `x[0]`), `x[i]`, `y` (= `y[0]`), `y[α]`, `pi`, `e`.
//! Functions: `exp log sqrt abs sin cos tanh pow min max clamp`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
    Sin,
    Cos,
    Tanh,
    Pow,
    Min,
    Max,
    Clamp,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "exp" => (Func::Exp, 1),
            "log" => (Func::Log, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tanh" => (Func::Tanh, 1),
            "pow" => (Func::Pow, 2),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "clamp" => (Func::Clamp, 3),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    T,
    X(usize),
    Y(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::T => t,
            Node::X(i) => x[*i],
            Node::Y(i) => y[*i],
            Node::Neg(a) => -a.eval(t, x, y),
            Node::Add(a, b) => a.eval(t, x, y) + b.eval(t, x, y),
            Node::Sub(a, b) => a.eval(t, x, y) - b.eval(t, x, y),
            Node::Mul(a, b) => a.eval(t, x, y) * b.eval(t, x, y),
            Node::Div(a, b) => a.eval(t, x, y) / b.eval(t, x, y),
            Node::Pow(a, b) => pow(a.eval(t, x, y), b.eval(t, x, y)),
            Node::Call(f, args) => {
                let v = |k: usize| args[k].eval(t, x, y);
                match f {
                    Func::Exp => v(0).exp(),
                    Func::Log => v(0).ln(),
                    Func::Sqrt => v(0).sqrt(),
                    Func::Abs => v(0).abs(),
                    Func::Sin => v(0).sin(),
                    Func::Cos => v(0).cos(),
                    Func::Tanh => v(0).tanh(),
                    Func::Pow => pow(v(0), v(1)),
                    Func::Min => v(0).min(v(1)),
                    Func::Max => v(0).max(v(1)),
                    Func::Clamp => v(0).clamp(v(1).min(v(2)), v(2).max(v(1))),
                }
            }
        }
    }

    fn visit(&self, f: &mut impl FnMut(&Node)) {
        f(self);
        match self {
            Node::Neg(a) => a.visit(f),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Node::Call(_, args) => args.iter().for_each(|a| a.visit(f)),
            _ => {}
        }
    }
}

/// Integer exponents use `powi` so that `(−2)^3 = −8`.
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// Bounds on the indices an expression may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scope {
    pub spatial_dim: usize,
    pub components: usize,
}

#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl Expr {
    pub fn parse(source: &str, scope: Scope) -> Result<Self> {
        let mut p = Parser {
            src: source,
            chars: source.char_indices().collect(),
            pos: 0,
            scope,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self {
            source: source.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        self.root.eval(t, x, y)
    }

    pub fn uses_y(&self) -> bool {
        let mut hit = false;
        self.root.visit(&mut |n| hit |= matches!(n, Node::Y(_)));
        hit
    }

    pub fn uses_t(&self) -> bool {
        let mut hit = false;
        self.root.visit(&mut |n| hit |= matches!(n, Node::T));
        hit
    }

    /// Value of an expression free of `t`, `x` and `y`.
    pub fn constant(&self) -> Option<f64> {
        let mut free = true;
        self.root
            .visit(&mut |n| free &= !matches!(n, Node::T | Node::X(_) | Node::Y(_)));
        free.then(|| self.root.eval(0.0, &[], &[]))
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    scope: Scope,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Config(format!(
            "expression {:?}, column {}: {msg}",
            self.src,
            self.pos + 1
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
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
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
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

    fn term(&mut self) -> Result<Node> {
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

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let mut end = start;
        let mut prev = ' ';
        while end < self.chars.len() {
            let c = self.chars[end].1;
            let sign_in_exponent = (c == '+' || c == '-') && (prev == 'e' || prev == 'E');
            if !(c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || sign_in_exponent) {
                break;
            }
            prev = c;
            end += 1;
        }
        let text: String = self.chars[start..end].iter().map(|c| c.1).collect();
        let v = text
            .parse::<f64>()
            .map_err(|_| self.error(&format!("bad number {text:?}")))?;
        self.pos = end;
        Ok(Node::Num(v))
    }

    fn index(&mut self, limit: usize, name: &str) -> Result<usize> {
        if !self.eat('[') {
            return Ok(0);
        }
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_ascii_digit() {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
        let i: usize = text.parse().map_err(|_| self.error("expected an index"))?;
        self.expect(']')?;
        if i >= limit {
            return Err(self.error(&format!("{name}[{i}] is out of range (size {limit})")));
        }
        Ok(i)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.chars.len()
                    && (self.chars[self.pos].1.is_ascii_alphanumeric()
                        || self.chars[self.pos].1 == '_')
                {
                    self.pos += 1;
                }
                let name: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
                match name.as_str() {
                    "t" => Ok(Node::T),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    "x" => Ok(Node::X(self.index(self.scope.spatial_dim, "x")?)),
                    "y" => Ok(Node::Y(self.index(self.scope.components, "y")?)),
                    _ => {
                        let Some((func, arity)) = Func::lookup(&name) else {
                            self.pos = start;
                            return Err(self.error(&format!("unknown name {name:?}")));
                        };
                        self.expect('(')?;
                        let mut args = vec![self.expr()?];
                        while self.eat(',') {
                            args.push(self.expr()?);
                        }
                        self.expect(')')?;
                        if args.len() != arity {
                            return Err(self.error(&format!(
                                "{name} takes {arity} argument(s), got {}",
                                args.len()
                            )));
                        }
                        Ok(Node::Call(func, args))
                    }
                }
            }
            Some(c) => Err(self.error(&format!("unexpected character '{c}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: Scope = Scope {
        spatial_dim: 2,
        components: 2,
    };

    fn ev(s: &str) -> f64 {
        Expr::parse(s, S)
            .unwrap()
            .eval(0.5, &[0.25, 0.75], &[2.0, -1.0])
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(ev("(1 + 2) * 3"), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(ev("-2 ^ 2"), -4.0);
        assert_eq!(ev("8 / 4 / 2"), 1.0);
        assert_eq!(ev("10 - 3 - 2"), 5.0);
        assert_eq!(ev("1.5e1 + 2E-1"), 15.2);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(ev("t + x[1] + y"), 0.5 + 0.75 + 2.0);
        assert_eq!(ev("-y[0]^3"), -8.0);
        assert_eq!(ev("y[1]^3"), -1.0);
        assert_eq!(ev("clamp(y[0], -1, 1)"), 1.0);
        assert_eq!(ev("max(x, t)"), 0.5);
        assert!((ev("sin(pi * x)") - (std::f64::consts::PI * 0.25).sin()).abs() < 1e-15);
        assert!((ev("log(exp(tanh(1)))") - 1f64.tanh()).abs() < 1e-15);
        assert_eq!(ev("pow(abs(y[1]), 0.5)"), 1.0);
        assert_eq!(ev("sqrt(4) * e / e"), 2.0);
    }

    #[test]
    fn dependence_queries() {
        let e = Expr::parse("1 + 0.5 * tanh(y[1])", S).unwrap();
        assert!(e.uses_y() && !e.uses_t());
        assert_eq!(e.constant(), None);
        assert_eq!(
            Expr::parse("2 * pi", S).unwrap().constant(),
            Some(2.0 * std::f64::consts::PI)
        );
        assert!(Expr::parse("t * x", S).unwrap().uses_t());
    }

    #[test]
    fn errors_carry_columns() {
        for (src, col) in [
            ("1 +", 4),
            ("foo(1)", 1),
            ("y[2]", 5),
            ("2 $ 3", 3),
            ("clamp(1, 2)", 12),
            ("(1", 3),
        ] {
            match Expr::parse(src, S) {
                Err(Error::Config(m)) => {
                    assert!(m.contains(&format!("column {col}")), "{src}: {m}")
                }
                other => panic!("{src}: {other:?}"),
            }
        }
    }
}
