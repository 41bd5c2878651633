//! Complex arithmetic expressions in the tangential variables.
//!
//! Grammar (usual precedence, `^` right associative):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | name '(' expr ')' | '(' expr ')' | '|' expr '|'
//! ```
//!
//! Names: `x1`..`x3`, `r` (= |x'|), `i`, `pi`, `e`. Functions: `exp`, `log`,
//! `sqrt`, `sin`, `cos`, `tan`, `sinh`, `cosh`, `tanh`, `abs`, `re`, `im`,
//! `conj`.

use num_complex::Complex64 as c64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Abs,
    Re,
    Im,
    Conj,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            "re" => Func::Re,
            "im" => Func::Im,
            "conj" => Func::Conj,
            _ => return None,
        })
    }

    fn apply(self, z: c64) -> c64 {
        match self {
            Func::Exp => z.exp(),
            Func::Log => z.ln(),
            Func::Sqrt => z.sqrt(),
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Tan => z.tan(),
            Func::Sinh => z.sinh(),
            Func::Cosh => z.cosh(),
            Func::Tanh => z.tanh(),
            Func::Abs => c64::new(z.norm(), 0.0),
            Func::Re => c64::new(z.re, 0.0),
            Func::Im => c64::new(z.im, 0.0),
            Func::Conj => z.conj(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Const(c64),
    Coord(usize),
    Radius,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression.
#[derive(Clone, Debug, PartialEq)]
pub struct Expression {
    source: String,
    root: Node,
    max_coord: usize,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut parser = Parser { tokens, pos: 0, max_coord: 0 };
        let root = parser.expr()?;
        if let Some(t) = parser.tokens.get(parser.pos) {
            return Err(Error::Parse { offset: t.offset, message: format!("unexpected `{}`", t.text) });
        }
        Ok(Self { source: source.to_string(), root, max_coord: parser.max_coord })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Largest coordinate index referenced (`x3` gives 3, none gives 0).
    pub fn max_coordinate(&self) -> usize {
        self.max_coord
    }

    /// Evaluates at tangential point `x` (length `n-1`).
    pub fn eval(&self, x: &[f64]) -> c64 {
        eval(&self.root, x)
    }
}

fn eval(node: &Node, x: &[f64]) -> c64 {
    match node {
        Node::Const(c) => *c,
        Node::Coord(j) => c64::new(x.get(*j).copied().unwrap_or(0.0), 0.0),
        Node::Radius => c64::new(x.iter().map(|v| v * v).sum::<f64>().sqrt(), 0.0),
        Node::Neg(a) => -eval(a, x),
        Node::Add(a, b) => eval(a, x) + eval(b, x),
        Node::Sub(a, b) => eval(a, x) - eval(b, x),
        Node::Mul(a, b) => eval(a, x) * eval(b, x),
        Node::Div(a, b) => eval(a, x) / eval(b, x),
        Node::Pow(a, b) => {
            let base = eval(a, x);
            let p = eval(b, x);
            if p.im == 0.0 && p.re.fract() == 0.0 && p.re.abs() <= 64.0 {
                base.powi(p.re as i32)
            } else if p.im == 0.0 && base.im == 0.0 && base.re >= 0.0 {
                c64::new(base.re.powf(p.re), 0.0)
            } else {
                base.powc(p)
            }
        }
        Node::Call(f, a) => f.apply(eval(a, x)),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Num(f64),
    Name(String),
    Sym(char),
}

#[derive(Clone, Debug)]
struct Token {
    kind: Kind,
    text: String,
    offset: usize,
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let bytes: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == '.') {
                i += 1;
            }
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
            let text: String = bytes[start..i].iter().collect();
            let v: f64 = text
                .parse()
                .map_err(|_| Error::Parse { offset: start, message: format!("bad number `{text}`") })?;
            out.push(Token { kind: Kind::Num(v), text, offset: start });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                i += 1;
            }
            let text: String = bytes[start..i].iter().collect();
            out.push(Token { kind: Kind::Name(text.clone()), text, offset: start });
        } else if "+-*/^()|".contains(c) {
            i += 1;
            out.push(Token { kind: Kind::Sym(c), text: c.to_string(), offset: start });
        } else {
            return Err(Error::Parse { offset: start, message: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    max_coord: usize,
}

impl Parser {
    fn peek_sym(&self) -> Option<char> {
        match self.tokens.get(self.pos).map(|t| &t.kind) {
            Some(Kind::Sym(c)) => Some(*c),
            _ => None,
        }
    }

    fn end_offset(&self) -> usize {
        self.tokens.last().map(|t| t.offset + t.text.len()).unwrap_or(0)
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_sym() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            let offset = self.tokens.get(self.pos).map(|t| t.offset).unwrap_or_else(|| self.end_offset());
            Err(Error::Parse { offset, message: format!("expected `{c}`") })
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' { Node::Add(lhs.into(), rhs.into()) } else { Node::Sub(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' { Node::Mul(lhs.into(), rhs.into()) } else { Node::Div(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek_sym() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(self.unary()?.into()))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_sym() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Pow(base.into(), exponent.into()));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let Some(tok) = self.tokens.get(self.pos).cloned() else {
            return Err(Error::Parse { offset: self.end_offset(), message: "unexpected end of input".into() });
        };
        self.pos += 1;
        match tok.kind {
            Kind::Num(v) => Ok(Node::Const(c64::new(v, 0.0))),
            Kind::Sym('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Kind::Sym('|') => {
                let inner = self.expr()?;
                self.expect('|')?;
                Ok(Node::Call(Func::Abs, inner.into()))
            }
            Kind::Name(name) => {
                if let Some(f) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Node::Call(f, arg.into()));
                }
                match name.as_str() {
                    "i" => Ok(Node::Const(c64::new(0.0, 1.0))),
                    "pi" => Ok(Node::Const(c64::new(std::f64::consts::PI, 0.0))),
                    "e" => Ok(Node::Const(c64::new(std::f64::consts::E, 0.0))),
                    "r" => Ok(Node::Radius),
                    _ => {
                        let idx = name
                            .strip_prefix('x')
                            .and_then(|d| d.parse::<usize>().ok())
                            .filter(|&d| (1..=3).contains(&d));
                        match idx {
                            Some(d) => {
                                self.max_coord = self.max_coord.max(d);
                                Ok(Node::Coord(d - 1))
                            }
                            None => Err(Error::Parse {
                                offset: tok.offset,
                                message: format!("unknown name `{name}`"),
                            }),
                        }
                    }
                }
            }
            Kind::Sym(c) => Err(Error::Parse { offset: tok.offset, message: format!("unexpected `{c}`") }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64]) -> c64 {
        Expression::parse(s).unwrap().eval(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[]), c64::new(7.0, 0.0));
        assert_eq!(ev("2 ^ 3 ^ 2", &[]), c64::new(512.0, 0.0));
        assert_eq!(ev("-2 ^ 2", &[]), c64::new(-4.0, 0.0));
        assert_eq!(ev("(1 - 2) - 3", &[]), c64::new(-4.0, 0.0));
        assert_eq!(ev("8 / 4 / 2", &[]), c64::new(1.0, 0.0));
    }

    #[test]
    fn coordinates_and_radius() {
        let x = [3.0, 4.0];
        assert_eq!(ev("r", &x), c64::new(5.0, 0.0));
        assert_eq!(ev("|x1 - x2|", &x), c64::new(1.0, 0.0));
        assert_eq!(ev("x2 * i", &x), c64::new(0.0, 4.0));
        let v = ev("1/(1+r^2)", &x);
        assert!((v.re - 1.0 / 26.0).abs() < 1e-15);
        assert_eq!(Expression::parse("x1 + x3").unwrap().max_coordinate(), 3);
    }

    #[test]
    fn functions() {
        let v = ev("0.1*exp(i*pi/8)/(1+r)", &[0.0]);
        let expected = c64::from_polar(0.1, std::f64::consts::PI / 8.0);
        assert!((v - expected).norm() < 1e-15);
        assert!((ev("sqrt(4)", &[]).re - 2.0).abs() < 1e-15);
        assert!((ev("re(conj(1+2*i)) + im(conj(1+2*i))", &[]).re + 1.0).abs() < 1e-15);
        assert!((ev("2.5e-1", &[]).re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "1 +", "(1", "foo", "x9", "1 $ 2", "sin 3", "1 2"] {
            assert!(matches!(Expression::parse(bad), Err(Error::Parse { .. })), "{bad}");
        }
        match Expression::parse("1 + foo") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
    }
}
