//! Arithmetic expressions over point coordinates `x1 .. xn`.
//!
//! Grammar, loosest binding first: `+ -`, `* /`, unary `-`, `^` (right
//! associative), then numbers, `pi`, `e`, variables, parenthesized
//! expressions and calls `sin cos exp log abs` (one argument) and
//! `min max` (two or more arguments).

use std::fmt;

/// Parse failure at a 1-based column of the expression text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn variadic(self) -> bool {
        matches!(self, Func::Min | Func::Max)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    max_var: usize,
    source: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part
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
            let v = s.parse::<f64>().map_err(|_| ParseError {
                column: col,
                message: format!("malformed number '{s}'"),
            })?;
            out.push((Tok::Num(v), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else {
            let t = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => {
                    return Err(ParseError {
                        column: col,
                        message: format!("unexpected character '{c}'"),
                    })
                }
            };
            out.push((t, col));
            i += 1;
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    max_var: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> usize {
        self.toks[self.pos].1
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            column: self.column(),
            message: message.into(),
        })
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            self.fail(format!("expected {what}"))
        }
    }

    fn sum(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.product()?;
        while let Tok::Op(op @ ('+' | '-')) = *self.peek() {
            self.next();
            let rhs = self.product()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(op @ ('*' | '/')) = *self.peek() {
            self.next();
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Tok::Op('-') => {
                self.next();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.next();
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let col = self.column();
        match self.next() {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.sum()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Ident(name) => self.ident(name, col),
            Tok::End => self.fail("unexpected end of expression"),
            t => Err(ParseError {
                column: col,
                message: format!("unexpected {}", describe(&t)),
            }),
        }
    }

    fn ident(&mut self, name: String, col: usize) -> Result<Node, ParseError> {
        if let Some(func) = Func::lookup(&name) {
            self.expect(Tok::LParen, &format!("'(' after {name}"))?;
            let mut args = vec![self.sum()?];
            while *self.peek() == Tok::Comma {
                self.next();
                args.push(self.sum()?);
            }
            self.expect(Tok::RParen, "')'")?;
            let ok = if func.variadic() {
                args.len() >= 2
            } else {
                args.len() == 1
            };
            if !ok {
                return Err(ParseError {
                    column: col,
                    message: format!(
                        "{name} takes {}",
                        if func.variadic() {
                            "two or more arguments"
                        } else {
                            "one argument"
                        }
                    ),
                });
            }
            return Ok(Node::Call(func, args));
        }
        match name.as_str() {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            _ => {}
        }
        if let Some(k) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            if k >= 1 {
                self.max_var = self.max_var.max(k);
                return Ok(Node::Var(k - 1));
            }
        }
        Err(ParseError {
            column: col,
            message: format!("unknown name '{name}'"),
        })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("name '{s}'"),
        Tok::Op(c) => format!("operator '{c}'"),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Comma => "','".into(),
        Tok::End => "end of expression".into(),
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        let mut p = Parser {
            toks: tokenize(text)?,
            pos: 0,
            max_var: 0,
        };
        let root = p.sum()?;
        if *p.peek() != Tok::End {
            let t = p.peek().clone();
            return p.fail(format!("unexpected {}", describe(&t)));
        }
        Ok(Expr {
            root,
            max_var: p.max_var,
            source: text.to_string(),
        })
    }

    /// Highest variable index used (`x3` gives 3), 0 for none.
    pub fn max_variable(&self) -> usize {
        self.max_var
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Value at `x`; variables beyond `x.len()` are an error.
    pub fn eval(&self, x: &[f64]) -> Result<f64, String> {
        if self.max_var > x.len() {
            return Err(format!(
                "x{} is not defined in {} dimensions",
                self.max_var,
                x.len()
            ));
        }
        Ok(eval(&self.root, x))
    }
}

fn eval(node: &Node, x: &[f64]) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(k) => x[*k],
        Node::Neg(a) => -eval(a, x),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x), eval(b, x));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
        Node::Call(f, args) => {
            let mut vals = args.iter().map(|a| eval(a, x));
            match f {
                Func::Sin => vals.next().unwrap_or(f64::NAN).sin(),
                Func::Cos => vals.next().unwrap_or(f64::NAN).cos(),
                Func::Exp => vals.next().unwrap_or(f64::NAN).exp(),
                Func::Log => vals.next().unwrap_or(f64::NAN).ln(),
                Func::Abs => vals.next().unwrap_or(f64::NAN).abs(),
                Func::Min => vals.fold(f64::INFINITY, f64::min),
                Func::Max => vals.fold(f64::NEG_INFINITY, f64::max),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn val(s: &str, x: &[f64]) -> f64 {
        Expr::parse(s).unwrap().eval(x).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(val("1 + 2 * 3", &[]), 7.0);
        assert_eq!(val("2 ^ 3 ^ 2", &[]), 512.0);
        assert_eq!(val("-2 ^ 2", &[]), -4.0);
        assert_eq!(val("8 / 4 / 2", &[]), 1.0);
        assert_eq!(val("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(val("2 ^ -1", &[]), 0.5);
        assert_eq!(val("1.5e2 + 2E-1", &[]), 150.2);
    }

    #[test]
    fn functions_and_variables() {
        let x = [0.5, -2.0];
        assert_eq!(val("x1 * x2", &x), -1.0);
        assert_eq!(val("max(x1, x2, 3)", &x), 3.0);
        assert_eq!(val("min(x1, x2)", &x), -2.0);
        assert_eq!(val("abs(x2) + exp(0) + log(e) + cos(0) + sin(0)", &x), 5.0);
        assert_eq!(val("cos(pi)", &x), -1.0);
        assert_eq!(Expr::parse("x1 + x7").unwrap().max_variable(), 7);
        assert!(Expr::parse("x3").unwrap().eval(&x).is_err());
    }

    #[test]
    fn errors_carry_columns() {
        let cases = [
            ("1 +", 4),
            ("1 $ 2", 3),
            ("sin 1", 5),
            ("foo(1)", 1),
            ("min(1)", 1),
            ("(1 + 2", 7),
            ("1 2", 3),
            ("x0", 1),
        ];
        for (text, col) in cases {
            let err = Expr::parse(text).unwrap_err();
            assert_eq!(err.column, col, "{text}: {err}");
        }
    }

    #[test]
    fn division_by_zero_is_not_finite() {
        assert!(!val("1 / (x1 - x1)", &[0.3]).is_finite());
    }
}
