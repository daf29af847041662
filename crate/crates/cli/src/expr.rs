//! Arithmetic expressions over `x`, `y`, `t`: `+ - * /`, unary minus,
//! parentheses, `min(a, b)`, `max(a, b)`, `abs(a)` and decimal literals.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(f64),
    X,
    Y,
    T,
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Abs(Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at column {}", self.msg, self.pos + 1)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Expr::Lit(v) => *v,
            Expr::X => x,
            Expr::Y => y,
            Expr::T => t,
            Expr::Neg(a) => -a.eval(x, y, t),
            Expr::Abs(a) => a.eval(x, y, t).abs(),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, y, t), b.eval(x, y, t));
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div => a / b,
                    Op::Min => a.min(b),
                    Op::Max => a.max(b),
                }
            }
        }
    }

    fn mentions(&self, var: &dyn Fn(&Expr) -> bool) -> bool {
        match self {
            Expr::Neg(a) | Expr::Abs(a) => a.mentions(var),
            Expr::Bin(_, a, b) => a.mentions(var) || b.mentions(var),
            leaf => var(leaf),
        }
    }

    pub fn uses_time(&self) -> bool {
        self.mentions(&|e| *e == Expr::T)
    }

    /// The value if the expression has no variables.
    pub fn constant(&self) -> Option<f64> {
        let free = self.mentions(&|e| matches!(e, Expr::X | Expr::Y | Expr::T));
        (!free).then(|| self.eval(0.0, 0.0, 0.0))
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ParseError {
        ParseError {
            pos: self.pos,
            msg: msg.to_string(),
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

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == b'+' { Op::Add } else { Op::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == b'*' { Op::Mul } else { Op::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                match word {
                    "x" => Ok(Expr::X),
                    "y" => Ok(Expr::Y),
                    "t" => Ok(Expr::T),
                    "abs" => {
                        self.expect(b'(')?;
                        let a = self.expr()?;
                        self.expect(b')')?;
                        Ok(Expr::Abs(Box::new(a)))
                    }
                    "min" | "max" => {
                        self.expect(b'(')?;
                        let a = self.expr()?;
                        self.expect(b',')?;
                        let b = self.expr()?;
                        self.expect(b')')?;
                        let op = if word == "min" { Op::Min } else { Op::Max };
                        Ok(Expr::Bin(op, Box::new(a), Box::new(b)))
                    }
                    _ => {
                        self.pos = start;
                        Err(self.err(&format!("unknown identifier `{word}`")))
                    }
                }
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let bytes = self.src;
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&bytes[start..i]).expect("ascii");
        self.pos = i;
        text.parse().map(Expr::Lit).map_err(|_| ParseError {
            pos: start,
            msg: format!("invalid number `{text}`"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str) -> f64 {
        Expr::parse(s).unwrap().eval(0.25, 0.5, 2.0)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(ev("(1 + 2) * 3"), 9.0);
        assert_eq!(ev("8 / 4 / 2"), 1.0);
        assert_eq!(ev("10 - 4 - 3"), 3.0);
        assert_eq!(ev("-2 * -3"), 6.0);
        assert_eq!(ev("2e1 + 1.5E-1"), 20.15);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(ev("x + 10 * y + 100 * t"), 205.25);
        assert_eq!(ev("min(x, y) + max(x, y)"), 0.75);
        assert_eq!(ev("abs(x - 1)"), 0.75);
        assert_eq!(ev("-16*x*x + 8*x"), 1.0);
        assert!(Expr::parse("t*x").unwrap().uses_time());
        assert!(!Expr::parse("x*y").unwrap().uses_time());
        assert_eq!(Expr::parse("-(2 + 1)").unwrap().constant(), Some(-3.0));
        assert_eq!(Expr::parse("2 * y").unwrap().constant(), None);
    }

    #[test]
    fn errors_carry_positions() {
        for bad in ["", "1 +", "sin(x)", "min(1)", "(1", "1 2", "x $ y", "1.2.3"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
        assert_eq!(Expr::parse("x + foo").unwrap_err().pos, 4);
    }
}
