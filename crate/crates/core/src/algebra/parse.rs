use num_bigint::BigInt;

use super::{ClosedFormExpr, Rational, Symbol};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            out.push((Tok::Num(s.parse().expect("digits")), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else {
            return Err(err(i, format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

fn err(pos: usize, message: String) -> Error {
    Error::Parse {
        line: 1,
        col: pos + 1,
        message,
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn at(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
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
            Err(err(self.at(), format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<ClosedFormExpr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = lhs + self.term()?;
            } else if self.eat('-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<ClosedFormExpr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = lhs * self.unary()?;
            } else if self.eat('/') {
                lhs = lhs / self.unary()?;
            } else if matches!(self.peek(), Some(Tok::Num(_) | Tok::Ident(_) | Tok::Op('('))) {
                lhs = lhs * self.power()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<ClosedFormExpr> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<ClosedFormExpr> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let paren = self.eat('(');
        let neg = self.eat('-');
        let k = match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                i32::try_from(n).map_err(|_| err(self.at(), "exponent too large".into()))?
            }
            _ => return Err(err(self.at(), "expected an integer exponent".into())),
        };
        if paren {
            self.expect(')')?;
        }
        Ok(base.pow(if neg { -k } else { k }))
    }

    fn atom(&mut self) -> Result<ClosedFormExpr> {
        let at = self.at();
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(ClosedFormExpr::constant(Rational::from_integer(n)))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if name == "sqrt" && self.peek() == Some(&Tok::Op('(')) {
                    self.pos += 1;
                    let inner = self.expr()?;
                    self.expect(')')?;
                    return Ok(inner.sqrt());
                }
                Ok(ClosedFormExpr::Sym(Symbol::new(&name)))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            _ => Err(err(at, "expected a number, a name or '('".into())),
        }
    }
}

/// Parses `+ - * / ^`, `sqrt(...)`, integers and names; juxtaposition
/// multiplies.
pub fn parse_expr(src: &str) -> Result<ClosedFormExpr> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: src.chars().count(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(err(p.at(), "unexpected trailing input".into()));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::RationalFunction;

    fn rf(s: &str) -> RationalFunction {
        parse_expr(s).unwrap().to_rational().unwrap()
    }

    #[test]
    fn precedence_and_juxtaposition() {
        assert_eq!(rf("2C/(2-C)"), rf("2*C/(2-C)"));
        assert_eq!(rf("-X^2"), rf("0 - X*X"));
        assert_eq!(rf("X^(-1)"), rf("1/X"));
        assert_eq!(rf("a b"), rf("a*b"));
    }

    #[test]
    fn round_trip_of_rendering() {
        for s in ["C/(2-C)", "(a*C*X + (1-a)*b*C*D*T*X)/(1-(1-b)*(1-a)*C*D)", "1/2 + X/2", "-C/(1 - C^2)"] {
            let f = rf(s);
            assert_eq!(rf(&f.to_string()), f, "{s}");
        }
    }

    #[test]
    fn expression_round_trip() {
        let e = parse_expr("C^2*((1 - sqrt(1 - C^2))/C)^3 - -X").unwrap();
        let again = parse_expr(&e.to_string()).unwrap();
        assert_eq!(again.to_string(), e.to_string());
    }

    #[test]
    fn diagnostics_carry_positions() {
        match parse_expr("1 + $") {
            Err(Error::Parse { col, .. }) => assert_eq!(col, 5),
            other => panic!("{other:?}"),
        }
        assert!(parse_expr("(1 + X").is_err());
    }
}
