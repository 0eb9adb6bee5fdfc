//! Text format for piecewise invariantlets.
//!
//! ```text
//! exponents i -> x, j -> c;
//! when i = 1 : C^j * C/(2 - C);
//! otherwise  : X^i * C^j;
//! ```
//!
//! Conditions are conjunctions of linear comparisons and `e % m = r`
//! constraints over the exponent symbols. Templates are closed-form
//! expressions that may use exponent symbols in integer positions, `e`
//! for Euler's number, `fact(n)` and `sum(n, lo, hi, body)`.

use std::collections::HashMap;

use num_traits::ToPrimitive;

use crate::algebra::rational::{factorial, parse_rational};
use crate::algebra::{ClosedFormExpr, Rational, RationalFunction, Symbol};
use crate::error::{Error, Result};
use crate::syntax::Cmp;

/// Name of the symbol standing for Euler's number.
pub const EULER: &str = "e";

#[derive(Clone, Debug, PartialEq)]
pub enum Template {
    Num(Rational),
    Ident(String),
    Neg(Box<Template>),
    Add(Box<Template>, Box<Template>),
    Sub(Box<Template>, Box<Template>),
    Mul(Box<Template>, Box<Template>),
    Div(Box<Template>, Box<Template>),
    Pow(Box<Template>, Box<Template>),
    Sqrt(Box<Template>),
    Fact(Box<Template>),
    Sum(String, Box<Template>, Box<Template>, Box<Template>),
}

/// `Σ coeff·sym + constant`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub constant: i64,
    pub terms: Vec<(String, i64)>,
}

impl Linear {
    fn eval(&self, env: &HashMap<String, i64>) -> i64 {
        self.constant + self.terms.iter().map(|(s, a)| a * env[s]).sum::<i64>()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Condition {
    Cmp(Linear, Cmp, Linear),
    Mod(Linear, i64, i64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    /// Conjunction; empty means `true`.
    pub when: Vec<Condition>,
    pub template: Template,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantletSpec {
    /// `(exponent symbol, program variable)` in header order.
    pub exponents: Vec<(String, String)>,
    pub rules: Vec<Rule>,
}

impl InvariantletSpec {
    /// Index of the first rule whose condition holds.
    pub fn matching_rule(&self, env: &HashMap<String, i64>) -> Option<usize> {
        self.rules.iter().position(|r| {
            r.when.iter().all(|c| match c {
                Condition::Cmp(a, op, b) => {
                    let (x, y) = (a.eval(env), b.eval(env));
                    match op {
                        Cmp::Lt => x < y,
                        Cmp::Le => x <= y,
                        Cmp::Eq => x == y,
                        Cmp::Ne => x != y,
                        Cmp::Ge => x >= y,
                        Cmp::Gt => x > y,
                    }
                }
                Condition::Mod(a, m, r) => a.eval(env).rem_euclid(*m) == *r,
            })
        })
    }

    /// `f(X^σ)` where `exps` assigns each exponent symbol its value.
    pub fn eval(&self, exps: &HashMap<String, i64>) -> Result<ClosedFormExpr> {
        let k = self.matching_rule(exps).ok_or_else(|| {
            let mut parts: Vec<String> = self.exponents.iter().map(|(s, _)| format!("{s}={}", exps[s])).collect();
            parts.sort();
            Error::NoRuleMatches(parts.join(", "))
        })?;
        instantiate(&self.rules[k].template, exps)
    }
}

fn integer(t: &Template, env: &HashMap<String, i64>) -> Result<i64> {
    let v = instantiate(t, env)?.to_rational()?;
    v.constant_value()
        .filter(|r| r.is_integer())
        .and_then(|r| r.to_integer().to_i64())
        .ok_or_else(|| Error::Unsupported(format!("expected an integer, got {v}")))
}

/// Replaces exponent and summation symbols by their values and expands
/// finite sums.
pub fn instantiate(t: &Template, env: &HashMap<String, i64>) -> Result<ClosedFormExpr> {
    let go = |x: &Template| instantiate(x, env);
    Ok(match t {
        Template::Num(r) => ClosedFormExpr::constant(r.clone()),
        Template::Ident(s) => match env.get(s) {
            Some(v) => ClosedFormExpr::int(*v),
            None => ClosedFormExpr::Sym(Symbol::new(s)),
        },
        Template::Neg(a) => -go(a)?,
        Template::Add(a, b) => go(a)? + go(b)?,
        Template::Sub(a, b) => go(a)? - go(b)?,
        Template::Mul(a, b) => go(a)? * go(b)?,
        Template::Div(a, b) => go(a)? / go(b)?,
        Template::Pow(a, k) => {
            let k = integer(k, env)?;
            let k = i32::try_from(k).map_err(|_| Error::Unsupported(format!("exponent {k} out of range")))?;
            go(a)?.pow(k)
        }
        Template::Sqrt(a) => go(a)?.sqrt(),
        Template::Fact(a) => {
            let n = integer(a, env)?;
            if n < 0 {
                return Err(Error::Unsupported(format!("fact({n})")));
            }
            ClosedFormExpr::constant(Rational::from_integer(factorial(n as u32)))
        }
        Template::Sum(v, lo, hi, body) => {
            let (lo, hi) = (integer(lo, env)?, integer(hi, env)?);
            let mut inner = env.clone();
            let mut acc = RationalFunction::zero();
            let mut sqrt_terms: Option<ClosedFormExpr> = None;
            for n in lo..=hi {
                inner.insert(v.clone(), n);
                let term = instantiate(body, &inner)?;
                match term.to_rational() {
                    Ok(r) => acc = acc + r,
                    Err(_) => {
                        sqrt_terms = Some(match sqrt_terms {
                            Some(s) => s + term,
                            None => term,
                        })
                    }
                }
            }
            let base = ClosedFormExpr::Leaf(acc);
            match sqrt_terms {
                Some(s) => base + s,
                None => base,
            }
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Sym(&'static str),
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize, usize)>,
}

const SYMBOLS: [&str; 22] = [
    "->", "<=", ">=", "==", "!=", "≤", "≥", "≠", "<", ">", "=", "+", "-", "*", "/", "^", "(", ")", ",", ";", ":", "%",
];

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(Tok, usize, usize)>> {
        let mut lx = Lexer { src, toks: Vec::new() };
        let (mut line, mut col) = (1, 1);
        let mut rest = lx.src;
        while let Some(c) = rest.chars().next() {
            if c == '\n' {
                line += 1;
                col = 1;
                rest = &rest[1..];
                continue;
            }
            if c.is_whitespace() {
                col += 1;
                rest = &rest[c.len_utf8()..];
                continue;
            }
            if c == '#' || rest.starts_with("//") {
                let end = rest.find('\n').unwrap_or(rest.len());
                rest = &rest[end..];
                continue;
            }
            let len = if c.is_ascii_alphabetic() || c == '_' {
                let n = rest
                    .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                    .unwrap_or(rest.len());
                lx.toks.push((Tok::Ident(rest[..n].to_string()), line, col));
                n
            } else if c.is_ascii_digit() {
                let n = rest.find(|ch: char| !ch.is_ascii_digit()).unwrap_or(rest.len());
                lx.toks.push((Tok::Num(rest[..n].to_string()), line, col));
                n
            } else if let Some(s) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                lx.toks.push((Tok::Sym(s), line, col));
                s.len()
            } else {
                return Err(Error::Parse {
                    line,
                    col,
                    message: format!("unexpected character '{c}'"),
                });
            };
            col += rest[..len].chars().count();
            rest = &rest[len..];
        }
        Ok(lx.toks)
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        let (line, col) = self.toks.get(self.pos).map_or(self.end, |t| (t.1, t.2));
        Err(Error::Parse {
            line,
            col,
            message: message.into(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_word(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == s)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.is_sym(s) || self.is_word(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<()> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected '{s}'"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected a name"),
        }
    }

    fn int(&mut self) -> Result<i64> {
        match self.peek() {
            Some(Tok::Num(s)) => {
                let v = s.parse().or_else(|_| self.err("integer too large"))?;
                self.pos += 1;
                Ok(v)
            }
            _ => self.err("expected an integer"),
        }
    }

    fn spec(&mut self) -> Result<InvariantletSpec> {
        self.expect("exponents")?;
        let mut exponents = Vec::new();
        loop {
            let e = self.ident()?;
            self.expect("->")?;
            let v = self.ident()?;
            if exponents.iter().any(|(x, _): &(String, String)| *x == e) {
                return self.err(format!("exponent '{e}' declared twice"));
            }
            exponents.push((e, v));
            if !self.eat(",") {
                break;
            }
        }
        self.expect(";")?;
        let mut rules = Vec::new();
        while self.peek().is_some() {
            let when = if self.eat("otherwise") {
                Vec::new()
            } else {
                self.expect("when")?;
                self.condition(&exponents)?
            };
            self.expect(":")?;
            let template = self.expr()?;
            rules.push(Rule { when, template });
            if !self.eat(";") && self.peek().is_some() {
                return self.err("expected ';' after a rule");
            }
        }
        if rules.is_empty() {
            return self.err("no rules");
        }
        Ok(InvariantletSpec { exponents, rules })
    }

    fn condition(&mut self, exps: &[(String, String)]) -> Result<Vec<Condition>> {
        let mut out = Vec::new();
        loop {
            if !self.eat("true") {
                let a = self.linear(exps)?;
                if self.eat("%") {
                    let m = self.int()?;
                    if m <= 0 {
                        return self.err("modulus must be positive");
                    }
                    if !(self.eat("=") || self.eat("==")) {
                        return self.err("expected '=' after a modulus");
                    }
                    let r = self.int()?;
                    out.push(Condition::Mod(a, m, r));
                } else {
                    let op = match self.peek() {
                        Some(Tok::Sym(s)) => match *s {
                            "<" => Cmp::Lt,
                            "<=" | "≤" => Cmp::Le,
                            "=" | "==" => Cmp::Eq,
                            "!=" | "≠" => Cmp::Ne,
                            ">=" | "≥" => Cmp::Ge,
                            ">" => Cmp::Gt,
                            _ => return self.err("expected a comparison"),
                        },
                        _ => return self.err("expected a comparison"),
                    };
                    self.pos += 1;
                    let b = self.linear(exps)?;
                    out.push(Condition::Cmp(a, op, b));
                }
            }
            if !self.eat("and") {
                return Ok(out);
            }
        }
    }

    fn linear(&mut self, exps: &[(String, String)]) -> Result<Linear> {
        let mut lin = Linear {
            constant: 0,
            terms: Vec::new(),
        };
        let mut sign = if self.eat("-") { -1 } else { 1 };
        loop {
            let mut coeff = 1;
            let mut name = None;
            if matches!(self.peek(), Some(Tok::Num(_))) {
                coeff = self.int()?;
                if self.eat("*") || matches!(self.peek(), Some(Tok::Ident(_))) {
                    name = Some(self.ident()?);
                }
            } else {
                name = Some(self.ident()?);
            }
            match name {
                Some(n) => {
                    if !exps.iter().any(|(e, _)| *e == n) {
                        self.pos -= 1;
                        return self.err(format!("unknown exponent '{n}'"));
                    }
                    lin.terms.push((n, sign * coeff));
                }
                None => lin.constant += sign * coeff,
            }
            sign = if self.eat("+") {
                1
            } else if self.eat("-") {
                -1
            } else {
                return Ok(lin);
            };
        }
    }

    fn expr(&mut self) -> Result<Template> {
        let mut acc = self.term()?;
        loop {
            if self.eat("+") {
                acc = Template::Add(Box::new(acc), Box::new(self.term()?));
            } else if self.eat("-") {
                acc = Template::Sub(Box::new(acc), Box::new(self.term()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Some(Tok::Num(_)) => true,
            Some(Tok::Ident(s)) => !matches!(s.as_str(), "when" | "otherwise"),
            Some(Tok::Sym(s)) => *s == "(",
            None => false,
        }
    }

    fn term(&mut self) -> Result<Template> {
        let mut acc = self.unary()?;
        loop {
            if self.eat("*") {
                acc = Template::Mul(Box::new(acc), Box::new(self.unary()?));
            } else if self.eat("/") {
                acc = Template::Div(Box::new(acc), Box::new(self.unary()?));
            } else if self.starts_atom() {
                acc = Template::Mul(Box::new(acc), Box::new(self.power()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Template> {
        if self.eat("-") {
            Ok(Template::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Template> {
        let base = self.atom()?;
        if self.eat("^") {
            let exp = if self.eat("-") {
                Template::Neg(Box::new(self.atom()?))
            } else {
                self.atom()?
            };
            return Ok(Template::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn args(&mut self, n: usize) -> Result<Vec<Template>> {
        self.expect("(")?;
        let mut out = vec![self.expr()?];
        while self.eat(",") {
            out.push(self.expr()?);
        }
        self.expect(")")?;
        if out.len() != n {
            return self.err(format!("expected {n} arguments"));
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<Template> {
        match self.peek().cloned() {
            Some(Tok::Num(s)) => {
                self.pos += 1;
                match parse_rational(&s) {
                    Some(r) => Ok(Template::Num(r)),
                    None => self.err("bad number"),
                }
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "sqrt" => Ok(Template::Sqrt(Box::new(self.args(1)?.remove(0)))),
                    "fact" => Ok(Template::Fact(Box::new(self.args(1)?.remove(0)))),
                    "sum" => {
                        self.expect("(")?;
                        let v = self.ident()?;
                        self.expect(",")?;
                        let lo = self.expr()?;
                        self.expect(",")?;
                        let hi = self.expr()?;
                        self.expect(",")?;
                        let body = self.expr()?;
                        self.expect(")")?;
                        Ok(Template::Sum(v, Box::new(lo), Box::new(hi), Box::new(body)))
                    }
                    _ => Ok(Template::Ident(name)),
                }
            }
            _ => self.err("expected an expression"),
        }
    }
}

pub fn parse_spec(src: &str) -> Result<InvariantletSpec> {
    let toks = Lexer::run(src)?;
    let lines = src.lines().count().max(1);
    let last = src.lines().last().map_or(0, |l| l.chars().count());
    let mut p = Parser {
        toks,
        pos: 0,
        end: (lines, last + 1),
    };
    p.spec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse_rational_function;

    const GEO: &str = "exponents i -> x, j -> c;\nwhen i = 1 : C^j*C/(2 - C);\notherwise : X^i*C^j\n";

    fn env(pairs: &[(&str, i64)]) -> HashMap<String, i64> {
        pairs.iter().map(|(s, v)| (s.to_string(), *v)).collect()
    }

    fn value(spec: &InvariantletSpec, pairs: &[(&str, i64)]) -> RationalFunction {
        spec.eval(&env(pairs)).unwrap().to_rational().unwrap()
    }

    #[test]
    fn geometric_rules() {
        let s = parse_spec(GEO).unwrap();
        assert_eq!(s.exponents.len(), 2);
        let rf = |t: &str| parse_rational_function(t).unwrap();
        assert_eq!(value(&s, &[("i", 1), ("j", 0)]), rf("C/(2-C)"));
        assert_eq!(value(&s, &[("i", 0), ("j", 3)]), rf("C^3"));
        assert_eq!(value(&s, &[("i", 2), ("j", 1)]), rf("X^2*C"));
    }

    #[test]
    fn sums_and_factorials() {
        let s = parse_spec("exponents i -> x;\notherwise : 1 - (1/e)*sum(n, 0, i - 2, 1/fact(n))").unwrap();
        let rf = |t: &str| parse_rational_function(t).unwrap();
        assert_eq!(value(&s, &[("i", 3)]), rf("1 - 2/e"));
        assert_eq!(value(&s, &[("i", 1)]), rf("1"));
        assert_eq!(value(&s, &[("i", 4)]), rf("1 - 5/(2*e)"));
    }

    #[test]
    fn modular_conditions_and_coverage() {
        let s = parse_spec("exponents i -> x; when i % 2 = 0 and i >= 2: 1; when 2i + 1 <= 3 : X").unwrap();
        assert_eq!(s.matching_rule(&env(&[("i", 4)])), Some(0));
        assert_eq!(s.matching_rule(&env(&[("i", 1)])), Some(1));
        assert!(matches!(s.eval(&env(&[("i", 3)])), Err(Error::NoRuleMatches(_))));
    }

    #[test]
    fn square_roots_survive() {
        let s = parse_spec("exponents i -> x, j -> c; when i = 0: C^j; otherwise: C^j*((1 - sqrt(1 - C^2))/C)^i").unwrap();
        let e = s.eval(&env(&[("i", 2), ("j", 1)])).unwrap();
        assert!(e.has_sqrt());
    }

    #[test]
    fn diagnostics() {
        let e = parse_spec("exponents i -> x;\nwhen k = 1 : 1").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e:?}");
        assert!(parse_spec("exponents i -> x;").is_err());
    }
}
