use num_bigint::BigInt;
use num_traits::{One, Signed};

use super::ast::{Atom, Cmp, Declarations, Expr, Guard, ProbExpr, Program, Source};
use crate::algebra::Rational;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Nat(u64),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 22] = [
    ":=", "<=", ">=", "!=", "==", "&&", "||", ";", ",", "{", "}", "[", "]", "(", ")", "+", "-", "*", "/", "<", ">",
    "%",
];

fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let n = s.parse().map_err(|_| Error::Parse {
                line: l0,
                col: c0,
                message: format!("number {s} is too large"),
            })?;
            col += i - start;
            out.push(Token {
                tok: Tok::Nat(n),
                line: l0,
                col: c0,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: l0,
                col: c0,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let sym = SYMBOLS
            .iter()
            .find(|s| rest.starts_with(**s))
            .copied()
            .or(match c {
                '=' => Some("="),
                '!' => Some("!"),
                _ => None,
            });
        match sym {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Token {
                    tok: Tok::Sym(s),
                    line: l0,
                    col: c0,
                });
            }
            None => {
                return Err(Error::Parse {
                    line: l0,
                    col: c0,
                    message: format!("unexpected character '{c}'"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

const KEYWORDS: [&str; 10] = ["vars", "params", "skip", "if", "else", "while", "true", "false", "and", "or"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    decls: Declarations,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        let t = &self.toks[self.pos];
        Err(Error::Parse {
            line: t.line,
            col: t.col,
            message: message.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Nat(n) => format!("'{n}'"),
            Tok::Sym(s) => format!("'{s}'"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.fail(format!("expected '{s}', found {}", self.describe()))
        }
    }

    fn nat(&mut self) -> Result<u64> {
        match *self.peek() {
            Tok::Nat(n) => {
                self.pos += 1;
                Ok(n)
            }
            _ => self.fail(format!("expected a natural number, found {}", self.describe())),
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) && s != "not" => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail(format!("expected a name, found {}", self.describe())),
        }
    }

    fn var(&mut self) -> Result<usize> {
        let save = self.pos;
        let name = self.ident()?;
        match self.decls.var_index(&name) {
            Some(i) => Ok(i),
            None => {
                self.pos = save;
                self.fail(format!("undeclared variable '{name}'"))
            }
        }
    }

    fn name_list(&mut self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        if self.is_sym(";") {
            return Ok(out);
        }
        loop {
            let save = self.pos;
            let n = self.ident()?;
            if out.contains(&n) || self.decls.vars.contains(&n) || self.decls.params.contains(&n) {
                self.pos = save;
                return self.fail(format!("'{n}' is declared twice"));
            }
            out.push(n);
            if !self.eat_sym(",") {
                return Ok(out);
            }
        }
    }

    fn header(&mut self) -> Result<()> {
        loop {
            if self.eat_kw("vars") {
                let v = self.name_list()?;
                self.decls.vars.extend(v);
                self.expect_sym(";")?;
            } else if self.eat_kw("params") {
                let p = self.name_list()?;
                self.decls.params.extend(p);
                self.expect_sym(";")?;
            } else {
                return Ok(());
            }
        }
    }

    fn prog(&mut self) -> Result<Program> {
        let mut items = vec![self.stmt()?];
        while self.eat_sym(";") {
            if self.is_sym("}") || *self.peek() == Tok::Eof {
                break;
            }
            items.push(self.stmt()?);
        }
        Ok(Program::seq(items))
    }

    fn block(&mut self) -> Result<Program> {
        self.expect_sym("{")?;
        let p = self.prog()?;
        self.expect_sym("}")?;
        Ok(p)
    }

    fn stmt(&mut self) -> Result<Program> {
        if self.eat_kw("skip") {
            return Ok(Program::Skip);
        }
        if self.eat_kw("if") {
            self.expect_sym("(")?;
            let g = self.guard()?;
            self.expect_sym(")")?;
            let a = self.block()?;
            let b = if self.eat_kw("else") { self.block()? } else { Program::Skip };
            return Ok(Program::ite(g, a, b));
        }
        if self.eat_kw("while") {
            self.expect_sym("(")?;
            let g = self.guard()?;
            self.expect_sym(")")?;
            let body = self.block()?;
            return Ok(Program::while_loop(g, body));
        }
        if self.is_sym("{") {
            let a = self.block()?;
            self.expect_sym("[")?;
            let p = self.prob()?;
            self.expect_sym("]")?;
            let b = self.block()?;
            return Ok(Program::choice(p, a, b));
        }
        if let Tok::Ident(_) = self.peek() {
            let v = self.var()?;
            self.expect_sym(":=")?;
            let e = self.expr()?;
            return Ok(Program::Assign(v, e));
        }
        self.fail(format!("expected a statement, found {}", self.describe()))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut constant = 0u64;
        let mut terms = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Nat(n) => {
                    self.pos += 1;
                    if self.eat_sym("*") {
                        terms.push((self.var()?, n));
                    } else {
                        constant += n;
                    }
                }
                Tok::Ident(_) => terms.push((self.var()?, 1)),
                _ => return self.fail(format!("expected a term, found {}", self.describe())),
            }
            if !self.eat_sym("+") {
                break;
            }
        }
        let monus = if self.eat_sym("-") { self.nat()? } else { 0 };
        Ok(Expr::affine(constant, terms, monus))
    }

    fn prob(&mut self) -> Result<ProbExpr> {
        let start = self.pos;
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.pos += 1;
                if self.decls.is_param(&name) {
                    Ok(ProbExpr::Param(name))
                } else {
                    self.pos = start;
                    self.fail(format!("undeclared parameter '{name}'"))
                }
            }
            Tok::Nat(n) => {
                self.pos += 1;
                if !self.eat_sym("/") {
                    if n > 1 {
                        self.pos = start;
                        return self.fail(format!("probability {n} is outside [0, 1]"));
                    }
                    return Ok(ProbExpr::Literal(Rational::from_integer(BigInt::from(n))));
                }
                if let Tok::Ident(_) = self.peek() {
                    if n != 1 {
                        self.pos = start;
                        return self.fail("a state-dependent probability must have the form 1/x");
                    }
                    return Ok(ProbExpr::Reciprocal(self.var()?));
                }
                let d = self.nat()?;
                if d == 0 {
                    self.pos = start;
                    return self.fail("zero denominator in probability");
                }
                let q = Rational::new(BigInt::from(n), BigInt::from(d));
                if q.is_negative() || q > Rational::one() {
                    self.pos = start;
                    return self.fail(format!("probability {n}/{d} is outside [0, 1]"));
                }
                Ok(ProbExpr::Literal(q))
            }
            _ => self.fail(format!("expected a probability, found {}", self.describe())),
        }
    }

    fn guard(&mut self) -> Result<Guard> {
        let mut g = self.conj()?;
        while self.eat_kw("or") || self.eat_sym("||") {
            g = Guard::or(g, self.conj()?);
        }
        Ok(g)
    }

    fn conj(&mut self) -> Result<Guard> {
        let mut g = self.unary()?;
        while self.eat_kw("and") || self.eat_sym("&&") {
            g = Guard::and(g, self.unary()?);
        }
        Ok(g)
    }

    fn unary(&mut self) -> Result<Guard> {
        if self.eat_kw("not") || self.eat_sym("!") {
            return Ok(Guard::not(self.unary()?));
        }
        if self.eat_kw("true") {
            return Ok(Guard::True);
        }
        if self.eat_kw("false") {
            return Ok(Guard::False);
        }
        if self.eat_sym("(") {
            let g = self.guard()?;
            self.expect_sym(")")?;
            return Ok(g);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Guard> {
        let var = self.var()?;
        if self.eat_sym("%") {
            let at = self.pos;
            let modulus = self.nat()?;
            if !(self.eat_sym("=") || self.eat_sym("==")) {
                return self.fail("expected '=' after a modulus");
            }
            let residue = self.nat()?;
            if modulus == 0 || residue >= modulus {
                self.pos = at;
                return self.fail(format!("residue {residue} is not below modulus {modulus}"));
            }
            return Ok(Guard::Atom(Atom::Mod { var, modulus, residue }));
        }
        let op = match self.peek() {
            Tok::Sym("<") => Cmp::Lt,
            Tok::Sym("<=") => Cmp::Le,
            Tok::Sym("=") | Tok::Sym("==") => Cmp::Eq,
            Tok::Sym("!=") => Cmp::Ne,
            Tok::Sym(">=") => Cmp::Ge,
            Tok::Sym(">") => Cmp::Gt,
            _ => return self.fail(format!("expected a comparison, found {}", self.describe())),
        };
        self.pos += 1;
        let value = self.nat()?;
        Ok(Guard::Atom(Atom::Cmp { var, op, value }))
    }
}

/// Parses a source file: optional `vars`/`params` headers followed by a
/// program.
pub fn parse(src: &str) -> Result<Source> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        decls: Declarations::default(),
    };
    p.header()?;
    let program = p.prog()?;
    if *p.peek() != Tok::Eof {
        return p.fail(format!("unexpected {}", p.describe()));
    }
    Ok(Source {
        decls: p.decls,
        program,
    })
}

/// Parses a program against existing declarations.
pub fn parse_program(decls: &Declarations, src: &str) -> Result<Program> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        decls: decls.clone(),
    };
    let program = p.prog()?;
    if *p.peek() != Tok::Eof {
        return p.fail(format!("unexpected {}", p.describe()));
    }
    Ok(program)
}

/// Parses a guard against existing declarations.
pub fn parse_guard(decls: &Declarations, src: &str) -> Result<Guard> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        decls: decls.clone(),
    };
    let g = p.guard()?;
    if *p.peek() != Tok::Eof {
        return p.fail(format!("unexpected {}", p.describe()));
    }
    Ok(g)
}
