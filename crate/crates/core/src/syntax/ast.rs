use crate::algebra::{Rational, Symbol};

/// Declared program variables and parameters. Variable order fixes the
/// order of indeterminates and of state vectors.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Declarations {
    pub vars: Vec<String>,
    pub params: Vec<String>,
}

impl Declarations {
    pub fn new<S: Into<String>>(vars: impl IntoIterator<Item = S>, params: impl IntoIterator<Item = S>) -> Self {
        Declarations {
            vars: vars.into_iter().map(Into::into).collect(),
            params: params.into_iter().map(Into::into).collect(),
        }
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn is_param(&self, name: &str) -> bool {
        self.params.iter().any(|p| p == name)
    }

    /// `x` ↦ `X`.
    pub fn indeterminate(&self, var: usize) -> Symbol {
        Symbol::indeterminate_for(&self.vars[var])
    }

    pub fn indeterminates(&self) -> Vec<Symbol> {
        (0..self.vars.len()).map(|i| self.indeterminate(i)).collect()
    }

    pub fn param_symbols(&self) -> Vec<Symbol> {
        self.params.iter().map(|p| Symbol::new(p)).collect()
    }
}

/// `max(c0 + Σ a_j·v_j − monus, 0)` with natural coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Expr {
    pub constant: u64,
    /// `(variable index, coefficient)`, sorted by index, coefficients > 0.
    pub terms: Vec<(usize, u64)>,
    pub monus: u64,
}

impl Expr {
    pub fn constant(c: u64) -> Expr {
        Expr {
            constant: c,
            terms: Vec::new(),
            monus: 0,
        }
    }

    pub fn var(v: usize) -> Expr {
        Expr {
            constant: 0,
            terms: vec![(v, 1)],
            monus: 0,
        }
    }

    /// Builds an expression, merging repeated variables and dropping zero
    /// coefficients.
    pub fn affine(constant: u64, terms: impl IntoIterator<Item = (usize, u64)>, monus: u64) -> Expr {
        let mut merged: Vec<(usize, u64)> = Vec::new();
        for (v, a) in terms {
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some(slot) => slot.1 += a,
                None => merged.push((v, a)),
            }
        }
        merged.retain(|(_, a)| *a > 0);
        merged.sort();
        Expr {
            constant,
            terms: merged,
            monus,
        }
    }

    pub fn coeff(&self, v: usize) -> u64 {
        self.terms.iter().find(|(w, _)| *w == v).map_or(0, |t| t.1)
    }

    pub fn mentions(&self, v: usize) -> bool {
        self.coeff(v) > 0
    }

    pub fn eval(&self, state: &[u32]) -> u64 {
        let s: u64 = self.constant + self.terms.iter().map(|(v, a)| a * state[*v] as u64).sum::<u64>();
        s.saturating_sub(self.monus)
    }

    pub fn without_monus(&self) -> Expr {
        Expr {
            monus: 0,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl Cmp {
    pub fn holds(self, a: u64, b: u64) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
            Cmp::Ge => a >= b,
            Cmp::Gt => a > b,
        }
    }

    pub fn negate(self) -> Cmp {
        match self {
            Cmp::Lt => Cmp::Ge,
            Cmp::Le => Cmp::Gt,
            Cmp::Eq => Cmp::Ne,
            Cmp::Ne => Cmp::Eq,
            Cmp::Ge => Cmp::Lt,
            Cmp::Gt => Cmp::Le,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Eq => "=",
            Cmp::Ne => "!=",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    Cmp { var: usize, op: Cmp, value: u64 },
    /// `var % modulus = residue`
    Mod { var: usize, modulus: u64, residue: u64 },
}

impl Atom {
    pub fn var(&self) -> usize {
        match self {
            Atom::Cmp { var, .. } | Atom::Mod { var, .. } => *var,
        }
    }

    pub fn holds(&self, x: u64) -> bool {
        match *self {
            Atom::Cmp { op, value, .. } => op.holds(x, value),
            Atom::Mod { modulus, residue, .. } => x % modulus == residue,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Guard {
    True,
    False,
    Atom(Atom),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn cmp(var: usize, op: Cmp, value: u64) -> Guard {
        Guard::Atom(Atom::Cmp { var, op, value })
    }

    pub fn modulo(var: usize, modulus: u64, residue: u64) -> Guard {
        Guard::Atom(Atom::Mod { var, modulus, residue })
    }

    pub fn and(a: Guard, b: Guard) -> Guard {
        Guard::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Guard, b: Guard) -> Guard {
        Guard::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Guard) -> Guard {
        Guard::Not(Box::new(a))
    }

    pub fn sat(&self, state: &[u32]) -> bool {
        match self {
            Guard::True => true,
            Guard::False => false,
            Guard::Atom(a) => a.holds(state[a.var()] as u64),
            Guard::Not(g) => !g.sat(state),
            Guard::And(a, b) => a.sat(state) && b.sat(state),
            Guard::Or(a, b) => a.sat(state) || b.sat(state),
        }
    }

    pub fn mentions(&self, v: usize) -> bool {
        match self {
            Guard::True | Guard::False => false,
            Guard::Atom(a) => a.var() == v,
            Guard::Not(g) => g.mentions(v),
            Guard::And(a, b) | Guard::Or(a, b) => a.mentions(v) || b.mentions(v),
        }
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut Vec<Atom>) {
        match self {
            Guard::True | Guard::False => {}
            Guard::Atom(a) => out.push(*a),
            Guard::Not(g) => g.collect_atoms(out),
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ProbExpr {
    Literal(Rational),
    Param(String),
    /// `1/x` for a program variable.
    Reciprocal(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Program {
    Skip,
    Assign(usize, Expr),
    /// Two or more statements, none of them a `Seq`.
    Seq(Vec<Program>),
    Choice(ProbExpr, Box<Program>, Box<Program>),
    Ite(Guard, Box<Program>, Box<Program>),
    While(Guard, Box<Program>),
}

impl Program {
    /// Sequential composition, kept flat.
    pub fn seq(items: impl IntoIterator<Item = Program>) -> Program {
        let mut out = Vec::new();
        for p in items {
            match p {
                Program::Seq(v) => out.extend(v),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Program::Skip,
            1 => out.pop().unwrap(),
            _ => Program::Seq(out),
        }
    }

    pub fn choice(p: ProbExpr, a: Program, b: Program) -> Program {
        Program::Choice(p, Box::new(a), Box::new(b))
    }

    pub fn ite(g: Guard, a: Program, b: Program) -> Program {
        Program::Ite(g, Box::new(a), Box::new(b))
    }

    pub fn while_loop(g: Guard, body: Program) -> Program {
        Program::While(g, Box::new(body))
    }

    pub fn is_loop_free(&self) -> bool {
        match self {
            Program::Skip | Program::Assign(..) => true,
            Program::Seq(v) => v.iter().all(Program::is_loop_free),
            Program::Choice(_, a, b) | Program::Ite(_, a, b) => a.is_loop_free() && b.is_loop_free(),
            Program::While(..) => false,
        }
    }

    /// Statements in sequence order (a non-`Seq` program is a single one).
    pub fn statements(&self) -> &[Program] {
        match self {
            Program::Seq(v) => v,
            other => std::slice::from_ref(other),
        }
    }
}

/// A parsed source file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Source {
    pub decls: Declarations,
    pub program: Program,
}
