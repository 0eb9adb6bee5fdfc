use std::fmt::Write;

use super::ast::{Atom, Declarations, Expr, Guard, ProbExpr, Program, Source};
use crate::algebra::rational::render_rational;

pub fn render_expr(d: &Declarations, e: &Expr) -> String {
    let mut parts: Vec<String> = e
        .terms
        .iter()
        .map(|(v, a)| {
            if *a == 1 {
                d.vars[*v].clone()
            } else {
                format!("{a}*{}", d.vars[*v])
            }
        })
        .collect();
    if e.constant > 0 || parts.is_empty() {
        parts.push(e.constant.to_string());
    }
    let mut s = parts.join(" + ");
    if e.monus > 0 {
        write!(s, " - {}", e.monus).unwrap();
    }
    s
}

fn prec(g: &Guard) -> u8 {
    match g {
        Guard::Or(..) => 1,
        Guard::And(..) => 2,
        Guard::Not(_) => 3,
        _ => 4,
    }
}

fn wrap(d: &Declarations, g: &Guard, min: u8) -> String {
    let s = render_guard(d, g);
    if prec(g) < min {
        format!("({s})")
    } else {
        s
    }
}

pub fn render_guard(d: &Declarations, g: &Guard) -> String {
    match g {
        Guard::True => "true".into(),
        Guard::False => "false".into(),
        Guard::Atom(Atom::Cmp { var, op, value }) => format!("{} {} {value}", d.vars[*var], op.symbol()),
        Guard::Atom(Atom::Mod { var, modulus, residue }) => format!("{} % {modulus} = {residue}", d.vars[*var]),
        Guard::Not(h) => format!("not {}", wrap(d, h, 3)),
        Guard::And(a, b) => format!("{} and {}", wrap(d, a, 2), wrap(d, b, 3)),
        Guard::Or(a, b) => format!("{} or {}", wrap(d, a, 1), wrap(d, b, 2)),
    }
}

pub fn render_prob(d: &Declarations, p: &ProbExpr) -> String {
    match p {
        ProbExpr::Literal(q) => render_rational(q),
        ProbExpr::Param(a) => a.clone(),
        ProbExpr::Reciprocal(v) => format!("1/{}", d.vars[*v]),
    }
}

pub fn render_program(d: &Declarations, p: &Program) -> String {
    match p {
        Program::Skip => "skip".into(),
        Program::Assign(v, e) => format!("{} := {}", d.vars[*v], render_expr(d, e)),
        Program::Seq(v) => v.iter().map(|s| render_program(d, s)).collect::<Vec<_>>().join("; "),
        Program::Choice(q, a, b) => format!(
            "{{ {} }} [{}] {{ {} }}",
            render_program(d, a),
            render_prob(d, q),
            render_program(d, b)
        ),
        Program::Ite(g, a, b) => format!(
            "if ({}) {{ {} }} else {{ {} }}",
            render_guard(d, g),
            render_program(d, a),
            render_program(d, b)
        ),
        Program::While(g, b) => format!("while ({}) {{ {} }}", render_guard(d, g), render_program(d, b)),
    }
}

/// Source text that parses back to the same declarations and program.
pub fn render_source(s: &Source) -> String {
    let mut out = String::new();
    if !s.decls.vars.is_empty() {
        writeln!(out, "vars {};", s.decls.vars.join(", ")).unwrap();
    }
    if !s.decls.params.is_empty() {
        writeln!(out, "params {};", s.decls.params.join(", ")).unwrap();
    }
    out.push_str(&render_program(&s.decls, &s.program));
    out.push('\n');
    out
}
