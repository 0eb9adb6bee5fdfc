//! The probabilistic guarded command language: AST, parser, renderer and
//! guard analysis.

mod ast;
mod guard;
mod parser;
mod render;

pub use ast::{Atom, Cmp, Declarations, Expr, Guard, ProbExpr, Program, Source};
pub use guard::{dnf, guard_states, ValueSet};
pub use parser::{parse, parse_guard, parse_program};
pub use render::{render_expr, render_guard, render_prob, render_program, render_source};
