//! Exact arithmetic: rationals, sparse polynomials, reduced rational
//! functions and closed-form expressions with series expansion.

mod closed;
mod monomial;
mod parse;
mod polynomial;
mod ratfun;
pub mod rational;
mod symbol;

pub use closed::{series_expand, ClosedFormExpr};
pub use monomial::Monomial;
pub use parse::parse_expr;
pub use polynomial::{gcd, Polynomial};
pub use ratfun::{Limit, RationalFunction};
pub use rational::Rational;
pub use symbol::Symbol;

/// Parses a sqrt-free expression straight into a rational function.
pub fn parse_rational_function(src: &str) -> crate::error::Result<RationalFunction> {
    parse_expr(src)?.to_rational()
}
