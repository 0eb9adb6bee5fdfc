//! Superinvariant checking for piecewise invariantlets on a finite grid.

mod check;
mod spec;

pub use check::{
    apply_phi, check, compare, sign, Aggregate, Candidate, CheckOptions, CheckVerdict, Conclusion, Mass, PointResult,
    Status,
};
pub use spec::{instantiate, parse_spec, Condition, InvariantletSpec, Linear, Rule, Template, EULER};
