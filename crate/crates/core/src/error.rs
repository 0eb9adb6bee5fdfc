use thiserror::Error;

use crate::algebra::Symbol;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by the zero rational function")]
    DivisionByZero,
    #[error("substitution makes the denominator vanish identically")]
    SubstitutionPole,
    #[error("denominator has a zero constant term at the expansion point")]
    ExpansionPole,
    #[error("square root of a series whose constant term is not positive")]
    NegativeLeadingTerm,
    #[error("square root of {0} is not rational")]
    IrrationalConstant(String),
    #[error("expression is not a rational function: {0}")]
    NotRational(String),
    #[error("cannot expand over an unbounded degree for {0}")]
    UnboundedExpansion(Symbol),
    #[error("parse error at {line}:{col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },

    #[error("series have different bounds")]
    BoundsMismatch,
    #[error("coefficient {0} depends on parameters and no valuation was given")]
    SymbolicIncomparable(String),

    #[error("probability {value} is outside [0, 1] at state {state}")]
    ProbabilityOutOfRange { value: String, state: String },

    #[error("exact division failed: {0}")]
    DivisionInexact(String),
    #[error("roots of unity did not cancel in the residue filter")]
    ResidueNotRational,
    #[error("not supported in closed form: {0}")]
    Unsupported(String),

    #[error("no rule matches exponents {0}")]
    NoRuleMatches(String),

    #[error("loop body contains a nested loop")]
    NestedLoopBody,
    #[error("{0}")]
    UnclassifiableVariable(String),
    #[error("one-step reach of the loop body exceeds the static bound for {0}")]
    BoundsUnderestimated(String),
    #[error("edge existence depends on the sign of {0}")]
    ParameterAtBoundary(String),
    #[error("linear system is singular after restriction")]
    SingularAfterRestriction,
    #[error("{0}")]
    NotHb(String),
}
