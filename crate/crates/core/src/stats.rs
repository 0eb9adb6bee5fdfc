//! Distribution facts read off generating functions.

use serde::Serialize;

use crate::algebra::{Limit, Rational, RationalFunction, Symbol};
use crate::closedform::cf_boolean;
use crate::error::Result;
use crate::fps::TruncatedFPS;
use crate::syntax::{Declarations, Guard};

/// Mass of a closed form: the value at the all-ones point.
pub fn termination_probability(g: &RationalFunction, vars: &[Symbol]) -> Limit {
    g.eval_at_one(vars)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncatedMass {
    /// Certified lower bound on the termination probability.
    pub lower_bound: RationalFunction,
    pub lost_mass: RationalFunction,
}

pub fn truncated_termination(f: &TruncatedFPS) -> TruncatedMass {
    TruncatedMass {
        lower_bound: f.mass(),
        lost_mass: f.lost_mass().clone(),
    }
}

/// `∂^k G / ∂X^k` at the all-ones point.
pub fn factorial_moment(g: &RationalFunction, var: Symbol, k: u32, vars: &[Symbol]) -> Limit {
    g.derivative(var, k).eval_at_one(vars)
}

pub fn expectation(g: &RationalFunction, var: Symbol, vars: &[Symbol]) -> Limit {
    factorial_moment(g, var, 1, vars)
}

/// `m2 + m1 - m1^2`.
pub fn variance(g: &RationalFunction, var: Symbol, vars: &[Symbol]) -> Limit {
    match (factorial_moment(g, var, 1, vars), factorial_moment(g, var, 2, vars)) {
        (Limit::Value(m1), Limit::Value(m2)) => Limit::Value(&(&m2 + &m1) - &(&m1 * &m1)),
        _ => Limit::Divergent,
    }
}

/// Sets every indeterminate outside `keep` to 1.
pub fn marginal(g: &RationalFunction, keep: &[Symbol], vars: &[Symbol]) -> Limit {
    let drop: Vec<Symbol> = vars.iter().filter(|v| !keep.contains(v)).copied().collect();
    g.eval_at_one(&drop)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Independence {
    Independent,
    /// `G_V * G_W - G_{V ∪ W}`.
    Dependent { witness: RationalFunction },
    /// A marginal has no finite value.
    Divergent,
}

pub fn independence(g: &RationalFunction, v: &[Symbol], w: &[Symbol], vars: &[Symbol]) -> Independence {
    assert!(v.iter().all(|s| !w.contains(s)), "variable sets must be disjoint");
    let both: Vec<Symbol> = v.iter().chain(w).copied().collect();
    let parts = (marginal(g, v, vars), marginal(g, w, vars), marginal(g, &both, vars));
    let (Limit::Value(gv), Limit::Value(gw), Limit::Value(gvw)) = parts else {
        return Independence::Divergent;
    };
    let witness = &(&gv * &gw) - &gvw;
    if witness.is_zero() {
        Independence::Independent
    } else {
        Independence::Dependent { witness }
    }
}

/// Probability of terminating in a state satisfying `b`.
pub fn event_probability(d: &Declarations, g: &RationalFunction, b: &Guard) -> Result<Limit> {
    Ok(cf_boolean(d, g, b)?.eval_at_one(&d.indeterminates()))
}

/// Evaluates a symbolic result at a parameter point, keeping divergence.
pub fn at_point(l: &Limit, point: &[(Symbol, Rational)]) -> Limit {
    match l {
        Limit::Value(v) => v.eval_at_point(point),
        Limit::Divergent => Limit::Divergent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse_rational_function;
    use crate::algebra::rational::rat;
    use crate::syntax::{parse, parse_guard};

    fn rf(s: &str) -> RationalFunction {
        parse_rational_function(s).unwrap()
    }

    fn sym(s: &str) -> Symbol {
        Symbol::new(s)
    }

    fn cowboys() -> (Declarations, RationalFunction) {
        let s = parse("vars x, t, c, d; params a, b; skip").unwrap();
        (s.decls, rf("(a*C*X + (1-a)*b*C*D*T*X)/(1-(1-b)*(1-a)*C*D)"))
    }

    #[test]
    fn geometric() {
        let vars = [sym("C")];
        let g = rf("C/(2-C)");
        assert_eq!(termination_probability(&g, &vars), Limit::Value(rf("1")));
        assert_eq!(expectation(&g, sym("C"), &vars), Limit::Value(rf("2")));
        assert_eq!(variance(&g, sym("C"), &vars), Limit::Value(rf("2")));
        let x = [sym("X")];
        assert_eq!(expectation(&rf("1/(2-X)"), sym("X"), &x), Limit::Value(rf("1")));
        let d = Declarations::new(["c"], []);
        let p = event_probability(&d, &g, &parse_guard(&d, "c <= 2").unwrap()).unwrap();
        assert_eq!(p, Limit::Value(rf("3/4")));
        assert_eq!(factorial_moment(&rf("1"), sym("C"), 3, &vars), Limit::Value(rf("0")));
    }

    #[test]
    fn cowboys_statistics() {
        let (d, g) = cowboys();
        let vars = d.indeterminates();
        let e = expectation(&g, sym("C"), &vars);
        assert_eq!(e, Limit::Value(rf("1/(a+b-a*b)")));
        assert!(at_point(&e, &[(sym("a"), rat(0, 1)), (sym("b"), rat(0, 1))]).is_divergent());
        let m = marginal(&g, &[sym("C")], &vars);
        assert_eq!(expectation(m.value().unwrap(), sym("C"), &vars), e);
        assert!(matches!(
            independence(&g, &[sym("C")], &[sym("D")], &vars),
            Independence::Dependent { .. }
        ));
        let pinned = g
            .substitute(&[(sym("a"), RationalFunction::one())].into_iter().collect())
            .unwrap();
        assert_eq!(
            independence(&pinned, &[sym("C")], &[sym("D")], &vars),
            Independence::Independent
        );
    }

    #[test]
    fn truncated_mass_is_a_lower_bound() {
        use crate::fps::{Bounds, StateVector};
        let b = Bounds::uniform(vec![sym("X")], 1);
        let mut f = TruncatedFPS::zero(&b);
        f.add_term(StateVector(vec![0]), rf("1/2"));
        f.add_term(StateVector(vec![2]), rf("1/4"));
        let m = truncated_termination(&f);
        assert_eq!(m.lower_bound, rf("1/2"));
        assert_eq!(m.lost_mass, rf("1/4"));
    }
}
