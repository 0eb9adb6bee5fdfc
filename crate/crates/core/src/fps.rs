//! Truncated multivariate formal power series over a box of exponents.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::algebra::{Monomial, Polynomial, Rational, RationalFunction, Symbol};
use crate::error::{Error, Result};
use crate::syntax::Guard;

/// Bound value meaning "no truncation in this variable".
pub const UNBOUNDED: u32 = u32::MAX;

/// Per-variable maximum exponents. The variable order is the program's
/// declaration order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bounds {
    vars: Vec<Symbol>,
    max: Vec<u32>,
}

impl Bounds {
    pub fn new(vars: Vec<Symbol>, max: Vec<u32>) -> Arc<Bounds> {
        assert_eq!(vars.len(), max.len(), "one bound per variable");
        Arc::new(Bounds { vars, max })
    }

    pub fn uniform(vars: Vec<Symbol>, n: u32) -> Arc<Bounds> {
        let max = vec![n; vars.len()];
        Bounds::new(vars, max)
    }

    pub fn unbounded(vars: Vec<Symbol>) -> Arc<Bounds> {
        Bounds::uniform(vars, UNBOUNDED)
    }

    pub fn vars(&self) -> &[Symbol] {
        &self.vars
    }

    pub fn max(&self) -> &[u32] {
        &self.max
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn index_of(&self, s: Symbol) -> Option<usize> {
        self.vars.iter().position(|v| *v == s)
    }

    pub fn admits(&self, e: &[u32]) -> bool {
        e.iter().zip(&self.max).all(|(a, b)| a <= b)
    }

    pub fn is_finite(&self) -> bool {
        self.max.iter().all(|m| *m != UNBOUNDED)
    }
}

/// A program state: one natural number per variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateVector(pub Vec<u32>);

impl StateVector {
    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str(")")
    }
}

/// Outcome of a coefficient-wise comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Preceq {
    Holds,
    Fails(StateVector),
}

/// Finite part of a series plus the mass pushed beyond the bounds.
#[derive(Clone)]
pub struct TruncatedFPS {
    bounds: Arc<Bounds>,
    coeffs: BTreeMap<StateVector, RationalFunction>,
    lost_mass: RationalFunction,
}

impl PartialEq for TruncatedFPS {
    fn eq(&self, o: &Self) -> bool {
        *self.bounds == *o.bounds && self.coeffs == o.coeffs && self.lost_mass == o.lost_mass
    }
}

impl Eq for TruncatedFPS {}

impl TruncatedFPS {
    pub fn zero(bounds: &Arc<Bounds>) -> TruncatedFPS {
        TruncatedFPS {
            bounds: bounds.clone(),
            coeffs: BTreeMap::new(),
            lost_mass: RationalFunction::zero(),
        }
    }

    pub fn one(bounds: &Arc<Bounds>) -> TruncatedFPS {
        TruncatedFPS::monomial(bounds, StateVector(vec![0; bounds.dim()]), RationalFunction::one())
    }

    /// `c * X^σ`; lands in the lost mass when σ is outside the box.
    pub fn monomial(bounds: &Arc<Bounds>, s: StateVector, c: RationalFunction) -> TruncatedFPS {
        let mut f = TruncatedFPS::zero(bounds);
        f.add_term(s, c);
        f
    }

    pub(crate) fn from_parts(
        bounds: Arc<Bounds>,
        coeffs: BTreeMap<StateVector, RationalFunction>,
        lost_mass: RationalFunction,
    ) -> TruncatedFPS {
        TruncatedFPS {
            bounds,
            coeffs,
            lost_mass,
        }
    }

    /// Splits a polynomial in the bound variables (and parameters) into
    /// series coefficients.
    pub fn from_polynomial(bounds: &Arc<Bounds>, p: &Polynomial) -> TruncatedFPS {
        let mut parts: BTreeMap<StateVector, Polynomial> = BTreeMap::new();
        for (m, c) in p.terms() {
            let mut rest = m.clone();
            let mut e = vec![0; bounds.dim()];
            for (k, v) in bounds.vars.iter().enumerate() {
                let (x, r) = rest.split_off(*v);
                e[k] = x;
                rest = r;
            }
            parts.entry(StateVector(e)).or_default().add_term(rest, c.clone());
        }
        let mut f = TruncatedFPS::zero(bounds);
        for (s, p) in parts {
            f.add_term(s, RationalFunction::from_poly(p));
        }
        f
    }

    pub fn bounds(&self) -> &Arc<Bounds> {
        &self.bounds
    }

    pub fn lost_mass(&self) -> &RationalFunction {
        &self.lost_mass
    }

    pub fn with_lost_mass(mut self, l: RationalFunction) -> TruncatedFPS {
        self.lost_mass = l;
        self
    }

    pub fn add_lost(&mut self, l: &RationalFunction) {
        if !l.is_zero() {
            self.lost_mass = &self.lost_mass + l;
        }
    }

    pub fn coeffs(&self) -> &BTreeMap<StateVector, RationalFunction> {
        &self.coeffs
    }

    pub fn coeff(&self, s: &StateVector) -> RationalFunction {
        self.coeffs.get(s).cloned().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&StateVector, &RationalFunction)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Adds `c * X^σ`, diverting it to the lost mass outside the box.
    pub fn add_term(&mut self, s: StateVector, c: RationalFunction) {
        if c.is_zero() {
            return;
        }
        if !self.bounds.admits(&s.0) {
            self.add_lost(&c);
            return;
        }
        match self.coeffs.entry(s) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + &c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    fn check(&self, o: &TruncatedFPS) -> Result<()> {
        if *self.bounds == *o.bounds {
            Ok(())
        } else {
            Err(Error::BoundsMismatch)
        }
    }

    pub fn add(&self, o: &TruncatedFPS) -> Result<TruncatedFPS> {
        self.check(o)?;
        let mut out = self.clone();
        for (s, c) in &o.coeffs {
            out.add_term(s.clone(), c.clone());
        }
        out.add_lost(&o.lost_mass);
        Ok(out)
    }

    pub fn sub(&self, o: &TruncatedFPS) -> Result<TruncatedFPS> {
        self.add(&o.scale(&RationalFunction::from_int(-1)))
    }

    pub fn scale(&self, r: &RationalFunction) -> TruncatedFPS {
        if r.is_zero() {
            return TruncatedFPS::zero(&self.bounds);
        }
        TruncatedFPS {
            bounds: self.bounds.clone(),
            coeffs: self.coeffs.iter().map(|(s, c)| (s.clone(), c * r)).collect(),
            lost_mass: &self.lost_mass * r,
        }
    }

    /// Cauchy product. Products leaving the box and all cross terms with
    /// lost mass are charged to the lost mass.
    pub fn mul(&self, o: &TruncatedFPS) -> Result<TruncatedFPS> {
        self.check(o)?;
        let mut out = TruncatedFPS::zero(&self.bounds);
        for (s, a) in &self.coeffs {
            for (t, b) in &o.coeffs {
                let e = s.0.iter().zip(&t.0).map(|(x, y)| x.saturating_add(*y)).collect();
                out.add_term(StateVector(e), a * b);
            }
        }
        let lf = &self.lost_mass;
        let lg = &o.lost_mass;
        if !lf.is_zero() || !lg.is_zero() {
            let extra = &(&(&self.mass() * lg) + &(lf * &o.mass())) + &(lf * lg);
            out.add_lost(&extra);
        }
        Ok(out)
    }

    /// Keeps the coefficients whose state satisfies `keep`.
    pub fn restrict_by(&self, keep: impl Fn(&[u32]) -> bool) -> TruncatedFPS {
        TruncatedFPS {
            bounds: self.bounds.clone(),
            coeffs: self
                .coeffs
                .iter()
                .filter(|(s, _)| keep(&s.0))
                .map(|(s, c)| (s.clone(), c.clone()))
                .collect(),
            lost_mass: self.lost_mass.clone(),
        }
    }

    /// `⟨F⟩_B`; the guard's variables index the series variables.
    pub fn restrict(&self, b: &Guard) -> TruncatedFPS {
        self.restrict_by(|s| b.sat(s))
    }

    /// Sum of stored coefficients; lost mass excluded.
    pub fn mass(&self) -> RationalFunction {
        let mut acc = RationalFunction::zero();
        let mut q = Rational::zero();
        for c in self.coeffs.values() {
            match c.constant_value() {
                Some(v) if c.is_constant() => q += v,
                _ => acc = &acc + c,
            }
        }
        &acc + &RationalFunction::constant(q)
    }

    pub fn is_ground(&self) -> bool {
        self.coeffs.values().all(RationalFunction::is_constant) && self.lost_mass.is_constant()
    }

    /// Sum of `coeff * X^σ` as a rational function (polynomial in the
    /// series variables).
    pub fn to_rational_function(&self) -> RationalFunction {
        let mut acc = RationalFunction::zero();
        for (s, c) in &self.coeffs {
            let m = Monomial::from_pairs(self.bounds.vars.iter().copied().zip(s.0.iter().copied()));
            acc = &acc + &(c * &RationalFunction::from_poly(Polynomial::term(Rational::one(), m)));
        }
        acc
    }

    /// `F ⪯ G`: every coefficient of `F` is at most the corresponding one
    /// of `G` on the shared box. Coefficients with parameters need a
    /// valuation.
    pub fn preceq(&self, g: &TruncatedFPS, valuation: Option<&HashMap<Symbol, Rational>>) -> Result<Preceq> {
        self.check(g)?;
        let mut keys: Vec<&StateVector> = self.coeffs.keys().chain(g.coeffs.keys()).collect();
        keys.sort();
        keys.dedup();
        for s in keys {
            let d = &g.coeff(s) - &self.coeff(s);
            let v = match (d.constant_value(), valuation) {
                (Some(v), _) if d.is_constant() => v,
                (_, Some(val)) => d.eval(val).ok_or_else(|| Error::SymbolicIncomparable(d.to_string()))?,
                _ => return Err(Error::SymbolicIncomparable(d.to_string())),
            };
            if v.is_negative() {
                return Ok(Preceq::Fails(s.clone()));
            }
        }
        Ok(Preceq::Holds)
    }

    /// Same coefficients over a smaller or equal box; entries outside the
    /// new box are dropped.
    pub fn reframe(&self, bounds: &Arc<Bounds>) -> TruncatedFPS {
        assert_eq!(self.bounds.vars, bounds.vars, "reframe keeps the variables");
        TruncatedFPS {
            bounds: bounds.clone(),
            coeffs: self
                .coeffs
                .iter()
                .filter(|(s, _)| bounds.admits(&s.0))
                .map(|(s, c)| (s.clone(), c.clone()))
                .collect(),
            lost_mass: self.lost_mass.clone(),
        }
    }

    fn monomial_of(&self, s: &StateVector) -> Monomial {
        Monomial::from_pairs(self.bounds.vars.iter().copied().zip(s.0.iter().copied()))
    }
}

/// Renders `1/2*C + 1/4*C^2 + (a)*C*X` in ascending monomial order.
impl fmt::Display for TruncatedFPS {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return f.write_str("0");
        }
        let mut terms: Vec<(Monomial, &RationalFunction)> =
            self.coeffs.iter().map(|(s, c)| (self.monomial_of(s), c)).collect();
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        for (k, (m, c)) in terms.iter().enumerate() {
            let text = if c.is_constant() {
                let v = c.constant_value().unwrap();
                let p = Polynomial::term(v, m.clone());
                p.to_string()
            } else if m.is_one() {
                format!("({c})")
            } else {
                format!("({c})*{m}")
            };
            match (k, text.strip_prefix('-')) {
                (0, _) => f.write_str(&text)?,
                (_, Some(rest)) => write!(f, " - {rest}")?,
                (_, None) => write!(f, " + {text}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for TruncatedFPS {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self} [lost {}]", self.lost_mass)
    }
}

struct Exps<'a>(&'a [Symbol], &'a StateVector);

impl Serialize for Exps<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (v, e) in self.0.iter().zip(&self.1 .0) {
            m.serialize_entry(v.name(), e)?;
        }
        m.end()
    }
}

struct Term<'a>(&'a [Symbol], &'a StateVector, &'a RationalFunction);

impl Serialize for Term<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Term", 2)?;
        st.serialize_field("exps", &Exps(self.0, self.1))?;
        st.serialize_field("coeff", self.2)?;
        st.end()
    }
}

impl Serialize for TruncatedFPS {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: Vec<Term<'_>> = self
            .coeffs
            .iter()
            .map(|(sv, c)| Term(&self.bounds.vars, sv, c))
            .collect();
        let mut st = s.serialize_struct("TruncatedFPS", 2)?;
        st.serialize_field("terms", &terms)?;
        st.serialize_field("lost_mass", &self.lost_mass)?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::rational::rat;
    use crate::algebra::{parse_expr, series_expand};

    fn bx(n: u32) -> Arc<Bounds> {
        Bounds::uniform(vec![Symbol::new("X")], n)
    }

    fn half_half(b: &Arc<Bounds>) -> TruncatedFPS {
        let h = RationalFunction::constant(rat(1, 2));
        let mut f = TruncatedFPS::monomial(b, StateVector(vec![0]), h.clone());
        f.add_term(StateVector(vec![1]), h);
        f
    }

    #[test]
    fn add_and_scale() {
        let b = bx(4);
        let f = half_half(&b);
        let g = TruncatedFPS::monomial(&b, StateVector(vec![0]), RationalFunction::constant(rat(1, 2)));
        let s = f.add(&g).unwrap();
        assert_eq!(s.coeff(&StateVector(vec![0])), RationalFunction::one());
        assert!(f.scale(&RationalFunction::zero()).is_empty());
        assert_eq!(f.add(&TruncatedFPS::zero(&bx(3))), Err(Error::BoundsMismatch));
    }

    #[test]
    fn square_of_coin() {
        let b = bx(4);
        let f = half_half(&b);
        let sq = f.mul(&f).unwrap();
        let want: Vec<_> = [rat(1, 4), rat(1, 2), rat(1, 4)]
            .into_iter()
            .map(RationalFunction::constant)
            .collect();
        assert_eq!(sq.coeffs().values().cloned().collect::<Vec<_>>(), want);
        assert_eq!(f.mul(&TruncatedFPS::one(&b)).unwrap(), f);
    }

    #[test]
    fn overflow_goes_to_lost_mass() {
        let b = bx(1);
        let f = half_half(&b);
        let sq = f.mul(&f).unwrap();
        assert_eq!(sq.lost_mass(), &RationalFunction::constant(rat(1, 4)));
        assert_eq!(&sq.mass() + sq.lost_mass(), RationalFunction::one());
    }

    #[test]
    fn truncated_geometric_mass() {
        let b = Bounds::uniform(vec![Symbol::new("C")], 20);
        let s = series_expand(&parse_expr("C/(2-C)").unwrap(), &b).unwrap();
        let expected = RationalFunction::one() - RationalFunction::constant(rat(1, 1 << 20));
        assert_eq!(s.mass(), expected);
    }

    #[test]
    fn order_and_witness() {
        let b = bx(3);
        let f = half_half(&b);
        assert_eq!(f.preceq(&f, None), Ok(Preceq::Holds));
        assert_eq!(TruncatedFPS::zero(&b).preceq(&f, None), Ok(Preceq::Holds));
        assert_eq!(f.preceq(&TruncatedFPS::zero(&b), None), Ok(Preceq::Fails(StateVector(vec![0]))));
        let a = TruncatedFPS::monomial(&b, StateVector(vec![1]), RationalFunction::var(Symbol::new("a")));
        assert!(matches!(a.preceq(&f, None), Err(Error::SymbolicIncomparable(_))));
        let mut val = HashMap::new();
        val.insert(Symbol::new("a"), rat(1, 3));
        assert_eq!(a.preceq(&f, Some(&val)), Ok(Preceq::Holds));
    }

    #[test]
    fn rendering_and_json_shape() {
        let f = half_half(&bx(3));
        assert_eq!(f.to_string(), "1/2 + 1/2*X");
    }
}
