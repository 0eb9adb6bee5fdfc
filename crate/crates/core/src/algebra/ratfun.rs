use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use super::polynomial::gcd;
use super::rational::lcm_of_denominators;
use super::{Polynomial, Rational, Symbol};
use crate::error::{Error, Result};

/// A reduced quotient of polynomials.
///
/// Canonical form: numerator and denominator are coprime, their combined
/// coefficients are integers with no common factor, and the trailing
/// (lowest-order) coefficient of the denominator is positive. Two values
/// are mathematically equal iff they are structurally equal.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
}

/// Result of evaluating at a point where the function may have a pole.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Limit {
    Value(RationalFunction),
    Divergent,
}

impl Limit {
    pub fn value(&self) -> Option<&RationalFunction> {
        match self {
            Limit::Value(v) => Some(v),
            Limit::Divergent => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, Limit::Divergent)
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::Value(v) => write!(f, "{v}"),
            Limit::Divergent => f.write_str("Divergent"),
        }
    }
}

impl RationalFunction {
    pub fn zero() -> RationalFunction {
        RationalFunction {
            num: Polynomial::zero(),
            den: Polynomial::one(),
        }
    }

    pub fn one() -> RationalFunction {
        RationalFunction::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> RationalFunction {
        RationalFunction::from_poly(Polynomial::constant(c))
    }

    pub fn from_int(n: i64) -> RationalFunction {
        RationalFunction::from_poly(Polynomial::from_int(n))
    }

    pub fn var(s: Symbol) -> RationalFunction {
        RationalFunction::from_poly(Polynomial::var(s))
    }

    pub fn from_poly(p: Polynomial) -> RationalFunction {
        RationalFunction::canonical(p, Polynomial::one())
    }

    pub fn new(num: Polynomial, den: Polynomial) -> Result<RationalFunction> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let g = gcd(&num, &den);
        if g.is_one() {
            return Ok(RationalFunction::canonical(num, den));
        }
        let n = num.div_exact(&g).expect("gcd divides numerator");
        let d = den.div_exact(&g).expect("gcd divides denominator");
        Ok(RationalFunction::canonical(n, d))
    }

    /// Scales an already coprime pair into canonical form.
    fn canonical(num: Polynomial, den: Polynomial) -> RationalFunction {
        if num.is_zero() {
            return RationalFunction::zero();
        }
        if let Some(d) = den.constant_value() {
            return RationalFunction::canonical_poly(num.scale(&d.recip()));
        }
        let l = Rational::from_integer(lcm_of_denominators(
            num.terms().map(|t| t.1).chain(den.terms().map(|t| t.1)),
        ));
        let (num, den) = (num.scale(&l), den.scale(&l));
        let mut g = num_bigint::BigInt::zero();
        for (_, c) in num.terms().chain(den.terms()) {
            g = num_integer::Integer::gcd(&g, c.numer());
        }
        let mut k = Rational::from_integer(g).recip();
        if den.trailing().is_some_and(|(_, c)| c.is_negative()) {
            k = -k;
        }
        RationalFunction {
            num: num.scale(&k),
            den: den.scale(&k),
        }
    }

    /// Canonical form of `p / 1`: scaled to integer coefficients over a
    /// positive integer denominator.
    fn canonical_poly(p: Polynomial) -> RationalFunction {
        let (k, prim) = p.primitive_integer();
        let d = Polynomial::constant(Rational::from_integer(k.denom().clone()));
        RationalFunction {
            num: prim.scale(&Rational::from_integer(k.numer().clone())),
            den: d,
        }
    }

    pub fn numer(&self) -> &Polynomial {
        &self.num
    }

    pub fn denom(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_constant()
    }

    pub fn as_polynomial(&self) -> Option<Polynomial> {
        let d = self.den.constant_value()?;
        Some(self.num.scale(&d.recip()))
    }

    pub fn constant_value(&self) -> Option<Rational> {
        Some(self.num.constant_value()? / self.den.constant_value()?)
    }

    pub fn is_constant(&self) -> bool {
        self.num.is_constant() && self.den.is_constant()
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut s = self.num.symbols();
        s.extend(self.den.symbols());
        s
    }

    pub fn contains(&self, s: Symbol) -> bool {
        self.num.contains(s) || self.den.contains(s)
    }

    pub fn scale(&self, c: &Rational) -> RationalFunction {
        if c.is_zero() {
            return RationalFunction::zero();
        }
        RationalFunction::canonical(self.num.scale(c), self.den.clone())
    }

    pub fn recip(&self) -> Result<RationalFunction> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(RationalFunction::canonical(self.den.clone(), self.num.clone()))
    }

    pub fn checked_div(&self, rhs: &RationalFunction) -> Result<RationalFunction> {
        Ok(self * &rhs.recip()?)
    }

    pub fn pow(&self, k: i32) -> Result<RationalFunction> {
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let e = k.unsigned_abs();
        Ok(RationalFunction::canonical(base.num.pow(e), base.den.pow(e)))
    }

    /// Simultaneous substitution of symbols by rational functions.
    pub fn substitute(&self, map: &HashMap<Symbol, RationalFunction>) -> Result<RationalFunction> {
        let relevant: Vec<(Symbol, &RationalFunction)> = map
            .iter()
            .filter(|(s, _)| self.contains(**s))
            .map(|(s, f)| (*s, f))
            .collect();
        if relevant.is_empty() {
            return Ok(self.clone());
        }
        // Clear denominators: a symbol of degree D with image n/d turns
        // X^e into n^e d^(D-e), after multiplying through by d^D.
        let mut degree = HashMap::new();
        for (s, _) in &relevant {
            degree.insert(*s, self.num.degree_in(*s).max(self.den.degree_in(*s)));
        }
        let lift = |p: &Polynomial| -> Polynomial {
            let mut out = Polynomial::zero();
            for (m, c) in p.terms() {
                let mut acc = Polynomial::constant(c.clone());
                let mut kept = super::Monomial::one();
                for (s, e) in m.iter() {
                    match relevant.iter().find(|(t, _)| *t == s) {
                        Some((_, f)) => acc = &acc * &f.num.pow(e),
                        None => kept = kept.mul(&super::Monomial::power(s, e)),
                    }
                }
                for (s, f) in &relevant {
                    let e = m.exponent(*s);
                    if !f.den.is_one() {
                        acc = &acc * &f.den.pow(degree[s] - e);
                    }
                }
                out = out + acc.mul_monomial(&kept);
            }
            out
        };
        let n = lift(&self.num);
        let d = lift(&self.den);
        if d.is_zero() {
            return Err(Error::SubstitutionPole);
        }
        RationalFunction::new(n, d)
    }

    pub fn substitute_poly(&self, map: &HashMap<Symbol, Polynomial>) -> Result<RationalFunction> {
        let n = self.num.substitute(map);
        let d = self.den.substitute(map);
        if d.is_zero() {
            return Err(Error::SubstitutionPole);
        }
        RationalFunction::new(n, d)
    }

    /// k-th partial derivative in `s`.
    pub fn derivative(&self, s: Symbol, k: u32) -> RationalFunction {
        let mut f = self.clone();
        for _ in 0..k {
            if f.is_zero() {
                break;
            }
            let n = &(&f.num.derivative(s) * &f.den) - &(&f.num * &f.den.derivative(s));
            let d = &f.den * &f.den;
            f = RationalFunction::new(n, d).expect("squared denominator is nonzero");
        }
        f
    }

    /// Sequentially substitutes `s = v` in the given order, cancelling
    /// `(s - v)` factors on 0/0 and reporting `Divergent` on a genuine pole.
    pub fn eval_at_point(&self, point: &[(Symbol, Rational)]) -> Limit {
        let mut f = self.clone();
        for (s, v) in point {
            if !f.contains(*s) {
                continue;
            }
            let lin = &Polynomial::var(*s) - &Polynomial::constant(v.clone());
            let (mut n, mut d) = (f.num.clone(), f.den.clone());
            loop {
                let nv = n.eval_symbol(*s, v);
                let dv = d.eval_symbol(*s, v);
                if !dv.is_zero() {
                    f = RationalFunction::new(nv, dv).expect("nonzero denominator");
                    break;
                }
                if !nv.is_zero() {
                    return Limit::Divergent;
                }
                n = n.div_exact(&lin).expect("root implies linear factor");
                d = d.div_exact(&lin).expect("root implies linear factor");
            }
        }
        Limit::Value(f)
    }

    pub fn eval_at_one(&self, vars: &[Symbol]) -> Limit {
        let pts: Vec<(Symbol, Rational)> = vars.iter().map(|s| (*s, Rational::one())).collect();
        self.eval_at_point(&pts)
    }

    /// Value at a full point, `None` on a pole or an unbound symbol.
    pub fn eval(&self, point: &HashMap<Symbol, Rational>) -> Option<Rational> {
        let d = self.den.eval(point)?;
        if d.is_zero() {
            return None;
        }
        Some(self.num.eval(point)? / d)
    }
}

impl Default for RationalFunction {
    fn default() -> Self {
        RationalFunction::zero()
    }
}

impl From<Polynomial> for RationalFunction {
    fn from(p: Polynomial) -> Self {
        RationalFunction::from_poly(p)
    }
}

impl From<Rational> for RationalFunction {
    fn from(c: Rational) -> Self {
        RationalFunction::constant(c)
    }
}

impl From<Symbol> for RationalFunction {
    fn from(s: Symbol) -> Self {
        RationalFunction::var(s)
    }
}

fn constant_pair(f: &RationalFunction) -> Option<Rational> {
    if f.num.is_constant() && f.den.is_constant() {
        f.constant_value()
    } else {
        None
    }
}

impl Add<&RationalFunction> for &RationalFunction {
    type Output = RationalFunction;
    fn add(self, rhs: &RationalFunction) -> RationalFunction {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (constant_pair(self), constant_pair(rhs)) {
            return RationalFunction::constant(a + b);
        }
        if self.den == rhs.den {
            let n = &self.num + &rhs.num;
            return RationalFunction::new(n, self.den.clone()).expect("nonzero denominator");
        }
        if self.den.is_constant() && rhs.den.is_constant() {
            let p = self.as_polynomial().unwrap() + rhs.as_polynomial().unwrap();
            return RationalFunction::from_poly(p);
        }
        let g = gcd(&self.den, &rhs.den);
        let a = self.den.div_exact(&g).expect("gcd divides");
        let b = rhs.den.div_exact(&g).expect("gcd divides");
        let n = &(&self.num * &b) + &(&rhs.num * &a);
        let d = &self.den * &b;
        RationalFunction::new(n, d).expect("nonzero denominator")
    }
}

impl Neg for &RationalFunction {
    type Output = RationalFunction;
    fn neg(self) -> RationalFunction {
        RationalFunction {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl Neg for RationalFunction {
    type Output = RationalFunction;
    fn neg(self) -> RationalFunction {
        -&self
    }
}

impl Sub<&RationalFunction> for &RationalFunction {
    type Output = RationalFunction;
    fn sub(self, rhs: &RationalFunction) -> RationalFunction {
        self + &(-rhs)
    }
}

impl Mul<&RationalFunction> for &RationalFunction {
    type Output = RationalFunction;
    fn mul(self, rhs: &RationalFunction) -> RationalFunction {
        if self.is_zero() || rhs.is_zero() {
            return RationalFunction::zero();
        }
        if let (Some(a), Some(b)) = (constant_pair(self), constant_pair(rhs)) {
            return RationalFunction::constant(a * b);
        }
        if let Some(a) = constant_pair(self) {
            return rhs.scale(&a);
        }
        if let Some(b) = constant_pair(rhs) {
            return self.scale(&b);
        }
        if self.den.is_constant() && rhs.den.is_constant() {
            let p = self.as_polynomial().unwrap() * rhs.as_polynomial().unwrap();
            return RationalFunction::from_poly(p);
        }
        let g1 = gcd(&self.num, &rhs.den);
        let g2 = gcd(&rhs.num, &self.den);
        let n1 = self.num.div_exact(&g1).expect("gcd divides");
        let d2 = rhs.den.div_exact(&g1).expect("gcd divides");
        let n2 = rhs.num.div_exact(&g2).expect("gcd divides");
        let d1 = self.den.div_exact(&g2).expect("gcd divides");
        RationalFunction::canonical(&n1 * &n2, &d1 * &d2)
    }
}

/// Panics on division by zero; use [`RationalFunction::checked_div`] when
/// the divisor may vanish.
impl Div<&RationalFunction> for &RationalFunction {
    type Output = RationalFunction;
    fn div(self, rhs: &RationalFunction) -> RationalFunction {
        self.checked_div(rhs).expect("division by zero")
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr<RationalFunction> for RationalFunction {
            type Output = RationalFunction;
            fn $f(self, rhs: RationalFunction) -> RationalFunction {
                (&self).$f(&rhs)
            }
        }
        impl $tr<&RationalFunction> for RationalFunction {
            type Output = RationalFunction;
            fn $f(self, rhs: &RationalFunction) -> RationalFunction {
                (&self).$f(rhs)
            }
        }
        impl $tr<RationalFunction> for &RationalFunction {
            type Output = RationalFunction;
            fn $f(self, rhs: RationalFunction) -> RationalFunction {
                self.$f(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

fn needs_parens_num(p: &Polynomial) -> bool {
    p.num_terms() > 1
}

fn needs_parens_den(p: &Polynomial) -> bool {
    match p.num_terms() {
        1 => {
            let (m, c) = p.leading().unwrap();
            !(m.is_one() && c.is_integer() && c.is_positive() || c.is_one())
        }
        _ => true,
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = self.as_polynomial() {
            return write!(f, "{p}");
        }
        if needs_parens_num(&self.num) {
            write!(f, "({})", self.num)?;
        } else {
            write!(f, "{}", self.num)?;
        }
        if needs_parens_den(&self.den) {
            write!(f, "/({})", self.den)
        } else {
            write!(f, "/{}", self.den)
        }
    }
}

impl fmt::Debug for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for RationalFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Serialize for Limit {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::rational::{int, rat};

    fn sym(s: &str) -> RationalFunction {
        RationalFunction::var(Symbol::new(s))
    }
    fn k(n: i64) -> RationalFunction {
        RationalFunction::from_int(n)
    }

    fn geo() -> RationalFunction {
        sym("C") / (k(2) - sym("C"))
    }

    #[test]
    fn canonical_rendering() {
        assert_eq!(geo().to_string(), "C/(2 - C)");
        assert_eq!((k(1) / k(2) + sym("X") / k(2)).to_string(), "1/2 + 1/2*X");
        assert_eq!((k(1) / sym("C")).to_string(), "1/C");
    }

    #[test]
    fn field_examples() {
        assert_eq!(&geo() + &geo(), k(2) * sym("C") / (k(2) - sym("C")));
        let f = k(1) / (k(1) - sym("C"));
        assert!((f * (k(1) - sym("C"))).is_one());
        assert_eq!(geo().checked_div(&RationalFunction::zero()), Err(Error::DivisionByZero));
    }

    #[test]
    fn cowboys_numerator_stays_reduced() {
        let (a, b, c, d, x) = (sym("a"), sym("b"), sym("C"), sym("D"), sym("X"));
        let f = &a * &c * &x / (k(1) - (k(1) - &a) * (k(1) - &b) * &c * &d);
        assert_eq!(f.numer().num_terms(), 1);
        assert_eq!(f.denom().num_terms(), 5);
    }

    #[test]
    fn substitution() {
        let x = Symbol::new("X");
        let f = k(1) / (k(2) - sym("X"));
        let mut m = HashMap::new();
        m.insert(x, sym("X") * sym("X"));
        assert_eq!(f.substitute(&m).unwrap(), k(1) / (k(2) - sym("X") * sym("X")));
        let mut m = HashMap::new();
        m.insert(Symbol::new("C"), k(1));
        assert!(geo().substitute(&m).unwrap().is_one());
        let mut m = HashMap::new();
        m.insert(Symbol::new("C"), k(2));
        assert_eq!(geo().substitute(&m), Err(Error::SubstitutionPole));
    }

    #[test]
    fn derivative_of_geometric() {
        let c = Symbol::new("C");
        let d = geo().derivative(c, 1);
        assert_eq!(d, k(2) / ((k(2) - sym("C")) * (k(2) - sym("C"))));
        assert_eq!(geo().derivative(c, 0), geo());
        // finite-difference check at C = 1/3
        let at = |f: &RationalFunction, v: f64| -> f64 {
            let n = f.numer().to_univariate(c);
            let dd = f.denom().to_univariate(c);
            let ev = |cs: &[Polynomial]| {
                cs.iter().enumerate().fold(0.0, |acc, (i, p)| {
                    let q = p.constant_value().unwrap();
                    acc + (q.numer().to_string().parse::<f64>().unwrap()
                        / q.denom().to_string().parse::<f64>().unwrap())
                        * v.powi(i as i32)
                })
            };
            ev(&n) / ev(&dd)
        };
        let h = 1e-6;
        let fd = (at(&geo(), 1.0 / 3.0 + h) - at(&geo(), 1.0 / 3.0 - h)) / (2.0 * h);
        let exact = at(&d, 1.0 / 3.0);
        assert!(((fd - exact) / exact).abs() < 1e-4);
    }

    #[test]
    fn limits_at_one() {
        let c = Symbol::new("C");
        assert!(geo().eval_at_one(&[c]).value().unwrap().is_one());
        let f = sym("C") / (k(1) - sym("C") * sym("C"));
        assert_eq!(f.eval_at_one(&[c]), Limit::Divergent);
        // (1 - C^2)/(1 - C) reduces to 1 + C before evaluation
        let g = (k(1) - sym("C") * sym("C")).checked_div(&(k(1) - sym("C"))).unwrap();
        assert_eq!(g.eval_at_one(&[c]), Limit::Value(k(2)));
        let h = k(1) / (sym("a") + sym("b"));
        let p = [(Symbol::new("a"), int(0)), (Symbol::new("b"), rat(0, 1))];
        assert_eq!(h.eval_at_point(&p), Limit::Divergent);
    }
}
