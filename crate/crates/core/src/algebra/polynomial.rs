use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::rational::{lcm_of_denominators, render_rational};
use super::{Monomial, Rational, Symbol};

/// Sparse multivariate polynomial with exact rational coefficients.
///
/// Terms are kept in a map ordered by the graded lexicographic monomial
/// order; zero coefficients are never stored, so structural equality is
/// mathematical equality.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero() -> Polynomial {
        Polynomial::default()
    }

    pub fn one() -> Polynomial {
        Polynomial::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Polynomial {
        Polynomial::term(c, Monomial::one())
    }

    pub fn from_int(n: i64) -> Polynomial {
        Polynomial::constant(Rational::from_integer(BigInt::from(n)))
    }

    pub fn var(s: Symbol) -> Polynomial {
        Polynomial::term(Rational::one(), Monomial::var(s))
    }

    pub fn term(c: Rational, m: Monomial) -> Polynomial {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Polynomial { terms }
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, Rational)>>(it: I) -> Polynomial {
        let mut p = Polynomial::zero();
        for (m, c) in it {
            p.add_term(m, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .next()
                .is_some_and(|(m, c)| m.is_one() && c.is_one())
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    /// The value of a constant polynomial.
    pub fn constant_value(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self
                .terms
                .iter()
                .next()
                .filter(|(m, _)| m.is_one())
                .map(|(_, c)| c.clone()),
            _ => None,
        }
    }

    pub fn constant_term(&self) -> Rational {
        self.terms
            .get(&Monomial::one())
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending monomial order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn leading(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next_back()
    }

    pub fn trailing(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        self.terms.keys().flat_map(|m| m.symbols()).collect()
    }

    pub fn contains(&self, s: Symbol) -> bool {
        self.terms.keys().any(|m| m.exponent(s) > 0)
    }

    pub fn degree_in(&self, s: Symbol) -> u32 {
        self.terms.keys().map(|m| m.exponent(s)).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, x)| (m.clone(), x * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(n, c)| (n.mul(m), c.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut result = Polynomial::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn derivative(&self, s: Symbol) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let (e, rest) = m.split_off(s);
            if e > 0 {
                let m2 = rest.mul(&Monomial::power(s, e - 1));
                out.add_term(m2, c * Rational::from_integer(BigInt::from(e)));
            }
        }
        out
    }

    /// Coefficients of `self` viewed as a univariate polynomial in `s`,
    /// indexed by degree.
    pub fn to_univariate(&self, s: Symbol) -> Vec<Polynomial> {
        let mut out = vec![Polynomial::zero(); self.degree_in(s) as usize + 1];
        for (m, c) in &self.terms {
            let (e, rest) = m.split_off(s);
            out[e as usize].add_term(rest, c.clone());
        }
        out
    }

    pub fn from_univariate(s: Symbol, coeffs: &[Polynomial]) -> Polynomial {
        let mut out = Polynomial::zero();
        for (k, c) in coeffs.iter().enumerate() {
            let xk = Monomial::power(s, k as u32);
            for (m, x) in &c.terms {
                out.add_term(m.mul(&xk), x.clone());
            }
        }
        out
    }

    /// Simultaneous substitution of symbols by polynomials.
    pub fn substitute(&self, map: &HashMap<Symbol, Polynomial>) -> Polynomial {
        let mut powers: HashMap<(Symbol, u32), Polynomial> = HashMap::new();
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut kept = Monomial::one();
            let mut acc = Polynomial::constant(c.clone());
            for (s, e) in m.iter() {
                match map.get(&s) {
                    Some(p) => {
                        let pe = powers.entry((s, e)).or_insert_with(|| p.pow(e));
                        acc = &acc * &*pe;
                    }
                    None => kept = kept.mul(&Monomial::power(s, e)),
                }
            }
            out = out + acc.mul_monomial(&kept);
        }
        out
    }

    pub fn eval_symbol(&self, s: Symbol, v: &Rational) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let (e, rest) = m.split_off(s);
            let factor = if e == 0 {
                Rational::one()
            } else {
                num_traits::pow::pow(v.clone(), e as usize)
            };
            out.add_term(rest, c * factor);
        }
        out
    }

    /// Evaluates at a full rational point; `None` if a symbol is unbound.
    pub fn eval(&self, point: &HashMap<Symbol, Rational>) -> Option<Rational> {
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (s, e) in m.iter() {
                t *= num_traits::pow::pow(point.get(&s)?.clone(), e as usize);
            }
            total += t;
        }
        Some(total)
    }

    /// Exact quotient `self / d`, or `None` if `d` does not divide `self`.
    pub fn div_exact(&self, d: &Polynomial) -> Option<Polynomial> {
        assert!(!d.is_zero(), "division by the zero polynomial");
        if let Some(c) = d.constant_value() {
            return Some(self.scale(&c.recip()));
        }
        let (dm, dc) = d.leading().map(|(m, c)| (m.clone(), c.clone()))?;
        let mut r = self.clone();
        let mut q = Polynomial::zero();
        while let Some((rm, rc)) = r.leading().map(|(m, c)| (m.clone(), c.clone())) {
            let t = rm.div(&dm)?;
            let c = rc / &dc;
            r = &r - &d.mul_monomial(&t).scale(&c);
            q.add_term(t, c);
        }
        Some(q)
    }

    /// Integer-coefficient associate with coprime coefficients, together
    /// with the factor `k` such that `self = k * result`.
    pub fn primitive_integer(&self) -> (Rational, Polynomial) {
        if self.is_zero() {
            return (Rational::one(), Polynomial::zero());
        }
        let l = lcm_of_denominators(self.terms.values());
        let mut g = BigInt::zero();
        for c in self.terms.values() {
            let n = c.numer() * (&l / c.denom());
            g = g.gcd(&n);
        }
        let k = Rational::new(g, l);
        (k.clone(), self.scale(&k.recip()))
    }

    /// Primitive integer associate with a positive leading coefficient.
    pub fn normalized(&self) -> Polynomial {
        let (_, p) = self.primitive_integer();
        match p.leading() {
            Some((_, c)) if c.is_negative() => -p,
            _ => p,
        }
    }
}

/// Greatest common divisor, primitive with integer coefficients and a
/// positive leading coefficient. `gcd(0, 0) = 0`.
pub fn gcd(a: &Polynomial, b: &Polynomial) -> Polynomial {
    if a.is_zero() {
        return b.normalized();
    }
    if b.is_zero() {
        return a.normalized();
    }
    if a.is_constant() || b.is_constant() {
        return Polynomial::one();
    }
    if a.num_terms() == 1 || b.num_terms() == 1 {
        return monomial_gcd(a, b);
    }
    // a symbol missing from one side goes first (it only costs a content);
    // otherwise recurse on the lowest degree, which keeps the PRS short
    let v = match a
        .symbols()
        .union(&b.symbols())
        .map(|s| {
            let (da, db) = (a.degree_in(*s), b.degree_in(*s));
            ((da.min(db) > 0, da.min(db), da.max(db)), *s)
        })
        .min()
    {
        Some((_, v)) => v,
        None => return Polynomial::one(),
    };
    let (da, db) = (a.degree_in(v), b.degree_in(v));
    if da == 0 {
        return gcd(a, &content(&b.to_univariate(v)));
    }
    if db == 0 {
        return gcd(&content(&a.to_univariate(v)), b);
    }
    let ua = a.to_univariate(v);
    let ub = b.to_univariate(v);
    let (ca, cb) = (content(&ua), content(&ub));
    let pa = divide_coeffs(&ua, &ca);
    let pb = divide_coeffs(&ub, &cb);
    let c = gcd(&ca, &cb);
    if coprime_by_specialization(&pa, &pb, v) {
        return c.normalized();
    }
    let g = primitive_prs(pa, pb);
    (&c * &Polynomial::from_univariate(v, &g)).normalized()
}

fn monomial_gcd(a: &Polynomial, b: &Polynomial) -> Polynomial {
    let mut g: Option<Monomial> = None;
    for m in a.terms.keys().chain(b.terms.keys()) {
        g = Some(match g {
            None => m.clone(),
            Some(g) => g.gcd(m),
        });
    }
    Polynomial::term(Rational::one(), g.unwrap_or_default())
}

fn content(coeffs: &[Polynomial]) -> Polynomial {
    let mut g = Polynomial::zero();
    for c in coeffs {
        if c.is_zero() {
            continue;
        }
        g = gcd(&g, c);
        if g.is_one() {
            break;
        }
    }
    g
}

fn divide_coeffs(coeffs: &[Polynomial], d: &Polynomial) -> Vec<Polynomial> {
    coeffs
        .iter()
        .map(|c| c.div_exact(d).expect("content divides every coefficient"))
        .collect()
}

fn trim(p: &mut Vec<Polynomial>) {
    while p.len() > 1 && p.last().is_some_and(Polynomial::is_zero) {
        p.pop();
    }
}

fn is_zero_uni(p: &[Polynomial]) -> bool {
    p.iter().all(Polynomial::is_zero)
}

/// Pseudo-remainder of univariate polynomials with polynomial coefficients.
fn prem(f: &[Polynomial], g: &[Polynomial]) -> Vec<Polynomial> {
    let n = g.len() - 1;
    let lc = &g[n];
    let mut r = f.to_vec();
    trim(&mut r);
    while r.len() > n && !is_zero_uni(&r) {
        let d = r.len() - 1;
        let lr = r[d].clone();
        for c in r.iter_mut() {
            *c = &*c * lc;
        }
        for (k, gk) in g.iter().enumerate() {
            let idx = d - n + k;
            r[idx] = &r[idx] - &(&lr * gk);
        }
        r.pop();
        trim(&mut r);
    }
    r
}

/// Sound test that primitive `a` and `b` share no factor involving `v`:
/// at a point where both leading coefficients survive, a common factor
/// keeps its degree in `v`, so a constant univariate gcd there rules it
/// out. A `false` answer is inconclusive.
fn coprime_by_specialization(a: &[Polynomial], b: &[Polynomial], v: Symbol) -> bool {
    let others: BTreeSet<Symbol> = a
        .iter()
        .chain(b)
        .flat_map(|c| c.symbols())
        .filter(|s| *s != v)
        .collect();
    if others.is_empty() {
        return false;
    }
    for shift in [2i64, 5, 11] {
        let point: HashMap<Symbol, Rational> = others
            .iter()
            .enumerate()
            .map(|(k, s)| (*s, Rational::from_integer((shift + 3 * k as i64).into())))
            .collect();
        let at = |p: &[Polynomial]| -> Option<Polynomial> {
            let vals: Option<Vec<Rational>> = p.iter().map(|c| c.eval(&point)).collect();
            let vals = vals?;
            if vals.last()?.is_zero() {
                return None;
            }
            let coeffs: Vec<Polynomial> = vals.into_iter().map(Polynomial::constant).collect();
            Some(Polynomial::from_univariate(v, &coeffs))
        };
        let (Some(ua), Some(ub)) = (at(a), at(b)) else {
            continue;
        };
        return gcd(&ua, &ub).is_constant();
    }
    false
}

/// Divides out the rational content shared by all coefficients, which the
/// polynomial content misses when it is a constant.
fn strip_scalar(p: &mut [Polynomial]) {
    let l = lcm_of_denominators(p.iter().flat_map(|c| c.terms.values()));
    let mut g = BigInt::zero();
    for c in p.iter().flat_map(|c| c.terms.values()) {
        g = g.gcd(&(c.numer() * (&l / c.denom())));
    }
    if g.is_zero() {
        return;
    }
    let k = Rational::new(l, g);
    for c in p.iter_mut() {
        *c = c.scale(&k);
    }
}

/// Primitive polynomial remainder sequence. Inputs must be primitive.
fn primitive_prs(a: Vec<Polynomial>, b: Vec<Polynomial>) -> Vec<Polynomial> {
    let (mut f, mut g) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    trim(&mut f);
    trim(&mut g);
    loop {
        if g.len() == 1 {
            return vec![Polynomial::one()];
        }
        let r = prem(&f, &g);
        if is_zero_uni(&r) {
            return g;
        }
        if r.len() == 1 {
            return vec![Polynomial::one()];
        }
        let c = content(&r);
        let mut pr = divide_coeffs(&r, &c);
        trim(&mut pr);
        strip_scalar(&mut pr);
        f = g;
        g = pr;
    }
}

impl Add<&Polynomial> for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub<&Polynomial> for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Mul<&Polynomial> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = Polynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr<Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: Polynomial) -> Polynomial {
                (&self).$f(&rhs)
            }
        }
        impl $tr<&Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: &Polynomial) -> Polynomial {
                (&self).$f(rhs)
            }
        }
        impl $tr<Polynomial> for &Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: Polynomial) -> Polynomial {
                self.$f(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl From<Symbol> for Polynomial {
    fn from(s: Symbol) -> Polynomial {
        Polynomial::var(s)
    }
}

impl From<Rational> for Polynomial {
    fn from(c: Rational) -> Polynomial {
        Polynomial::constant(c)
    }
}

/// Renders terms in ascending monomial order, e.g. `2 - C` or
/// `1/2*C + C^2*X`. The output parses back to the same polynomial.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            match (k, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let a = c.abs();
            if m.is_one() {
                f.write_str(&render_rational(&a))?;
            } else if a.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", render_rational(&a))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::rational::{int, rat};

    fn x() -> Polynomial {
        Polynomial::var(Symbol::new("X"))
    }
    fn c() -> Polynomial {
        Polynomial::var(Symbol::new("C"))
    }
    fn k(n: i64) -> Polynomial {
        Polynomial::from_int(n)
    }

    #[test]
    fn difference_of_squares() {
        assert_eq!((k(1) + x()) * (k(1) - x()), k(1) - x().pow(2));
        assert!((x() * Polynomial::zero()).is_zero());
    }

    #[test]
    fn hand_multiplication() {
        // (2 - C)(C/2 + C^2/4 + C^3/8) = C - C^4/8
        let lhs = k(2) - c();
        let rhs = c().scale(&rat(1, 2)) + c().pow(2).scale(&rat(1, 4)) + c().pow(3).scale(&rat(1, 8));
        let expected = c() - c().pow(4).scale(&rat(1, 8));
        assert_eq!(&lhs * &rhs, expected);
        // independent route: term-by-term convolution of dense coefficient lists
        let a = [int(2), int(-1)];
        let b = [int(0), rat(1, 2), rat(1, 4), rat(1, 8)];
        let mut conv = vec![int(0); 5];
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                conv[i + j] += ai * bj;
            }
        }
        assert_eq!(conv, vec![int(0), int(1), int(0), int(0), rat(-1, 8)]);
    }

    #[test]
    fn gcd_examples() {
        assert_eq!(gcd(&(x().pow(2) - k(1)), &(x() - k(1))), x() - k(1));
        let p = k(3) * x() - k(6);
        assert_eq!(gcd(&p, &Polynomial::zero()), x() - k(2));
        let a = (k(1) - c()) * (k(2) - c());
        let b = (k(1) - c()) * c();
        assert_eq!(gcd(&a, &b), c() - k(1));
    }

    #[test]
    fn gcd_multivariate() {
        let a_ = Polynomial::var(Symbol::new("a"));
        let f = &(k(1) - &a_ * &c()) * &(x() + &a_);
        let g = &(k(1) - &a_ * &c()) * &(x() - c());
        assert_eq!(gcd(&f, &g), (&a_ * &c() - k(1)).normalized());
    }

    #[test]
    fn exact_division() {
        let p = (x() - k(1)) * (x() + c());
        assert_eq!(p.div_exact(&(x() + c())), Some(x() - k(1)));
        assert_eq!(p.div_exact(&(x() + k(3))), None);
    }

    #[test]
    fn rendering() {
        assert_eq!((k(2) - c()).to_string(), "2 - C");
        let p = c().scale(&rat(1, 2)) - x().pow(2) * c();
        assert_eq!(p.to_string(), "1/2*C - C*X^2");
    }
}
