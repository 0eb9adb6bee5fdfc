use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_traits::{One, Signed};

use super::rational::{render_rational, sqrt_exact};
use super::{Monomial, Polynomial, Rational, RationalFunction, Symbol};
use crate::error::{Error, Result};
use crate::fps::{Bounds, StateVector, TruncatedFPS};

/// Expression tree for closed forms that may leave the field of rational
/// functions through square roots.
#[derive(Clone, PartialEq, Eq)]
pub enum ClosedFormExpr {
    Leaf(RationalFunction),
    Sym(Symbol),
    Neg(Box<ClosedFormExpr>),
    Add(Box<ClosedFormExpr>, Box<ClosedFormExpr>),
    Sub(Box<ClosedFormExpr>, Box<ClosedFormExpr>),
    Mul(Box<ClosedFormExpr>, Box<ClosedFormExpr>),
    Div(Box<ClosedFormExpr>, Box<ClosedFormExpr>),
    Pow(Box<ClosedFormExpr>, i32),
    Sqrt(Box<ClosedFormExpr>),
}

use ClosedFormExpr as E;

impl ClosedFormExpr {
    pub fn constant(c: Rational) -> ClosedFormExpr {
        E::Leaf(RationalFunction::constant(c))
    }

    pub fn int(n: i64) -> ClosedFormExpr {
        E::Leaf(RationalFunction::from_int(n))
    }

    pub fn sym(s: &str) -> ClosedFormExpr {
        E::Sym(Symbol::new(s))
    }

    pub fn pow(self, k: i32) -> ClosedFormExpr {
        E::Pow(Box::new(self), k)
    }

    pub fn sqrt(self) -> ClosedFormExpr {
        E::Sqrt(Box::new(self))
    }

    pub fn has_sqrt(&self) -> bool {
        match self {
            E::Leaf(_) | E::Sym(_) => false,
            E::Sqrt(_) => true,
            E::Neg(a) | E::Pow(a, _) => a.has_sqrt(),
            E::Add(a, b) | E::Sub(a, b) | E::Mul(a, b) | E::Div(a, b) => a.has_sqrt() || b.has_sqrt(),
        }
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            E::Leaf(f) => out.extend(f.symbols()),
            E::Sym(s) => {
                out.insert(*s);
            }
            E::Neg(a) | E::Pow(a, _) | E::Sqrt(a) => a.collect_symbols(out),
            E::Add(a, b) | E::Sub(a, b) | E::Mul(a, b) | E::Div(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    /// Evaluates to a rational function; fails on square roots.
    pub fn to_rational(&self) -> Result<RationalFunction> {
        Ok(match self {
            E::Leaf(f) => f.clone(),
            E::Sym(s) => RationalFunction::var(*s),
            E::Neg(a) => -a.to_rational()?,
            E::Add(a, b) => a.to_rational()? + b.to_rational()?,
            E::Sub(a, b) => a.to_rational()? - b.to_rational()?,
            E::Mul(a, b) => a.to_rational()? * b.to_rational()?,
            E::Div(a, b) => a.to_rational()?.checked_div(&b.to_rational()?)?,
            E::Pow(a, k) => a.to_rational()?.pow(*k)?,
            E::Sqrt(_) => return Err(Error::NotRational(self.to_string())),
        })
    }

    /// Collapses every square-root-free subtree into a single leaf.
    pub fn fold(&self) -> Result<ClosedFormExpr> {
        if !self.has_sqrt() {
            return Ok(E::Leaf(self.to_rational()?));
        }
        let bx = |e: &ClosedFormExpr| -> Result<Box<ClosedFormExpr>> { Ok(Box::new(e.fold()?)) };
        Ok(match self {
            E::Neg(a) => E::Neg(bx(a)?),
            E::Add(a, b) => E::Add(bx(a)?, bx(b)?),
            E::Sub(a, b) => E::Sub(bx(a)?, bx(b)?),
            E::Mul(a, b) => E::Mul(bx(a)?, bx(b)?),
            E::Div(a, b) => E::Div(bx(a)?, bx(b)?),
            E::Pow(a, k) => E::Pow(bx(a)?, *k),
            E::Sqrt(a) => E::Sqrt(bx(a)?),
            E::Leaf(_) | E::Sym(_) => unreachable!("leaves have no square roots"),
        })
    }

    fn prec(&self) -> u8 {
        match self {
            E::Add(..) | E::Sub(..) => 1,
            E::Mul(..) | E::Div(..) => 2,
            E::Neg(_) => 3,
            E::Pow(..) => 4,
            E::Sym(_) | E::Sqrt(_) => 5,
            E::Leaf(f) => leaf_prec(f),
        }
    }
}

fn leaf_prec(f: &RationalFunction) -> u8 {
    match f.as_polynomial() {
        Some(p) if p.num_terms() > 1 => 1,
        Some(p) if p.num_terms() == 0 => 5,
        Some(p) => {
            let (m, c) = p.leading().unwrap();
            if c.is_negative() {
                1
            } else if (m.is_one() && c.is_integer()) || (c.is_one() && m.iter().count() == 1) {
                5
            } else {
                2
            }
        }
        None if f.numer().trailing().is_some_and(|(_, c)| c.is_negative()) && f.numer().num_terms() == 1 => 1,
        None => 2,
    }
}

impl From<RationalFunction> for ClosedFormExpr {
    fn from(f: RationalFunction) -> Self {
        E::Leaf(f)
    }
}

impl From<Symbol> for ClosedFormExpr {
    fn from(s: Symbol) -> Self {
        E::Sym(s)
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $v:ident) => {
        impl $tr for ClosedFormExpr {
            type Output = ClosedFormExpr;
            fn $f(self, rhs: ClosedFormExpr) -> ClosedFormExpr {
                E::$v(Box::new(self), Box::new(rhs))
            }
        }
    };
}
binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl Neg for ClosedFormExpr {
    type Output = ClosedFormExpr;
    fn neg(self) -> ClosedFormExpr {
        E::Neg(Box::new(self))
    }
}

fn wrap(f: &mut fmt::Formatter<'_>, e: &ClosedFormExpr, min: u8) -> fmt::Result {
    if e.prec() < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for ClosedFormExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            E::Leaf(r) => write!(f, "{r}"),
            E::Sym(s) => write!(f, "{s}"),
            E::Neg(a) => {
                f.write_str("-")?;
                wrap(f, a, 4)
            }
            E::Add(a, b) => {
                wrap(f, a, 1)?;
                f.write_str(" + ")?;
                wrap(f, b, 2)
            }
            E::Sub(a, b) => {
                wrap(f, a, 1)?;
                f.write_str(" - ")?;
                wrap(f, b, 2)
            }
            E::Mul(a, b) => {
                wrap(f, a, 2)?;
                f.write_str("*")?;
                wrap(f, b, 3)
            }
            E::Div(a, b) => {
                wrap(f, a, 2)?;
                f.write_str("/")?;
                wrap(f, b, 4)
            }
            E::Pow(a, k) => {
                wrap(f, a, 5)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            E::Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

impl fmt::Debug for ClosedFormExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Dense coefficient box used while expanding.
#[derive(Clone)]
struct Dense {
    max: Vec<u32>,
    strides: Vec<usize>,
    data: Vec<RationalFunction>,
}

impl Dense {
    fn zero(max: &[u32]) -> Dense {
        let mut strides = vec![1usize; max.len()];
        let mut size = 1usize;
        for k in (0..max.len()).rev() {
            strides[k] = size;
            size *= max[k] as usize + 1;
        }
        Dense {
            max: max.to_vec(),
            strides,
            data: vec![RationalFunction::zero(); size],
        }
    }

    fn exps(&self, mut idx: usize) -> Vec<u32> {
        let mut out = vec![0; self.max.len()];
        for k in 0..self.max.len() {
            out[k] = (idx / self.strides[k]) as u32;
            idx %= self.strides[k];
        }
        out
    }

    fn index(&self, e: &[u32]) -> Option<usize> {
        let mut idx = 0;
        for k in 0..e.len() {
            if e[k] > self.max[k] {
                return None;
            }
            idx += e[k] as usize * self.strides[k];
        }
        Some(idx)
    }

    fn from_poly(p: &Polynomial, vars: &[Symbol], max: &[u32]) -> Dense {
        let mut d = Dense::zero(max);
        let mut parts: BTreeMap<usize, Polynomial> = BTreeMap::new();
        for (m, c) in p.terms() {
            let mut rest = m.clone();
            let mut e = vec![0; vars.len()];
            for (k, v) in vars.iter().enumerate() {
                let (x, r) = rest.split_off(*v);
                e[k] = x;
                rest = r;
            }
            if let Some(i) = d.index(&e) {
                parts
                    .entry(i)
                    .or_default()
                    .add_term(rest, c.clone());
            }
        }
        for (i, p) in parts {
            d.data[i] = RationalFunction::from_poly(p);
        }
        d
    }

    fn add(&self, o: &Dense) -> Dense {
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&o.data) {
            if !b.is_zero() {
                *a = &*a + b;
            }
        }
        out
    }

    fn neg(&self) -> Dense {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a = -&*a;
        }
        out
    }

    fn mul(&self, o: &Dense) -> Dense {
        let mut out = Dense::zero(&self.max);
        let nz = |d: &Dense| -> Vec<(Vec<u32>, usize)> {
            d.data
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(j, _)| (d.exps(j), j))
                .collect()
        };
        let (left, right) = (nz(self), nz(o));
        for (ea, i) in &left {
            let a = &self.data[*i];
            for (eb, j) in &right {
                let mut k = 0;
                let mut inside = true;
                for d in 0..ea.len() {
                    let e = ea[d] + eb[d];
                    if e > self.max[d] {
                        inside = false;
                        break;
                    }
                    k += e as usize * self.strides[d];
                }
                if inside {
                    out.data[k] = &out.data[k] + &(a * &o.data[*j]);
                }
            }
        }
        out
    }

    /// `self / d` where `d` has an invertible constant term.
    fn div(&self, d: &Dense) -> Result<Dense> {
        let d0 = d.data[0].clone();
        if d0.is_zero() {
            return Err(Error::ExpansionPole);
        }
        let inv = d0.recip()?;
        let mut q = Dense::zero(&self.max);
        let dnz: Vec<(Vec<u32>, &RationalFunction)> = d
            .data
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, c)| !c.is_zero())
            .map(|(j, c)| (d.exps(j), c))
            .collect();
        // Row-major order visits every proper divisor of an exponent first.
        for i in 0..q.data.len() {
            let e = q.exps(i);
            let mut acc = self.data[i].clone();
            for (ed, c) in &dnz {
                if ed.iter().zip(&e).all(|(a, b)| a <= b) {
                    let r: Vec<u32> = e.iter().zip(ed).map(|(a, b)| a - b).collect();
                    let j = q.index(&r).unwrap();
                    if !q.data[j].is_zero() {
                        acc = &acc - &(*c * &q.data[j]);
                    }
                }
            }
            q.data[i] = &acc * &inv;
        }
        Ok(q)
    }

    fn sqrt(&self) -> Result<Dense> {
        let u0 = &self.data[0];
        let s0 = match u0.constant_value() {
            Some(c) if !c.is_positive() => return Err(Error::NegativeLeadingTerm),
            Some(c) => sqrt_exact(&c).ok_or_else(|| Error::IrrationalConstant(render_rational(&c)))?,
            None => return Err(Error::IrrationalConstant(u0.to_string())),
        };
        let s0 = RationalFunction::constant(s0);
        let inv2 = (&s0 + &s0).recip()?;
        let mut s = Dense::zero(&self.max);
        s.data[0] = s0;
        for i in 1..s.data.len() {
            let e = s.exps(i);
            let mut acc = self.data[i].clone();
            for j in 1..i {
                if s.data[j].is_zero() {
                    continue;
                }
                let ej = s.exps(j);
                if ej.iter().zip(&e).all(|(a, b)| a <= b) {
                    let r: Vec<u32> = e.iter().zip(&ej).map(|(a, b)| a - b).collect();
                    let k = s.index(&r).unwrap();
                    if k != 0 && !s.data[k].is_zero() {
                        acc = &acc - &(&s.data[j] * &s.data[k]);
                    }
                }
            }
            s.data[i] = &acc * &inv2;
        }
        Ok(s)
    }

    /// Drops the leading `shift` exponents, which must carry zero
    /// coefficients, and reframes to `target` bounds.
    fn unshift(&self, shift: &[u32], target: &[u32]) -> Result<Dense> {
        let mut out = Dense::zero(target);
        for (i, c) in self.data.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let e = self.exps(i);
            if e.iter().zip(shift).any(|(a, b)| a < b) {
                return Err(Error::ExpansionPole);
            }
            let r: Vec<u32> = e.iter().zip(shift).map(|(a, b)| a - b).collect();
            if let Some(k) = out.index(&r) {
                out.data[k] = c.clone();
            }
        }
        Ok(out)
    }
}

/// Exponent vector of `m` in the expanded variables, if `m` is free of
/// other symbols.
fn monomial_gcd_in(p: &Polynomial, vars: &[Symbol]) -> Vec<u32> {
    let mut g: Option<Vec<u32>> = None;
    for (m, _) in p.terms() {
        let e: Vec<u32> = vars.iter().map(|v| m.exponent(*v)).collect();
        g = Some(match g {
            None => e,
            Some(g) => g.iter().zip(&e).map(|(a, b)| *a.min(b)).collect(),
        });
    }
    g.unwrap_or_else(|| vec![0; vars.len()])
}

fn strip_monomial(p: &Polynomial, vars: &[Symbol], shift: &[u32]) -> Polynomial {
    let m = Monomial::from_pairs(vars.iter().copied().zip(shift.iter().copied()));
    p.div_exact(&Polynomial::term(Rational::one(), m)).expect("monomial gcd divides")
}

struct Expander<'a> {
    vars: &'a [Symbol],
}

impl Expander<'_> {
    fn widened(max: &[u32], shift: &[u32]) -> Vec<u32> {
        max.iter().zip(shift).map(|(a, b)| a + b).collect()
    }

    /// Expands `a * den / num`, where `num` may vanish at the origin by a
    /// monomial factor.
    fn expand_quotient(
        &self,
        a: Option<&ClosedFormExpr>,
        num: &Polynomial,
        den: &Polynomial,
        max: &[u32],
    ) -> Result<Dense> {
        if num.is_zero() {
            return Err(Error::ExpansionPole);
        }
        let shift = monomial_gcd_in(num, self.vars);
        let num = strip_monomial(num, self.vars, &shift);
        let wide = Expander::widened(max, &shift);
        let top = match a {
            Some(a) => self.expand(a, &wide)?.mul(&Dense::from_poly(den, self.vars, &wide)),
            None => Dense::from_poly(den, self.vars, &wide),
        };
        let q = top.div(&Dense::from_poly(&num, self.vars, &wide))?;
        if shift.iter().all(|s| *s == 0) {
            Ok(q)
        } else {
            q.unshift(&shift, max)
        }
    }

    fn expand(&self, e: &ClosedFormExpr, max: &[u32]) -> Result<Dense> {
        match e {
            E::Leaf(f) => {
                if f.is_polynomial() {
                    let p = f.as_polynomial().unwrap();
                    return Ok(Dense::from_poly(&p, self.vars, max));
                }
                let d = Dense::from_poly(f.denom(), self.vars, max);
                if !d.data[0].is_zero() {
                    return Dense::from_poly(f.numer(), self.vars, max).div(&d);
                }
                // num / den = num * 1 / den, with den = m * den'
                self.expand_quotient(Some(&E::Leaf(RationalFunction::from_poly(f.numer().clone()))), f.denom(), &Polynomial::one(), max)
            }
            E::Sym(s) => Ok(Dense::from_poly(&Polynomial::var(*s), self.vars, max)),
            E::Neg(a) => Ok(self.expand(a, max)?.neg()),
            E::Add(a, b) => Ok(self.expand(a, max)?.add(&self.expand(b, max)?)),
            E::Sub(a, b) => Ok(self.expand(a, max)?.add(&self.expand(b, max)?.neg())),
            E::Mul(a, b) => Ok(self.expand(a, max)?.mul(&self.expand(b, max)?)),
            E::Div(a, b) => {
                if !b.has_sqrt() {
                    let r = b.to_rational()?;
                    return self.expand_quotient(Some(a), r.numer(), r.denom(), max);
                }
                let bs = self.expand(b, max)?;
                if bs.data[0].is_zero() {
                    return Err(Error::ExpansionPole);
                }
                self.expand(a, max)?.div(&bs)
            }
            E::Pow(a, k) => {
                if *k < 0 {
                    let inv = E::Div(Box::new(E::int(1)), Box::new(E::Pow(a.clone(), -k)));
                    return self.expand(&inv, max);
                }
                let mut base = self.expand(a, max)?;
                let mut out = Dense::zero(max);
                out.data[0] = RationalFunction::one();
                let mut k = *k as u32;
                while k > 0 {
                    if k & 1 == 1 {
                        out = out.mul(&base);
                    }
                    k >>= 1;
                    if k > 0 {
                        base = base.mul(&base);
                    }
                }
                Ok(out)
            }
            E::Sqrt(a) => self.expand(a, max)?.sqrt(),
        }
    }
}

/// Taylor expansion at the origin in the variables of `bounds`, exact up
/// to the per-variable degree bounds. Other symbols stay in the
/// coefficients.
pub fn series_expand(e: &ClosedFormExpr, bounds: &Arc<Bounds>) -> Result<TruncatedFPS> {
    if let Some(k) = bounds.max().iter().position(|m| *m == crate::fps::UNBOUNDED) {
        return Err(Error::UnboundedExpansion(bounds.vars()[k]));
    }
    let folded = e.fold()?;
    let ex = Expander { vars: bounds.vars() };
    let d = ex.expand(&folded, bounds.max())?;
    let mut coeffs = BTreeMap::new();
    for (i, c) in d.data.iter().enumerate() {
        if !c.is_zero() {
            coeffs.insert(StateVector(d.exps(i)), c.clone());
        }
    }
    Ok(TruncatedFPS::from_parts(bounds.clone(), coeffs, RationalFunction::zero()))
}
