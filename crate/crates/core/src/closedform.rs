//! Program operations evaluated directly on rational generating functions.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::One;

use crate::algebra::{Monomial, Polynomial, Rational, RationalFunction, Symbol};
use crate::error::{Error, Result};
use crate::syntax::{Atom, Cmp, Declarations, Expr, Guard, ProbExpr, Program};

fn monomial_poly(s: Symbol, e: u32) -> Polynomial {
    Polynomial::term(Rational::one(), Monomial::power(s, e))
}

/// Taylor coefficients `[s^0] g .. [s^n] g`, each free of `s`.
pub fn taylor_coeffs(g: &RationalFunction, s: Symbol, n: u32) -> Result<Vec<RationalFunction>> {
    let nu = g.numer().to_univariate(s);
    let du = g.denom().to_univariate(s);
    let d0 = du[0].clone();
    if d0.is_zero() {
        return Err(Error::ExpansionPole);
    }
    let at = |v: &[Polynomial], k: usize| v.get(k).cloned().unwrap_or_default();
    // q_k * d0^(k+1) is a polynomial; keep that scaled form.
    let mut scaled: Vec<Polynomial> = Vec::with_capacity(n as usize + 1);
    let mut d0_pows = vec![Polynomial::one()];
    for k in 0..=n as usize {
        d0_pows.push(&d0_pows[k] * &d0);
        let mut acc = &at(&nu, k) * &d0_pows[k];
        for i in 1..=k {
            let di = at(&du, i);
            if di.is_zero() || scaled[k - i].is_zero() {
                continue;
            }
            acc = &acc - &(&(&di * &scaled[k - i]) * &d0_pows[i - 1]);
        }
        scaled.push(acc);
    }
    scaled
        .into_iter()
        .enumerate()
        .map(|(k, q)| RationalFunction::new(q, d0_pows[k + 1].clone()))
        .collect()
}

/// `⟨G⟩_{x = c}`.
pub fn cf_filter_eq(g: &RationalFunction, x: Symbol, c: u32) -> Result<RationalFunction> {
    if !g.contains(x) {
        return Ok(if c == 0 { g.clone() } else { RationalFunction::zero() });
    }
    let q = taylor_coeffs(g, x, c)?.pop().unwrap();
    Ok(q * RationalFunction::from_poly(monomial_poly(x, c)))
}

/// `⟨G⟩_{x ≤ c}`.
pub fn cf_filter_le(g: &RationalFunction, x: Symbol, c: u32) -> Result<RationalFunction> {
    if !g.contains(x) {
        return Ok(g.clone());
    }
    if g.is_polynomial() && g.numer().degree_in(x) <= c {
        return Ok(g.clone());
    }
    let mut acc = RationalFunction::zero();
    for (d, q) in taylor_coeffs(g, x, c)?.into_iter().enumerate() {
        acc = acc + q * RationalFunction::from_poly(monomial_poly(x, d as u32));
    }
    Ok(acc)
}

fn int_poly_divmod(a: &[i64], b: &[i64]) -> Vec<i64> {
    // b monic; returns the quotient, asserting a zero remainder
    let mut r = a.to_vec();
    let db = b.len() - 1;
    if r.len() <= db {
        return vec![0];
    }
    let mut q = vec![0i64; r.len() - db];
    for k in (0..q.len()).rev() {
        let c = r[k + db];
        q[k] = c;
        for (j, bj) in b.iter().enumerate() {
            r[k + j] -= c * bj;
        }
    }
    debug_assert!(r.iter().all(|x| *x == 0));
    q
}

/// Coefficients of the m-th cyclotomic polynomial, lowest degree first.
pub fn cyclotomic(m: u64) -> Vec<i64> {
    let mut p = vec![0i64; m as usize + 1];
    p[0] = -1;
    p[m as usize] = 1;
    for d in 1..m {
        if m % d == 0 {
            p = int_poly_divmod(&p, &cyclotomic(d));
        }
    }
    p
}

/// `Poly[ω] / Φ_m(ω)` with polynomial coefficients.
pub struct CyclotomicContext {
    m: u64,
    phi: Vec<i64>,
}

impl CyclotomicContext {
    pub fn new(m: u64) -> CyclotomicContext {
        assert!(m >= 1, "modulus must be positive");
        CyclotomicContext { m, phi: cyclotomic(m) }
    }

    pub fn modulus(&self) -> u64 {
        self.m
    }

    /// Degree of the extension.
    pub fn degree(&self) -> usize {
        self.phi.len() - 1
    }

    fn reduce(&self, mut v: Vec<Polynomial>) -> Vec<Polynomial> {
        let n = self.degree();
        while v.len() > n {
            let top = v.pop().unwrap();
            if top.is_zero() {
                continue;
            }
            let base = v.len() - n;
            for j in 0..n {
                let c = self.phi[j];
                if c != 0 {
                    let t = top.scale(&Rational::from_integer(BigInt::from(c)));
                    v[base + j] = &v[base + j] - &t;
                }
            }
        }
        v.resize(n, Polynomial::zero());
        v
    }

    pub fn mul(&self, a: &[Polynomial], b: &[Polynomial]) -> Vec<Polynomial> {
        let mut out = vec![Polynomial::zero(); a.len() + b.len()];
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                if !y.is_zero() {
                    out[i + j] = &out[i + j] + &(x * y);
                }
            }
        }
        self.reduce(out)
    }

    /// `p(ω^k s)` as an element of the ring.
    pub fn twist(&self, p: &Polynomial, s: Symbol, k: u64) -> Vec<Polynomial> {
        let mut v = vec![Polynomial::zero(); self.m as usize];
        for (e, c) in p.to_univariate(s).into_iter().enumerate() {
            let r = ((e as u64 * k) % self.m) as usize;
            v[r] = &v[r] + &(&c * &monomial_poly(s, e as u32));
        }
        self.reduce(v)
    }

    /// The ω-free part, if the element has no other component.
    pub fn rational_part(&self, v: &[Polynomial]) -> Option<Polynomial> {
        if v.iter().skip(1).all(Polynomial::is_zero) {
            Some(v[0].clone())
        } else {
            None
        }
    }
}

/// `⟨G⟩_{x ≡ c (mod m)}` via the roots-of-unity filter. The denominator is
/// replaced by its norm `Π_k D(ω^k X)`, which is a polynomial in `X^m`, so
/// the filter acts on the numerator alone.
pub fn cf_filter_mod(g: &RationalFunction, x: Symbol, m: u64, c: u64) -> Result<RationalFunction> {
    assert!(m >= 1 && c < m, "residue must be below the modulus");
    if m == 1 {
        return Ok(g.clone());
    }
    let keep = |p: &Polynomial| {
        Polynomial::from_terms(
            p.terms()
                .filter(|(mo, _)| mo.exponent(x) as u64 % m == c)
                .map(|(mo, co)| (mo.clone(), co.clone())),
        )
    };
    let den = g.denom();
    if !den.contains(x) {
        return RationalFunction::new(keep(g.numer()), den.clone());
    }
    let ctx = CyclotomicContext::new(m);
    let mut norm = ctx.twist(den, x, 0);
    for k in 1..m {
        norm = ctx.mul(&norm, &ctx.twist(den, x, k));
    }
    let norm = ctx.rational_part(&norm).ok_or(Error::ResidueNotRational)?;
    if norm.terms().any(|(mo, _)| mo.exponent(x) as u64 % m != 0) {
        return Err(Error::ResidueNotRational);
    }
    let cofactor = norm
        .div_exact(den)
        .ok_or_else(|| Error::DivisionInexact("norm by denominator".into()))?;
    let num = keep(&(g.numer() * &cofactor));
    RationalFunction::new(num, norm)
}

fn filter_atom(d: &Declarations, g: &RationalFunction, a: &Atom) -> Result<RationalFunction> {
    let x = d.indeterminate(a.var());
    match *a {
        Atom::Mod { modulus, residue, .. } => cf_filter_mod(g, x, modulus, residue),
        Atom::Cmp { op, value, .. } => {
            let v = value as u32;
            Ok(match op {
                Cmp::Eq => cf_filter_eq(g, x, v)?,
                Cmp::Le => cf_filter_le(g, x, v)?,
                Cmp::Lt if v == 0 => RationalFunction::zero(),
                Cmp::Lt => cf_filter_le(g, x, v - 1)?,
                Cmp::Ne => g - &cf_filter_eq(g, x, v)?,
                Cmp::Ge if v == 0 => g.clone(),
                Cmp::Ge => g - &cf_filter_le(g, x, v - 1)?,
                Cmp::Gt => g - &cf_filter_le(g, x, v)?,
            })
        }
    }
}

/// `⟨G⟩_B` for an arbitrary boolean combination of supported atoms.
pub fn cf_boolean(d: &Declarations, g: &RationalFunction, b: &Guard) -> Result<RationalFunction> {
    match b {
        Guard::True => Ok(g.clone()),
        Guard::False => Ok(RationalFunction::zero()),
        Guard::Atom(a) => filter_atom(d, g, a),
        Guard::Not(h) => Ok(g - &cf_boolean(d, g, h)?),
        Guard::And(a, h) => cf_boolean(d, &cf_boolean(d, g, a)?, h),
        // split off the part satisfying `a` and filter only the rest by `h`,
        // so every node of the guard is applied once
        Guard::Or(a, h) => {
            let ga = cf_boolean(d, g, a)?;
            let rest = g - &ga;
            Ok(&ga + &cf_boolean(d, &rest, h)?)
        }
    }
}

/// `x := E` on a closed form, monus included.
pub fn cf_assign(d: &Declarations, g: &RationalFunction, target: usize, e: &Expr) -> Result<RationalFunction> {
    let xt = d.indeterminate(target);
    let mut map = HashMap::new();
    for (v, a) in &e.terms {
        if *v != target {
            let xv = d.indeterminate(*v);
            map.insert(xv, &Polynomial::var(xv) * &monomial_poly(xt, *a as u32));
        }
    }
    let at = e.coeff(target) as u32;
    map.insert(xt, monomial_poly(xt, at));
    let moved = g.substitute_poly(&map)?;
    let shifted = moved * RationalFunction::from_poly(monomial_poly(xt, e.constant as u32));
    if e.monus == 0 {
        Ok(shifted)
    } else {
        self_monus(&shifted, xt, e.monus as u32)
    }
}

/// `x := x ∸ c`.
fn self_monus(g: &RationalFunction, x: Symbol, c: u32) -> Result<RationalFunction> {
    if !g.contains(x) {
        return Ok(g.clone());
    }
    let low = taylor_coeffs(g, x, c - 1)?;
    let mut head = RationalFunction::zero();
    let mut prefix = RationalFunction::zero();
    for (k, q) in low.into_iter().enumerate() {
        prefix = &prefix + &(&q * &RationalFunction::from_poly(monomial_poly(x, k as u32)));
        head = &head + &q;
    }
    let tail = g - &prefix;
    let xc = monomial_poly(x, c);
    let num = tail
        .numer()
        .div_exact(&xc)
        .ok_or_else(|| Error::DivisionInexact(format!("{tail} by {xc}")))?;
    Ok(head + RationalFunction::new(num, tail.denom().clone())?)
}

/// `target := source ∸ c`.
pub fn cf_assign_monus(
    d: &Declarations,
    g: &RationalFunction,
    target: usize,
    source: usize,
    c: u64,
) -> Result<RationalFunction> {
    cf_assign(d, g, target, &Expr::affine(0, [(source, 1)], c))
}

/// Loop-free programs on closed forms. State-dependent probabilities and
/// loops are rejected.
pub fn cf_exec(d: &Declarations, p: &Program, g: &RationalFunction) -> Result<RationalFunction> {
    match p {
        Program::Skip => Ok(g.clone()),
        Program::Assign(v, e) => cf_assign(d, g, *v, e),
        Program::Seq(items) => {
            let mut acc = g.clone();
            for s in items {
                acc = cf_exec(d, s, &acc)?;
            }
            Ok(acc)
        }
        Program::Choice(q, a, b) => {
            let pr = match q {
                ProbExpr::Literal(r) => RationalFunction::constant(r.clone()),
                ProbExpr::Param(s) => RationalFunction::var(Symbol::new(s)),
                ProbExpr::Reciprocal(_) => {
                    return Err(Error::Unsupported("state-dependent probability".into()))
                }
            };
            let co = &RationalFunction::one() - &pr;
            Ok(cf_exec(d, a, &(g * &pr))? + cf_exec(d, b, &(g * &co))?)
        }
        Program::Ite(c, a, b) => {
            let yes = cf_boolean(d, g, c)?;
            let no = g - &yes;
            Ok(cf_exec(d, a, &yes)? + cf_exec(d, b, &no)?)
        }
        Program::While(..) => Err(Error::Unsupported("loop in a closed-form step".into())),
    }
}
