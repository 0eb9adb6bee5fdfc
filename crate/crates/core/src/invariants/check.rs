use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use super::spec::{InvariantletSpec, EULER};
use crate::algebra::rational::sqrt_exact;
use crate::algebra::{series_expand, ClosedFormExpr, Limit, Monomial, Polynomial, Rational, RationalFunction, Symbol};
use crate::error::{Error, Result};
use crate::fps::{Bounds, StateVector, TruncatedFPS};
use crate::semantics::exact_step;
use crate::syntax::{Declarations, Guard, Program};

/// An invariantlet bound to a loop's variables.
pub struct Candidate<'a> {
    spec: &'a InvariantletSpec,
    /// Exponent symbol of each program variable.
    symbol_of: Vec<String>,
}

impl<'a> Candidate<'a> {
    pub fn new(spec: &'a InvariantletSpec, decls: &Declarations) -> Result<Candidate<'a>> {
        let mut symbol_of = Vec::new();
        for v in &decls.vars {
            match spec.exponents.iter().find(|(_, w)| w == v) {
                Some((e, _)) => symbol_of.push(e.clone()),
                None => return Err(Error::Unsupported(format!("no exponent symbol is bound to variable {v}"))),
            }
        }
        if let Some((e, w)) = spec.exponents.iter().find(|(_, w)| decls.var_index(w).is_none()) {
            return Err(Error::Unsupported(format!("exponent {e} is bound to unknown variable {w}")));
        }
        Ok(Candidate { spec, symbol_of })
    }

    pub fn env(&self, sigma: &[u32]) -> HashMap<String, i64> {
        self.symbol_of
            .iter()
            .zip(sigma)
            .map(|(s, v)| (s.clone(), *v as i64))
            .collect()
    }

    /// `f(X^σ)`.
    pub fn eval(&self, sigma: &[u32]) -> Result<ClosedFormExpr> {
        self.spec.eval(&self.env(sigma))
    }
}

fn monomial_of(decls: &Declarations, sigma: &[u32]) -> Monomial {
    Monomial::from_pairs(sigma.iter().enumerate().map(|(v, e)| (decls.indeterminate(v), *e)))
}

/// `Φ(f̂)(X^σ) = ⟨X^σ⟩_¬B + f̂(⟦body⟧(⟨X^σ⟩_B))`, with `f̂` the linear
/// extension of `f`.
pub fn apply_phi(
    decls: &Declarations,
    guard: &Guard,
    body: &Program,
    sigma: &[u32],
    f: &dyn Fn(&[u32]) -> Result<ClosedFormExpr>,
) -> Result<ClosedFormExpr> {
    if !guard.sat(sigma) {
        let m = monomial_of(decls, sigma);
        return Ok(ClosedFormExpr::Leaf(RationalFunction::from_poly(Polynomial::term(
            Rational::one(),
            m,
        ))));
    }
    let step = exact_step(body, decls.indeterminates(), &StateVector(sigma.to_vec()))?;
    let mut rational = RationalFunction::zero();
    let mut rest: Option<ClosedFormExpr> = None;
    for (tau, c) in step.terms() {
        let v = f(&tau.0)?;
        match v.to_rational() {
            Ok(r) => rational = rational + c * &r,
            Err(_) => {
                let t = ClosedFormExpr::Leaf(c.clone()) * v;
                rest = Some(match rest {
                    Some(s) => s + t,
                    None => t,
                });
            }
        }
    }
    Ok(match rest {
        Some(s) => ClosedFormExpr::Leaf(rational) + s,
        None => ClosedFormExpr::Leaf(rational),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    /// `Φ(f̂)(X^σ) = f(X^σ)` as closed forms.
    Equal,
    /// `f(X^σ) − Φ(f̂)(X^σ)` is a nonzero polynomial with nonnegative
    /// coefficients.
    StrictlyBelow,
    /// Square roots involved; all coefficients up to the order agree.
    EqualToOrder { order: u32 },
    /// No coefficient up to the order is violated.
    HoldsToOrder { order: u32 },
    Violated {
        monomial: String,
        /// Coefficient of `Φ(f̂)(X^σ)`.
        required: RationalFunction,
        /// Coefficient of `f(X^σ)`.
        available: RationalFunction,
    },
    /// Some coefficient has no decidable sign.
    Undecided { reason: String },
}

impl Status {
    pub fn passes(&self) -> bool {
        !matches!(self, Status::Violated { .. } | Status::Undecided { .. })
    }
}

/// Value of `f(X^σ)` at the all-ones point.
#[derive(Clone, Debug, PartialEq)]
pub enum Mass {
    Value(RationalFunction),
    Divergent,
    /// An irrational square root was met.
    Unknown,
}

impl Serialize for Mass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Mass::Value(v) => s.serialize_str(&v.to_string()),
            Mass::Divergent => s.serialize_str("divergent"),
            Mass::Unknown => s.serialize_str("unknown"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PointResult {
    pub sigma: BTreeMap<String, u32>,
    pub status: Status,
    pub mass: Mass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    SuperinvariantOnGrid,
    Violated,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Conclusion {
    /// Every grid point is exactly a fixed point and every mass is 1.
    ExactSemantics,
    /// As above, with some points only compared up to the order.
    ExactToOrder { order: u32 },
    /// The loop terminates from `sigma` with probability at most `bound`.
    NotAlmostSurelyTerminating { sigma: BTreeMap<String, u32>, bound: RationalFunction },
    /// The candidate is not a PGF at these points, so the
    /// overapproximation is proper.
    Proper { divergent_mass_at: Vec<BTreeMap<String, u32>> },
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckVerdict {
    pub grid: BTreeMap<String, u32>,
    pub order: u32,
    pub aggregate: Aggregate,
    pub points: Vec<PointResult>,
    pub conclusions: Vec<Conclusion>,
}

impl CheckVerdict {
    pub fn point(&self, sigma: &[(&str, u32)]) -> Option<&PointResult> {
        self.points
            .iter()
            .find(|p| sigma.iter().all(|(s, v)| p.sigma.get(*s) == Some(v)))
    }
}

#[derive(Clone, Debug, Default)]
pub struct CheckOptions {
    /// Inclusive upper bound for each exponent symbol.
    pub grid: BTreeMap<String, u32>,
    pub order: u32,
    /// Values for parameters, used only when deciding signs.
    pub valuation: HashMap<Symbol, Rational>,
}

fn euler_bounds(n: u32) -> (Rational, Rational) {
    let mut term = Rational::one();
    let mut sum = Rational::one();
    for k in 1..=n {
        term = term / Rational::from_integer(BigInt::from(k));
        sum = sum + &term;
    }
    // the tail beyond n is below term / n
    let tail = term / Rational::from_integer(BigInt::from(n));
    (sum.clone(), sum + tail)
}

fn interval(p: &Polynomial, e: Symbol, lo: &Rational, hi: &Rational) -> (Rational, Rational) {
    let mut a = Rational::zero();
    let mut b = Rational::zero();
    for (m, c) in p.terms() {
        let k = m.exponent(e) as i32;
        let (l, h) = (num_traits::pow::pow(lo.clone(), k as usize), num_traits::pow::pow(hi.clone(), k as usize));
        if c.is_positive() {
            a += c * &l;
            b += c * &h;
        } else {
            a += c * &h;
            b += c * &l;
        }
    }
    (a, b)
}

fn poly_sign(p: &Polynomial, e: Symbol) -> Option<Ordering> {
    if p.is_zero() {
        return Some(Ordering::Equal);
    }
    for n in [12, 24, 48, 96] {
        let (lo, hi) = euler_bounds(n);
        let (a, b) = interval(p, e, &lo, &hi);
        if a.is_positive() {
            return Some(Ordering::Greater);
        }
        if b.is_negative() {
            return Some(Ordering::Less);
        }
    }
    None
}

/// Sign of a coefficient, exact over ℚ and decided by interval enclosure
/// over ℚ(e).
pub fn sign(r: &RationalFunction, valuation: &HashMap<Symbol, Rational>) -> Option<Ordering> {
    let r = if valuation.is_empty() || r.is_constant() {
        r.clone()
    } else {
        let map = valuation
            .iter()
            .map(|(s, v)| (*s, RationalFunction::constant(v.clone())))
            .collect();
        r.substitute(&map).ok()?
    };
    if let Some(c) = r.constant_value() {
        return Some(c.cmp(&Rational::zero()));
    }
    let e = Symbol::new(EULER);
    if r.symbols().iter().any(|s| *s != e) {
        return None;
    }
    let n = poly_sign(r.numer(), e)?;
    let d = poly_sign(r.denom(), e)?;
    Some(if d == Ordering::Less { n.reverse() } else { n })
}

fn mass_of(e: &ClosedFormExpr, vars: &[Symbol]) -> Mass {
    use ClosedFormExpr as E;
    let bin = |a: &E, b: &E, op: &dyn Fn(RationalFunction, RationalFunction) -> Mass| match (mass_of(a, vars), mass_of(b, vars)) {
        (Mass::Value(x), Mass::Value(y)) => op(x, y),
        (Mass::Unknown, _) | (_, Mass::Unknown) => Mass::Unknown,
        _ => Mass::Divergent,
    };
    match e {
        E::Leaf(f) => match f.eval_at_one(vars) {
            Limit::Value(v) => Mass::Value(v),
            Limit::Divergent => Mass::Divergent,
        },
        E::Sym(s) if vars.contains(s) => Mass::Value(RationalFunction::one()),
        E::Sym(s) => Mass::Value(RationalFunction::var(*s)),
        E::Neg(a) => match mass_of(a, vars) {
            Mass::Value(v) => Mass::Value(-v),
            m => m,
        },
        E::Add(a, b) => bin(a, b, &|x, y| Mass::Value(x + y)),
        E::Sub(a, b) => bin(a, b, &|x, y| Mass::Value(x - y)),
        E::Mul(a, b) => bin(a, b, &|x, y| Mass::Value(x * y)),
        E::Div(a, b) => bin(a, b, &|x, y| {
            if !y.is_zero() {
                Mass::Value(x / y)
            } else if x.is_zero() {
                Mass::Unknown
            } else {
                Mass::Divergent
            }
        }),
        E::Pow(a, k) => match mass_of(a, vars) {
            Mass::Value(v) if v.is_zero() && *k < 0 => Mass::Divergent,
            Mass::Value(v) => Mass::Value(v.pow(*k).expect("nonzero base")),
            m => m,
        },
        E::Sqrt(a) => match mass_of(a, vars) {
            Mass::Value(v) => match v.constant_value().and_then(|c| sqrt_exact(&c)) {
                Some(r) => Mass::Value(RationalFunction::constant(r)),
                None => Mass::Unknown,
            },
            m => m,
        },
    }
}

/// Compares `Φ(f̂)(X^σ)` against `f(X^σ)`.
pub fn compare(
    lhs: &ClosedFormExpr,
    rhs: &ClosedFormExpr,
    indeterminates: &[Symbol],
    order: u32,
    valuation: &HashMap<Symbol, Rational>,
) -> Result<Status> {
    let (lhs, rhs) = (lhs.fold()?, rhs.fold()?);
    let exact = match (&lhs, &rhs) {
        (ClosedFormExpr::Leaf(l), ClosedFormExpr::Leaf(r)) => {
            if l == r {
                return Ok(Status::Equal);
            }
            Some(r - l)
        }
        _ => None,
    };
    let mut used: Vec<Symbol> = lhs
        .symbols()
        .union(&rhs.symbols())
        .filter(|s| indeterminates.contains(s))
        .copied()
        .collect();
    used.sort();
    let bounds = Bounds::uniform(used, order);
    let ls = series_expand(&lhs, &bounds)?;
    let rs = series_expand(&rhs, &bounds)?;
    compare_series(&ls, &rs, exact.as_ref(), valuation)
}

/// Coefficientwise comparison of two expansions on the same box. `exact`
/// is the closed-form difference when both sides are rational.
fn compare_series(
    ls: &TruncatedFPS,
    rs: &TruncatedFPS,
    exact: Option<&RationalFunction>,
    valuation: &HashMap<Symbol, Rational>,
) -> Result<Status> {
    let used = ls.bounds().vars();
    let order = ls.bounds().max().iter().copied().max().unwrap_or(0);
    let mut keys: Vec<&StateVector> = ls.coeffs().keys().chain(rs.coeffs().keys()).collect();
    keys.sort();
    keys.dedup();
    let mut undecided = None;
    let mut all_zero = true;
    for s in keys {
        let (l, r) = (ls.coeff(s), rs.coeff(s));
        let d = &r - &l;
        if d.is_zero() {
            continue;
        }
        all_zero = false;
        match sign(&d, valuation) {
            Some(Ordering::Less) => {
                let m = Monomial::from_pairs(used.iter().copied().zip(s.0.iter().copied()));
                return Ok(Status::Violated {
                    monomial: m.to_string(),
                    required: l,
                    available: r,
                });
            }
            Some(_) => {}
            None => undecided = undecided.or(Some(format!("sign of {d} is undecided"))),
        }
    }
    if let Some(reason) = undecided {
        return Ok(Status::Undecided { reason });
    }
    if let Some(d) = exact {
        let den_free = used.iter().all(|s| !d.denom().contains(*s));
        let fits = used.iter().all(|s| d.numer().degree_in(*s) <= order);
        if den_free && fits {
            return Ok(Status::StrictlyBelow);
        }
    }
    Ok(if all_zero {
        Status::EqualToOrder { order }
    } else {
        Status::HoldsToOrder { order }
    })
}

fn grid_points(symbols: &[String], grid: &BTreeMap<String, u32>) -> Result<Vec<Vec<u32>>> {
    let mut pts = vec![vec![]];
    for s in symbols {
        let hi = *grid
            .get(s)
            .ok_or_else(|| Error::Unsupported(format!("the grid has no bound for {s}")))?;
        pts = pts
            .into_iter()
            .flat_map(|p| {
                (0..=hi).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    Ok(pts)
}

/// Checks `Φ(f̂)(X^σ) ⪯ f(X^σ)` on every point of the grid.
pub fn check(
    spec: &InvariantletSpec,
    decls: &Declarations,
    loop_: &Program,
    opts: &CheckOptions,
) -> Result<CheckVerdict> {
    let Program::While(guard, body) = loop_ else {
        return Err(Error::Unsupported("invariants are checked against a loop".into()));
    };
    if !body.is_loop_free() {
        return Err(Error::NestedLoopBody);
    }
    let cand = Candidate::new(spec, decls)?;
    let vars = decls.indeterminates();
    let grid = grid_points(&cand.symbol_of, &opts.grid)?;
    // f at every grid point and every state one body step away
    let mut values: HashMap<Vec<u32>, ClosedFormExpr> = HashMap::new();
    let mut steps: HashMap<Vec<u32>, TruncatedFPS> = HashMap::new();
    for sigma in &grid {
        let mut need = vec![sigma.clone()];
        if guard.sat(sigma) {
            let step = exact_step(body, vars.clone(), &StateVector(sigma.clone()))?;
            need.extend(step.coeffs().keys().map(|t| t.0.clone()));
            steps.insert(sigma.clone(), step);
        }
        for t in need {
            if !values.contains_key(&t) {
                let v = cand.eval(&t)?.fold()?;
                values.insert(t, v);
            }
        }
    }
    let mut used: Vec<Symbol> = values
        .values()
        .flat_map(|v| v.symbols())
        .filter(|s| vars.contains(s))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    for sigma in &grid {
        if !guard.sat(sigma) {
            used.extend(sigma.iter().enumerate().filter(|(_, e)| **e > 0).map(|(v, _)| vars[v]));
        }
    }
    used.sort();
    used.dedup();
    let bounds = Bounds::uniform(used, opts.order);
    let mut series: HashMap<Vec<u32>, TruncatedFPS> = HashMap::new();
    let mut expand = |t: &[u32]| -> Result<TruncatedFPS> {
        if let Some(f) = series.get(t) {
            return Ok(f.clone());
        }
        let f = series_expand(&values[t], &bounds)?;
        series.insert(t.to_vec(), f.clone());
        Ok(f)
    };
    let mut points = Vec::new();
    for sigma in &grid {
        let rhs = &values[sigma];
        let lhs_rational = match steps.get(sigma) {
            None => Some(RationalFunction::from_poly(Polynomial::term(
                Rational::one(),
                monomial_of(decls, sigma),
            ))),
            Some(step) => step.terms().try_fold(RationalFunction::zero(), |acc, (t, c)| match &values[&t.0] {
                ClosedFormExpr::Leaf(r) => Some(acc + c * r),
                _ => None,
            }),
        };
        let status = match (lhs_rational, rhs) {
            (Some(l), ClosedFormExpr::Leaf(r)) => compare(
                &ClosedFormExpr::Leaf(l),
                &ClosedFormExpr::Leaf(r.clone()),
                &vars,
                opts.order,
                &opts.valuation,
            )?,
            (l, _) => {
                let ls = match (l, steps.get(sigma)) {
                    (Some(l), _) => series_expand(&ClosedFormExpr::Leaf(l), &bounds)?,
                    (None, Some(step)) => {
                        let mut acc = TruncatedFPS::zero(&bounds);
                        for (t, c) in step.terms() {
                            acc = acc.add(&expand(&t.0)?.scale(c))?;
                        }
                        acc
                    }
                    (None, None) => unreachable!("guard states always have a step"),
                };
                compare_series(&ls, &expand(sigma)?, None, &opts.valuation)?
            }
        };
        let mass = mass_of(rhs, &vars);
        points.push(PointResult {
            sigma: cand.symbol_of.iter().cloned().zip(sigma.iter().copied()).collect(),
            status,
            mass,
        });
    }
    let aggregate = if points.iter().any(|p| matches!(p.status, Status::Violated { .. })) {
        Aggregate::Violated
    } else if points.iter().all(|p| p.status.passes()) {
        Aggregate::SuperinvariantOnGrid
    } else {
        Aggregate::Inconclusive
    };
    let conclusions = if aggregate == Aggregate::SuperinvariantOnGrid {
        conclude(&points, opts)
    } else {
        Vec::new()
    };
    Ok(CheckVerdict {
        grid: opts.grid.clone(),
        order: opts.order,
        aggregate,
        points,
        conclusions,
    })
}

fn conclude(points: &[PointResult], opts: &CheckOptions) -> Vec<Conclusion> {
    let mut out = Vec::new();
    let one = RationalFunction::one();
    let all_one = points.iter().all(|p| p.mass == Mass::Value(one.clone()));
    if all_one && points.iter().all(|p| p.status == Status::Equal) {
        out.push(Conclusion::ExactSemantics);
    } else if all_one
        && points
            .iter()
            .all(|p| matches!(p.status, Status::Equal | Status::EqualToOrder { .. }))
    {
        out.push(Conclusion::ExactToOrder { order: opts.order });
    }
    let below = points.iter().find_map(|p| match &p.mass {
        Mass::Value(m) if sign(&(&one - m), &opts.valuation) == Some(Ordering::Greater) => Some((p, m)),
        _ => None,
    });
    if let Some((p, m)) = below {
        out.push(Conclusion::NotAlmostSurelyTerminating {
            sigma: p.sigma.clone(),
            bound: m.clone(),
        });
    }
    let divergent: Vec<BTreeMap<String, u32>> = points
        .iter()
        .filter(|p| p.mass == Mass::Divergent)
        .map(|p| p.sigma.clone())
        .collect();
    if !divergent.is_empty() {
        out.push(Conclusion::Proper {
            divergent_mass_at: divergent,
        });
    }
    out
}
