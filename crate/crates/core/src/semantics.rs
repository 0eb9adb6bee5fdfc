//! Forward generating-function transformer on truncated series.

use serde::Serialize;

use crate::algebra::{Rational, RationalFunction, Symbol};
use crate::error::{Error, Result};
use crate::fps::{Bounds, StateVector, TruncatedFPS, UNBOUNDED};
use crate::syntax::{Expr, Guard, ProbExpr, Program};

#[derive(Clone, Copy, Debug)]
pub struct Config {
    /// Maximum number of body executions per loop.
    pub max_unroll: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config { max_unroll: 100 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LoopIterationReport {
    /// Unfoldings of the loop, counting the initial guard test.
    pub iterations_run: usize,
    /// No mass is left inside the loop.
    pub converged: bool,
    /// Converged without pushing mass out of the bounds.
    pub exact: bool,
    pub settled_prefix: TruncatedFPS,
    pub live: TruncatedFPS,
    pub lost_mass: RationalFunction,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub output: TruncatedFPS,
    /// Reports of loops at the top level of the program, in order.
    pub loops: Vec<LoopIterationReport>,
    /// Every loop executed, nested ones included, converged.
    pub converged: bool,
}

struct Engine {
    cfg: Config,
    depth: usize,
    converged: bool,
    loops: Vec<LoopIterationReport>,
}

fn without_lost(f: &TruncatedFPS) -> TruncatedFPS {
    f.clone().with_lost_mass(RationalFunction::zero())
}

/// `x := E` applied to each monomial; exponents beyond the bounds move
/// their coefficient to the lost mass.
pub fn assign(var: usize, e: &Expr, f: &TruncatedFPS) -> TruncatedFPS {
    let mut out = TruncatedFPS::zero(f.bounds()).with_lost_mass(f.lost_mass().clone());
    let bound = f.bounds().max()[var];
    for (s, c) in f.terms() {
        let v = e.eval(&s.0);
        if bound != UNBOUNDED && v > bound as u64 || v >= UNBOUNDED as u64 {
            out.add_lost(c);
            continue;
        }
        let mut t = s.0.clone();
        t[var] = v as u32;
        out.add_term(StateVector(t), c.clone());
    }
    out
}

fn probability(p: &ProbExpr) -> Option<RationalFunction> {
    match p {
        ProbExpr::Literal(q) => Some(RationalFunction::constant(q.clone())),
        ProbExpr::Param(a) => Some(RationalFunction::var(Symbol::new(a))),
        ProbExpr::Reciprocal(_) => None,
    }
}

impl Engine {
    fn exec(&mut self, p: &Program, f: &TruncatedFPS) -> Result<TruncatedFPS> {
        match p {
            Program::Skip => Ok(f.clone()),
            Program::Assign(v, e) => Ok(assign(*v, e, f)),
            Program::Seq(items) => {
                let mut g = f.clone();
                for s in items {
                    g = self.exec(s, &g)?;
                }
                Ok(g)
            }
            Program::Choice(q, a, b) => {
                let base = without_lost(f);
                let (fa, fb) = match probability(q) {
                    Some(pr) => {
                        let co = &RationalFunction::one() - &pr;
                        (base.scale(&pr), base.scale(&co))
                    }
                    None => {
                        let ProbExpr::Reciprocal(v) = q else { unreachable!() };
                        split_reciprocal(&base, *v)?
                    }
                };
                let mut out = self.exec(a, &fa)?.add(&self.exec(b, &fb)?)?;
                out.add_lost(f.lost_mass());
                Ok(out)
            }
            Program::Ite(g, a, b) => {
                let base = without_lost(f);
                let yes = base.restrict(g);
                let no = base.restrict(&Guard::not(g.clone()));
                let mut out = self.exec(a, &yes)?.add(&self.exec(b, &no)?)?;
                out.add_lost(f.lost_mass());
                Ok(out)
            }
            Program::While(g, body) => {
                self.depth += 1;
                let r = self.iterate(g, body, f);
                self.depth -= 1;
                let r = r?;
                self.converged &= r.converged;
                let out = r.settled_prefix.clone();
                if self.depth == 0 {
                    self.loops.push(r);
                }
                Ok(out)
            }
        }
    }

    fn iterate(&mut self, g: &Guard, body: &Program, f: &TruncatedFPS) -> Result<LoopIterationReport> {
        let not_g = Guard::not(g.clone());
        let base = without_lost(f);
        let mut settled = base.restrict(&not_g).with_lost_mass(f.lost_mass().clone());
        let mut live = base.restrict(g);
        let mut iterations = 1;
        let mut overflow = false;
        for _ in 0..self.cfg.max_unroll {
            if live.is_empty() {
                break;
            }
            let next = self.exec(body, &live)?;
            if !next.lost_mass().is_zero() {
                overflow = true;
                settled.add_lost(next.lost_mass());
            }
            let next = without_lost(&next);
            settled = settled.add(&next.restrict(&not_g))?;
            live = next.restrict(g);
            iterations += 1;
        }
        let converged = live.is_empty();
        Ok(LoopIterationReport {
            iterations_run: iterations,
            converged,
            exact: converged && !overflow,
            lost_mass: settled.lost_mass().clone(),
            settled_prefix: settled,
            live,
        })
    }
}

/// Splits `f` into the parts weighted by `1/x` and `1 - 1/x`.
fn split_reciprocal(f: &TruncatedFPS, v: usize) -> Result<(TruncatedFPS, TruncatedFPS)> {
    let mut a = TruncatedFPS::zero(f.bounds());
    let mut b = TruncatedFPS::zero(f.bounds());
    for (s, c) in f.terms() {
        let x = s.0[v];
        if x == 0 {
            return Err(Error::ProbabilityOutOfRange {
                value: "1/0".into(),
                state: s.to_string(),
            });
        }
        let p = Rational::new(1.into(), x.into());
        let q = Rational::from_integer(1.into()) - &p;
        a.add_term(s.clone(), c.scale(&p));
        b.add_term(s.clone(), c.scale(&q));
    }
    Ok((a, b))
}

/// `⟦P⟧(F)` on the bound box of `F`.
pub fn transform(p: &Program, f: &TruncatedFPS, cfg: Config) -> Result<Outcome> {
    let mut e = Engine {
        cfg,
        depth: 0,
        converged: true,
        loops: Vec::new(),
    };
    let output = e.exec(p, f)?;
    Ok(Outcome {
        output,
        loops: e.loops,
        converged: e.converged,
    })
}

/// Kleene iteration of a single loop.
pub fn loop_iterate(g: &Guard, body: &Program, f: &TruncatedFPS, cfg: Config) -> Result<LoopIterationReport> {
    let mut e = Engine {
        cfg,
        depth: 1,
        converged: true,
        loops: Vec::new(),
    };
    e.iterate(g, body, f)
}

/// Interval propagation of upper bounds; `peak` collects the largest
/// value each variable can hold at any point.
fn upper_bounds(p: &Program, mut ub: Vec<u64>, peak: &mut [u64]) -> Vec<u64> {
    match p {
        Program::Skip | Program::While(..) => ub,
        Program::Assign(v, e) => {
            let hi = e
                .terms
                .iter()
                .fold(e.constant, |acc, (w, a)| acc.saturating_add(a.saturating_mul(ub[*w])));
            ub[*v] = hi;
            peak[*v] = peak[*v].max(hi);
            ub
        }
        Program::Seq(items) => items.iter().fold(ub, |u, s| upper_bounds(s, u, peak)),
        Program::Choice(_, a, b) | Program::Ite(_, a, b) => {
            let l = upper_bounds(a, ub.clone(), peak);
            let r = upper_bounds(b, ub, peak);
            l.into_iter().zip(r).map(|(x, y)| x.max(y)).collect()
        }
    }
}

/// `⟦P⟧(X^σ)` for loop-free `P` as an exact polynomial, on a box sized by
/// a static bound on how far one run can move each variable.
pub fn exact_step(p: &Program, vars: Vec<Symbol>, start: &StateVector) -> Result<TruncatedFPS> {
    if !p.is_loop_free() {
        return Err(Error::NestedLoopBody);
    }
    let ub: Vec<u64> = start.0.iter().map(|x| *x as u64).collect();
    let mut peak = ub.clone();
    upper_bounds(p, ub, &mut peak);
    let max: Vec<u32> = peak
        .into_iter()
        .map(|x| x.min(UNBOUNDED as u64 - 1) as u32)
        .collect();
    let bounds = Bounds::new(vars, max);
    let f = TruncatedFPS::monomial(&bounds, start.clone(), RationalFunction::one());
    let out = transform(p, &f, Config::default())?.output;
    if !out.lost_mass().is_zero() {
        return Err(Error::BoundsUnderestimated(format!("one step from {start}")));
    }
    Ok(out)
}
