//! Random generators and a brute-force reference interpreter for tests.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::Rng;

use crate::algebra::rational::rat;
use crate::algebra::{Monomial, Polynomial, Rational, RationalFunction, Symbol};
use crate::fps::{Bounds, StateVector, TruncatedFPS};
use crate::syntax::{Atom, Cmp, Declarations, Expr, Guard, ProbExpr, Program, Source};

const PROBS: [(i64, i64); 6] = [(1, 2), (1, 3), (2, 3), (1, 4), (3, 4), (1, 1)];

pub fn random_prob(rng: &mut impl Rng) -> Rational {
    let (n, d) = PROBS[rng.gen_range(0..PROBS.len())];
    rat(n, d)
}

pub fn random_expr(rng: &mut impl Rng, nvars: usize) -> Expr {
    let terms: Vec<(usize, u64)> = (0..rng.gen_range(0..=2))
        .map(|_| (rng.gen_range(0..nvars), rng.gen_range(1..=2)))
        .collect();
    let monus = if rng.gen_bool(0.3) { rng.gen_range(1..=2) } else { 0 };
    Expr::affine(rng.gen_range(0..=2), terms, monus)
}

pub fn random_atom(rng: &mut impl Rng, nvars: usize, max_const: u64) -> Atom {
    let var = rng.gen_range(0..nvars);
    if rng.gen_bool(0.2) {
        let modulus = rng.gen_range(1..=3);
        Atom::Mod {
            var,
            modulus,
            residue: rng.gen_range(0..modulus),
        }
    } else {
        let ops = [Cmp::Lt, Cmp::Le, Cmp::Eq, Cmp::Ne, Cmp::Ge, Cmp::Gt];
        Atom::Cmp {
            var,
            op: ops[rng.gen_range(0..ops.len())],
            value: rng.gen_range(0..=max_const),
        }
    }
}

pub fn random_guard(rng: &mut impl Rng, nvars: usize, max_const: u64, depth: u32) -> Guard {
    if depth == 0 || rng.gen_bool(0.4) {
        return match rng.gen_range(0..12) {
            0 => Guard::True,
            1 => Guard::False,
            _ => Guard::Atom(random_atom(rng, nvars, max_const)),
        };
    }
    let a = random_guard(rng, nvars, max_const, depth - 1);
    match rng.gen_range(0..3) {
        0 => Guard::not(a),
        1 => Guard::and(a, random_guard(rng, nvars, max_const, depth - 1)),
        _ => Guard::or(a, random_guard(rng, nvars, max_const, depth - 1)),
    }
}

/// A loop-free program over `nvars` variables with literal probabilities.
pub fn random_loop_free(rng: &mut impl Rng, nvars: usize, depth: u32) -> Program {
    if depth == 0 || rng.gen_bool(0.3) {
        return if rng.gen_bool(0.1) {
            Program::Skip
        } else {
            let v = rng.gen_range(0..nvars);
            Program::Assign(v, random_expr(rng, nvars))
        };
    }
    match rng.gen_range(0..3) {
        0 => Program::seq([
            random_loop_free(rng, nvars, depth - 1),
            random_loop_free(rng, nvars, depth - 1),
        ]),
        1 => Program::choice(
            ProbExpr::Literal(random_prob(rng)),
            random_loop_free(rng, nvars, depth - 1),
            random_loop_free(rng, nvars, depth - 1),
        ),
        _ => Program::ite(
            random_guard(rng, nvars, 3, 1),
            random_loop_free(rng, nvars, depth - 1),
            random_loop_free(rng, nvars, depth - 1),
        ),
    }
}

/// A loop whose guard keeps every variable below a small bound, so that
/// it terminates with finitely many reachable states.
pub fn random_bounded_loop(rng: &mut impl Rng, nvars: usize) -> Program {
    let v = rng.gen_range(0..nvars);
    let bound = rng.gen_range(1..=3);
    let guard = Guard::and(
        Guard::cmp(v, Cmp::Le, bound),
        random_guard(rng, nvars, 3, 1),
    );
    let step = Program::choice(
        ProbExpr::Literal(random_prob(rng)),
        Program::Assign(v, Expr::affine(1, [(v, 1)], 0)),
        random_loop_free(rng, nvars, 1),
    );
    Program::while_loop(guard, step)
}

/// Loop-free code optionally wrapped around a bounded loop.
pub fn random_program(rng: &mut impl Rng, nvars: usize, with_loop: bool) -> Program {
    let mut parts = vec![random_loop_free(rng, nvars, 2)];
    if with_loop {
        parts.push(random_bounded_loop(rng, nvars));
        parts.push(random_loop_free(rng, nvars, 1));
    }
    Program::seq(parts)
}

fn random_hb_body(rng: &mut impl Rng, depth: u32) -> Program {
    if depth == 0 || rng.gen_bool(0.3) {
        let mut parts = Vec::new();
        if rng.gen_bool(0.8) {
            let e = if rng.gen_bool(0.7) {
                Expr::constant(rng.gen_range(0..=3))
            } else {
                Expr::affine(1, [(0, 1)], 0)
            };
            parts.push(Program::Assign(0, e));
        }
        for counter in [1, 2] {
            let inc = rng.gen_range(0..=2);
            if inc > 0 {
                parts.push(Program::Assign(counter, Expr::affine(inc, [(counter, 1)], 0)));
            }
        }
        return Program::seq(parts);
    }
    Program::choice(
        ProbExpr::Literal(random_prob(rng)),
        random_hb_body(rng, depth - 1),
        random_hb_body(rng, depth - 1),
    )
}

/// `while (B) { P }` over `b, c, d`: the guard confines `b` to at most
/// three values, and `P` resets or bumps `b` and increments the counters
/// `c` and `d`.
pub fn random_hb_loop(rng: &mut impl Rng) -> Source {
    let guard = match rng.gen_range(0..3) {
        0 => Guard::cmp(0, Cmp::Le, rng.gen_range(0..=2)),
        1 => Guard::or(Guard::cmp(0, Cmp::Eq, 0), Guard::cmp(0, Cmp::Eq, 2)),
        _ => Guard::and(Guard::modulo(0, 2, 0), Guard::cmp(0, Cmp::Le, 4)),
    };
    Source {
        decls: Declarations::new(["b", "c", "d"], []),
        program: Program::while_loop(guard, random_hb_body(rng, 2)),
    }
}

pub fn declarations(nvars: usize) -> Declarations {
    let names = ["x", "y", "z", "w"];
    Declarations::new(names[..nvars].iter().copied(), [])
}

/// A random subdistribution on the box with at most `terms` support points.
pub fn random_fps(rng: &mut impl Rng, bounds: &Arc<Bounds>, terms: usize) -> TruncatedFPS {
    let mut f = TruncatedFPS::zero(bounds);
    let mut left = Rational::one();
    for _ in 0..terms {
        let s: Vec<u32> = bounds.max().iter().map(|m| rng.gen_range(0..=(*m).min(6))).collect();
        let w = &left * rat(rng.gen_range(1..=3), 4);
        left = &left - &w;
        f.add_term(StateVector(s), RationalFunction::constant(w));
    }
    f
}

/// A polynomial with up to `terms` terms, small integer-ratio
/// coefficients and exponents at most `max_exp`.
pub fn random_polynomial(rng: &mut impl Rng, vars: &[Symbol], terms: usize, max_exp: u32) -> Polynomial {
    let mut p = Polynomial::zero();
    for _ in 0..rng.gen_range(1..=terms) {
        let m = Monomial::from_pairs(vars.iter().map(|v| (*v, rng.gen_range(0..=max_exp))));
        let c = rat(rng.gen_range(-4..=4), rng.gen_range(1..=3));
        p = p + Polynomial::term(c, m);
    }
    p
}

/// A rational function whose denominator has constant term `den0`.
pub fn random_ratfun(rng: &mut impl Rng, vars: &[Symbol], den0: Rational) -> RationalFunction {
    let num = random_polynomial(rng, vars, 3, 2);
    let tail = random_polynomial(rng, vars, 2, 2);
    let den = tail.clone() - Polynomial::constant(tail.constant_term()) + Polynomial::constant(den0);
    RationalFunction::new(num, den).expect("nonzero denominator")
}

/// A rational generating function with a positive series prefix and mass
/// at most 1: `N / (1 − Σ q_k m_k)` with small nonnegative weights.
pub fn random_rational_pgf(rng: &mut impl Rng, vars: &[Symbol]) -> RationalFunction {
    random_rational_pgf_in(rng, vars, vars)
}

/// Like [`random_rational_pgf`], with the denominator restricted to
/// `den_vars`. The series is then a polynomial of degree at most 2 in every
/// other variable, so its expansion in those directions is finite.
pub fn random_rational_pgf_in(rng: &mut impl Rng, vars: &[Symbol], den_vars: &[Symbol]) -> RationalFunction {
    let mono = |rng: &mut dyn rand::RngCore, vs: &[Symbol]| {
        Monomial::from_pairs(vs.iter().map(|v| (*v, rng.gen_range(0..=2))))
    };
    let mut den = Polynomial::one();
    let mut budget = rat(3, 4);
    if !den_vars.is_empty() {
        for _ in 0..rng.gen_range(1..=2) {
            let m = loop {
                let m = mono(rng, den_vars);
                if !m.is_one() {
                    break m;
                }
            };
            let q = &budget * rat(rng.gen_range(1..=2), 3);
            budget = &budget - &q;
            den = den - Polynomial::term(q, m);
        }
    }
    let mut num = Polynomial::zero();
    // N(1) ≤ 1 − Σ q_k keeps the mass at most 1
    let mut mass = Rational::one() - rat(3, 4) + &budget;
    for _ in 0..rng.gen_range(1..=2) {
        let w = &mass * rat(rng.gen_range(1..=2), 3);
        mass = &mass - &w;
        num = num + Polynomial::term(w, mono(rng, vars));
    }
    RationalFunction::new(num, den).expect("nonzero denominator")
}

fn eval_expr(e: &Expr, s: &[u32]) -> u64 {
    let mut v = e.constant;
    for (w, a) in &e.terms {
        v += a * s[*w] as u64;
    }
    v.saturating_sub(e.monus)
}

fn holds(g: &Guard, s: &[u32]) -> bool {
    match g {
        Guard::True => true,
        Guard::False => false,
        Guard::Atom(Atom::Cmp { var, op, value }) => {
            let x = s[*var] as u64;
            match op {
                Cmp::Lt => x < *value,
                Cmp::Le => x <= *value,
                Cmp::Eq => x == *value,
                Cmp::Ne => x != *value,
                Cmp::Ge => x >= *value,
                Cmp::Gt => x > *value,
            }
        }
        Guard::Atom(Atom::Mod { var, modulus, residue }) => s[*var] as u64 % modulus == *residue,
        Guard::Not(a) => !holds(a, s),
        Guard::And(a, b) => holds(a, s) && holds(b, s),
        Guard::Or(a, b) => holds(a, s) || holds(b, s),
    }
}

/// Result of running the reference interpreter.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub terminated: BTreeMap<Vec<u32>, Rational>,
    /// Mass of runs still going when the step budget ran out.
    pub unfinished: Rational,
}

type Config<'a> = (Vec<&'a Program>, Vec<u32>);
type Key = (Vec<usize>, Vec<u32>);

fn config_key(c: &Config<'_>) -> Key {
    (c.0.iter().map(|q| *q as *const Program as usize).collect(), c.1.clone())
}

/// Live configurations beyond which [`simulate`] gives up.
pub const MAX_CONFIGURATIONS: usize = 5_000;

/// Exact small-step execution of `p` from `start` over ground probabilities,
/// merging equal configurations, for at most `max_steps` rounds.
pub fn simulate<'a>(p: &'a Program, start: &[u32], max_steps: usize) -> Result<Simulation, String> {
    let mut live: BTreeMap<Key, (Config<'a>, Rational)> = BTreeMap::new();
    let key = config_key;
    let init: Config = (vec![p], start.to_vec());
    live.insert(key(&init), (init, Rational::one()));
    let mut terminated: BTreeMap<Vec<u32>, Rational> = BTreeMap::new();
    for _ in 0..max_steps {
        if live.is_empty() {
            break;
        }
        if live.len() > MAX_CONFIGURATIONS {
            return Err("state space too large".into());
        }
        let mut next: BTreeMap<Key, (Config<'a>, Rational)> = BTreeMap::new();
        let mut push = |c: Config<'a>, w: Rational| {
            if w.is_zero() {
                return;
            }
            let k = key(&c);
            match next.get_mut(&k) {
                Some(slot) => slot.1 = &slot.1 + &w,
                None => {
                    next.insert(k, (c, w));
                }
            }
        };
        for (_, ((mut stack, s), w)) in live {
            let Some(top) = stack.pop() else {
                *terminated.entry(s).or_insert_with(Rational::zero) += w;
                continue;
            };
            match top {
                Program::Skip => push((stack, s), w),
                Program::Assign(v, e) => {
                    let mut t = s.clone();
                    t[*v] = eval_expr(e, &s).min(u32::MAX as u64 / 4) as u32;
                    push((stack, t), w);
                }
                Program::Seq(items) => {
                    stack.extend(items.iter().rev());
                    push((stack, s), w);
                }
                Program::Choice(q, a, b) => {
                    let pr = match q {
                        ProbExpr::Literal(r) => r.clone(),
                        ProbExpr::Reciprocal(v) if s[*v] > 0 => rat(1, s[*v] as i64),
                        ProbExpr::Reciprocal(_) => return Err("1/0".into()),
                        ProbExpr::Param(a) => return Err(format!("parameter {a}")),
                    };
                    let mut sa = stack.clone();
                    sa.push(a);
                    push((sa, s.clone()), &w * &pr);
                    stack.push(b);
                    push((stack, s), &w * (Rational::one() - pr));
                }
                Program::Ite(g, a, b) => {
                    stack.push(if holds(g, &s) { a } else { b });
                    push((stack, s), w);
                }
                Program::While(g, body) => {
                    if holds(g, &s) {
                        stack.push(top);
                        stack.push(body);
                    }
                    push((stack, s), w);
                }
            }
        }
        live = next;
    }
    // configurations with an empty stack have terminated
    let mut unfinished = Rational::zero();
    for ((stack, s), w) in live.into_values() {
        if stack.is_empty() {
            *terminated.entry(s).or_insert_with(Rational::zero) += w;
        } else {
            unfinished += w;
        }
    }
    Ok(Simulation { terminated, unfinished })
}

/// The simulation's terminated part as a series on `bounds`; states
/// outside the box are dropped.
pub fn simulation_to_fps(sim: &Simulation, bounds: &Arc<Bounds>) -> TruncatedFPS {
    let mut f = TruncatedFPS::zero(bounds);
    for (s, w) in &sim.terminated {
        f.add_term(StateVector(s.clone()), RationalFunction::constant(w.clone()));
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    #[test]
    fn simulator_on_a_coin() {
        let s = parse("vars x, c; while(x = 1){ {x := 0}[1/2]{x := 1}; c := c + 1 }").unwrap();
        let sim = simulate(&s.program, &[1, 0], 200).unwrap();
        assert_eq!(sim.terminated.get(&vec![0, 1]), Some(&rat(1, 2)));
        assert_eq!(sim.terminated.get(&vec![0, 3]), Some(&rat(1, 8)));
        assert!(sim.unfinished > Rational::zero());
    }

    #[test]
    fn generated_pgfs_have_positive_prefix() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let vars = [Symbol::new("X"), Symbol::new("Y")];
        for _ in 0..20 {
            let g = random_rational_pgf(&mut rng, &vars);
            let b = Bounds::uniform(vars.to_vec(), 4);
            let f = crate::algebra::series_expand(&crate::algebra::ClosedFormExpr::Leaf(g.clone()), &b).unwrap();
            assert!(f.terms().all(|(_, c)| c.constant_value().unwrap() >= Rational::zero()));
            let m = g.eval_at_one(&vars);
            assert!(m.value().unwrap().constant_value().unwrap() <= Rational::one());
        }
    }
}
