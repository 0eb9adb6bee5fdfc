//! Exact solutions of homogeneous-bounded loops as rational functions.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::algebra::{ClosedFormExpr, Limit, Monomial, Rational, RationalFunction, Symbol};
use crate::closedform::{cf_boolean, cf_exec, cf_filter_eq};
use crate::error::{Error, Result};
use crate::fps::{Bounds, StateVector, TruncatedFPS};
use crate::semantics::exact_step;
use crate::syntax::{guard_states, Declarations, Guard, ProbExpr, Program, Source};

#[derive(Clone, Debug, Serialize)]
pub struct BoundedVar {
    pub var: String,
    pub values: Vec<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HBAnalysis {
    pub homogeneous: Vec<String>,
    pub bounded: Vec<BoundedVar>,
    /// Guard-satisfying valuations of the bounded variables in lexicographic
    /// order; entry `k` of a state belongs to `bounded[k]`.
    pub states: Vec<Vec<u64>>,
    pub diagnostics: Vec<String>,
    #[serde(skip)]
    decls: Declarations,
    #[serde(skip)]
    homogeneous_idx: Vec<usize>,
    #[serde(skip)]
    bounded_idx: Vec<usize>,
    #[serde(skip)]
    guard: Guard,
    #[serde(skip)]
    body: Program,
}

impl HBAnalysis {
    pub fn decls(&self) -> &Declarations {
        &self.decls
    }

    pub fn guard(&self) -> &Guard {
        &self.guard
    }

    pub fn body(&self) -> &Program {
        &self.body
    }

    /// Full state vector for bounded state `i`, homogeneous variables at 0.
    pub fn state_vector(&self, i: usize) -> StateVector {
        let mut s = vec![0u32; self.decls.vars.len()];
        for (k, v) in self.bounded_idx.iter().enumerate() {
            s[*v] = self.states[i][k] as u32;
        }
        StateVector(s)
    }
}

/// Counter occurrences of `v`: only `v := v + E` with `E` free of `v`.
fn counter_only(p: &Program, v: usize) -> std::result::Result<(), &'static str> {
    match p {
        Program::Skip => Ok(()),
        Program::Assign(t, e) if *t == v => {
            if e.coeff(v) == 1 && e.monus == 0 {
                Ok(())
            } else {
                Err("is assigned other than by an increment")
            }
        }
        Program::Assign(_, e) => {
            if e.mentions(v) {
                Err("is read by another assignment")
            } else {
                Ok(())
            }
        }
        Program::Seq(items) => items.iter().try_for_each(|s| counter_only(s, v)),
        Program::Choice(q, a, b) => {
            if matches!(q, ProbExpr::Reciprocal(w) if *w == v) {
                return Err("is read by a probability");
            }
            counter_only(a, v)?;
            counter_only(b, v)
        }
        Program::Ite(g, a, b) => {
            if g.mentions(v) {
                return Err("is read by a branch condition");
            }
            counter_only(a, v)?;
            counter_only(b, v)
        }
        Program::While(..) => Err("occurs in a nested loop"),
    }
}

/// Splits the variables of `while (g) { body }` into homogeneous and bounded
/// ones.
pub fn classify(decls: &Declarations, lp: &Program) -> Result<HBAnalysis> {
    let Program::While(g, body) = lp else {
        return Err(Error::NotHb("not a loop".into()));
    };
    if !body.is_loop_free() {
        return Err(Error::NestedLoopBody);
    }
    let mut hom = Vec::new();
    let mut bnd = Vec::new();
    let mut values = Vec::new();
    let mut diagnostics = Vec::new();
    for (v, name) in decls.vars.iter().enumerate() {
        if let Some(set) = guard_states(g, v).finite() {
            bnd.push(v);
            values.push(set.iter().copied().collect::<Vec<_>>());
            diagnostics.push(format!("{name} is bounded by the guard"));
            continue;
        }
        if g.mentions(v) {
            return Err(Error::UnclassifiableVariable(format!(
                "{name} is neither bounded by the guard nor is the guard independent of {name}"
            )));
        }
        if let Err(why) = counter_only(body, v) {
            return Err(Error::UnclassifiableVariable(format!(
                "{name} is unbounded and {why}, so it is not a counter"
            )));
        }
        hom.push(v);
        diagnostics.push(format!("{name} is homogeneous"));
    }
    let mut states: Vec<Vec<u64>> = vec![vec![]];
    for vals in &values {
        states = states
            .into_iter()
            .flat_map(|s| {
                vals.iter().map(move |x| {
                    let mut t = s.clone();
                    t.push(*x);
                    t
                })
            })
            .collect();
    }
    let mut full = vec![0u32; decls.vars.len()];
    states.retain(|s| {
        for (k, v) in bnd.iter().enumerate() {
            full[*v] = s[k] as u32;
        }
        g.sat(&full)
    });
    Ok(HBAnalysis {
        homogeneous: hom.iter().map(|v| decls.vars[*v].clone()).collect(),
        bounded: bnd
            .iter()
            .zip(&values)
            .map(|(v, vals)| BoundedVar {
                var: decls.vars[*v].clone(),
                values: vals.clone(),
            })
            .collect(),
        states,
        diagnostics,
        decls: decls.clone(),
        homogeneous_idx: hom,
        bounded_idx: bnd,
        guard: g.clone(),
        body: (**body).clone(),
    })
}

/// `y = A y + b` over the bounded states.
#[derive(Clone, Debug, Serialize)]
pub struct EqsSystem {
    pub states: Vec<Vec<u64>>,
    pub a: Vec<Vec<RationalFunction>>,
    pub b: Vec<RationalFunction>,
}

impl EqsSystem {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// Replaces parameters by numbers.
    pub fn pin(&self, params: &HashMap<Symbol, Rational>) -> Result<EqsSystem> {
        let map: HashMap<Symbol, RationalFunction> = params
            .iter()
            .map(|(s, v)| (*s, RationalFunction::constant(v.clone())))
            .collect();
        let sub = |r: &RationalFunction| r.substitute(&map);
        Ok(EqsSystem {
            states: self.states.clone(),
            a: self
                .a
                .iter()
                .map(|row| row.iter().map(sub).collect())
                .collect::<Result<_>>()?,
            b: self.b.iter().map(sub).collect::<Result<_>>()?,
        })
    }
}

fn run_body(an: &HBAnalysis, start: &StateVector) -> Result<TruncatedFPS> {
    exact_step(&an.body, an.decls.indeterminates(), start)
}

/// `⟦body⟧(X_v · X^σ) = X_v · ⟦body⟧(X^σ)` for every homogeneous `v` and
/// bounded state `σ`.
pub fn check_homogeneity(an: &HBAnalysis) -> Result<()> {
    for i in 0..an.states.len() {
        let s = an.state_vector(i);
        let base = run_body(an, &s)?;
        for v in &an.homogeneous_idx {
            let mut t = s.clone();
            t.0[*v] += 1;
            let moved = run_body(an, &t)?;
            let mut expect: Vec<(StateVector, RationalFunction)> = base
                .terms()
                .map(|(u, c)| {
                    let mut w = u.clone();
                    w.0[*v] += 1;
                    (w, c.clone())
                })
                .collect();
            expect.sort_by(|a, b| a.0.cmp(&b.0));
            let got: Vec<(StateVector, RationalFunction)> =
                moved.terms().map(|(u, c)| (u.clone(), c.clone())).collect();
            if got != expect {
                return Err(Error::NotHb(format!(
                    "{} fails the homogeneity identity at {s}",
                    an.decls.vars[*v]
                )));
            }
        }
    }
    Ok(())
}

/// One body step from every bounded state, split into transitions between
/// bounded states and exits.
pub fn build_eqs(an: &HBAnalysis) -> Result<EqsSystem> {
    let l = an.states.len();
    let index: HashMap<&[u64], usize> = an.states.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
    let mut a = vec![vec![RationalFunction::zero(); l]; l];
    let mut b = vec![RationalFunction::zero(); l];
    for i in 0..l {
        let p = run_body(an, &an.state_vector(i))?;
        for (s, c) in p.terms() {
            let sigma: Vec<u64> = an.bounded_idx.iter().map(|v| s.0[*v] as u64).collect();
            let full_mono = Monomial::from_pairs(
                s.0.iter()
                    .enumerate()
                    .map(|(v, e)| (an.decls.indeterminate(v), *e)),
            );
            if an.guard.sat(&s.0) {
                let j = *index.get(sigma.as_slice()).ok_or_else(|| {
                    Error::NotHb(format!("state {s} satisfies the guard outside the bounded states"))
                })?;
                let hom = Monomial::from_pairs(
                    an.homogeneous_idx
                        .iter()
                        .map(|v| (an.decls.indeterminate(*v), s.0[*v])),
                );
                a[i][j] = &a[i][j] + &(c * &mono_rf(&hom));
            } else {
                b[i] = &b[i] + &(c * &mono_rf(&full_mono));
            }
        }
    }
    Ok(EqsSystem {
        states: an.states.clone(),
        a,
        b,
    })
}

fn mono_rf(m: &Monomial) -> RationalFunction {
    RationalFunction::from_poly(crate::algebra::Polynomial::term(Rational::one(), m.clone()))
}

/// How parameters are treated when deciding whether an edge exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EdgePolicy {
    /// A coefficient that is a nonzero expression in parameters is an edge.
    #[default]
    Generic,
    /// Refuse to decide edges that depend on parameters.
    Strict,
}

fn edge(r: &RationalFunction, vars: &[Symbol], policy: EdgePolicy) -> Result<bool> {
    if r.is_zero() {
        return Ok(false);
    }
    let at_one = match r.eval_at_one(vars) {
        Limit::Value(v) => v,
        Limit::Divergent => return Ok(true),
    };
    match at_one.constant_value() {
        Some(c) => Ok(!c.is_zero()),
        None if policy == EdgePolicy::Generic => Ok(!at_one.is_zero()),
        None => Err(Error::ParameterAtBoundary(at_one.to_string())),
    }
}

/// Bounded states from which the exit can never be reached.
pub fn restrict_zero(sys: &EqsSystem, vars: &[Symbol], policy: EdgePolicy) -> Result<Vec<usize>> {
    let l = sys.len();
    let mut reach = vec![false; l];
    for (i, r) in reach.iter_mut().enumerate() {
        *r = edge(&sys.b[i], vars, policy)?;
    }
    let mut edges = vec![vec![false; l]; l];
    for i in 0..l {
        for j in 0..l {
            edges[i][j] = edge(&sys.a[i][j], vars, policy)?;
        }
    }
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..l {
            if !reach[i] && (0..l).any(|j| edges[i][j] && reach[j]) {
                reach[i] = true;
                changed = true;
            }
        }
    }
    Ok((0..l).filter(|i| !reach[*i]).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct Validation {
    pub mass: Limit,
    /// `None` when the mass still depends on parameters.
    pub mass_in_unit_interval: Option<bool>,
    /// `None` for entries with parameters.
    pub nonnegative_to_order: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub states: Vec<Vec<u64>>,
    pub zero_set: Vec<usize>,
    pub omega: Vec<RationalFunction>,
    pub validation: Vec<Validation>,
    pub validate_order: u32,
}

/// Solves `(I - A) y = b` with the rows in `zero_set` forced to 0.
pub fn solve(sys: &EqsSystem, zero_set: &[usize], vars: &[Symbol], validate_order: u32) -> Result<SolveReport> {
    let live: Vec<usize> = (0..sys.len()).filter(|i| !zero_set.contains(i)).collect();
    let n = live.len();
    // augmented matrix [I - A | b]
    let mut m: Vec<Vec<RationalFunction>> = live
        .iter()
        .map(|&i| {
            let mut row: Vec<RationalFunction> = live
                .iter()
                .map(|&j| {
                    let id = if i == j { RationalFunction::one() } else { RationalFunction::zero() };
                    &id - &sys.a[i][j]
                })
                .collect();
            row.push(sys.b[i].clone());
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .find(|r| !m[*r][col].is_zero())
            .ok_or(Error::SingularAfterRestriction)?;
        m.swap(col, piv);
        let inv = m[col][col].recip()?;
        let pivot_row: Vec<RationalFunction> = m[col].iter().map(|x| x * &inv).collect();
        m[col] = pivot_row;
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone();
            for k in col..=n {
                let d = &f * &m[col][k];
                m[r][k] = &m[r][k] - &d;
            }
        }
    }
    let mut omega = vec![RationalFunction::zero(); sys.len()];
    for (r, &i) in live.iter().enumerate() {
        omega[i] = m[r][n].clone();
    }
    for &i in &live {
        let mut res = &omega[i] - &sys.b[i];
        for j in 0..sys.len() {
            res = &res - &(&sys.a[i][j] * &omega[j]);
        }
        if !res.is_zero() {
            return Err(Error::NotHb(format!("nonzero residual {res} in row {i}")));
        }
    }
    let validation = omega.iter().map(|w| validate(w, vars, validate_order)).collect();
    Ok(SolveReport {
        states: sys.states.clone(),
        zero_set: zero_set.to_vec(),
        omega,
        validation,
        validate_order,
    })
}

fn validate(w: &RationalFunction, vars: &[Symbol], order: u32) -> Validation {
    let mass = w.eval_at_one(vars);
    let mass_in_unit_interval = match &mass {
        Limit::Value(v) => v.constant_value().map(|c| !c.is_negative() && c <= Rational::one()),
        Limit::Divergent => Some(false),
    };
    let ground = w.symbols().iter().all(|s| vars.contains(s));
    let nonnegative_to_order = ground.then(|| {
        let bounds = Bounds::uniform(vars.to_vec(), order);
        match crate::algebra::series_expand(&ClosedFormExpr::Leaf(w.clone()), &bounds) {
            Ok(f) => f
                .terms()
                .all(|(_, c)| c.constant_value().is_some_and(|x| !x.is_negative())),
            Err(_) => false,
        }
    });
    Validation {
        mass,
        mass_in_unit_interval,
        nonnegative_to_order,
    }
}

/// `⟦while⟧(G)` from the per-state solutions, by linearity in `G` and
/// homogeneity of the counters.
pub fn apply_solution(an: &HBAnalysis, rep: &SolveReport, g: &RationalFunction) -> Result<RationalFunction> {
    let d = &an.decls;
    let mut acc = cf_boolean(d, g, &Guard::not(an.guard.clone()))?;
    let ones: HashMap<Symbol, RationalFunction> = an
        .bounded_idx
        .iter()
        .map(|v| (d.indeterminate(*v), RationalFunction::one()))
        .collect();
    for (i, w) in rep.omega.iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        let mut slice = g.clone();
        for (k, v) in an.bounded_idx.iter().enumerate() {
            slice = cf_filter_eq(&slice, d.indeterminate(*v), an.states[i][k] as u32)?;
        }
        if slice.is_zero() {
            continue;
        }
        let h = slice.substitute(&ones)?;
        acc = acc + h * w.clone();
    }
    Ok(acc)
}

/// Everything `solve` produces for one HB loop.
#[derive(Clone, Debug, Serialize)]
pub struct LoopSolution {
    pub analysis: HBAnalysis,
    pub system: EqsSystem,
    pub report: SolveReport,
}

pub fn solve_loop(
    decls: &Declarations,
    lp: &Program,
    params: &HashMap<Symbol, Rational>,
    policy: EdgePolicy,
    validate_order: u32,
) -> Result<LoopSolution> {
    let analysis = classify(decls, lp)?;
    check_homogeneity(&analysis)?;
    let system = build_eqs(&analysis)?.pin(params)?;
    let vars = decls.indeterminates();
    let zero = restrict_zero(&system, &vars, policy)?;
    let report = solve(&system, &zero, &vars, validate_order)?;
    Ok(LoopSolution {
        analysis,
        system,
        report,
    })
}

/// A program of the form `pre; while (B) { P }; post` with loop-free `pre`
/// and `post`, run on `input`.
#[derive(Clone, Debug, Serialize)]
pub struct ProgramSolution {
    pub solution: LoopSolution,
    pub loop_input: RationalFunction,
    pub output: RationalFunction,
}

pub fn solve_program(
    src: &Source,
    input: &RationalFunction,
    params: &HashMap<Symbol, Rational>,
    policy: EdgePolicy,
    validate_order: u32,
) -> Result<ProgramSolution> {
    let items = src.program.statements();
    let loops: Vec<usize> = (0..items.len())
        .filter(|i| matches!(items[*i], Program::While(..)))
        .collect();
    let k = match loops.as_slice() {
        [k] => *k,
        [] => return Err(Error::NotHb("the program has no loop".into())),
        _ => return Err(Error::NotHb("the program has more than one top-level loop".into())),
    };
    let pre = Program::seq(items[..k].iter().cloned());
    let post = Program::seq(items[k + 1..].iter().cloned());
    if !pre.is_loop_free() || !post.is_loop_free() {
        return Err(Error::NotHb("code around the loop contains loops".into()));
    }
    let d = &src.decls;
    let pin = |r: &RationalFunction| -> Result<RationalFunction> {
        let map = params
            .iter()
            .map(|(s, v)| (*s, RationalFunction::constant(v.clone())))
            .collect();
        r.substitute(&map)
    };
    let solution = solve_loop(d, &items[k], params, policy, validate_order)?;
    let loop_input = pin(&cf_exec(d, &pre, input)?)?;
    let after = apply_solution(&solution.analysis, &solution.report, &loop_input)?;
    let output = pin(&cf_exec(d, &post, &after)?)?;
    Ok(ProgramSolution {
        solution,
        loop_input,
        output,
    })
}
