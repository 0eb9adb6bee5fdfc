//! Parsing of flag values: parameter pins, grids, bounds and inputs.

use std::collections::{BTreeMap, HashMap};

use pgfkit::algebra::rational::parse_rational;
use pgfkit::algebra::{parse_expr, ClosedFormExpr, Polynomial, Rational, RationalFunction, Symbol};
use pgfkit::syntax::{Declarations, ProbExpr, Program};

/// Bound used for variables missing from `--bounds`.
pub const DEFAULT_BOUND: u32 = 16;

/// Splits `a=1,b<=2` style lists into (name, value) pairs. Both `=`,
/// `<=` and `≤` separate a name from its value.
fn pairs(s: &str) -> Result<Vec<(String, String)>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, v) = p
                .split_once("<=")
                .or_else(|| p.split_once('≤'))
                .or_else(|| p.split_once('='))
                .ok_or_else(|| format!("expected name=value, got '{p}'"))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn nat(name: &str, v: &str) -> Result<u32, String> {
    v.parse().map_err(|_| format!("'{v}' for {name} is not a natural number"))
}

/// Parameter values such as `a=1/3,b=1/2`, possibly spread over several flags.
pub fn params(flags: &[String]) -> Result<BTreeMap<String, Rational>, String> {
    let mut out = BTreeMap::new();
    for f in flags {
        for (k, v) in pairs(f)? {
            let q = parse_rational(&v).ok_or_else(|| format!("'{v}' for {k} is not a rational number"))?;
            out.insert(k, q);
        }
    }
    Ok(out)
}

pub fn symbol_map(p: &BTreeMap<String, Rational>) -> HashMap<Symbol, Rational> {
    p.iter().map(|(k, v)| (Symbol::new(k), v.clone())).collect()
}

pub fn point(p: &BTreeMap<String, Rational>) -> Vec<(Symbol, Rational)> {
    p.iter().map(|(k, v)| (Symbol::new(k), v.clone())).collect()
}

/// Pins of program parameters must name declared parameters and lie in [0, 1].
pub fn check_pins(d: &Declarations, p: &BTreeMap<String, Rational>) -> Result<(), String> {
    let zero = Rational::from_integer(0.into());
    let one = Rational::from_integer(1.into());
    for (k, v) in p {
        if !d.is_param(k) {
            return Err(format!("'{k}' is not a declared parameter"));
        }
        if *v < zero || *v > one {
            return Err(format!("parameter {k} = {v} is outside [0, 1]"));
        }
    }
    Ok(())
}

/// Replaces pinned parameters in choice probabilities by their values.
pub fn pin_program(p: &Program, pins: &BTreeMap<String, Rational>) -> Program {
    match p {
        Program::Skip | Program::Assign(..) => p.clone(),
        Program::Seq(v) => Program::Seq(v.iter().map(|q| pin_program(q, pins)).collect()),
        Program::Choice(pr, a, b) => {
            let pr = match pr {
                ProbExpr::Param(n) if pins.contains_key(n) => ProbExpr::Literal(pins[n].clone()),
                other => other.clone(),
            };
            Program::choice(pr, pin_program(a, pins), pin_program(b, pins))
        }
        Program::Ite(g, a, b) => Program::ite(g.clone(), pin_program(a, pins), pin_program(b, pins)),
        Program::While(g, body) => Program::while_loop(g.clone(), pin_program(body, pins)),
    }
}

/// Inclusive grid bounds such as `i<=10,j<=10`.
pub fn grid(s: &str) -> Result<BTreeMap<String, u32>, String> {
    pairs(s)?.into_iter().map(|(k, v)| Ok((k.clone(), nat(&k, &v)?))).collect()
}

/// Per-variable degree bounds; unnamed variables get [`DEFAULT_BOUND`].
pub fn bounds(d: &Declarations, s: Option<&str>) -> Result<Vec<u32>, String> {
    let mut out = vec![DEFAULT_BOUND; d.vars.len()];
    if let Some(s) = s {
        for (k, v) in pairs(s)? {
            let i = d.var_index(&k).ok_or_else(|| format!("'{k}' is not a declared variable"))?;
            out[i] = nat(&k, &v)?;
        }
    }
    Ok(out)
}

/// An input distribution: a single state `x=1,c=0` or a PGF expression.
pub enum Input {
    State(Vec<u32>),
    Pgf(ClosedFormExpr),
}

pub fn input(d: &Declarations, s: &str, pins: &BTreeMap<String, Rational>) -> Result<Input, String> {
    if s.contains('=') {
        let mut st = vec![0; d.vars.len()];
        for (k, v) in pairs(s)? {
            let i = d.var_index(&k).ok_or_else(|| format!("'{k}' is not a declared variable"))?;
            st[i] = nat(&k, &v)?;
        }
        return Ok(Input::State(st));
    }
    let e = parse_expr(s).map_err(|e| format!("input: {e}"))?;
    Ok(Input::Pgf(match e.to_rational() {
        Ok(r) => ClosedFormExpr::Leaf(pin_rational(&r, pins).map_err(|e| format!("input: {e}"))?),
        Err(_) => e,
    }))
}

pub fn state_monomial(d: &Declarations, st: &[u32]) -> RationalFunction {
    let mut m = Polynomial::one();
    for (v, e) in st.iter().enumerate() {
        for _ in 0..*e {
            m = &m * &Polynomial::var(d.indeterminate(v));
        }
    }
    RationalFunction::from_poly(m)
}

pub fn pin_rational(r: &RationalFunction, pins: &BTreeMap<String, Rational>) -> pgfkit::Result<RationalFunction> {
    let map = pins
        .iter()
        .map(|(k, v)| (Symbol::new(k), RationalFunction::constant(v.clone())))
        .collect();
    r.substitute(&map)
}

/// Declarations read off a bare PGF: uppercase symbols are indeterminates
/// of lowercase variables, everything else is a parameter.
pub fn pgf_declarations(g: &RationalFunction, vars: Option<&str>) -> Declarations {
    let mut vs: Vec<String> = match vars {
        Some(v) => v.split(',').map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect(),
        None => Vec::new(),
    };
    let mut ps = Vec::new();
    for s in g.symbols() {
        let n = s.name();
        if n.chars().next().is_some_and(char::is_uppercase) {
            let low = n.to_lowercase();
            if !vs.contains(&low) {
                vs.push(low);
            }
        } else {
            ps.push(n.to_string());
        }
    }
    if vars.is_none() {
        vs.sort();
    }
    Declarations::new(vs, ps)
}
