use std::collections::{BTreeMap, BTreeSet};

use num_integer::Integer;

use super::ast::{Atom, Cmp, Guard};

/// Values a variable can take inside a guard.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValueSet {
    Finite(BTreeSet<u64>),
    Unbounded,
}

impl ValueSet {
    pub fn finite(&self) -> Option<&BTreeSet<u64>> {
        match self {
            ValueSet::Finite(s) => Some(s),
            ValueSet::Unbounded => None,
        }
    }
}

fn negate_atom(a: Atom) -> Vec<Vec<Atom>> {
    match a {
        Atom::Cmp { var, op, value } => vec![vec![Atom::Cmp {
            var,
            op: op.negate(),
            value,
        }]],
        Atom::Mod { var, modulus, residue } => (0..modulus)
            .filter(|r| *r != residue)
            .map(|r| {
                vec![Atom::Mod {
                    var,
                    modulus,
                    residue: r,
                }]
            })
            .collect(),
    }
}

/// Disjunctive normal form: a list of conjunctions of atoms.
pub fn dnf(g: &Guard) -> Vec<Vec<Atom>> {
    dnf_signed(g, true)
}

fn dnf_signed(g: &Guard, positive: bool) -> Vec<Vec<Atom>> {
    match (g, positive) {
        (Guard::True, true) | (Guard::False, false) => vec![vec![]],
        (Guard::True, false) | (Guard::False, true) => vec![],
        (Guard::Atom(a), true) => vec![vec![*a]],
        (Guard::Atom(a), false) => negate_atom(*a),
        (Guard::Not(h), p) => dnf_signed(h, !p),
        (Guard::Or(a, b), true) | (Guard::And(a, b), false) => {
            let mut out = dnf_signed(a, positive);
            out.extend(dnf_signed(b, positive));
            out
        }
        (Guard::And(a, b), true) | (Guard::Or(a, b), false) => {
            let left = dnf_signed(a, positive);
            let right = dnf_signed(b, positive);
            let mut out = Vec::new();
            for l in &left {
                for r in &right {
                    let mut c = l.clone();
                    c.extend(r.iter().copied());
                    out.push(c);
                }
            }
            out
        }
    }
}

/// Constraints of one conjunction on one variable.
struct Range<'a> {
    lo: u64,
    hi: Option<u64>,
    atoms: Vec<&'a Atom>,
}

impl<'a> Range<'a> {
    fn of(atoms: &[&'a Atom]) -> Option<Range<'a>> {
        let mut r = Range {
            lo: 0,
            hi: None,
            atoms: atoms.to_vec(),
        };
        for a in atoms {
            if let Atom::Cmp { op, value, .. } = **a {
                let (lo, hi) = match op {
                    Cmp::Lt if value == 0 => return None,
                    Cmp::Lt => (0, Some(value - 1)),
                    Cmp::Le => (0, Some(value)),
                    Cmp::Eq => (value, Some(value)),
                    Cmp::Ge => (value, None),
                    Cmp::Gt => (value + 1, None),
                    Cmp::Ne => (0, None),
                };
                r.lo = r.lo.max(lo);
                if let Some(h) = hi {
                    r.hi = Some(r.hi.map_or(h, |x| x.min(h)));
                }
            }
        }
        if r.hi.is_some_and(|h| h < r.lo) {
            return None;
        }
        Some(r)
    }

    fn holds(&self, x: u64) -> bool {
        self.atoms.iter().all(|a| a.holds(x))
    }

    fn values(&self) -> Option<BTreeSet<u64>> {
        let hi = self.hi?;
        Some((self.lo..=hi).filter(|x| self.holds(*x)).collect())
    }

    /// Whether infinitely many values satisfy the constraints; only
    /// meaningful without an upper bound.
    fn satisfiable_unbounded(&self) -> bool {
        let period = self
            .atoms
            .iter()
            .filter_map(|a| match a {
                Atom::Mod { modulus, .. } => Some(*modulus),
                _ => None,
            })
            .fold(1u64, |acc, m| acc.lcm(&m));
        let holes = self.atoms.len() as u64 + 1;
        (self.lo..self.lo + period * holes).any(|x| self.holds(x))
    }
}

/// Exact set of values of `var` over all states satisfying `g`, or
/// `Unbounded` when some satisfiable disjunct leaves it without an upper
/// bound. Unsatisfiable disjuncts are ignored.
pub fn guard_states(g: &Guard, var: usize) -> ValueSet {
    let mut out = BTreeSet::new();
    for conj in dnf(g) {
        let mut by_var: BTreeMap<usize, Vec<&Atom>> = BTreeMap::new();
        for a in &conj {
            by_var.entry(a.var()).or_default().push(a);
        }
        let mut ranges = BTreeMap::new();
        let mut sat = true;
        for (v, atoms) in &by_var {
            match Range::of(atoms) {
                Some(r) => {
                    let ok = match r.values() {
                        Some(vals) => !vals.is_empty(),
                        None => r.satisfiable_unbounded(),
                    };
                    if !ok {
                        sat = false;
                        break;
                    }
                    ranges.insert(*v, r);
                }
                None => {
                    sat = false;
                    break;
                }
            }
        }
        if !sat {
            continue;
        }
        match ranges.get(&var).and_then(Range::values) {
            Some(vals) => out.extend(vals),
            None => return ValueSet::Unbounded,
        }
    }
    ValueSet::Finite(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equality_atom() {
        let g = Guard::cmp(0, Cmp::Eq, 1);
        assert_eq!(guard_states(&g, 0), ValueSet::Finite([1].into()));
    }

    #[test]
    fn cowboys_guard() {
        let g = Guard::and(Guard::cmp(0, Cmp::Eq, 0), Guard::cmp(1, Cmp::Le, 1));
        assert_eq!(guard_states(&g, 1), ValueSet::Finite([0, 1].into()));
        assert_eq!(guard_states(&g, 0), ValueSet::Finite([0].into()));
        assert_eq!(guard_states(&g, 2), ValueSet::Unbounded);
    }

    #[test]
    fn open_guard() {
        assert_eq!(guard_states(&Guard::cmp(0, Cmp::Gt, 0), 0), ValueSet::Unbounded);
    }

    #[test]
    fn unsatisfiable_and_modular() {
        let g = Guard::cmp(0, Cmp::Lt, 0);
        assert_eq!(guard_states(&g, 0), ValueSet::Finite(BTreeSet::new()));
        let g = Guard::and(Guard::cmp(0, Cmp::Le, 7), Guard::not(Guard::modulo(0, 3, 0)));
        assert_eq!(guard_states(&g, 0), ValueSet::Finite([1, 2, 4, 5, 7].into()));
        let g = Guard::and(Guard::modulo(0, 2, 0), Guard::modulo(0, 2, 1));
        assert_eq!(guard_states(&g, 1), ValueSet::Finite(BTreeSet::new()));
    }

    #[test]
    fn sat_examples() {
        assert!(Guard::modulo(0, 2, 0).sat(&[4]));
        let g = Guard::and(Guard::cmp(0, Cmp::Le, 3), Guard::not(Guard::cmp(0, Cmp::Eq, 2)));
        assert!(!g.sat(&[2]));
        let cow = Guard::and(Guard::cmp(0, Cmp::Eq, 0), Guard::cmp(1, Cmp::Le, 1));
        assert!(cow.sat(&[0, 1, 5, 5]));
    }
}
