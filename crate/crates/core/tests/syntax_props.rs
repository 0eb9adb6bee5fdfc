use std::collections::BTreeSet;

use pgfkit::syntax::{guard_states, parse, render_source, Source, ValueSet};
use pgfkit::testing::{declarations, random_expr, random_guard, random_program};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn render_then_parse_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=3);
        let with_loop = rng.gen_bool(0.5);
        let src = Source {
            decls: declarations(n),
            program: random_program(&mut rng, n, with_loop),
        };
        let text = render_source(&src);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, src, "{}", text);
    }

    #[test]
    fn guard_states_match_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let max_const = rng.gen_range(1..=4);
        let g = random_guard(&mut rng, 2, max_const, 3);
        let top = 10 * max_const as u32;
        let mut seen = BTreeSet::new();
        for x in 0..=top {
            for y in 0..=top {
                if g.sat(&[x, y]) {
                    seen.insert(x as u64);
                }
            }
        }
        match guard_states(&g, 0) {
            ValueSet::Finite(vals) => prop_assert_eq!(vals, seen, "{:?}", g),
            ValueSet::Unbounded => prop_assert!(
                seen.iter().any(|x| *x > 5 * max_const),
                "unbounded but no large witness for {:?}", g
            ),
        }
    }

    #[test]
    fn expressions_are_total_and_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_expr(&mut rng, 3);
        for _ in 0..20 {
            let s: Vec<u32> = (0..3).map(|_| rng.gen_range(0..50)).collect();
            let v = rng.gen_range(0..3);
            let mut t = s.clone();
            t[v] += rng.gen_range(1..5);
            prop_assert!(e.eval(&t) >= e.eval(&s));
            if e.monus == 0 && e.mentions(v) {
                prop_assert!(e.eval(&t) > e.eval(&s));
            }
        }
    }
}
