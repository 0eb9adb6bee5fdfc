use std::collections::HashMap;

use num_traits::{One, Zero};
use pgfkit::algebra::{series_expand, ClosedFormExpr, Limit, Rational, RationalFunction};
use pgfkit::fps::{Bounds, Preceq, StateVector, TruncatedFPS};
use pgfkit::hb::{build_eqs, classify, solve_loop, EdgePolicy};
use pgfkit::semantics::{exact_step, loop_iterate, Config};
use pgfkit::syntax::Program;
use pgfkit::testing::random_hb_loop;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N: u32 = 10;

fn ground(r: &RationalFunction) -> Rational {
    r.constant_value().expect("ground")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_hb_loops_solve(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = random_hb_loop(&mut rng);
        let vars = src.decls.indeterminates();
        let sol = solve_loop(&src.decls, &src.program, &HashMap::new(), EdgePolicy::Generic, 6)
            .map_err(|e| TestCaseError::fail(format!("{e}: {:?}", src.program)))?;
        let (sys, rep) = (&sol.system, &sol.report);
        prop_assert!(sol.analysis.states.len() <= 3);

        // residual of (I - A) w = b off the zero set, w = 0 on it
        for i in 0..sys.len() {
            if rep.zero_set.contains(&i) {
                prop_assert!(rep.omega[i].is_zero());
                continue;
            }
            let mut lhs = rep.omega[i].clone();
            for j in 0..sys.len() {
                lhs = &lhs - &(&sys.a[i][j] * &rep.omega[j]);
            }
            prop_assert_eq!(lhs, sys.b[i].clone());
        }

        // masses of the per-state solutions are probabilities
        for w in &rep.omega {
            match w.eval_at_one(&vars) {
                Limit::Value(m) => {
                    let m = ground(&m);
                    prop_assert!(m >= Rational::zero() && m <= Rational::one());
                }
                Limit::Divergent => prop_assert!(false, "divergent mass"),
            }
        }

        // series agreement with Kleene iteration from each bounded state
        let Program::While(guard, body) = &src.program else { unreachable!() };
        let bounds = Bounds::new(vars.clone(), vec![6, N, N]);
        for (i, w) in rep.omega.iter().enumerate() {
            let sigma = sol.analysis.state_vector(i);
            let start = TruncatedFPS::monomial(&bounds, sigma, RationalFunction::one());
            let it = loop_iterate(guard, body, &start, Config { max_unroll: 30 }).unwrap();
            let prefix = it.settled_prefix.clone().with_lost_mass(RationalFunction::zero());
            let series = series_expand(&ClosedFormExpr::Leaf(w.clone()), &bounds).unwrap();
            if it.exact {
                prop_assert_eq!(prefix.coeffs(), series.coeffs());
            } else {
                prop_assert_eq!(prefix.preceq(&series, None).unwrap(), Preceq::Holds);
                let gap = &series.mass() - &prefix.mass();
                let pending = &it.live.mass() + &it.lost_mass;
                prop_assert!(ground(&gap) <= ground(&pending));
            }
        }
    }

    #[test]
    fn counters_are_homogeneous(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = random_hb_loop(&mut rng);
        let an = classify(&src.decls, &src.program).unwrap();
        prop_assert!(an.homogeneous.iter().all(|v| v == "c" || v == "d"));
        let sys = build_eqs(&an).unwrap();
        prop_assert_eq!(sys.len(), an.states.len());
        let vars = src.decls.indeterminates();
        for i in 0..an.states.len() {
            let sigma = an.state_vector(i);
            let base = exact_step(an.body(), vars.clone(), &sigma).unwrap();
            for v in 1..3 {
                let mut bumped = sigma.0.clone();
                bumped[v] += 1;
                let shifted = exact_step(an.body(), vars.clone(), &StateVector(bumped)).unwrap();
                let mut want: Vec<(Vec<u32>, RationalFunction)> = base
                    .terms()
                    .map(|(s, c)| {
                        let mut t = s.0.clone();
                        t[v] += 1;
                        (t, c.clone())
                    })
                    .collect();
                want.sort_by(|a, b| a.0.cmp(&b.0));
                let got: Vec<(Vec<u32>, RationalFunction)> =
                    shifted.terms().map(|(s, c)| (s.0.clone(), c.clone())).collect();
                prop_assert_eq!(got, want);
            }
        }
    }
}
