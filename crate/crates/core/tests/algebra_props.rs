use std::collections::HashMap;

use num_traits::Zero;
use pgfkit::algebra::rational::rat;
use pgfkit::algebra::{series_expand, ClosedFormExpr, Polynomial, Rational, RationalFunction, Symbol};
use pgfkit::fps::Bounds;
use pgfkit::testing::{random_polynomial, random_ratfun};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vars() -> Vec<Symbol> {
    vec![Symbol::new("X"), Symbol::new("Y")]
}

fn nonzero_poly(rng: &mut ChaCha8Rng, v: &[Symbol]) -> Polynomial {
    loop {
        let p = random_polynomial(rng, v, 3, 2);
        if !p.is_zero() {
            return p;
        }
    }
}

fn leaf(r: &RationalFunction) -> ClosedFormExpr {
    ClosedFormExpr::Leaf(r.clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn common_factors_cancel(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = vars();
        let p = random_polynomial(&mut rng, &v, 3, 2);
        let q = nonzero_poly(&mut rng, &v);
        let r = nonzero_poly(&mut rng, &v);
        let a = RationalFunction::new(&p * &r, &q * &r).unwrap();
        let b = RationalFunction::new(p, q).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn evaluation_is_a_homomorphism(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = vars();
        let a = random_ratfun(&mut rng, &v, rat(1, 1));
        let b = random_ratfun(&mut rng, &v, rat(2, 1));
        let point: HashMap<Symbol, Rational> = v
            .iter()
            .map(|s| (*s, rat(rng.gen_range(-5..=5), rng.gen_range(1..=4))))
            .collect();
        let (Some(x), Some(y)) = (a.eval(&point), b.eval(&point)) else {
            return Ok(());
        };
        for (op, want) in [("+", &x + &y), ("-", &x - &y), ("*", &x * &y)] {
            let c = match op {
                "+" => &a + &b,
                "-" => &a - &b,
                _ => &a * &b,
            };
            // a pole of a or b may cancel in c, never the other way round
            prop_assert_eq!(c.eval(&point), Some(want), "{}", op);
        }
    }

    #[test]
    fn series_expansion_is_multiplicative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = vars();
        let a = random_ratfun(&mut rng, &v, rat(1, 1));
        let b = random_ratfun(&mut rng, &v, rat(-1, 2));
        let bounds = Bounds::uniform(v.clone(), 5);
        let prod = series_expand(&leaf(&(&a * &b)), &bounds).unwrap();
        let sum = series_expand(&leaf(&(&a + &b)), &bounds).unwrap();
        let ea = series_expand(&leaf(&a), &bounds).unwrap();
        let eb = series_expand(&leaf(&b), &bounds).unwrap();
        let m = ea.mul(&eb).unwrap();
        let s = ea.add(&eb).unwrap();
        prop_assert_eq!(prod.coeffs(), m.coeffs());
        prop_assert_eq!(sum.coeffs(), s.coeffs());
    }

    #[test]
    fn derivative_rules(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = vars();
        let x = v[0];
        let a = random_ratfun(&mut rng, &v, rat(1, 1));
        let b = random_ratfun(&mut rng, &v, rat(3, 1));
        let r = RationalFunction::constant(rat(rng.gen_range(-3..=3), 2));
        prop_assert_eq!(
            (&(&r * &a) + &b).derivative(x, 1),
            &(&r * &a.derivative(x, 1)) + &b.derivative(x, 1)
        );
        prop_assert_eq!(
            (&a * &b).derivative(x, 1),
            &(&a.derivative(x, 1) * &b) + &(&a * &b.derivative(x, 1))
        );
        prop_assert_eq!(a.derivative(x, 2), a.derivative(x, 1).derivative(x, 1));
    }

    #[test]
    fn sqrt_squares_back(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = vars();
        let c0 = [rat(1, 1), rat(4, 1), rat(1, 4), rat(9, 4)][rng.gen_range(0..4)].clone();
        let u = random_ratfun(&mut rng, &v, rat(1, 1));
        let u = &(&u - &RationalFunction::constant(u.eval(&v.iter().map(|s| (*s, Rational::zero())).collect()).unwrap()))
            + &RationalFunction::constant(c0);
        let bounds = Bounds::uniform(v.clone(), 4);
        let s = series_expand(&leaf(&u).sqrt(), &bounds).unwrap();
        let eu = series_expand(&leaf(&u), &bounds).unwrap();
        let sq = s.mul(&s).unwrap();
        prop_assert_eq!(sq.coeffs(), eu.coeffs());
        let first = s.coeff(&pgfkit::fps::StateVector(vec![0, 0]));
        prop_assert!(first.constant_value().unwrap() > Rational::zero());
    }
}
