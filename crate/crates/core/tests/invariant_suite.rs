use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use pgfkit::algebra::parse_rational_function;
use pgfkit::invariants::{check, parse_spec, Aggregate, CheckOptions, Conclusion, Mass, Status};
use pgfkit::syntax::{parse, Source};

fn load(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../programs").join(name);
    std::fs::read_to_string(p).unwrap()
}

fn program(name: &str) -> Source {
    parse(&load(name)).unwrap()
}

fn opts(grid: &[(&str, u32)], order: u32) -> CheckOptions {
    CheckOptions {
        grid: grid.iter().map(|(s, v)| (s.to_string(), *v)).collect::<BTreeMap<_, _>>(),
        order,
        valuation: HashMap::new(),
    }
}

#[test]
fn geometric_candidate_is_the_semantics() {
    let s = program("geometric.pgcl");
    let spec = parse_spec(&load("geometric.inv")).unwrap();
    let v = check(&spec, &s.decls, &s.program, &opts(&[("i", 10), ("j", 10)], 12)).unwrap();
    assert_eq!(v.aggregate, Aggregate::SuperinvariantOnGrid);
    assert!(v.points.iter().all(|p| p.status == Status::Equal));
    assert_eq!(v.conclusions, vec![Conclusion::ExactSemantics]);
}

#[test]
fn random_walk_parity_candidate_is_proper() {
    let s = program("random_walk.pgcl");
    let spec = parse_spec(&load("random_walk_f.inv")).unwrap();
    let v = check(&spec, &s.decls, &s.program, &opts(&[("i", 8), ("j", 8)], 32)).unwrap();
    assert_eq!(v.aggregate, Aggregate::SuperinvariantOnGrid);
    assert_eq!(v.point(&[("i", 2), ("j", 0)]).unwrap().mass, Mass::Divergent);
    assert!(v.conclusions.iter().any(|c| matches!(c, Conclusion::Proper { .. })));
}

#[test]
fn random_walk_sqrt_candidate_is_a_fixed_point_to_order() {
    let s = program("random_walk.pgcl");
    let spec = parse_spec(&load("random_walk_h.inv")).unwrap();
    let v = check(&spec, &s.decls, &s.program, &opts(&[("i", 8), ("j", 8)], 32)).unwrap();
    assert_eq!(v.aggregate, Aggregate::SuperinvariantOnGrid);
    for p in &v.points {
        assert!(
            matches!(p.status, Status::Equal | Status::EqualToOrder { order: 32 }),
            "{:?}",
            p
        );
        assert_eq!(p.mass, Mass::Value(parse_rational_function("1").unwrap()));
    }
}

#[test]
fn non_ast_candidate_bounds_termination() {
    let s = program("non_ast.pgcl");
    let spec = parse_spec(&load("non_ast.inv")).unwrap();
    let v = check(&spec, &s.decls, &s.program, &opts(&[("i", 12)], 8)).unwrap();
    assert_eq!(v.aggregate, Aggregate::SuperinvariantOnGrid);
    assert!(v.points.iter().all(|p| p.status == Status::Equal));
    let m = &v.point(&[("i", 3)]).unwrap().mass;
    assert_eq!(*m, Mass::Value(parse_rational_function("1 - 2/e").unwrap()));
    assert!(v
        .conclusions
        .iter()
        .any(|c| matches!(c, Conclusion::NotAlmostSurelyTerminating { .. })));
}
