use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn programs(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../programs")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgfkit")).args(args).output().unwrap()
}

fn json(args: &[&str]) -> (Value, i32) {
    let o = run(args);
    let v = serde_json::from_slice(&o.stdout).unwrap_or(Value::Null);
    (v, o.status.code().unwrap())
}

fn scratch(name: &str, body: &str) -> String {
    let dir = std::env::temp_dir().join(format!("pgfkit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn check_reports_diagnostics() {
    let (v, code) = json(&["check", &programs("geometric.pgcl")]);
    assert_eq!((v["schema"].as_u64(), code), (Some(1), 0));
    assert_eq!(v["ok"], true);

    let bad = scratch("prob.pgcl", "vars x;\n{ x := 1 } [3/2] { x := 0 }\n");
    let (v, code) = json(&["check", &bad]);
    assert_eq!(code, 2);
    let msg = v["diagnostics"][0]["message"].as_str().unwrap();
    assert!(msg.contains("outside [0, 1]"), "{msg}");

    let bad = scratch("name.pgcl", "vars x;\ny := 1\n");
    let (v, code) = json(&["check", &bad]);
    assert_eq!(code, 2);
    assert!(v["diagnostics"][0]["message"].as_str().unwrap().contains("undeclared variable 'y'"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["solve"]).status.code(), Some(2));
    assert_eq!(run(&["stats", "--pgf", "C/(2-C)", "frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["stats", "--pgf", "C/(", "mass"]).status.code(), Some(2));
    assert_eq!(run(&["check", "/nonexistent/file.pgcl"]).status.code(), Some(2));
    let g = programs("geometric.pgcl");
    assert_eq!(run(&["analyze", &g, "--bounds", "q=3"]).status.code(), Some(2));
    let c = programs("cowboys.pgcl");
    assert_eq!(run(&["solve", &c, "--params", "a=3/2"]).status.code(), Some(2));
}

#[test]
fn output_is_deterministic() {
    let c = programs("cowboys.pgcl");
    let args = ["solve", c.as_str(), "--event", "t = 0"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let g = programs("geometric.pgcl");
    let args = ["analyze", g.as_str(), "--input", "X", "--bounds", "c=12"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn analyze_examples() {
    let g = programs("geometric.pgcl");
    let (v, code) = json(&["analyze", &g, "--input", "X", "--bounds", "c=12", "--max-unroll", "12"]);
    assert_eq!(code, 0);
    let terms = v["output"]["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 12);
    for t in terms {
        let n = t["exps"]["C"].as_u64().unwrap();
        assert_eq!(t["coeff"], format!("1/{}", 1u64 << n));
    }
    assert_eq!(v["live_mass"], "1/4096");

    let skip = scratch("skip.pgcl", "skip\n");
    let (v, _) = json(&["analyze", &skip]);
    assert_eq!(v["output"]["terms"][0]["coeff"], "1");
    assert_eq!(v["converged"], true);

    // an unpinned parameter stays symbolic
    let c = programs("cowboys.pgcl");
    let (v, code) = json(&["analyze", &c, "--params", "b=1/2", "--max-unroll", "3"]);
    assert_eq!(code, 0);
    let first = &v["output"]["terms"][0];
    assert_eq!(first["exps"]["C"], 1);
    assert_eq!(first["coeff"], "a");
}

#[test]
fn solve_examples() {
    let (v, code) = json(&["solve", &programs("geometric.pgcl")]);
    assert_eq!(code, 0);
    assert_eq!(v["status"], "solved");
    assert_eq!(v["output"], "C/(2 - C)");
    assert_eq!(v["omega"][0]["state"]["x"], 1);

    let (v, code) = json(&["solve", &programs("cowboys.pgcl"), "--params", "a=1/2,b=1/2"]);
    assert_eq!(code, 0);
    assert_eq!(v["stats"]["mass"], "1");
    assert_eq!(v["stats"]["expectations"]["C"], "4/3");

    let (v, code) = json(&["solve", &programs("random_walk.pgcl")]);
    assert_eq!(code, 1);
    assert_eq!(v["status"], "rejected");
    assert!(v["reason"].as_str().unwrap().contains("neither bounded"));

    let (v, code) = json(&["solve", &programs("geometric.pgcl"), "--input", "x=0"]);
    assert_eq!(code, 0);
    assert_eq!(v["output"], "1");
}

#[test]
fn invariant_exit_codes() {
    let g = programs("geometric.pgcl");
    let (v, code) = json(&["invariant", &g, "--spec", &programs("geometric.inv"), "--grid", "i<=3,j<=3"]);
    assert_eq!(code, 0);
    assert_eq!(v["verdict"]["aggregate"], "superinvariant_on_grid");

    let wrong = scratch("wrong.inv", "exponents i -> x, j -> c;\notherwise : X^i * C^j;\n");
    let (v, code) = json(&["invariant", &g, "--spec", &wrong, "--grid", "i<=2,j<=2"]);
    assert_eq!(code, 1);
    assert_eq!(v["verdict"]["aggregate"], "violated");
}

#[test]
fn stats_examples() {
    let (v, code) = json(&["stats", "--pgf", "1", "mass"]);
    assert_eq!(code, 0);
    assert_eq!(v["results"][0]["value"], "1");

    let (v, _) = json(&["stats", "--pgf", "C/(2-C)", "moment", "C", "1", "variance", "C"]);
    assert_eq!(v["results"][0]["query"], "moment C 1");
    assert_eq!(v["results"][1]["value"], "2");

    let g = "(a*C*X + (1-a)*b*C*D*T*X)/(1-(1-b)*(1-a)*C*D)";
    let (v, _) = json(&["stats", "--pgf", g, "independence", "C", "D", "event", "t = 0", "--at", "a=1/2,b=1/2"]);
    assert_eq!(v["results"][0]["value"]["verdict"], "dependent");
    assert_eq!(v["results"][1]["at_point"], "2/3");

    let (v, _) = json(&["stats", "--pgf", "C*X*Y", "independence", "C", "X,Y"]);
    assert_eq!(v["results"][0]["value"]["verdict"], "independent");
}

#[test]
fn text_format() {
    let o = run(&["--format", "text", "solve", &programs("geometric.pgcl")]);
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.contains("output: C/(2 - C)"), "{s}");
}
