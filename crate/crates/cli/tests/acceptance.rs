//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs the `pgfkit` binary where a criterion is phrased in terms of a
//! command, and seeded randomized loops for the property criteria. A
//! criterion listed in `KNOWN` still prints FAIL when it fails, but does
//! not fail the run.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use pgfkit::algebra::{parse_rational_function, series_expand, ClosedFormExpr, RationalFunction, Symbol};
use pgfkit::closedform::{cf_assign, cf_assign_monus, cf_boolean, cf_filter_eq, cf_filter_le, cf_filter_mod};
use pgfkit::fps::{Bounds, Preceq, StateVector, TruncatedFPS};
use pgfkit::hb::{check_homogeneity, classify, solve_loop, EdgePolicy, LoopSolution};
use pgfkit::semantics::{assign, loop_iterate, transform, Config};
use pgfkit::syntax::{parse, Cmp, Declarations, Expr, Guard, Program};
use pgfkit::testing::{
    declarations, random_bounded_loop, random_expr, random_fps, random_guard, random_hb_loop, random_loop_free,
    random_program, random_rational_pgf, random_rational_pgf_in,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

/// Criteria whose failure is understood and recorded, with the reason.
const KNOWN: &[(u32, &str)] = &[(
    1,
    "the derivative of C/(2-C) at C = 1 is 2, so E[c] = 1 cannot hold for this closed form",
)];

type Check = Result<(), String>;

macro_rules! ensure {
    ($c:expr, $($m:tt)*) => {
        if !$c {
            return Err(format!($($m)*));
        }
    };
}

fn rf(s: &str) -> RationalFunction {
    parse_rational_function(s).unwrap()
}

fn programs(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../programs")
        .join(name)
        .display()
        .to_string()
}

/// Runs the binary and parses its JSON report.
fn pgfkit(args: &[&str]) -> Result<(Value, i32), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_pgfkit"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    let v = serde_json::from_slice(&o.stdout)
        .map_err(|_| format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))?;
    Ok((v, o.status.code().unwrap_or(-1)))
}

fn field(v: &Value, path: &[&str]) -> Result<RationalFunction, String> {
    let mut cur = v;
    for p in path {
        cur = &cur[*p];
    }
    let s = cur.as_str().ok_or_else(|| format!("missing {path:?}"))?;
    parse_rational_function(s).map_err(|e| format!("{path:?} = {s}: {e}"))
}

fn criterion_1() -> Check {
    let (v, code) = pgfkit(&["solve", &programs("geometric.pgcl")])?;
    ensure!(code == 0, "solve exited with {code}");
    let g = field(&v, &["output"])?;
    ensure!(g == rf("C/(2-C)"), "closed form is {g}");
    let mass = field(&v, &["stats", "mass"])?;
    ensure!(mass == rf("1"), "mass is {mass}");
    let ec = field(&v, &["stats", "expectations", "C"])?;
    ensure!(ec == rf("1"), "E[c] is {ec}, expected 1");
    Ok(())
}

fn criterion_2() -> Check {
    let c = programs("cowboys.pgcl");
    let (v, code) = pgfkit(&["solve", &c, "--event", "t = 0", "--at", "a=0,b=0"])?;
    ensure!(code == 0, "solve exited with {code}");
    let g = field(&v, &["output"])?;
    let want = rf("(a*C*X + (1-a)*b*C*D*T*X)/(1-(1-b)*(1-a)*C*D)");
    ensure!(g == want, "closed form is {g}");
    ensure!(g.to_string() == want.to_string(), "rendering differs");
    let win = field(&v["stats"]["events"][0], &["probability"])?;
    ensure!(win == rf("a/(1-(1-a)*(1-b))"), "win probability is {win}");
    let ec = field(&v, &["stats", "expectations", "C"])?;
    ensure!(ec == rf("1/(a+b-a*b)"), "E[c] is {ec}");
    let at0 = &v["at"]["expectations"]["C"];
    ensure!(at0 == "Divergent", "E[c] at a=b=0 is {at0}");
    let (s, _) = pgfkit(&["stats", "--pgf", &g.to_string(), "independence", "C", "D"])?;
    let verdict = &s["results"][0]["value"]["verdict"];
    ensure!(verdict == "dependent", "independence(C, D) is {verdict}");
    Ok(())
}

/// Compares the engine output against the series of the solved closed form
/// over the whole box.
fn compare_prefix(file: &str, extra: &[&str], bounds: &str, unroll: &str, input: &str) -> Check {
    let mut args = vec!["solve", file];
    args.extend(extra);
    let (solved, _) = pgfkit(&args)?;
    let g = field(&solved, &["output"])?;
    let mut args = vec!["analyze", file, "--input", input, "--bounds", bounds, "--max-unroll", unroll];
    args.extend(extra);
    let (an, code) = pgfkit(&args)?;
    ensure!(code == 0, "analyze exited with {code}");
    let src = parse(&std::fs::read_to_string(file).unwrap()).unwrap();
    let vars = src.decls.indeterminates();
    let maxes: Vec<u32> = src
        .decls
        .vars
        .iter()
        .map(|n| an["bounds"][n].as_u64().unwrap() as u32)
        .collect();
    let b = Bounds::new(vars.clone(), maxes);
    let series = series_expand(&ClosedFormExpr::Leaf(g), &b).map_err(|e| e.to_string())?;
    let mut got = BTreeMap::new();
    for t in an["output"]["terms"].as_array().ok_or("no terms")? {
        let st: Vec<u32> = vars.iter().map(|v| t["exps"][v.name()].as_u64().unwrap() as u32).collect();
        got.insert(StateVector(st), field(t, &["coeff"])?);
    }
    ensure!(got.len() == series.len(), "{} entries, closed form has {}", got.len(), series.len());
    for (s, c) in series.terms() {
        ensure!(got.get(s) == Some(c), "entry {s}: engine {:?}, closed form {c}", got.get(s));
    }
    Ok(())
}

fn criterion_3() -> Check {
    // the loop converges; mass leaving c <= 25 never comes back
    compare_prefix(&programs("geometric.pgcl"), &[], "c=25", "100", "X")?;
    // every iteration adds one shot, so with c, d <= 25 all entries have
    // fewer shots than the 60 unrollings and are final
    compare_prefix(&programs("cowboys.pgcl"), &["--params", "a=1/2,b=1/2"], "c=25,d=25", "60", "1")
}

fn invariant(prog: &str, spec: &str, grid: &str, order: &str) -> Result<Value, String> {
    let (v, code) = pgfkit(&["invariant", &programs(prog), "--spec", &programs(spec), "--grid", grid, "--order", order])?;
    ensure!(code == 0, "{spec}: exit {code}, aggregate {}", v["verdict"]["aggregate"]);
    Ok(v["verdict"].clone())
}

fn statuses(v: &Value) -> Vec<String> {
    v["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["status"]["status"].as_str().unwrap().to_string())
        .collect()
}

fn has_conclusion(v: &Value, kind: &str) -> bool {
    v["conclusions"].as_array().unwrap().iter().any(|c| c["kind"] == kind)
}

fn criterion_4() -> Check {
    let geo = invariant("geometric.pgcl", "geometric.inv", "i<=10,j<=10", "16")?;
    ensure!(statuses(&geo).iter().all(|s| s == "equal"), "geometric: not all equal");
    ensure!(statuses(&geo).len() == 121, "geometric: grid has {} points", statuses(&geo).len());
    ensure!(has_conclusion(&geo, "exact_semantics"), "geometric: no exact-semantics conclusion");

    let h = invariant("random_walk.pgcl", "random_walk_h.inv", "i<=8,j<=8", "32")?;
    let hs = statuses(&h);
    ensure!(hs.iter().all(|s| s == "equal" || s == "equal_to_order"), "h: statuses {hs:?}");
    ensure!(hs.iter().any(|s| s == "equal_to_order"), "h: no point compared up to the order");

    let f = invariant("random_walk.pgcl", "random_walk_f.inv", "i<=8,j<=8", "32")?;
    let proper = f["conclusions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["kind"] == "proper")
        .ok_or("f: not reported proper")?;
    ensure!(!proper["divergent_mass_at"].as_array().unwrap().is_empty(), "f: no divergent mass flagged");
    ensure!(
        f["points"].as_array().unwrap().iter().any(|p| p["mass"] == "divergent"),
        "f: no point with divergent mass"
    );

    let e = invariant("non_ast.pgcl", "non_ast.inv", "i<=12", "16")?;
    ensure!(statuses(&e).len() == 13, "non-AST: grid has {} points", statuses(&e).len());
    let at3 = e["points"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["sigma"]["i"] == 3)
        .ok_or("non-AST: no point i = 3")?;
    let m = field(at3, &["mass"])?;
    ensure!(m == rf("1 - 2/e"), "non-AST: f(X^3) has mass {m}");
    ensure!(
        has_conclusion(&e, "not_almost_surely_terminating"),
        "non-AST: no termination bound reported"
    );
    Ok(())
}

fn xy(n: u32) -> Arc<Bounds> {
    Bounds::uniform(vec![Symbol::new("X"), Symbol::new("Y")], n)
}

fn ground(r: &RationalFunction) -> pgfkit::algebra::Rational {
    r.constant_value().expect("ground")
}

const HEALTH_CASES: u64 = 200;

fn criterion_5() -> Check {
    for seed in 0..HEALTH_CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = xy(8);

        let f = random_fps(&mut rng, &b, 6);
        let g = random_guard(&mut rng, 2, 5, 3);
        let parts = f.restrict(&g).add(&f.restrict(&Guard::not(g.clone()))).unwrap();
        ensure!(parts == f, "partition fails for {g:?} (seed {seed})");

        let p = random_loop_free(&mut rng, 2, 3);
        let (f1, f2) = (random_fps(&mut rng, &b, 5), random_fps(&mut rng, &b, 5));
        let r = RationalFunction::constant(pgfkit::algebra::rational::rat(rng.gen_range(1..=5), rng.gen_range(1..=5)));
        let run = |f: &TruncatedFPS| transform(&p, f, Config::default()).unwrap().output;
        let lhs = run(&f1.scale(&r).add(&f2).unwrap());
        let rhs = run(&f1).scale(&r).add(&run(&f2)).unwrap();
        ensure!(lhs == rhs, "linearity fails for {p:?} (seed {seed})");

        let with_loop = rng.gen_bool(0.5);
        let p = random_program(&mut rng, 2, with_loop);
        let f = random_fps(&mut rng, &b, 5);
        let out = transform(&p, &f, Config { max_unroll: 10 }).unwrap().output;
        let total = ground(&out.mass()) + ground(out.lost_mass());
        let input = ground(&f.mass());
        ensure!(total <= input, "mass grows (seed {seed})");
        ensure!(!p.is_loop_free() || total == input, "loop-free program loses mass (seed {seed})");

        let Program::While(guard, body) = random_bounded_loop(&mut rng, 2) else { unreachable!() };
        let f = random_fps(&mut rng, &b, 4);
        let mut prev = loop_iterate(&guard, &body, &f, Config { max_unroll: 0 }).unwrap();
        for n in 1..6 {
            let next = loop_iterate(&guard, &body, &f, Config { max_unroll: n }).unwrap();
            let ok = prev.settled_prefix.preceq(&next.settled_prefix, None) == Ok(Preceq::Holds);
            ensure!(ok, "Kleene prefixes decrease at {n} (seed {seed})");
            prev = next;
        }

        let lp = Program::While(guard.clone(), body.clone());
        let n = rng.gen_range(0..8);
        let whole = transform(&lp, &f, Config { max_unroll: n + 1 }).unwrap().output;
        let once = transform(&body, &f.restrict(&guard), Config { max_unroll: n + 1 }).unwrap().output;
        let rest = transform(&lp, &once, Config { max_unroll: n }).unwrap().output;
        let unrolled = f.restrict(&Guard::not(guard)).add(&rest).unwrap();
        ensure!(whole == unrolled, "unrolling identity fails at n = {n} (seed {seed})");
    }
    Ok(())
}

const ORDER: u32 = 12;
const CF_CASES: u64 = 100;

fn expand(d: &Declarations, g: &RationalFunction, n: u32) -> TruncatedFPS {
    series_expand(&ClosedFormExpr::Leaf(g.clone()), &Bounds::uniform(d.indeterminates(), n)).unwrap()
}

/// A PGF over x, y, z whose denominator avoids the listed variables, so an
/// assignment forgetting one of them sees the whole series.
fn pgf_without(rng: &mut ChaCha8Rng, d: &Declarations, forgotten: &[usize]) -> RationalFunction {
    let den: Vec<Symbol> = (0..3).filter(|v| !forgotten.contains(v)).map(|v| d.indeterminate(v)).collect();
    random_rational_pgf_in(rng, &d.indeterminates(), &den)
}

fn same(got: &TruncatedFPS, want: &TruncatedFPS) -> bool {
    got.coeffs() == want.coeffs()
}

fn criterion_6() -> Check {
    let d = declarations(3);
    let order_box = Bounds::uniform(d.indeterminates(), ORDER);
    for seed in 0..CF_CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + seed);

        let target = rng.gen_range(0..2);
        let e = random_expr(&mut rng, 2);
        let forgotten = if e.mentions(target) { vec![] } else { vec![target] };
        let g = pgf_without(&mut rng, &d, &forgotten);
        let closed = cf_assign(&d, &g, target, &e).map_err(|x| x.to_string())?;
        let want = assign(target, &e, &expand(&d, &g, ORDER + e.monus as u32)).reframe(&order_box);
        ensure!(same(&expand(&d, &closed, ORDER), &want), "cf_assign {e:?} on {g}");

        let (target, source, c) = (rng.gen_range(0..2), rng.gen_range(0..2), rng.gen_range(0..=3u64));
        let forgotten = if target == source { vec![] } else { vec![target] };
        let g = pgf_without(&mut rng, &d, &forgotten);
        let closed = cf_assign_monus(&d, &g, target, source, c).map_err(|x| x.to_string())?;
        let e = Expr::affine(0, [(source, 1)], c);
        let want = assign(target, &e, &expand(&d, &g, ORDER + c as u32)).reframe(&order_box);
        ensure!(same(&expand(&d, &closed, ORDER), &want), "cf_assign_monus on {g}");

        let g = random_rational_pgf(&mut rng, &d.indeterminates());
        let series = expand(&d, &g, ORDER);
        let v = rng.gen_range(0..3);
        let x = d.indeterminate(v);
        let k = rng.gen_range(0..=5u32);
        let le = cf_filter_le(&g, x, k).map_err(|x| x.to_string())?;
        ensure!(same(&expand(&d, &le, ORDER), &series.restrict(&Guard::cmp(v, Cmp::Le, k as u64))), "cf_filter_le");
        let eq = cf_filter_eq(&g, x, k).map_err(|x| x.to_string())?;
        ensure!(same(&expand(&d, &eq, ORDER), &series.restrict(&Guard::cmp(v, Cmp::Eq, k as u64))), "cf_filter_eq");
        let m = rng.gen_range(1..=4u64);
        let r = rng.gen_range(0..m);
        let md = cf_filter_mod(&g, x, m, r).map_err(|x| x.to_string())?;
        ensure!(same(&expand(&d, &md, ORDER), &series.restrict(&Guard::modulo(v, m, r))), "cf_filter_mod {m} {r}");
        let guard = random_guard(&mut rng, 3, 4, 3);
        let b = cf_boolean(&d, &g, &guard).map_err(|x| x.to_string())?;
        ensure!(same(&expand(&d, &b, ORDER), &series.restrict(&guard)), "cf_boolean {guard:?}");
    }
    Ok(())
}

fn residual_is_zero(sol: &LoopSolution) -> Check {
    let (sys, rep) = (&sol.system, &sol.report);
    for i in 0..sys.len() {
        if rep.zero_set.contains(&i) {
            ensure!(rep.omega[i].is_zero(), "zero-set state {i} has a nonzero solution");
            continue;
        }
        let mut lhs = rep.omega[i].clone();
        for j in 0..sys.len() {
            lhs = &lhs - &(&sys.a[i][j] * &rep.omega[j]);
        }
        ensure!(lhs == sys.b[i], "residual at state {i} is {}", &lhs - &sys.b[i]);
    }
    Ok(())
}

fn criterion_7() -> Check {
    let mut loops = Vec::new();
    for name in ["geometric.pgcl", "cowboys.pgcl"] {
        loops.push(parse(&std::fs::read_to_string(programs(name)).unwrap()).unwrap());
    }
    for seed in 0..100 {
        loops.push(random_hb_loop(&mut ChaCha8Rng::seed_from_u64(2_000 + seed)));
    }
    for src in &loops {
        let an = classify(&src.decls, &src.program).map_err(|e| e.to_string())?;
        check_homogeneity(&an).map_err(|e| format!("homogeneity: {e}"))?;
        let sol = solve_loop(&src.decls, &src.program, &HashMap::new(), EdgePolicy::Generic, 6)
            .map_err(|e| e.to_string())?;
        residual_is_zero(&sol)?;
    }
    let (v, code) = pgfkit(&["solve", &programs("random_walk.pgcl")])?;
    ensure!(code == 1 && v["status"] == "rejected", "random walk was not rejected");
    let reason = v["reason"].as_str().unwrap_or("");
    ensure!(
        reason == "x is neither bounded by the guard nor is the guard independent of x",
        "rejection reason: {reason}"
    );
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Check); 7] = [
        (1, "geometric closed form", criterion_1),
        (2, "dueling cowboys", criterion_2),
        (3, "truncated vs closed series", criterion_3),
        (4, "superinvariant suite", criterion_4),
        (5, "healthiness properties", criterion_5),
        (6, "closed-form operation oracles", criterion_6),
        (7, "HB solver certification", criterion_7),
    ];
    let mut unexpected = 0;
    for (n, name, f) in criteria {
        let t = Instant::now();
        let res = f();
        let ms = t.elapsed().as_millis();
        match res {
            Ok(()) => println!("PASS {n} {name} ({ms} ms)"),
            Err(why) => match KNOWN.iter().find(|(k, _)| *k == n) {
                Some((_, reason)) => println!("FAIL {n} {name}: {why} [known: {reason}]"),
                None => {
                    unexpected += 1;
                    println!("FAIL {n} {name}: {why}");
                }
            },
        }
    }
    println!("EXCLUDED 8 meta-theoretic results, covered only by the property suites");
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
