use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pgfkit::algebra::{parse_rational_function, series_expand, Limit, RationalFunction, Symbol};
use pgfkit::fps::{Bounds, StateVector, TruncatedFPS};
use pgfkit::hb::{classify, solve_program, EdgePolicy, HBAnalysis, ProgramSolution};
use pgfkit::invariants::{check, parse_spec, Aggregate, CheckOptions, CheckVerdict};
use pgfkit::semantics::{transform, Config};
use pgfkit::stats::{at_point, event_probability, expectation, factorial_moment, independence, marginal, variance};
use pgfkit::syntax::{parse, parse_guard, Declarations, Program, Source};
use pgfkit::Error;

mod opts;
mod text;

const SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(name = "pgfkit", version, about = "Generating-function analysis of probabilistic while-programs")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a program and report diagnostics.
    Check { file: PathBuf },
    /// Run the truncated series semantics.
    Analyze {
        file: PathBuf,
        /// A PGF expression such as `X` or a state such as `x=1,c=0`.
        #[arg(long, default_value = "1")]
        input: String,
        /// Degree bounds such as `c=12,x=1`; other variables get 16.
        #[arg(long)]
        bounds: Option<String>,
        #[arg(long, default_value_t = 100)]
        max_unroll: usize,
        /// Parameter values such as `a=1/2,b=1/2`.
        #[arg(long)]
        params: Vec<String>,
    },
    /// Solve a homogeneous-bounded loop in closed form.
    Solve {
        file: PathBuf,
        #[arg(long)]
        params: Vec<String>,
        /// Input PGF or state; defaults to the first guard state of the loop.
        #[arg(long)]
        input: Option<String>,
        #[arg(long, default_value_t = 8)]
        validate_order: u32,
        /// Guard whose probability on the output is reported; repeatable.
        #[arg(long)]
        event: Vec<String>,
        /// Parameter point at which the statistics are also evaluated.
        #[arg(long)]
        at: Option<String>,
    },
    /// Check a superinvariant candidate on a grid of states.
    Invariant {
        file: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Inclusive exponent bounds such as `i<=10,j<=10`.
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 16)]
        order: u32,
        /// Parameter values used to decide coefficient signs.
        #[arg(long)]
        params: Vec<String>,
    },
    /// Query a closed-form PGF.
    Stats {
        #[arg(long)]
        pgf: String,
        /// Variable order, e.g. `x,c`; by default the uppercase symbols.
        #[arg(long)]
        vars: Option<String>,
        #[arg(long)]
        at: Option<String>,
        /// mass | moment S k | expectation S | variance S | marginal S,.. |
        /// independence S,.. S,.. | event GUARD
        #[arg(required = true, num_args = 1..)]
        queries: Vec<String>,
    },
}

/// Why a command did not succeed.
enum Failure {
    /// Bad flags, unreadable or unparsable input.
    Usage(String),
    /// The analysis ran and came out negative.
    Negative(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } => Failure::Usage(e.to_string()),
            other => Failure::Negative(other.to_string()),
        }
    }
}

type Outcome = Result<(Report, bool), Failure>;

/// A finished report; the flag says whether the analysis was positive.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    command: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

enum Report {
    Check(CheckReport),
    Analyze(AnalyzeReport),
    Solve(Box<SolveOut>),
    Invariant(InvariantReport),
    Stats(StatsReport),
}

fn read(p: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
}

fn load(p: &Path) -> Result<Source, Failure> {
    parse(&read(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
}

#[derive(Serialize)]
pub struct Diagnostic {
    line: usize,
    col: usize,
    message: String,
}

#[derive(Serialize)]
pub struct CheckReport {
    file: String,
    ok: bool,
    diagnostics: Vec<Diagnostic>,
    vars: Vec<String>,
    params: Vec<String>,
    loop_free: bool,
}

fn cmd_check(file: &Path) -> Outcome {
    let src = read(file)?;
    let name = file.display().to_string();
    let r = match parse(&src) {
        Ok(s) => CheckReport {
            file: name,
            ok: true,
            diagnostics: vec![],
            vars: s.decls.vars.clone(),
            params: s.decls.params.clone(),
            loop_free: s.program.is_loop_free(),
        },
        Err(Error::Parse { line, col, message }) => CheckReport {
            file: name,
            ok: false,
            diagnostics: vec![Diagnostic { line, col, message }],
            vars: vec![],
            params: vec![],
            loop_free: false,
        },
        Err(e) => return Err(Failure::Usage(e.to_string())),
    };
    let ok = r.ok;
    Ok((Report::Check(r), ok))
}

#[derive(Serialize)]
pub struct LoopSummary {
    iterations_run: usize,
    converged: bool,
    exact: bool,
    live_mass: RationalFunction,
    lost_mass: RationalFunction,
}

#[derive(Serialize)]
pub struct AnalyzeReport {
    file: String,
    input: String,
    params: BTreeMap<String, String>,
    bounds: BTreeMap<String, u32>,
    max_unroll: usize,
    converged: bool,
    mass: RationalFunction,
    live_mass: RationalFunction,
    lost_mass: RationalFunction,
    output: TruncatedFPS,
    loops: Vec<LoopSummary>,
}

fn show_params(p: &BTreeMap<String, pgfkit::algebra::Rational>) -> BTreeMap<String, String> {
    p.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()
}

fn cmd_analyze(file: &Path, input: &str, bounds: Option<&str>, max_unroll: usize, params: &[String]) -> Outcome {
    let s = load(file)?;
    let d = &s.decls;
    let pins = opts::params(params).map_err(Failure::Usage)?;
    opts::check_pins(d, &pins).map_err(Failure::Usage)?;
    let maxes = opts::bounds(d, bounds).map_err(Failure::Usage)?;
    let b = Bounds::new(d.indeterminates(), maxes.clone());
    let start = match opts::input(d, input, &pins).map_err(Failure::Usage)? {
        opts::Input::State(st) => TruncatedFPS::monomial(&b, StateVector(st), RationalFunction::one()),
        opts::Input::Pgf(e) => series_expand(&e, &b)?,
    };
    let prog = opts::pin_program(&s.program, &pins);
    let out = transform(&prog, &start, Config { max_unroll })?;
    let mut live = RationalFunction::zero();
    let loops = out
        .loops
        .iter()
        .map(|l| {
            let m = l.live.mass();
            live = &live + &m;
            LoopSummary {
                iterations_run: l.iterations_run,
                converged: l.converged,
                exact: l.exact,
                live_mass: m,
                lost_mass: l.lost_mass.clone(),
            }
        })
        .collect();
    let r = AnalyzeReport {
        file: file.display().to_string(),
        input: input.to_string(),
        params: show_params(&pins),
        bounds: d.vars.iter().cloned().zip(maxes).collect(),
        max_unroll,
        converged: out.converged,
        mass: out.output.mass(),
        live_mass: live,
        lost_mass: out.output.lost_mass().clone(),
        output: out.output,
        loops,
    };
    Ok((Report::Analyze(r), true))
}

#[derive(Serialize)]
pub struct StateSolution {
    state: BTreeMap<String, u64>,
    pgf: RationalFunction,
    in_zero_set: bool,
}

#[derive(Serialize)]
pub struct EventResult {
    guard: String,
    probability: Limit,
}

#[derive(Serialize)]
pub struct Summary {
    mass: Limit,
    expectations: BTreeMap<String, Limit>,
    events: Vec<EventResult>,
}

#[derive(Serialize)]
pub struct PointSummary {
    point: BTreeMap<String, String>,
    #[serde(flatten)]
    summary: Summary,
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveOut {
    Solved {
        file: String,
        params: BTreeMap<String, String>,
        input: RationalFunction,
        classification: HBAnalysis,
        system: pgfkit::hb::EqsSystem,
        zero_set: Vec<usize>,
        omega: Vec<StateSolution>,
        validation: Vec<pgfkit::hb::Validation>,
        output: RationalFunction,
        stats: Summary,
        #[serde(skip_serializing_if = "Option::is_none")]
        at: Option<PointSummary>,
    },
    Rejected {
        file: String,
        reason: String,
    },
}

fn summary(d: &Declarations, g: &RationalFunction, events: &[(String, pgfkit::syntax::Guard)]) -> Result<Summary, Failure> {
    let vars = d.indeterminates();
    Ok(Summary {
        mass: g.eval_at_one(&vars),
        expectations: vars.iter().map(|v| (v.name().to_string(), expectation(g, *v, &vars))).collect(),
        events: events
            .iter()
            .map(|(s, b)| {
                Ok(EventResult {
                    guard: s.clone(),
                    probability: event_probability(d, g, b)?,
                })
            })
            .collect::<Result<_, Error>>()?,
    })
}

fn summary_at(s: &Summary, p: &[(Symbol, pgfkit::algebra::Rational)]) -> Summary {
    Summary {
        mass: at_point(&s.mass, p),
        expectations: s.expectations.iter().map(|(k, v)| (k.clone(), at_point(v, p))).collect(),
        events: s
            .events
            .iter()
            .map(|e| EventResult {
                guard: e.guard.clone(),
                probability: at_point(&e.probability, p),
            })
            .collect(),
    }
}

fn the_loop(p: &Program) -> Option<&Program> {
    let mut loops = p.statements().iter().filter(|s| matches!(s, Program::While(..)));
    let l = loops.next()?;
    loops.next().is_none().then_some(l)
}

fn cmd_solve(
    file: &Path,
    params: &[String],
    input: Option<&str>,
    validate_order: u32,
    events: &[String],
    at: Option<&str>,
) -> Outcome {
    let s = load(file)?;
    let d = &s.decls;
    let name = file.display().to_string();
    let pins = opts::params(params).map_err(Failure::Usage)?;
    opts::check_pins(d, &pins).map_err(Failure::Usage)?;
    let point = at.map(|a| opts::params(&[a.to_string()])).transpose().map_err(Failure::Usage)?;
    let guards = events
        .iter()
        .map(|e| Ok((e.clone(), parse_guard(d, e)?)))
        .collect::<Result<Vec<_>, Error>>()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let rejected = |reason: String| Ok((Report::Solve(Box::new(SolveOut::Rejected { file: name.clone(), reason })), false));

    let input = match input {
        Some(i) => match opts::input(d, i, &pins).map_err(Failure::Usage)? {
            opts::Input::State(st) => opts::state_monomial(d, &st),
            opts::Input::Pgf(e) => e.to_rational().map_err(|e| Failure::Usage(format!("input: {e}")))?,
        },
        None => {
            let Some(lp) = the_loop(&s.program) else {
                return rejected("the program does not have exactly one top-level loop".into());
            };
            match classify(d, lp) {
                Ok(an) if !an.states.is_empty() => opts::state_monomial(d, &an.state_vector(0).0),
                Ok(_) => RationalFunction::one(),
                Err(e) => return rejected(e.to_string()),
            }
        }
    };
    let sol: ProgramSolution = match solve_program(&s, &input, &opts::symbol_map(&pins), EdgePolicy::Generic, validate_order) {
        Ok(sol) => sol,
        Err(e @ Error::Parse { .. }) => return Err(Failure::Usage(e.to_string())),
        Err(e) => return rejected(e.to_string()),
    };
    let stats = summary(d, &sol.output, &guards)?;
    let at = point.map(|p| PointSummary {
        point: show_params(&p),
        summary: summary_at(&stats, &opts::point(&p)),
    });
    let an = &sol.solution.analysis;
    let rep = &sol.solution.report;
    let omega = rep
        .states
        .iter()
        .zip(&rep.omega)
        .enumerate()
        .map(|(i, (st, w))| StateSolution {
            state: an.bounded.iter().map(|b| b.var.clone()).zip(st.iter().copied()).collect(),
            pgf: w.clone(),
            in_zero_set: rep.zero_set.contains(&i),
        })
        .collect();
    let out = SolveOut::Solved {
        file: name,
        params: show_params(&pins),
        input,
        classification: an.clone(),
        system: sol.solution.system.clone(),
        zero_set: rep.zero_set.clone(),
        omega,
        validation: rep.validation.clone(),
        output: sol.output.clone(),
        stats,
        at,
    };
    Ok((Report::Solve(Box::new(out)), true))
}

#[derive(Serialize)]
pub struct InvariantReport {
    file: String,
    spec: String,
    verdict: CheckVerdict,
}

fn cmd_invariant(file: &Path, spec: &Path, grid: &str, order: u32, params: &[String]) -> Outcome {
    let s = load(file)?;
    let sp = parse_spec(&read(spec)?).map_err(|e| Failure::Usage(format!("{}: {e}", spec.display())))?;
    let pins = opts::params(params).map_err(Failure::Usage)?;
    let options = CheckOptions {
        grid: opts::grid(grid).map_err(Failure::Usage)?,
        order,
        valuation: opts::symbol_map(&pins),
    };
    let lp = the_loop(&s.program)
        .filter(|_| s.program.statements().len() == 1)
        .ok_or_else(|| Failure::Usage("the program must be a single loop".into()))?;
    let verdict = check(&sp, &s.decls, lp, &options)?;
    let ok = verdict.aggregate == Aggregate::SuperinvariantOnGrid;
    let r = InvariantReport {
        file: file.display().to_string(),
        spec: spec.display().to_string(),
        verdict,
    };
    Ok((Report::Invariant(r), ok))
}

#[derive(Serialize)]
pub struct QueryResult {
    query: String,
    value: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    at_point: Option<serde_json::Value>,
}

#[derive(Serialize)]
pub struct StatsReport {
    pgf: RationalFunction,
    vars: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    point: BTreeMap<String, String>,
    results: Vec<QueryResult>,
}

fn symbols(s: &str, d: &Declarations) -> Result<Vec<Symbol>, Failure> {
    let vars = d.indeterminates();
    s.split(',')
        .map(|t| {
            let t = t.trim();
            let sym = vars
                .iter()
                .find(|v| v.name() == t || v.name() == t.to_uppercase())
                .copied();
            sym.ok_or_else(|| Failure::Usage(format!("'{t}' is not an indeterminate of the PGF")))
        })
        .collect()
}

fn limit_json(l: &Limit, p: Option<&[(Symbol, pgfkit::algebra::Rational)]>) -> (serde_json::Value, Option<serde_json::Value>) {
    let j = |l: &Limit| serde_json::Value::String(l.to_string());
    (j(l), p.map(|p| j(&at_point(l, p))))
}

fn need<'a>(x: Option<&'a str>, what: &str) -> Result<&'a str, Failure> {
    x.ok_or_else(|| Failure::Usage(format!("query needs {what}")))
}

fn cmd_stats(pgf: &str, vars: Option<&str>, at: Option<&str>, queries: &[String]) -> Outcome {
    let g = parse_rational_function(pgf).map_err(|e| Failure::Usage(format!("--pgf: {e}")))?;
    let d = opts::pgf_declarations(&g, vars);
    let vs = d.indeterminates();
    let pins = at.map(|a| opts::params(&[a.to_string()])).transpose().map_err(Failure::Usage)?;
    let point = pins.as_ref().map(opts::point);
    let p = point.as_deref();
    let mut results = Vec::new();
    let mut q = queries.iter().map(String::as_str);
    while let Some(k) = q.next() {
        let (label, (value, at_v)) = match k {
            "mass" => ("mass".to_string(), limit_json(&g.eval_at_one(&vs), p)),
            "moment" => {
                let s = need(q.next(), "a variable")?;
                let n = need(q.next(), "an order")?;
                let n: u32 = n.parse().map_err(|_| Failure::Usage(format!("'{n}' is not an order")))?;
                let v = symbols(s, &d)?[0];
                (format!("moment {s} {n}"), limit_json(&factorial_moment(&g, v, n, &vs), p))
            }
            "expectation" | "variance" => {
                let s = need(q.next(), "a variable")?;
                let v = symbols(s, &d)?[0];
                let l = if k == "expectation" { expectation(&g, v, &vs) } else { variance(&g, v, &vs) };
                (format!("{k} {s}"), limit_json(&l, p))
            }
            "marginal" => {
                let s = need(q.next(), "variables")?;
                (format!("marginal {s}"), limit_json(&marginal(&g, &symbols(s, &d)?, &vs), p))
            }
            "independence" => {
                let a = need(q.next(), "two variable sets")?;
                let b = need(q.next(), "two variable sets")?;
                let (va, vb) = (symbols(a, &d)?, symbols(b, &d)?);
                if va.iter().any(|s| vb.contains(s)) {
                    return Err(Failure::Usage("independence needs disjoint variable sets".into()));
                }
                let r = serde_json::to_value(independence(&g, &va, &vb, &vs)).expect("serializable");
                (format!("independence {a} {b}"), (r, None))
            }
            "event" => {
                let s = need(q.next(), "a guard")?;
                let b = parse_guard(&d, s).map_err(|e| Failure::Usage(format!("event: {e}")))?;
                (format!("event {s}"), limit_json(&event_probability(&d, &g, &b)?, p))
            }
            other => return Err(Failure::Usage(format!("unknown query '{other}'"))),
        };
        results.push(QueryResult {
            query: label,
            value,
            at_point: at_v,
        });
    }
    let r = StatsReport {
        pgf: g,
        vars: d.vars.clone(),
        point: pins.as_ref().map(show_params).unwrap_or_default(),
        results,
    };
    Ok((Report::Stats(r), true))
}

fn json<T: Serialize>(command: &'static str, body: &T) -> String {
    serde_json::to_string_pretty(&Envelope {
        schema: SCHEMA,
        command,
        body,
    })
    .expect("reports serialize")
}

fn render(r: &Report, f: Format) -> String {
    match (r, f) {
        (Report::Check(r), Format::Json) => json("check", r),
        (Report::Analyze(r), Format::Json) => json("analyze", r),
        (Report::Solve(r), Format::Json) => json("solve", r.as_ref()),
        (Report::Invariant(r), Format::Json) => json("invariant", r),
        (Report::Stats(r), Format::Json) => json("stats", r),
        (Report::Check(r), Format::Text) => text::check(r),
        (Report::Analyze(r), Format::Text) => text::analyze(r),
        (Report::Solve(r), Format::Text) => text::solve(r),
        (Report::Invariant(r), Format::Text) => text::invariant(r),
        (Report::Stats(r), Format::Text) => text::stats(r),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Check { file } => cmd_check(file),
        Cmd::Analyze {
            file,
            input,
            bounds,
            max_unroll,
            params,
        } => cmd_analyze(file, input, bounds.as_deref(), *max_unroll, params),
        Cmd::Solve {
            file,
            params,
            input,
            validate_order,
            event,
            at,
        } => cmd_solve(file, params, input.as_deref(), *validate_order, event, at.as_deref()),
        Cmd::Invariant {
            file,
            spec,
            grid,
            order,
            params,
        } => cmd_invariant(file, spec, grid, *order, params),
        Cmd::Stats { pgf, vars, at, queries } => cmd_stats(pgf, vars.as_deref(), at.as_deref(), queries),
    };
    match res {
        Ok((report, positive)) => {
            // a closed pipe (`| head`) is not an error worth a panic
            let _ = writeln!(std::io::stdout().lock(), "{}", render(&report, cli.format));
            if positive {
                ExitCode::SUCCESS
            } else if matches!(report, Report::Check(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Negative(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
