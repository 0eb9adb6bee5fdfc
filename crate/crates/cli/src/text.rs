//! Human-readable rendering of the reports.

use std::fmt::Write;

use pgfkit::invariants::{Conclusion, Mass, Status};

use crate::{AnalyzeReport, CheckReport, InvariantReport, SolveOut, StatsReport, Summary};

pub fn check(r: &CheckReport) -> String {
    let mut s = String::new();
    if r.ok {
        writeln!(s, "{}: ok", r.file).unwrap();
        writeln!(s, "vars: {}", r.vars.join(", ")).unwrap();
        if !r.params.is_empty() {
            writeln!(s, "params: {}", r.params.join(", ")).unwrap();
        }
    }
    for d in &r.diagnostics {
        writeln!(s, "{}:{}:{}: {}", r.file, d.line, d.col, d.message).unwrap();
    }
    s.trim_end().to_string()
}

pub fn analyze(r: &AnalyzeReport) -> String {
    let mut s = String::new();
    writeln!(s, "output: {}", r.output).unwrap();
    writeln!(s, "mass: {}", r.mass).unwrap();
    writeln!(s, "live mass: {}", r.live_mass).unwrap();
    writeln!(s, "lost mass: {}", r.lost_mass).unwrap();
    writeln!(s, "converged: {}", r.converged).unwrap();
    for (i, l) in r.loops.iter().enumerate() {
        writeln!(
            s,
            "loop {i}: {} iterations, converged {}, exact {}",
            l.iterations_run, l.converged, l.exact
        )
        .unwrap();
    }
    s.trim_end().to_string()
}

fn summary(s: &mut String, sm: &Summary) {
    writeln!(s, "  mass: {}", sm.mass).unwrap();
    for (v, e) in &sm.expectations {
        writeln!(s, "  E[{}]: {e}", v.to_lowercase()).unwrap();
    }
    for e in &sm.events {
        writeln!(s, "  P({}): {}", e.guard, e.probability).unwrap();
    }
}

pub fn solve(r: &SolveOut) -> String {
    let mut s = String::new();
    match r {
        SolveOut::Rejected { file, reason } => writeln!(s, "{file}: not solvable: {reason}").unwrap(),
        SolveOut::Solved {
            classification,
            omega,
            output,
            stats,
            at,
            input,
            ..
        } => {
            writeln!(s, "homogeneous: {}", classification.homogeneous.join(", ")).unwrap();
            let bounded: Vec<&str> = classification.bounded.iter().map(|b| b.var.as_str()).collect();
            writeln!(s, "bounded: {}", bounded.join(", ")).unwrap();
            for w in omega {
                let st: Vec<String> = w.state.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let z = if w.in_zero_set { " (never terminates)" } else { "" };
                writeln!(s, "  [{}] {}{z}", st.join(", "), w.pgf).unwrap();
            }
            writeln!(s, "input: {input}").unwrap();
            writeln!(s, "output: {output}").unwrap();
            summary(&mut s, stats);
            if let Some(p) = at {
                let pt: Vec<String> = p.point.iter().map(|(k, v)| format!("{k}={v}")).collect();
                writeln!(s, "at {}:", pt.join(", ")).unwrap();
                summary(&mut s, &p.summary);
            }
        }
    }
    s.trim_end().to_string()
}

pub fn invariant(r: &InvariantReport) -> String {
    let v = &r.verdict;
    let mut s = String::new();
    let agg = serde_json::to_value(&v.aggregate).unwrap();
    writeln!(s, "{}: {}", r.spec, agg.as_str().unwrap_or_default()).unwrap();
    for p in &v.points {
        let st: Vec<String> = p.sigma.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let status = match &p.status {
            Status::Equal => "equal".to_string(),
            Status::StrictlyBelow => "strictly below".to_string(),
            Status::EqualToOrder { order } => format!("equal to order {order}"),
            Status::HoldsToOrder { order } => format!("holds to order {order}"),
            Status::Violated {
                monomial,
                required,
                available,
            } => format!("violated at {monomial}: needs {required}, has {available}"),
            Status::Undecided { reason } => format!("undecided: {reason}"),
        };
        let mass = match &p.mass {
            Mass::Value(m) if m.is_one() => String::new(),
            Mass::Value(m) => format!(", mass {m}"),
            Mass::Divergent => ", mass divergent".to_string(),
            Mass::Unknown => String::new(),
        };
        writeln!(s, "  [{}] {status}{mass}", st.join(", ")).unwrap();
    }
    for c in &v.conclusions {
        let line = match c {
            Conclusion::ExactSemantics => "candidate is the exact loop semantics on the grid".to_string(),
            Conclusion::ExactToOrder { order } => format!("candidate is the exact loop semantics up to order {order}"),
            Conclusion::NotAlmostSurelyTerminating { sigma, bound } => {
                let st: Vec<String> = sigma.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("termination probability from [{}] is at most {bound}", st.join(", "))
            }
            Conclusion::Proper { divergent_mass_at } => {
                format!("proper overapproximation, divergent mass at {} points", divergent_mass_at.len())
            }
        };
        writeln!(s, "{line}").unwrap();
    }
    s.trim_end().to_string()
}

pub fn stats(r: &StatsReport) -> String {
    let mut s = String::new();
    writeln!(s, "pgf: {}", r.pgf).unwrap();
    for q in &r.results {
        let v = match &q.value {
            serde_json::Value::String(x) => x.clone(),
            // the witness of a dependence is in the JSON report
            serde_json::Value::Object(o) => o.get("verdict").and_then(|v| v.as_str()).unwrap_or("?").to_string(),
            other => other.to_string(),
        };
        write!(s, "{}: {v}", q.query).unwrap();
        if let Some(serde_json::Value::String(a)) = &q.at_point {
            write!(s, " (at point: {a})").unwrap();
        }
        s.push('\n');
    }
    s.trim_end().to_string()
}
