//! Human-readable coverage reports.

use std::fmt::Write as _;

use ambloc::instance::{Instance, Plan};
use ambloc::rational::{to_f64, Rational};
use ambloc::solver::Solution;

pub struct Header<'a> {
    pub model: &'a str,
    pub method: &'a str,
    pub epsilon: Option<u32>,
}

pub fn coverage_report(header: &Header, instance: &Instance, solution: &Solution, plan: &Plan) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "instance     {}", instance.fingerprint());
    let _ = writeln!(out, "model        {}", header.model);
    let _ = writeln!(out, "method       {}", header.method);
    if let Some(eps) = header.epsilon {
        let _ = writeln!(out, "epsilon      {eps}");
    }
    let _ = writeln!(out, "status       {}", solution.status);
    let _ = writeln!(out, "objective    {}", num(&solution.objective));
    if let Some(bound) = &solution.bound {
        let _ = writeln!(out, "bound        {}", num(bound));
    }
    let _ = writeln!(out, "nodes        {}", solution.stats.nodes);
    plan_section(&mut out, plan);
    out
}

pub fn plan_section(out: &mut String, plan: &Plan) {
    let sites: Vec<String> = plan.opened_sites.iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "stations     {} [{}]", plan.opened_sites.len(), sites.join(" "));
    if let Some(obj) = &plan.objective {
        let _ = writeln!(out, "plan value   {}", num(obj));
    }
    let Some(cov) = &plan.coverage else { return };
    let _ = writeln!(out, "\n{:<8} {:>14} {:>14} {:>9}", "type", "covered", "demand", "rate %");
    for t in &cov.by_type {
        let _ = writeln!(out, "{:<8} {:>14} {:>14} {:>9.2}", t.label, num(&t.covered), num(&t.demand), t.rate_percent);
    }
    let _ = writeln!(out, "{:<8} {:>14} {:>14} {:>9.2}", "total", num(&cov.covered), num(&cov.demand), cov.rate_percent);
}

fn num(v: &Rational) -> String {
    format!("{:.4}", to_f64(v))
}
