//! The S1-S5 scenario ladder and its comparison tables.
//!
//! | id | fixed        | horizon       |
//! |----|--------------|---------------|
//! | S1 | stations+x   | multi-period  |
//! | S2 | stations     | static        |
//! | S3 | stations     | multi-period  |
//! | S4 | nothing      | static        |
//! | S5 | nothing      | multi-period  |
//!
//! Static plans are replicated over every period and scored on the
//! multi-period objective, so every row shares one demand denominator.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::coverage::Prepared;
use crate::error::{Error, Result};
use crate::formulation::{
    add_epsilon_constraint, build_fleet_ict, build_fleet_static, build_lr_mexclp_ict, build_lr_mexclp_static,
    fix_variables, require_open_sites, FixMode, ModelKind,
};
use crate::instance::Plan;
use crate::rational::{to_f64, Rational};
use crate::solver::mps::format_coefficient;
use crate::solver::{decode, evaluate, SolveParams, SolverRegistry, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 5] = [ScenarioId::S1, ScenarioId::S2, ScenarioId::S3, ScenarioId::S4, ScenarioId::S5];

    pub fn fixes(self) -> Fixes {
        match self {
            ScenarioId::S1 => Fixes::StationsAndAllocation,
            ScenarioId::S2 | ScenarioId::S3 => Fixes::Stations,
            ScenarioId::S4 | ScenarioId::S5 => Fixes::Nothing,
        }
    }

    pub fn is_static(self) -> bool {
        matches!(self, ScenarioId::S2 | ScenarioId::S4)
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ScenarioId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL.into_iter().find(|id| id.to_string().eq_ignore_ascii_case(s)).ok_or_else(|| Error::Unknown {
            kind: "scenario",
            name: s.to_string(),
            available: "S1, S2, S3, S4, S5".into(),
        })
    }
}

/// Parses `S1,S3` or `all`.
pub fn parse_scenario_list(text: &str) -> Result<Vec<ScenarioId>> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(ScenarioId::ALL.to_vec());
    }
    let mut ids: Vec<ScenarioId> = text.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?;
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fixes {
    StationsAndAllocation,
    Stations,
    Nothing,
}

#[derive(Clone, Debug)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub kind: ModelKind,
    pub baseline: Option<Plan>,
    /// Station budget for the unfixed scenarios; `None` leaves it open.
    pub epsilon: Option<u32>,
    /// Sites open in every scenario (the baseline must open them too).
    pub mandatory_sites: Vec<usize>,
}

impl ScenarioSpec {
    pub fn new(id: ScenarioId, kind: ModelKind, baseline: Option<Plan>) -> Self {
        ScenarioSpec { id, kind, baseline, epsilon: None, mandatory_sites: Vec::new() }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub method: String,
    pub params: SolveParams,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: "exact".into(), params: SolveParams::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioRow {
    pub id: ScenarioId,
    pub kind: ModelKind,
    pub stations: usize,
    /// Multi-period objective of the (replicated) plan.
    #[serde(with = "crate::rational::scalar")]
    pub objective: Rational,
    /// Objective of the static model itself, for S2 and S4.
    #[serde(with = "crate::rational::opt")]
    pub static_objective: Option<Rational>,
    pub rates: Vec<f64>,
    pub total_rate: f64,
    pub seconds: f64,
    pub status: Status,
    pub plan: Plan,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub instance_fingerprint: String,
    pub type_labels: Vec<String>,
    pub rows: Vec<ScenarioRow>,
}

fn check_baseline<'a>(prepared: &Prepared, spec: &'a ScenarioSpec) -> Result<Option<&'a Plan>> {
    if spec.id.fixes() == Fixes::Nothing {
        return Ok(None);
    }
    let plan = spec
        .baseline
        .as_ref()
        .ok_or_else(|| Error::Config(format!("scenario {} needs a baseline plan", spec.id)))?;
    plan.validate(&prepared.instance)?;
    if let Some(j) = spec.mandatory_sites.iter().find(|j| !plan.opened_sites.contains(j)) {
        return Err(Error::PlanMismatch(format!("baseline does not open mandatory site {j}")));
    }
    Ok(Some(plan))
}

/// Builds, fixes, solves and decodes one scenario.
pub fn run_scenario(prepared: &Prepared, spec: &ScenarioSpec, solver: &SolverConfig) -> Result<ScenarioRow> {
    let start = Instant::now();
    let baseline = check_baseline(prepared, spec)?;
    let (inst, sets, table) = (&prepared.instance, &prepared.sets, &prepared.table);
    let mut model = match (spec.kind, spec.id.is_static()) {
        (ModelKind::Deterministic, false) => build_fleet_ict(inst, sets),
        (ModelKind::Deterministic, true) => build_fleet_static(inst, sets),
        (ModelKind::Probabilistic, false) => build_lr_mexclp_ict(inst, sets, table),
        (ModelKind::Probabilistic, true) => build_lr_mexclp_static(inst, sets, table),
    };
    model = match (spec.id.fixes(), baseline) {
        (Fixes::StationsAndAllocation, Some(plan)) => fix_variables(model, plan, FixMode::ZAndX)?,
        (Fixes::Stations, Some(plan)) => fix_variables(model, plan, FixMode::ZOnly)?,
        _ => model,
    };
    model = require_open_sites(model, &spec.mandatory_sites)?;
    if let (Fixes::Nothing, Some(eps)) = (spec.id.fixes(), spec.epsilon) {
        model = add_epsilon_constraint(model, eps);
    }
    let registry = SolverRegistry::default();
    let solution = registry.get(&solver.method)?.solve(&model, &solver.params)?;
    if !solution.status.has_solution() {
        return Err(Error::Infeasible(format!("scenario {} ({})", spec.id, spec.kind.as_str())));
    }
    let decoded = decode(&solution, inst, &model)?;
    let (plan, objective, static_objective) = if spec.id.is_static() {
        let replicated = decoded.replicate(inst.num_periods);
        let (evaluated, plan) = evaluate(prepared, spec.kind, &replicated)?;
        (plan, evaluated.objective, Some(solution.objective))
    } else {
        (decoded, solution.objective, None)
    };
    let coverage = plan.coverage.as_ref().expect("decoded plans carry coverage");
    Ok(ScenarioRow {
        id: spec.id,
        kind: spec.kind,
        stations: plan.opened_sites.len(),
        objective,
        static_objective,
        rates: coverage.by_type.iter().map(|t| t.rate_percent).collect(),
        total_rate: coverage.rate_percent,
        seconds: start.elapsed().as_secs_f64(),
        status: solution.status,
        plan,
    })
}

/// Runs `specs` on up to `jobs` threads; rows keep the order of `specs`.
pub fn run_scenarios(prepared: &Prepared, specs: &[ScenarioSpec], solver: &SolverConfig, jobs: usize) -> Result<ScenarioReport> {
    let rows: Vec<ScenarioRow> = if jobs <= 1 {
        specs.iter().map(|s| run_scenario(prepared, s, solver)).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| specs.par_iter().map(|s| run_scenario(prepared, s, solver)).collect::<Result<_>>())?
    };
    Ok(ScenarioReport {
        instance_fingerprint: prepared.instance.fingerprint(),
        type_labels: prepared.instance.ambulance_types.iter().map(|t| t.label.clone()).collect(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Delta {
    pub label: String,
    #[serde(with = "crate::rational::scalar")]
    pub absolute: Rational,
    /// Relative to the second operand; `None` when that is zero.
    pub percent: Option<f64>,
    /// Difference in total coverage rate, percentage points.
    pub rate_points: f64,
}

fn delta(label: String, a: &ScenarioRow, b: &ScenarioRow) -> Delta {
    let absolute = a.objective - b.objective;
    let base = to_f64(&b.objective);
    Delta {
        label,
        absolute,
        percent: (base != 0.0).then(|| 100.0 * to_f64(&absolute) / base),
        rate_points: a.total_rate - b.total_rate,
    }
}

/// Deltas between the standard scenario pairs, within each model kind, and
/// between the kinds for each scenario run under both.
pub fn compare(reports: &[ScenarioReport]) -> Result<Vec<Delta>> {
    let Some(first) = reports.first() else { return Ok(Vec::new()) };
    if let Some(other) = reports.iter().find(|r| r.instance_fingerprint != first.instance_fingerprint) {
        return Err(Error::InstanceMismatch(format!("{} vs {}", first.instance_fingerprint, other.instance_fingerprint)));
    }
    let rows: Vec<&ScenarioRow> = reports.iter().flat_map(|r| &r.rows).collect();
    let find = |id: ScenarioId, kind: ModelKind| rows.iter().find(|r| r.id == id && r.kind == kind).copied();
    let pairs = [
        (ScenarioId::S2, ScenarioId::S1),
        (ScenarioId::S3, ScenarioId::S2),
        (ScenarioId::S5, ScenarioId::S4),
        (ScenarioId::S4, ScenarioId::S2),
    ];
    let mut out = Vec::new();
    for kind in [ModelKind::Deterministic, ModelKind::Probabilistic] {
        for (a, b) in pairs {
            if let (Some(ra), Some(rb)) = (find(a, kind), find(b, kind)) {
                out.push(delta(format!("{a} vs {b} ({})", kind.as_str()), ra, rb));
            }
        }
    }
    for id in ScenarioId::ALL {
        if let (Some(d), Some(p)) = (find(id, ModelKind::Deterministic), find(id, ModelKind::Probabilistic)) {
            out.push(delta(format!("{id} deterministic vs probabilistic"), d, p));
        }
    }
    Ok(out)
}

impl ScenarioReport {
    pub fn csv_header(&self) -> String {
        let mut h = String::from("scenario,model,stations,time_s,objective");
        for label in &self.type_labels {
            let _ = write!(h, ",rate_{label}");
        }
        h.push_str(",rate_total");
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{},{},{:.2},{}", r.id, r.kind.as_str(), r.stations, r.seconds, format_coefficient(&r.objective));
            for rate in &r.rates {
                let _ = write!(out, ",{rate:.2}");
            }
            let _ = writeln!(out, ",{:.2}", r.total_rate);
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Scenario | Model | Stations | Time (s) | Objective |");
        for label in &self.type_labels {
            let _ = write!(out, " {label} (%) |");
        }
        out.push_str(" Total (%) |\n|---|---|---:|---:|---:|");
        for _ in &self.type_labels {
            out.push_str("---:|");
        }
        out.push_str("---:|\n");
        for r in &self.rows {
            let objective = format!("{:.2}", to_f64(&r.objective));
            let _ = write!(out, "| {} | {} | {} | {:.2} | {} |", r.id, r.kind.as_str(), r.stations, r.seconds, objective);
            for rate in &r.rates {
                let _ = write!(out, " {rate:.2} |");
            }
            let _ = writeln!(out, " {:.2} |", r.total_rate);
        }
        out
    }
}

pub fn deltas_markdown(deltas: &[Delta]) -> String {
    let mut out = String::from("| Comparison | Objective delta | Change (%) | Rate delta (pp) |\n|---|---:|---:|---:|\n");
    for d in deltas {
        let pct = d.percent.map_or("n/a".to_string(), |p| format!("{p:.2}"));
        let _ = writeln!(out, "| {} | {:.2} | {} | {:.2} |", d.label, to_f64(&d.absolute), pct, d.rate_points);
    }
    out
}
