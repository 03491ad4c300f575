//! Solving [`ModelSpec`]s and turning assignments into [`Plan`]s.
//!
//! Two methods are registered by name: `exact` (branch-and-bound) and
//! `heuristic` (greedy plus local search). Both decide `z` and `x` only; `y`
//! is always decoded as the best level the counted vehicles allow. Every
//! returned objective is recomputed from the rational model data and every
//! assignment is checked row by row before it leaves this module.

mod compiled;
mod exact;
mod heuristic;
pub mod mps;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::coverage::Prepared;
use crate::error::{Error, Result};
use crate::formulation::{
    build_fleet_ict, build_lr_mexclp_ict, fix_variables, FixMode, ModelKind, ModelSpec, VarId,
};
use crate::instance::{plan::rate_percent, Allocation, CoverageSummary, Instance, Plan, TypeCoverage};
use crate::rational::Rational;

pub use exact::{solve_exact, solve_exact_traced, NodeRecord};
pub use heuristic::solve_heuristic;
pub use mps::{export_mps, import_solution, write_mps};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Feasible,
    Infeasible,
    TimeLimit,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Feasible => "feasible",
            Status::Infeasible => "infeasible",
            Status::TimeLimit => "time-limit",
        }
    }

    pub fn has_solution(&self) -> bool {
        !matches!(self, Status::Infeasible)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Stats {
    /// Search nodes (exact) or move evaluations (heuristic).
    pub nodes: u64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub assignment: BTreeMap<VarId, bool>,
    pub objective: Rational,
    pub status: Status,
    /// Upper bound on the optimum, exact method only.
    pub bound: Option<Rational>,
    pub stats: Stats,
}

impl Solution {
    pub(crate) fn empty(status: Status, nodes: u64, elapsed: Duration) -> Self {
        Solution {
            assignment: BTreeMap::new(),
            objective: Rational::zero(),
            status,
            bound: None,
            stats: Stats { nodes, seconds: elapsed.as_secs_f64() },
        }
    }

    pub fn value(&self, v: &VarId) -> bool {
        self.assignment.get(v).copied().unwrap_or(false)
    }

    /// `bound - objective`, when a bound is known.
    pub fn gap(&self) -> Option<Rational> {
        self.bound.map(|b| b - self.objective)
    }
}

#[derive(Clone, Debug)]
pub struct SolveParams {
    pub time_limit: Option<Duration>,
    pub seed: u64,
    /// Move evaluations allowed to the heuristic's local search.
    pub budget: u64,
    /// Starting plan for the heuristic.
    pub hint: Option<Plan>,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { time_limit: None, seed: 0, budget: 200_000, hint: None }
    }
}

pub trait Solver: Send + Sync {
    fn name(&self) -> &'static str;
    /// Whether an `optimal` status can be trusted as proven.
    fn is_exact(&self) -> bool;
    fn solve(&self, model: &ModelSpec, params: &SolveParams) -> Result<Solution>;
}

struct Exact;
struct Heuristic;

impl Solver for Exact {
    fn name(&self) -> &'static str {
        "exact"
    }
    fn is_exact(&self) -> bool {
        true
    }
    fn solve(&self, model: &ModelSpec, params: &SolveParams) -> Result<Solution> {
        solve_exact(model, params)
    }
}

impl Solver for Heuristic {
    fn name(&self) -> &'static str {
        "heuristic"
    }
    fn is_exact(&self) -> bool {
        false
    }
    fn solve(&self, model: &ModelSpec, params: &SolveParams) -> Result<Solution> {
        solve_heuristic(model, params)
    }
}

/// Solution methods registered by name.
pub struct SolverRegistry {
    entries: Vec<Box<dyn Solver>>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut registry = SolverRegistry { entries: Vec::new() };
        registry.register(Box::new(Exact));
        registry.register(Box::new(Heuristic));
        registry
    }
}

impl SolverRegistry {
    pub fn register(&mut self, solver: Box<dyn Solver>) {
        self.entries.retain(|s| s.name() != solver.name());
        self.entries.push(solver);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|s| s.name()).collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn Solver> {
        self.entries.iter().find(|s| s.name() == name).map(|s| s.as_ref()).ok_or_else(|| Error::Unknown {
            kind: "method",
            name: name.to_string(),
            available: self.names().join(", "),
        })
    }
}

/// Checks every row of `model` against `assignment` (missing variables read as
/// 0) and returns the objective.
pub fn audit(model: &ModelSpec, assignment: &BTreeMap<VarId, bool>) -> Result<Rational> {
    let value = |v: &VarId| assignment.get(v).copied().unwrap_or(false);
    compiled::check_rows(model, value)?;
    Ok(compiled::objective_of(model, value))
}

pub(crate) fn finish(
    model: &ModelSpec,
    c: &compiled::Compiled,
    values: &[bool],
    status: Status,
    bound: Option<Rational>,
    nodes: u64,
    elapsed: Duration,
) -> Result<Solution> {
    let assignment = c.assignment(values);
    let objective = audit(model, &assignment)?;
    let search_value: i128 = c.groups.iter().filter_map(|g| {
        g.options.iter().find(|o| values[o.var]).map(|o| o.coef)
    }).sum();
    if c.to_rational(search_value) != objective {
        return Err(Error::Audit {
            tag: "objective".into(),
            message: format!("search value {} differs from recomputed {}", c.to_rational(search_value), objective),
        });
    }
    let bound = match status {
        Status::Optimal => Some(objective),
        _ => bound,
    };
    Ok(Solution { assignment, objective, status, bound, stats: Stats { nodes, seconds: elapsed.as_secs_f64() } })
}

/// Turns an audited solution into a plan with coverage figures. Rates divide
/// the covered (or reliability-weighted) demand of each type by that type's
/// total demand over all periods.
pub fn decode(solution: &Solution, instance: &Instance, model: &ModelSpec) -> Result<Plan> {
    if !solution.status.has_solution() {
        return Err(Error::Audit { tag: "status".into(), message: "no solution to decode".into() });
    }
    let objective = audit(model, &solution.assignment)?;
    if objective != solution.objective {
        return Err(Error::Audit {
            tag: "objective".into(),
            message: format!("reported {} but assignment gives {}", solution.objective, objective),
        });
    }
    let mut opened_sites = Vec::new();
    let mut allocations = Vec::new();
    for (v, &on) in &solution.assignment {
        match (*v, on) {
            (VarId::Z { site }, true) => opened_sites.push(site as usize),
            (VarId::X { site, ty, period }, true) => allocations.push(Allocation {
                site: site as usize,
                ambulance_type: ty as usize,
                period: period as usize,
                count: 1,
            }),
            _ => {}
        }
    }
    let periods = model.meta.num_periods;
    let mut covered = vec![vec![Rational::zero(); periods]; instance.num_types()];
    for (v, c) in &model.objective {
        if !solution.value(v) {
            continue;
        }
        if let VarId::YDet { ty, period, .. } | VarId::YProb { ty, period, .. } = *v {
            covered[ty as usize][period as usize] += c;
        }
    }
    let by_type = instance
        .ambulance_types
        .iter()
        .zip(covered)
        .enumerate()
        .map(|(u, (ty, per_period))| {
            let total = per_period.iter().fold(Rational::zero(), |a, v| a + v);
            let demand = instance.type_demand(u);
            TypeCoverage {
                label: ty.label.clone(),
                rate_percent: rate_percent(&total, &demand),
                covered: total,
                demand,
                per_period_covered: per_period,
            }
        })
        .collect();
    Ok(Plan { opened_sites, allocations, objective: Some(objective), coverage: Some(CoverageSummary::new(by_type)) }
        .normalized())
}

/// Scores `plan` on the multi-period model of `kind`: stations and vehicles
/// are pinned, coverage is decoded.
pub fn evaluate(prepared: &Prepared, kind: ModelKind, plan: &Plan) -> Result<(Solution, Plan)> {
    plan.validate(&prepared.instance)?;
    let model = match kind {
        ModelKind::Deterministic => build_fleet_ict(&prepared.instance, &prepared.sets),
        ModelKind::Probabilistic => build_lr_mexclp_ict(&prepared.instance, &prepared.sets, &prepared.table),
    };
    let model = fix_variables(model, plan, FixMode::ZAndX)?;
    let solution = solve_exact(&model, &SolveParams::default())?;
    let decoded = decode(&solution, &prepared.instance, &model)?;
    Ok((solution, decoded))
}
