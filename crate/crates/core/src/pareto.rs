//! Station-budget sweep: one solve per integer budget ε, then the
//! non-dominated (stations, coverage) staircase.

use std::fmt::Write as _;

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::coverage::Prepared;
use crate::error::{Error, Result};
use crate::formulation::{add_epsilon_constraint, build_fleet_ict, build_lr_mexclp_ict, require_open_sites, ModelKind, ModelSpec};
use crate::instance::{Instance, Plan};
use crate::rational::{to_f64, Rational};
use crate::solver::mps::format_coefficient;
use crate::solver::{decode, SolveParams, SolverRegistry, Status};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParetoPoint {
    pub epsilon: u32,
    /// Stations actually opened; may be below `epsilon`.
    pub stations_used: usize,
    #[serde(with = "crate::rational::scalar")]
    pub coverage_objective: Rational,
    pub coverage_rate_total: f64,
    /// Per-type rates in type order.
    pub rates: Vec<f64>,
    pub plan: Option<Plan>,
    /// `None` when the solve failed; see `error`.
    pub status: Option<Status>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ParetoPoint {
    /// A point carrying only the two objectives.
    pub fn bare(epsilon: u32, stations_used: usize, coverage_objective: Rational) -> Self {
        ParetoPoint {
            epsilon,
            stations_used,
            coverage_objective,
            coverage_rate_total: 0.0,
            rates: Vec::new(),
            plan: None,
            status: Some(Status::Optimal),
            error: None,
        }
    }

    fn failed(epsilon: u32, status: Option<Status>, error: Option<String>, n_types: usize) -> Self {
        ParetoPoint {
            epsilon,
            stations_used: 0,
            coverage_objective: Rational::zero(),
            coverage_rate_total: 0.0,
            rates: vec![0.0; n_types],
            plan: None,
            status,
            error,
        }
    }

    /// Whether the point holds a usable solution.
    pub fn is_solved(&self) -> bool {
        self.status.is_some_and(|s| s.has_solution())
    }

    pub fn status_text(&self) -> &'static str {
        self.status.map_or("failed", |s| s.as_str())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParetoFront {
    pub model: String,
    pub instance_fingerprint: String,
    pub type_labels: Vec<String>,
    /// Non-dominated points by increasing `stations_used`.
    pub points: Vec<ParetoPoint>,
    /// Every per-ε result in sweep order, failures included.
    pub raw: Vec<ParetoPoint>,
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub kind: ModelKind,
    pub eps_min: u32,
    pub eps_max: u32,
    /// Registered solver name.
    pub method: String,
    pub params: SolveParams,
    /// Seed each heuristic solve with the previous plan (forces a sequential sweep).
    pub warm_start: bool,
    pub mandatory_sites: Vec<usize>,
    pub jobs: usize,
}

impl SweepConfig {
    pub fn new(kind: ModelKind, eps_min: u32, eps_max: u32) -> Self {
        SweepConfig {
            kind,
            eps_min,
            eps_max,
            method: "exact".into(),
            params: SolveParams::default(),
            warm_start: true,
            mandatory_sites: Vec::new(),
            jobs: 1,
        }
    }
}

/// Least number of stations whose capacities can host the whole fleet at once.
pub fn compute_eps_min(instance: &Instance) -> u32 {
    let fleet = instance.total_fleet() as u64;
    let mut caps: Vec<u64> = instance.sites.iter().map(|s| s.capacity as u64).collect();
    caps.sort_unstable_by(|a, b| b.cmp(a));
    let mut hosted = 0;
    for (m, c) in caps.iter().enumerate() {
        if hosted >= fleet {
            return m as u32;
        }
        hosted += c;
    }
    // Everything open still may not host the fleet; all sites is the best we can do.
    caps.len() as u32
}

/// Keeps the points no other point beats on both objectives; among equal
/// pairs the first (lowest ε) survives. Output is sorted by station count.
pub fn filter_nondominated(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (&points[a], &points[b]);
        p.stations_used
            .cmp(&q.stations_used)
            .then(q.coverage_objective.cmp(&p.coverage_objective))
            .then(a.cmp(&b))
    });
    let mut out: Vec<ParetoPoint> = Vec::new();
    for i in order {
        let p = &points[i];
        if out.last().map_or(true, |last| p.coverage_objective > last.coverage_objective) {
            out.push(p.clone());
        }
    }
    out
}

/// Epsilon of the first front point after which each added station gains
/// less than `threshold` percentage points of total coverage.
pub fn knee(front: &[ParetoPoint], threshold: f64) -> Option<u32> {
    front.windows(2).find_map(|w| {
        let stations = (w[1].stations_used - w[0].stations_used) as f64;
        let gain = (w[1].coverage_rate_total - w[0].coverage_rate_total) / stations;
        (gain < threshold).then_some(w[0].epsilon)
    })
}

/// Positions in `raw` where the objective fell below an earlier solved point.
pub fn monotonicity_violations(raw: &[ParetoPoint]) -> Vec<u32> {
    let mut best: Option<Rational> = None;
    let mut out = Vec::new();
    for p in raw.iter().filter(|p| p.is_solved()) {
        if best.is_some_and(|b| p.coverage_objective < b) {
            out.push(p.epsilon);
        }
        best = Some(best.map_or(p.coverage_objective, |b| b.max(p.coverage_objective)));
    }
    out
}

fn base_model(prepared: &Prepared, config: &SweepConfig) -> Result<ModelSpec> {
    let model = match config.kind {
        ModelKind::Deterministic => build_fleet_ict(&prepared.instance, &prepared.sets),
        ModelKind::Probabilistic => build_lr_mexclp_ict(&prepared.instance, &prepared.sets, &prepared.table),
    };
    require_open_sites(model, &config.mandatory_sites)
}

fn solve_point(
    prepared: &Prepared,
    base: &ModelSpec,
    config: &SweepConfig,
    registry: &SolverRegistry,
    eps: u32,
    hint: Option<Plan>,
) -> ParetoPoint {
    let n_types = prepared.instance.num_types();
    let model = add_epsilon_constraint(base.clone(), eps);
    let params = SolveParams { hint, ..config.params.clone() };
    let solved = registry.get(&config.method).and_then(|s| s.solve(&model, &params)).and_then(|sol| {
        if !sol.status.has_solution() {
            return Ok((sol, None));
        }
        let plan = decode(&sol, &prepared.instance, &model)?;
        Ok((sol, Some(plan)))
    });
    match solved {
        Ok((sol, Some(plan))) => {
            let coverage = plan.coverage.as_ref().expect("decoded plans carry coverage");
            ParetoPoint {
                epsilon: eps,
                stations_used: plan.opened_sites.len(),
                coverage_objective: sol.objective,
                coverage_rate_total: coverage.rate_percent,
                rates: coverage.by_type.iter().map(|t| t.rate_percent).collect(),
                plan: Some(plan),
                status: Some(sol.status),
                error: None,
            }
        }
        Ok((sol, None)) => ParetoPoint::failed(eps, Some(sol.status), None, n_types),
        Err(e) => {
            log::warn!("epsilon {eps}: {e}");
            ParetoPoint::failed(eps, None, Some(e.to_string()), n_types)
        }
    }
}

/// Solves once per integer ε in `eps_min..=eps_max`. Per-point failures are
/// recorded, not raised.
pub fn sweep(prepared: &Prepared, config: &SweepConfig) -> Result<ParetoFront> {
    if config.eps_min > config.eps_max {
        return Err(Error::Config(format!("eps_min {} exceeds eps_max {}", config.eps_min, config.eps_max)));
    }
    let values: Vec<u32> = (config.eps_min..=config.eps_max).collect();
    sweep_values(prepared, config, &values)
}

/// As [`sweep`] over an explicit list of budgets, solved in the given order;
/// `eps_min` and `eps_max` of `config` are ignored.
pub fn sweep_values(prepared: &Prepared, config: &SweepConfig, values: &[u32]) -> Result<ParetoFront> {
    let registry = SolverRegistry::default();
    let exact = registry.get(&config.method)?.is_exact();
    let warm = config.warm_start && !exact;
    let base = base_model(prepared, config)?;
    let raw: Vec<ParetoPoint> = if warm || config.jobs <= 1 {
        let mut hint: Option<Plan> = config.params.hint.clone();
        let mut raw = Vec::with_capacity(values.len());
        for &eps in values {
            let point = solve_point(prepared, &base, config, &registry, eps, if warm { hint.clone() } else { config.params.hint.clone() });
            log::info!("epsilon {eps}: {} stations, objective {}, {}", point.stations_used, point.coverage_objective, point.status_text());
            if point.plan.is_some() {
                hint = point.plan.clone();
            }
            raw.push(point);
        }
        raw
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            values
                .par_iter()
                .map(|&eps| solve_point(prepared, &base, config, &registry, eps, config.params.hint.clone()))
                .collect()
        })
    };
    let solved: Vec<ParetoPoint> = raw.iter().filter(|p| p.is_solved()).cloned().collect();
    Ok(ParetoFront {
        model: base.meta.name.clone(),
        instance_fingerprint: prepared.instance.fingerprint(),
        type_labels: prepared.instance.ambulance_types.iter().map(|t| t.label.clone()).collect(),
        points: filter_nondominated(&solved),
        raw,
    })
}

impl ParetoFront {
    pub fn header(&self) -> String {
        let mut h = String::from("epsilon,stations_used,objective,coverage_rate_total");
        for label in &self.type_labels {
            let _ = write!(h, ",rate_{label}");
        }
        h.push_str(",status");
        h
    }

    fn csv_of(&self, points: &[ParetoPoint]) -> String {
        let mut out = self.header();
        out.push('\n');
        for p in points {
            let _ = write!(
                out,
                "{},{},{},{:.4}",
                p.epsilon,
                p.stations_used,
                format_coefficient(&p.coverage_objective),
                p.coverage_rate_total
            );
            for r in &p.rates {
                let _ = write!(out, ",{r:.4}");
            }
            let _ = writeln!(out, ",{}", p.status_text());
        }
        out
    }

    /// The filtered front.
    pub fn to_csv(&self) -> String {
        self.csv_of(&self.points)
    }

    /// Every swept ε, including dominated and failed points.
    pub fn raw_csv(&self) -> String {
        self.csv_of(&self.raw)
    }

    /// Objective as a float, for summaries.
    pub fn best_objective(&self) -> Option<f64> {
        self.points.last().map(|p| to_f64(&p.coverage_objective))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_instance, GeneratorConfig, Site};
    use crate::rational::int;

    fn pts(pairs: &[(usize, i64)]) -> Vec<ParetoPoint> {
        pairs.iter().enumerate().map(|(e, &(s, c))| ParetoPoint::bare(e as u32, s, int(c))).collect()
    }

    fn pairs(points: &[ParetoPoint]) -> Vec<(usize, i64)> {
        points.iter().map(|p| (p.stations_used, p.coverage_objective.to_integer() as i64)).collect()
    }

    #[test]
    fn same_coverage_fewer_stations_wins() {
        assert_eq!(pairs(&filter_nondominated(&pts(&[(5, 10), (6, 10)]))), vec![(5, 10)]);
        assert_eq!(pairs(&filter_nondominated(&pts(&[(5, 10), (6, 12)]))), vec![(5, 10), (6, 12)]);
        assert_eq!(pairs(&filter_nondominated(&pts(&[(6, 12), (5, 10), (5, 10), (4, 11)]))), vec![(4, 11), (6, 12)]);
    }

    #[test]
    fn duplicate_keeps_lowest_epsilon() {
        let out = filter_nondominated(&pts(&[(3, 7), (3, 7)]));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].epsilon, 0);
    }

    #[test]
    fn eps_min_examples() {
        let mut inst = crate::instance::tests::tiny();
        assert_eq!(compute_eps_min(&inst), 1);
        inst.sites = [3, 2, 1].iter().enumerate().map(|(id, &capacity)| Site { id, capacity }).collect();
        inst.ambulance_types[0].fleet_size = 5;
        assert_eq!(compute_eps_min(&inst), 2);
        let full = generate_instance(&GeneratorConfig { num_demand_points: 4, num_sites: 30, num_periods: 1, ..GeneratorConfig::city_scale(0) }).unwrap();
        assert_eq!(full.total_fleet(), 28);
        assert_eq!(compute_eps_min(&full), 14);
    }

    #[test]
    fn knee_finds_flattening() {
        let mut front = pts(&[(1, 0), (2, 0), (3, 0), (5, 0)]);
        for (p, r) in front.iter_mut().zip([40.0, 60.0, 65.0, 66.0]) {
            p.coverage_rate_total = r;
        }
        assert_eq!(knee(&front, 10.0), Some(1));
        assert_eq!(knee(&front, 1.0), Some(2));
        assert_eq!(knee(&front, 0.1), None);
    }

    #[test]
    fn single_epsilon_sweep() {
        let p = Prepared::new(
            generate_instance(&GeneratorConfig { num_demand_points: 10, num_sites: 6, num_periods: 2, seed: 1, ..Default::default() }).unwrap(),
        );
        let front = sweep(&p, &SweepConfig::new(ModelKind::Deterministic, 2, 2)).unwrap();
        assert_eq!(front.raw.len(), 1);
        assert_eq!(front.points.len(), 1);
        assert!(front.points[0].stations_used <= 2);
        assert_eq!(front.to_csv().lines().next().unwrap(), "epsilon,stations_used,objective,coverage_rate_total,rate_ALS,rate_BLS,status");
        assert!(sweep(&p, &SweepConfig::new(ModelKind::Deterministic, 3, 2)).is_err());
    }

    #[test]
    fn infeasible_and_failed_points_are_flagged() {
        let p = Prepared::new(
            generate_instance(&GeneratorConfig { num_demand_points: 6, num_sites: 5, num_periods: 1, seed: 2, ..Default::default() }).unwrap(),
        );
        let mut config = SweepConfig::new(ModelKind::Probabilistic, 0, 2);
        config.mandatory_sites = vec![0, 1];
        let front = sweep(&p, &config).unwrap();
        assert_eq!(front.raw[0].status, Some(Status::Infeasible));
        assert_eq!(front.raw[1].status, Some(Status::Infeasible));
        assert!(front.raw[2].is_solved());
        assert_eq!(front.points.len(), 1);

        config.method = "cplex".into();
        assert!(sweep(&p, &config).is_err());
    }
}
