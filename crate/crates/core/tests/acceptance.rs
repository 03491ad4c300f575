//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod support;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use ambloc::coverage::{reliability, Prepared};
use ambloc::formulation::{
    add_epsilon_constraint, build_fleet_ict, build_fleet_static, build_lr_mexclp_ict, build_lr_mexclp_static,
    fix_variables, FixMode, ModelKind, ModelSpec, Relation,
};
use ambloc::instance::{generate_instance, DemandProfile, GeneratorConfig, SpatialModel, TypeConfig};
use ambloc::pareto::{compute_eps_min, filter_nondominated, monotonicity_violations, sweep, sweep_values, ParetoPoint, SweepConfig};
use ambloc::rational::Rational;
use ambloc::scenario::{run_scenario, ScenarioId, ScenarioSpec, SolverConfig};
use ambloc::solver::mps::{format_coefficient, row_names, OBJECTIVE_ROW};
use ambloc::solver::{audit, evaluate, solve_exact, write_mps, SolveParams, Status};
use num_traits::{One, Zero};
use rand::Rng;

// Pinned thresholds.
const ORACLE_INSTANCES: u64 = 200;
const RELIABILITY_DRAWS: usize = 1_000_000;
const CHAIN_INSTANCES: u64 = 60;
const GAIN_SEEDS: u64 = 100;
const GAIN_SHARE_PERCENT: u64 = 95;
const FILTER_SETS: usize = 10_000;
const MPS_MODELS: u64 = 100;
const SCALE_EPSILONS: [u32; 3] = [14, 20, 28];
const SCALE_LIMIT: Duration = Duration::from_secs(600);

type Outcome = Result<String, String>;

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn kind_models(p: &Prepared) -> Vec<(ModelKind, bool, ModelSpec)> {
    vec![
        (ModelKind::Deterministic, false, build_fleet_ict(&p.instance, &p.sets)),
        (ModelKind::Probabilistic, false, build_lr_mexclp_ict(&p.instance, &p.sets, &p.table)),
        (ModelKind::Deterministic, true, build_fleet_static(&p.instance, &p.sets)),
        (ModelKind::Probabilistic, true, build_lr_mexclp_static(&p.instance, &p.sets, &p.table)),
    ]
}

fn oracle_equivalence() -> Outcome {
    let mut solves = 0;
    for seed in 0..ORACLE_INSTANCES {
        let p = Prepared::new(support::random_instance(seed));
        let eps = (seed % (p.instance.num_sites() as u64 + 1)) as u32;
        for (kind, is_static, model) in kind_models(&p) {
            for budget in [None, Some(eps)] {
                let model = match budget {
                    Some(e) => add_epsilon_constraint(model.clone(), e),
                    None => model.clone(),
                };
                let expected = support::oracle::optimum(&p, kind, is_static, budget.map(|e| e as usize), &[]).unwrap();
                let sol = solve_exact(&model, &SolveParams::default()).map_err(|e| format!("seed {seed}: {e}"))?;
                ensure(sol.status == Status::Optimal && sol.objective == expected, || {
                    format!("seed {seed} {} eps {budget:?}: solver {} vs enumeration {expected}", model.meta.name, sol.objective)
                })?;
                solves += 1;
            }
        }
    }
    Ok(format!("{ORACLE_INSTANCES} instances, {solves} solves, all equal"))
}

fn reliability_formula() -> Outcome {
    ensure(reliability(&Rational::new(1, 2), 2) == Rational::new(3, 4), || "b=0.5, k=2 is not 0.75".into())?;
    ensure(reliability(&Rational::new(1, 4), 1) == Rational::new(3, 4), || "b=0.25, k=1 is not 0.75".into())?;
    ensure(reliability(&Rational::new(3, 2), 2).is_zero(), || "b=1.5 does not clamp to q=0".into())?;
    ensure(reliability(&Rational::zero(), 3).is_one(), || "b=0 is not q=1".into())?;
    let mut r = support::rng(2);
    let mut overloaded = 0;
    for _ in 0..RELIABILITY_DRAWS {
        let den: i128 = r.gen_range(1..=1000);
        let num: i128 = r.gen_range(0..=3 * den);
        let k: u32 = r.gen_range(1..=5);
        let b = Rational::new(num, den);
        let q = reliability(&b, k);
        ensure(q >= Rational::zero() && q <= Rational::one(), || format!("q({b}, {k}) = {q} outside [0,1]"))?;
        // independent check: 1 - (num/den)^k with the clamp applied by hand
        let (n, d) = if num > den { (1i128, 1i128) } else { (num, den) };
        let expected = Rational::new(d.pow(k) - n.pow(k), d.pow(k));
        ensure(q == expected, || format!("q({b}, {k}) = {q}, expected {expected}"))?;
        if num > den {
            overloaded += 1;
        }
    }
    Ok(format!("hand cases exact, {RELIABILITY_DRAWS} draws in [0,1] ({overloaded} clamped)"))
}

fn epsilon_monotonicity() -> Outcome {
    let mut sweeps = 0;
    for seed in 0..ORACLE_INSTANCES {
        let p = Prepared::new(support::random_instance(seed));
        for kind in [ModelKind::Deterministic, ModelKind::Probabilistic] {
            let config = SweepConfig::new(kind, 0, p.instance.num_sites() as u32);
            let front = sweep(&p, &config).map_err(|e| e.to_string())?;
            let bad = monotonicity_violations(&front.raw);
            ensure(bad.is_empty(), || format!("seed {seed} {kind:?}: objective drops at eps {bad:?}"))?;
            for point in &front.raw {
                let expected = support::oracle::optimum(&p, kind, false, Some(point.epsilon as usize), &[]).unwrap();
                ensure(point.coverage_objective == expected && point.stations_used <= point.epsilon as usize, || {
                    format!("seed {seed} {kind:?} eps {}: {} vs {expected}", point.epsilon, point.coverage_objective)
                })?;
            }
            sweeps += 1;
        }
    }
    Ok(format!("{sweeps} exact sweeps, zero violations, every point equal to enumeration"))
}

fn eps_min_constant() -> Outcome {
    let config = GeneratorConfig { num_demand_points: 3, num_sites: 40, num_periods: 1, ..GeneratorConfig::city_scale(0) };
    let inst = generate_instance(&config).map_err(|e| e.to_string())?;
    let fleets: Vec<u32> = inst.ambulance_types.iter().map(|t| t.fleet_size).collect();
    ensure(fleets == [7, 21] && inst.sites.iter().all(|s| s.capacity == 2), || format!("fleet {fleets:?}"))?;
    let m = compute_eps_min(&inst);
    ensure(m == 14, || format!("eps_min = {m}"))?;
    Ok("P = {7, 21}, C = 2 gives 14".into())
}

fn relaxation_chain() -> Outcome {
    let mut checked = 0;
    for seed in 0..CHAIN_INSTANCES {
        let p = Prepared::new(support::random_instance(1000 + seed));
        let baseline = support::random_baseline(&p.instance, &[0], seed);
        for kind in [ModelKind::Deterministic, ModelKind::Probabilistic] {
            let mut obj = BTreeMap::new();
            for id in ScenarioId::ALL {
                let mut spec = ScenarioSpec::new(id, kind, Some(baseline.clone()));
                spec.mandatory_sites = vec![0];
                let row = run_scenario(&p, &spec, &SolverConfig::default()).map_err(|e| format!("seed {seed} {id}: {e}"))?;
                obj.insert(id, row.objective);
            }
            use ScenarioId::*;
            let ok = obj[&S1] <= obj[&S3] && obj[&S3] <= obj[&S5] && obj[&S2] <= obj[&S4] && obj[&S4] <= obj[&S5];
            ensure(ok, || format!("seed {seed} {kind:?}: {obj:?}"))?;
            checked += 1;
        }
    }
    Ok(format!("{CHAIN_INSTANCES} instances x 2 models, zero violations ({checked} chains)"))
}

/// Two separated clusters with demand peaking at different times; one
/// vehicle per type, so serving both clusters needs relocation.
fn two_peak_config(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        num_demand_points: 10,
        num_sites: 6,
        num_periods: 4,
        seed,
        demand_profile: DemandProfile::TwoPeakDiurnal,
        spatial_model: SpatialModel::Clustered,
        ambulance_types: vec![
            TypeConfig { label: "ALS".into(), fleet_size: 1, response_standard: 10, demand_share: 0.35 },
            TypeConfig { label: "BLS".into(), fleet_size: 1, response_standard: 8, demand_share: 0.65 },
        ],
        k_max: 2,
        region_km: 20.0,
        ..GeneratorConfig::default()
    }
}

fn relocation_gain() -> Outcome {
    let mut strict = 0;
    for seed in 0..GAIN_SEEDS {
        let p = Prepared::new(generate_instance(&two_peak_config(seed)).map_err(|e| e.to_string())?);
        let s4 = run_scenario(&p, &ScenarioSpec::new(ScenarioId::S4, ModelKind::Deterministic, None), &SolverConfig::default())
            .map_err(|e| e.to_string())?;
        let s5 = run_scenario(&p, &ScenarioSpec::new(ScenarioId::S5, ModelKind::Deterministic, None), &SolverConfig::default())
            .map_err(|e| e.to_string())?;
        ensure(s5.objective >= s4.objective, || format!("seed {seed}: S5 {} < S4 {}", s5.objective, s4.objective))?;
        if s5.objective > s4.objective {
            strict += 1;
        }
    }
    let detail = format!("S5 > S4 on {strict}/{GAIN_SEEDS} seeds (need {GAIN_SHARE_PERCENT}%)");
    if strict * 100 >= GAIN_SEEDS * GAIN_SHARE_PERCENT {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn deterministic_dominates() -> Outcome {
    for seed in 0..ORACLE_INSTANCES {
        let p = Prepared::new(support::random_instance(seed));
        let det = build_fleet_ict(&p.instance, &p.sets);
        let prob = build_lr_mexclp_ict(&p.instance, &p.sets, &p.table);
        let det_opt = solve_exact(&det, &SolveParams::default()).map_err(|e| e.to_string())?;
        let prob_opt = solve_exact(&prob, &SolveParams::default()).map_err(|e| e.to_string())?;
        ensure(det_opt.objective >= prob_opt.objective, || format!("seed {seed}: optimum {} < {}", det_opt.objective, prob_opt.objective))?;
        // the probabilistic solution scored deterministically
        let plan = ambloc::solver::decode(&prob_opt, &p.instance, &prob).map_err(|e| e.to_string())?;
        let (scored, _) = evaluate(&p, ModelKind::Deterministic, &plan).map_err(|e| e.to_string())?;
        ensure(scored.objective >= prob_opt.objective, || format!("seed {seed}: same plan {} < {}", scored.objective, prob_opt.objective))?;
    }
    Ok(format!("{ORACLE_INSTANCES} instances, optima and shared plans"))
}

fn reference_filter(points: &[ParetoPoint]) -> Vec<(usize, Rational)> {
    let mut kept: Vec<(usize, Rational)> = Vec::new();
    for p in points {
        let dominated = points.iter().any(|q| {
            q.stations_used <= p.stations_used
                && q.coverage_objective >= p.coverage_objective
                && (q.stations_used < p.stations_used || q.coverage_objective > p.coverage_objective)
        });
        let pair = (p.stations_used, p.coverage_objective);
        if !dominated && !kept.contains(&pair) {
            kept.push(pair);
        }
    }
    kept.sort();
    kept
}

fn front_filter() -> Outcome {
    let mut r = support::rng(8);
    for set in 0..FILTER_SETS {
        let n = r.gen_range(0..30);
        let points: Vec<ParetoPoint> = (0..n)
            .map(|e| ParetoPoint::bare(e as u32, r.gen_range(0..12), Rational::new(r.gen_range(0..40), r.gen_range(1..=3))))
            .collect();
        let got: Vec<(usize, Rational)> = filter_nondominated(&points).iter().map(|p| (p.stations_used, p.coverage_objective)).collect();
        let want = reference_filter(&points);
        ensure(got == want, || format!("set {set}: {got:?} vs {want:?}"))?;
        let staircase = got.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1);
        ensure(staircase, || format!("set {set}: not a strict staircase"))?;
    }
    Ok(format!("{FILTER_SETS} random sets equal to the quadratic scan"))
}

fn mps_round_trip() -> Outcome {
    let mut entries = 0;
    for seed in 0..MPS_MODELS {
        let p = Prepared::new(support::random_instance(seed + 7));
        let (_, _, model) = kind_models(&p).swap_remove((seed % 4) as usize);
        let model = if seed % 3 == 0 { add_epsilon_constraint(model, 2) } else { model };
        let model = if seed % 5 == 0 {
            let plan = support::random_baseline(&p.instance, &[], seed);
            fix_variables(model, &plan, FixMode::ZOnly).map_err(|e| e.to_string())?
        } else {
            model
        };
        let m = support::mps_reader::read(&write_mps(&model));
        ensure(m.maximize && m.objective_row == OBJECTIVE_ROW, || format!("seed {seed}: sense or objective row"))?;
        ensure(m.columns.len() == model.variables.len() && m.binaries.len() == model.variables.len(), || {
            format!("seed {seed}: {} columns for {} variables", m.columns.len(), model.variables.len())
        })?;
        ensure(m.rows.len() == model.constraints.len(), || format!("seed {seed}: row count"))?;
        let names = row_names(&model);
        let mut expected: BTreeMap<(String, String), Rational> = BTreeMap::new();
        for (v, c) in &model.objective {
            expected.insert((v.to_string(), OBJECTIVE_ROW.to_string()), *c);
        }
        for ((c, name), (read_name, kind)) in model.constraints.iter().zip(&names).zip(&m.rows) {
            let want_kind = match c.relation {
                Relation::Le => 'L',
                Relation::Ge => 'G',
                Relation::Eq => 'E',
            };
            ensure(read_name == name && *kind == want_kind, || format!("seed {seed}: row {name} read as {read_name} {kind}"))?;
            for (v, a) in &c.terms {
                expected.insert((v.to_string(), name.clone()), *a);
            }
            let rhs = m.rhs.get(name).map_or(c.rhs.is_zero(), |text| support::mps_reader::same_number(text, &c.rhs));
            ensure(rhs, || format!("seed {seed}: rhs of {name}"))?;
        }
        ensure(expected.len() == m.entries.len(), || format!("seed {seed}: {} entries vs {}", m.entries.len(), expected.len()))?;
        for (key, value) in &expected {
            let text = m.entries.get(key).ok_or_else(|| format!("seed {seed}: missing {key:?}"))?;
            ensure(support::mps_reader::same_number(text, value), || {
                format!("seed {seed}: {key:?} written {text}, model {value} ({})", format_coefficient(value))
            })?;
        }
        entries += expected.len();
    }
    Ok(format!("{MPS_MODELS} models, {entries} coefficients reproduced"))
}

fn scale_smoke() -> Outcome {
    let start = Instant::now();
    let p = Prepared::new(generate_instance(&GeneratorConfig::city_scale(1)).map_err(|e| e.to_string())?);
    let dims = (p.instance.num_points(), p.instance.num_sites(), p.instance.num_periods);
    ensure(dims == (427, 1527, 24), || format!("dimensions {dims:?}"))?;
    let mut config = SweepConfig::new(ModelKind::Deterministic, 0, 0);
    config.method = "heuristic".into();
    config.params.seed = 1;
    let front = sweep_values(&p, &config, &SCALE_EPSILONS).map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for point in &front.raw {
        ensure(point.status == Some(Status::Feasible), || format!("eps {}: {}", point.epsilon, point.status_text()))?;
        ensure(point.stations_used <= point.epsilon as usize, || format!("eps {}: too many stations", point.epsilon))?;
        // independent re-audit: pin the plan and rescore it on the full model
        let plan = point.plan.as_ref().unwrap();
        let (scored, _) = evaluate(&p, ModelKind::Deterministic, plan).map_err(|e| e.to_string())?;
        ensure(scored.objective == point.coverage_objective, || format!("eps {}: rescored {}", point.epsilon, scored.objective))?;
        let model = add_epsilon_constraint(build_fleet_ict(&p.instance, &p.sets), point.epsilon);
        let fixed = fix_variables(model, plan, FixMode::ZAndX).map_err(|e| e.to_string())?;
        audit(&fixed, &scored.assignment).map_err(|e| format!("eps {}: {e}", point.epsilon))?;
        summary.push(format!("eps {} -> {:.2}%", point.epsilon, point.coverage_rate_total));
    }
    let elapsed = start.elapsed();
    ensure(elapsed <= SCALE_LIMIT, || format!("took {:.0} s", elapsed.as_secs_f64()))?;
    Ok(format!("{} in {:.1} s", summary.join(", "), elapsed.as_secs_f64()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("reliability formula", reliability_formula),
        ("epsilon monotonicity", epsilon_monotonicity),
        ("eps_min", eps_min_constant),
        ("relaxation chain", relaxation_chain),
        ("relocation gain", relocation_gain),
        ("deterministic dominates probabilistic", deterministic_dominates),
        ("front filter", front_filter),
        ("MPS round trip", mps_round_trip),
        ("scale smoke test", scale_smoke),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let number = n + 1;
        if only.is_some_and(|o| o != number) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {number:>2} PASS  {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {number:>2} FAIL  {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
