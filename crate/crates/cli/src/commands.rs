use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ambloc::coverage::Prepared;
use ambloc::formulation::{add_epsilon_constraint, require_open_sites, Formulation, FormulationRegistry, ModelKind, ModelSpec};
use ambloc::instance::{
    baseline_plan_load, generate_instance, load_instance, save_instance, DemandProfile, GeneratorConfig, Plan, SpatialModel,
};
use ambloc::pareto::{compute_eps_min, knee, sweep, sweep_values, SweepConfig};
use ambloc::scenario::{compare, deltas_markdown, parse_scenario_list, run_scenarios, ScenarioSpec, SolverConfig};
use ambloc::solver::mps::write_solution;
use ambloc::solver::{decode, evaluate, export_mps, import_solution, SolveParams, Solution, SolverRegistry, Status};
use log::info;
use serde::Serialize;

use crate::manifest::{config_hash, RunManifest};
use crate::report::{coverage_report, plan_section, Header};
use crate::{
    Cli, Command, GenerateArgs, ImportArgs, KindArg, KindsArg, Method, ModelArgs, Profile, ReportArgs, ScenarioArgs, SearchArgs,
    SolveArgs, Spatial, SweepArgs, EXIT_INFEASIBLE, EXIT_INTERNAL, EXIT_TIME_LIMIT,
};
use crate::{Failure, EXIT_INVALID};

/// What a command produced, before the manifest is written.
struct Run {
    dir: PathBuf,
    artifacts: Vec<String>,
    fingerprint: Option<String>,
    seed: u64,
    code: u8,
    /// Extra resolved settings folded into the config hash.
    resolved: serde_json::Value,
    summary: Vec<String>,
}

impl Run {
    fn new(dir: &Path, seed: u64) -> Result<Run, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
        Ok(Run {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            fingerprint: None,
            seed,
            code: 0,
            resolved: serde_json::Value::Null,
            summary: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), Failure> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| Failure::io(&path, e))
    }

    fn say(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }
}

pub fn run(cli: &Cli) -> Result<u8, Failure> {
    let start = Instant::now();
    let seed = cli.seed.unwrap_or(0);
    let mut run = match &cli.command {
        Command::Generate(a) => generate(cli, a)?,
        Command::Solve(a) => solve(a, seed)?,
        Command::Sweep(a) => sweep_cmd(cli, a, seed)?,
        Command::Scenario(a) => scenario(cli, a, seed)?,
        Command::ExportMps(a) => export(a, seed)?,
        Command::ImportSolution(a) => import(a, seed)?,
        Command::Report(a) => report(a, seed)?,
    };
    #[derive(Serialize)]
    struct Resolved<'a> {
        cli: &'a Cli,
        seed: u64,
        resolved: &'a serde_json::Value,
    }
    let manifest = RunManifest {
        command_line: std::env::args().collect(),
        config_hash: config_hash(&Resolved { cli, seed: run.seed, resolved: &run.resolved }),
        instance_fingerprint: run.fingerprint.take(),
        seed: run.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts: run.artifacts.clone(),
    };
    manifest.write(&run.dir)?;
    if !cli.quiet {
        for line in &run.summary {
            println!("{line}");
        }
    }
    for name in &run.artifacts {
        println!("{}", run.dir.join(name).display());
    }
    Ok(run.code)
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<Run, Failure> {
    let mut config = match (&a.config, &a.config_dir) {
        (Some(path), _) => GeneratorConfig::load(path)?,
        _ if a.city_scale => GeneratorConfig::city_scale(0),
        (None, Some(dir)) if dir.join("generator.json").is_file() => GeneratorConfig::load(dir.join("generator.json"))?,
        _ => GeneratorConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(n) = a.points {
        config.num_demand_points = n;
    }
    if let Some(n) = a.sites {
        config.num_sites = n;
    }
    if let Some(n) = a.periods {
        config.num_periods = n;
    }
    if let Some(s) = a.spatial {
        config.spatial_model = match s {
            Spatial::UniformSquare => SpatialModel::UniformSquare,
            Spatial::Clustered => SpatialModel::Clustered,
        };
    }
    if let Some(p) = a.profile {
        config.demand_profile = match p {
            Profile::Uniform => DemandProfile::Uniform,
            Profile::TwoPeakDiurnal => DemandProfile::TwoPeakDiurnal,
        };
    }
    let instance = generate_instance(&config)?;
    let mut run = Run::new(&a.output.out, config.seed)?;
    run.resolved = serde_json::to_value(&config).expect("config serializes");
    save_instance(&instance, run.path("instance.json"))?;
    run.fingerprint = Some(instance.fingerprint());
    run.say(format!(
        "generated {} points, {} sites, {} periods, fleet {} (fingerprint {})",
        instance.num_points(),
        instance.num_sites(),
        instance.num_periods,
        instance.total_fleet(),
        instance.fingerprint()
    ));
    Ok(run)
}

fn prepare(path: &Path) -> Result<Prepared, Failure> {
    Ok(Prepared::new(load_instance(path)?))
}

fn build<'r>(
    registry: &'r FormulationRegistry,
    prepared: &Prepared,
    a: &ModelArgs,
) -> Result<(&'r dyn Formulation, ModelSpec), Failure> {
    let formulation = registry.get(&a.model)?;
    let mut model = require_open_sites(formulation.build(prepared), &a.mandatory)?;
    if let Some(eps) = a.epsilon {
        model = add_epsilon_constraint(model, eps);
    }
    Ok((formulation, model))
}

fn params(search: &SearchArgs, seed: u64) -> Result<SolveParams, Failure> {
    let time_limit = search
        .time_limit
        .map(|s| {
            Duration::try_from_secs_f64(s)
                .map_err(|_| Failure { code: EXIT_INVALID, message: format!("invalid --time-limit {s}") })
        })
        .transpose()?;
    Ok(SolveParams { time_limit, seed, budget: search.budget, hint: None })
}

/// Decoded plan; static models are replicated and scored on the multi-period model.
fn plan_of(prepared: &Prepared, formulation: &dyn Formulation, solution: &Solution, model: &ModelSpec) -> Result<Plan, Failure> {
    let decoded = decode(solution, &prepared.instance, model)?;
    if !formulation.is_static() {
        return Ok(decoded);
    }
    let replicated = decoded.replicate(prepared.instance.num_periods);
    Ok(evaluate(prepared, formulation.kind(), &replicated)?.1)
}

fn solve(a: &SolveArgs, seed: u64) -> Result<Run, Failure> {
    let prepared = prepare(&a.model.instance)?;
    let registry = FormulationRegistry::default();
    let (formulation, model) = build(&registry, &prepared, &a.model)?;
    let params = params(&a.search, seed)?;
    let mut run = Run::new(&a.model.output.out, seed)?;
    run.fingerprint = Some(prepared.instance.fingerprint());
    if a.dump_reliability {
        prepared.table.dump_csv(run.path("reliability.csv"))?;
    }
    let method = match a.method {
        Method::Export => {
            export_mps(&model, run.path("model.mps"))?;
            run.say(format!("exported {} ({} variables, {} rows)", formulation.name(), model.variables.len(), model.constraints.len()));
            return Ok(run);
        }
        Method::Exact => "exact",
        Method::Heuristic => "heuristic",
    };
    let solution = SolverRegistry::default().get(method)?.solve(&model, &params)?;
    let header = Header { model: formulation.name(), method, epsilon: a.model.epsilon };
    if !solution.status.has_solution() {
        run.code = EXIT_INFEASIBLE;
        run.write("report.txt", &coverage_report(&header, &prepared.instance, &solution, &Plan::default()))?;
        run.say(format!("{}: infeasible", formulation.name()));
        return Ok(run);
    }
    let plan = plan_of(&prepared, formulation, &solution, &model)?;
    if solution.status == Status::TimeLimit {
        run.code = EXIT_TIME_LIMIT;
    }
    plan.save(run.path("plan.json"))?;
    run.write("solution.txt", &write_solution(&solution, &model))?;
    run.write("report.txt", &coverage_report(&header, &prepared.instance, &solution, &plan))?;
    run.say(summary_line(formulation.name(), &solution, &plan));
    Ok(run)
}

fn summary_line(name: &str, solution: &Solution, plan: &Plan) -> String {
    let rate = plan.coverage.as_ref().map_or(0.0, |c| c.rate_percent);
    format!(
        "{name}: {} objective {:.4}, {} stations, coverage {rate:.2}%",
        solution.status,
        ambloc::rational::to_f64(&solution.objective),
        plan.opened_sites.len()
    )
}

fn kind_of(k: KindArg) -> ModelKind {
    match k {
        KindArg::Deterministic => ModelKind::Deterministic,
        KindArg::Probabilistic => ModelKind::Probabilistic,
    }
}

fn sweep_cmd(cli: &Cli, a: &SweepArgs, seed: u64) -> Result<Run, Failure> {
    let prepared = prepare(&a.instance)?;
    let inst = &prepared.instance;
    let eps_min = a.eps_min.unwrap_or_else(|| compute_eps_min(inst));
    let eps_max = a
        .eps_max
        .unwrap_or_else(|| (inst.num_sites() as u64).min(inst.total_fleet() as u64 * inst.num_periods as u64) as u32);
    let mut config = SweepConfig::new(kind_of(a.kind), eps_min, eps_max);
    config.method = a.method.name().to_string();
    config.params = params(&a.search, seed)?;
    config.warm_start = !a.no_warm_start;
    config.mandatory_sites = a.mandatory.clone();
    config.jobs = cli.jobs as usize;
    let front = if a.eps.is_empty() { sweep(&prepared, &config)? } else { sweep_values(&prepared, &config, &a.eps)? };

    let mut run = Run::new(&a.output.out, seed)?;
    run.fingerprint = Some(inst.fingerprint());
    run.resolved = serde_json::json!({ "eps_min": eps_min, "eps_max": eps_max });
    run.write("front.csv", &front.to_csv())?;
    run.write("raw.csv", &front.raw_csv())?;
    for p in &front.points {
        if let Some(plan) = &p.plan {
            plan.save(run.path(&format!("plan_eps_{}.json", p.epsilon)))?;
        }
    }
    let knee_eps = knee(&front.points, a.knee_threshold);
    let knee_text = match knee_eps {
        Some(e) => format!("knee_epsilon {e}\nthreshold_pp_per_station {}\n", a.knee_threshold),
        None => format!("knee_epsilon none\nthreshold_pp_per_station {}\n", a.knee_threshold),
    };
    run.write("knee.txt", &knee_text)?;

    let solved = front.raw.iter().filter(|p| p.is_solved()).count();
    run.code = if solved == 0 {
        if front.raw.iter().any(|p| p.status == Some(Status::Infeasible)) {
            EXIT_INFEASIBLE
        } else {
            EXIT_INTERNAL
        }
    } else if front.raw.iter().any(|p| p.status == Some(Status::TimeLimit)) {
        EXIT_TIME_LIMIT
    } else {
        0
    };
    for p in front.raw.iter().filter(|p| p.error.is_some()) {
        info!("epsilon {} failed: {}", p.epsilon, p.error.as_deref().unwrap_or(""));
    }
    run.say(format!(
        "swept {} budgets ({} solved), {} front points, knee {}",
        front.raw.len(),
        solved,
        front.points.len(),
        knee_eps.map_or("none".to_string(), |e| e.to_string())
    ));
    Ok(run)
}

fn scenario(cli: &Cli, a: &ScenarioArgs, seed: u64) -> Result<Run, Failure> {
    let prepared = prepare(&a.instance)?;
    let ids = parse_scenario_list(&a.which)?;
    let baseline = a.baseline.as_ref().map(|p| baseline_plan_load(p, &prepared.instance)).transpose()?;
    let kinds: &[ModelKind] = match a.kind {
        KindsArg::Deterministic => &[ModelKind::Deterministic],
        KindsArg::Probabilistic => &[ModelKind::Probabilistic],
        KindsArg::Both => &[ModelKind::Deterministic, ModelKind::Probabilistic],
    };
    let specs: Vec<ScenarioSpec> = kinds
        .iter()
        .flat_map(|&kind| ids.iter().map(move |&id| (kind, id)))
        .map(|(kind, id)| {
            let mut spec = ScenarioSpec::new(id, kind, baseline.clone());
            spec.epsilon = a.epsilon;
            spec.mandatory_sites = a.mandatory.clone();
            spec
        })
        .collect();
    let solver = SolverConfig { method: a.method.name().to_string(), params: params(&a.search, seed)? };
    let report = run_scenarios(&prepared, &specs, &solver, cli.jobs as usize)?;
    let deltas = compare(std::slice::from_ref(&report))?;

    let mut run = Run::new(&a.output.out, seed)?;
    run.fingerprint = Some(report.instance_fingerprint.clone());
    run.write("scenarios.csv", &report.to_csv())?;
    run.write("scenarios.md", &report.to_markdown())?;
    run.write("deltas.md", &deltas_markdown(&deltas))?;
    for row in &report.rows {
        row.plan.save(run.path(&format!("plan_{}_{}.json", row.id, row.kind.as_str())))?;
    }
    if report.rows.iter().any(|r| r.status == Status::TimeLimit) {
        run.code = EXIT_TIME_LIMIT;
    }
    run.say(report.to_markdown());
    Ok(run)
}

fn export(a: &ModelArgs, seed: u64) -> Result<Run, Failure> {
    let prepared = prepare(&a.instance)?;
    let registry = FormulationRegistry::default();
    let (formulation, model) = build(&registry, &prepared, a)?;
    let mut run = Run::new(&a.output.out, seed)?;
    run.fingerprint = Some(prepared.instance.fingerprint());
    export_mps(&model, run.path("model.mps"))?;
    run.say(format!("exported {} ({} variables, {} rows)", formulation.name(), model.variables.len(), model.constraints.len()));
    Ok(run)
}

fn import(a: &ImportArgs, seed: u64) -> Result<Run, Failure> {
    let prepared = prepare(&a.model.instance)?;
    let registry = FormulationRegistry::default();
    let (formulation, model) = build(&registry, &prepared, &a.model)?;
    let solution = import_solution(&a.solution, &model)?;
    let plan = plan_of(&prepared, formulation, &solution, &model)?;
    let mut run = Run::new(&a.model.output.out, seed)?;
    run.fingerprint = Some(prepared.instance.fingerprint());
    plan.save(run.path("plan.json"))?;
    let header = Header { model: formulation.name(), method: "import", epsilon: a.model.epsilon };
    run.write("report.txt", &coverage_report(&header, &prepared.instance, &solution, &plan))?;
    run.say(summary_line(formulation.name(), &solution, &plan));
    Ok(run)
}

fn report(a: &ReportArgs, seed: u64) -> Result<Run, Failure> {
    let prepared = prepare(&a.instance)?;
    let plan = baseline_plan_load(&a.plan, &prepared.instance)?;
    let kind = kind_of(a.kind);
    let (solution, scored) = evaluate(&prepared, kind, &plan)?;
    let mut run = Run::new(&a.output.out, seed)?;
    run.fingerprint = Some(prepared.instance.fingerprint());
    let mut text = format!("instance     {}\nmodel        {}\n", prepared.instance.fingerprint(), kind.as_str());
    plan_section(&mut text, &scored);
    run.write("report.txt", &text)?;
    scored.save(run.path("plan.json"))?;
    run.say(format!("{}: objective {:.4}", kind.as_str(), ambloc::rational::to_f64(&solution.objective)));
    Ok(run)
}
