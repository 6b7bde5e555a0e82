//! `orpool`: generate instances, sample scenarios, solve, evaluate and run
//! the SAA and analysis experiments from the command line.

mod output;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use orpool_core::analysis::{
    compare_policies, occupancy_series, sensitivity_baseline, sensitivity_sweep, series_record, PolicyComparison,
    SensitivityParam, SensitivityRow, SERIES_CSV_HEADER,
};
use orpool_core::domain::{first_stage_breakdown, FirstStageSolution, Instance};
use orpool_core::evaluator::{EvalPlan, SpecialtyOrder};
use orpool_core::generator::{generate, generate_grid, BedRule, GeneratorConfig};
use orpool_core::milp::{
    backend_from_name, build_evp, build_extensive, solve, write_lp, SolveLimits, SolverBackend, BACKEND_ENV,
};
use orpool_core::saa::{evaluate_upper_bound, run_saa, tune, SaaConfig, SaaReport};
use orpool_core::sampling::{read_jsonl, sample_bundle, write_jsonl, CarryoverMode, SamplerConfig, Scenario};
use output::{read_json, write_artifact, write_csv, write_sidecar};
use serde::Serialize;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "orpool", version, about = "Two-stage operating-room planning with pooled ICU and ward beds")]
struct Cli {
    /// Worker threads for solves and scenario evaluation (0: all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random instance, or the full benchmark grid.
    Generate(GenerateArgs),
    /// Draw a scenario bundle and write it as JSON lines.
    Sample(SampleArgs),
    /// Solve the extensive form (or the expected value problem).
    Solve(SolveArgs),
    /// Evaluate a first-stage solution on a scenario bundle.
    Evaluate(EvaluateArgs),
    /// Run sample average approximation with gap and VSS.
    Saa(SaaArgs),
    /// Compare pooling policies on a common scenario bundle.
    Compare(CompareArgs),
    /// Scale one cost or stochastic parameter and re-solve.
    Sensitivity(SensitivityArgs),
    /// Sweep SAA sample sizes and report gap and RSD per cell.
    Tune(TuneArgs),
    /// Mean pooled-bed and surge usage per day of a solution.
    Series(SeriesArgs),
}

#[derive(Args, Debug, Serialize)]
struct SolverArgs {
    /// MILP backend: highs or microlp.
    #[arg(long, env = BACKEND_ENV, default_value = "highs")]
    backend: String,
    /// Relative MIP gap at which a solve stops.
    #[arg(long, default_value_t = 1e-4)]
    gap: f64,
    /// Time limit per solve in seconds.
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
}

impl SolverArgs {
    fn limits(&self) -> SolveLimits {
        SolveLimits {
            rel_gap: self.gap,
            time_limit: self.time_limit,
        }
    }

    fn backend(&self) -> Result<Box<dyn SolverBackend>> {
        backend_from_name(&self.backend).map_err(|e| anyhow!(e))
    }
}

#[derive(Args, Debug, Serialize)]
struct SamplingArgs {
    /// Seed of the scenario stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Carry-over occupancy: `zero`, or the occupied fraction of the
    /// non-shared stock on the first day.
    #[arg(long, default_value = "zero", value_parser = parse_carryover)]
    carryover: CarryoverMode,
}

impl SamplingArgs {
    fn config(&self) -> SamplerConfig {
        SamplerConfig {
            carryover: self.carryover,
            ..SamplerConfig::with_seed(self.seed)
        }
    }
}

fn parse_carryover(s: &str) -> Result<CarryoverMode, String> {
    if s == "zero" {
        return Ok(CarryoverMode::Zero);
    }
    let fraction: f64 = s.parse().map_err(|_| format!("expected `zero` or a fraction, got {s:?}"))?;
    if !(0.0..=1.0).contains(&fraction) {
        return Err(format!("carry-over fraction {fraction} outside [0, 1]"));
    }
    Ok(CarryoverMode::Synthetic { fraction })
}

#[derive(Args, Debug, Serialize)]
struct BundleArgs {
    /// Scenario bundle (JSON lines); drawn from the sampling options when
    /// absent.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Scenarios to draw when no bundle is given.
    #[arg(long, default_value_t = 30)]
    count: usize,
    #[command(flatten)]
    #[serde(flatten)]
    sampling: SamplingArgs,
}

impl BundleArgs {
    fn load(&self, instance: &Instance) -> Result<Vec<Scenario>> {
        match &self.scenarios {
            Some(path) => {
                let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                let bundle = read_jsonl(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
                if bundle.is_empty() {
                    bail!("{} holds no scenarios", path.display());
                }
                Ok(bundle)
            }
            None => Ok(sample_bundle(instance, self.sampling.config(), self.count)?),
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct GenerateArgs {
    #[arg(long, default_value_t = 2)]
    weeks: usize,
    #[arg(long, default_value_t = 7)]
    specialties: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    patients_per_week: usize,
    /// Pooled fraction of both bed stocks.
    #[arg(long, default_value_t = 0.5)]
    shared_fraction: f64,
    /// Scale on expected daily bed demand when sizing the stock.
    #[arg(long, default_value_t = 0.8)]
    bed_factor: f64,
    /// Fixed bed stock `ICU,WARD` instead of the demand formula.
    #[arg(long, value_parser = parse_pair)]
    preset_beds: Option<(u32, u32)>,
    /// Write every week/specialty combination instead of one instance.
    #[arg(long, requires = "out_dir")]
    grid: bool,
    #[arg(long, default_value_t = 1)]
    replications: usize,
    /// Directory for grid instances and their manifest.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Output instance file.
    #[arg(short, long, required_unless_present = "grid")]
    output: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected ICU,WARD, got {s:?}"))?;
    let parse = |x: &str| x.trim().parse::<u32>().map_err(|e| e.to_string());
    Ok((parse(a)?, parse(b)?))
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 30)]
    count: usize,
    #[command(flatten)]
    #[serde(flatten)]
    sampling: SamplingArgs,
    /// Output bundle (JSON lines).
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    bundle: BundleArgs,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
    /// Solve the expected value problem built from the bundle mean.
    #[arg(long)]
    evp: bool,
    /// Also write the model in LP format.
    #[arg(long)]
    lp: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Solution file, or any output of `solve` or `saa`.
    #[arg(long)]
    solution: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    bundle: BundleArgs,
    /// Per-day occupancy CSV of one scenario.
    #[arg(long)]
    occupancy_csv: Option<PathBuf>,
    /// Scenario exported by `--occupancy-csv`.
    #[arg(long, default_value_t = 0)]
    scenario_index: usize,
    /// Seed of the specialty order used for the exported allocation.
    #[arg(long, default_value_t = 0)]
    order_seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SaaArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Desk-scale profile: N = 10, M = 5, P = 1000.
    #[arg(long)]
    small: bool,
    /// Scenarios per lower-bound problem (default 30).
    #[arg(long)]
    n: Option<usize>,
    /// Lower-bound iterations (default 25).
    #[arg(long)]
    m: Option<usize>,
    /// Upper-bound scenarios (default 6000).
    #[arg(long)]
    p: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
    /// Skip the expected value problem and VSS.
    #[arg(long)]
    no_vss: bool,
    /// Record wall-clock timings (makes the report run-dependent).
    #[arg(long)]
    timing: bool,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the one-row summary CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl SaaArgs {
    fn config(&self, jobs: usize) -> SaaConfig {
        let base = if self.small { SaaConfig::small() } else { SaaConfig::default() };
        SaaConfig {
            n_lb: self.n.unwrap_or(base.n_lb),
            m_iter: self.m.unwrap_or(base.m_iter),
            p_ub: self.p.unwrap_or(base.p_ub),
            seed: self.sampling.seed,
            limits: self.solver.limits(),
            jobs,
            sampler: self.sampling.config(),
            with_vss: !self.no_vss,
            record_timing: self.timing,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct CompareArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Pooled fractions to compare, applied to both units.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1")]
    policies: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    bundle: BundleArgs,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
    /// Output CSV, one row per policy.
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the full comparison with solutions as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SensitivityArgs {
    #[arg(long)]
    instance: PathBuf,
    /// waiting, or, surge, postpone, overtime, duration or los.
    #[arg(long)]
    #[serde(serialize_with = "output::display")]
    param: SensitivityParam,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,7,10")]
    multipliers: Vec<f64>,
    #[arg(long, default_value_t = 30)]
    count: usize,
    #[command(flatten)]
    #[serde(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
    /// Output CSV: the unscaled baseline, then one row per multiplier.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct TuneArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "10,20,30")]
    n_values: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,25")]
    m_values: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    p_values: Vec<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
    /// Record wall-clock seconds per cell.
    #[arg(long)]
    timing: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SeriesArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    bundle: BundleArgs,
    #[arg(long, default_value_t = 0)]
    order_seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let inst = Instance::from_json(&text).with_context(|| format!("parsing instance {}", path.display()))?;
    inst.check().map_err(|e| anyhow!("instance {}: {e}", path.display()))?;
    Ok(inst)
}

/// Reads a bare solution, or the solution inside a `solve` or `saa` output.
fn load_solution(path: &Path) -> Result<FirstStageSolution> {
    let value: serde_json::Value = read_json(path)?;
    let inner = match value.get("result") {
        Some(r) => r.get("best_solution").or_else(|| r.get("solution")).cloned().unwrap_or(r.clone()),
        None => value,
    };
    serde_json::from_value(inner).with_context(|| format!("no first-stage solution in {}", path.display()))
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let config = GeneratorConfig {
        weeks: args.weeks,
        n_specialties: args.specialties,
        seed: args.seed,
        bed_rule: match args.preset_beds {
            Some((icu, ward)) => BedRule::Preset { icu, ward },
            None => BedRule::Formula { factor: args.bed_factor },
        },
        patients_per_week: args.patients_per_week,
        shared_fraction: args.shared_fraction,
    };
    if !args.grid {
        let inst = generate(&config)?;
        let path = args.output.as_ref().expect("required by clap");
        return output::write_text(path, &(inst.to_json() + "\n"));
    }
    let dir = args.out_dir.as_ref().expect("required by clap");
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut manifest = Vec::new();
    for (k, (cfg, inst)) in generate_grid(args.seed, args.replications, &config)?.into_iter().enumerate() {
        let name = format!("w{}_s{}_r{}.json", cfg.weeks, cfg.n_specialties, k % args.replications);
        output::write_text(&dir.join(&name), &(inst.to_json() + "\n"))?;
        manifest.push(serde_json::json!({ "file": name, "config": cfg }));
    }
    write_artifact(&dir.join("manifest.json"), "generate", args, &manifest)
}

fn cmd_sample(args: &SampleArgs) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let bundle = sample_bundle(&inst, args.sampling.config(), args.count)?;
    let file = File::create(&args.output).with_context(|| format!("creating {}", args.output.display()))?;
    write_jsonl(BufWriter::new(file), &bundle)?;
    write_sidecar(&args.output, "sample", args)
}

#[derive(Serialize)]
struct SolveResult {
    model: &'static str,
    backend: String,
    status: orpool_core::SolveStatus,
    objective: f64,
    bound: Option<f64>,
    recomputed: f64,
    rows: usize,
    columns: usize,
    first_stage: orpool_core::CostBreakdown,
    solution: FirstStageSolution,
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let bundle = args.bundle.load(&inst)?;
    let model = if args.evp { build_evp(&inst, &bundle)? } else { build_extensive(&inst, &bundle)? };
    if let Some(path) = &args.lp {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_lp(&model, BufWriter::new(file))?;
    }
    let backend = args.solver.backend()?;
    let out = solve(&inst, &model, backend.as_ref(), &args.solver.limits(), None)
        .with_context(|| format!("solving with {}", backend.name()))?;
    let result = SolveResult {
        model: if args.evp { "expected_value" } else { "extensive" },
        backend: out.backend.clone(),
        status: out.status,
        objective: out.objective,
        bound: out.bound,
        recomputed: out.recomputed,
        rows: model.num_rows(),
        columns: model.num_vars(),
        first_stage: first_stage_breakdown(&inst, &out.solution),
        solution: out.solution,
    };
    write_artifact(&args.output, "solve", args, &result)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let sol = load_solution(&args.solution)?;
    let violations = orpool_core::domain::validate(&inst, &sol);
    if !violations.is_empty() {
        bail!("{}", orpool_core::ValidationError { violations });
    }
    let bundle = args.bundle.load(&inst)?;
    let ub = evaluate_upper_bound(&inst, &sol, &bundle)?;
    if let Some(path) = &args.occupancy_csv {
        let sc = bundle
            .get(args.scenario_index)
            .ok_or_else(|| anyhow!("scenario index {} out of range", args.scenario_index))?;
        let order = SpecialtyOrder::shuffled(inst.specialty_count(), args.order_seed);
        let out = EvalPlan::new(&inst, &sol)?.evaluate(sc, &order)?;
        let mut buf = Vec::new();
        out.write_csv(&mut buf)?;
        output::write_bytes(path, &buf)?;
        write_sidecar(path, "evaluate", args)?;
    }
    write_artifact(&args.output, "evaluate", args, &ub)
}

fn cmd_saa(args: &SaaArgs, jobs: usize) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let config = args.config(jobs);
    let backend = args.solver.backend()?;
    let report = run_saa(&inst, &config, backend.as_ref()).with_context(|| format!("SAA with {}", backend.name()))?;
    if let Some(path) = &args.csv {
        let name = args.instance.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        write_csv(path, &SaaReport::CSV_HEADER, &[report.csv_record(&name)])?;
        write_sidecar(path, "saa", args)?;
    }
    write_artifact(&args.output, "saa", args, &report)
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let bundle = args.bundle.load(&inst)?;
    let backend = args.solver.backend()?;
    let cmp = compare_policies(&inst, &bundle, &args.policies, backend.as_ref(), &args.solver.limits())?;
    write_csv(&args.output, &PolicyComparison::CSV_HEADER, &cmp.csv_records())?;
    write_sidecar(&args.output, "compare", args)?;
    if let Some(path) = &args.json {
        write_artifact(path, "compare", args, &cmp)?;
    }
    Ok(())
}

fn cmd_sensitivity(args: &SensitivityArgs) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let backend = args.solver.backend()?;
    let (sampler, limits) = (args.sampling.config(), args.solver.limits());
    let mut rows: Vec<SensitivityRow> = vec![sensitivity_baseline(&inst, sampler, args.count, backend.as_ref(), &limits)?];
    rows.extend(sensitivity_sweep(
        &inst,
        sampler,
        args.count,
        args.param,
        &args.multipliers,
        backend.as_ref(),
        &limits,
    )?);
    let records: Vec<_> = rows.iter().map(SensitivityRow::csv_record).collect();
    write_csv(&args.output, &SensitivityRow::CSV_HEADER, &records)?;
    write_sidecar(&args.output, "sensitivity", args)
}

fn cmd_tune(args: &TuneArgs, jobs: usize) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let backend = args.solver.backend()?;
    let base = SaaConfig {
        seed: args.sampling.seed,
        limits: args.solver.limits(),
        jobs,
        sampler: args.sampling.config(),
        record_timing: args.timing,
        ..SaaConfig::default()
    };
    let cells = tune(&inst, &base, &args.n_values, &args.m_values, &args.p_values, backend.as_ref())?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let records: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.n_lb.to_string(),
                c.m_iter.to_string(),
                c.p_ub.to_string(),
                c.lb.to_string(),
                c.best_ub.to_string(),
                c.gap_percent.to_string(),
                opt(c.rsd),
                opt(c.seconds),
            ]
        })
        .collect();
    write_csv(
        &args.output,
        &["n", "m", "p", "lb", "best_ub", "gap_percent", "rsd", "seconds"],
        &records,
    )?;
    write_sidecar(&args.output, "tune", args)
}

fn cmd_series(args: &SeriesArgs) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let sol = load_solution(&args.solution)?;
    let bundle = args.bundle.load(&inst)?;
    let points = occupancy_series(&inst, &sol, &bundle, args.order_seed)?;
    let records: Vec<_> = points.iter().map(series_record).collect();
    write_csv(&args.output, &SERIES_CSV_HEADER, &records)?;
    write_sidecar(&args.output, "series", args)
}

fn run(cli: Cli) -> Result<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Saa(a) => cmd_saa(a, cli.jobs),
        Command::Compare(a) => cmd_compare(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
        Command::Tune(a) => cmd_tune(a, cli.jobs),
        Command::Series(a) => cmd_series(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
