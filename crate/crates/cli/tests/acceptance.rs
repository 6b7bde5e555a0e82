//! Acceptance checks, one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines come out in order; exits non-zero if any
//! criterion fails.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use orpool_core::analysis::{compare_policies, sensitivity_baseline, sensitivity_sweep, SensitivityParam};
use orpool_core::domain::{Downstream, Instance, PerDownstream};
use orpool_core::evaluator::{allocate_shared, EvalPlan, OccupancyTable, SpecialtyOrder};
use orpool_core::fixtures::{random_instance, random_scenarios, random_solution, FixtureShape};
use orpool_core::generator::{generate, GeneratorConfig};
use orpool_core::milp::{
    brute_force, build_extensive, second_stage_lp, solve, HighsBackend, SolveLimits, SolveStatus, SolverBackend,
};
use orpool_core::saa::{run_saa, SaaConfig, SaaReport};
use orpool_core::sampling::{sample_bundle, SamplerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const POOLING_SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const DESK_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Two-week, four-specialty instance with ten patients a week and even bed
/// stocks, so half of each stock is a whole number of beds.
fn desk_instance(seed: u64) -> Instance {
    let mut inst = generate(&GeneratorConfig {
        weeks: 2,
        n_specialties: 4,
        seed,
        patients_per_week: 10,
        ..GeneratorConfig::default()
    })
    .expect("valid generator config");
    inst.bed_stock = inst.bed_stock.map(|_, m| m - m % 2);
    inst
}

fn evaluator_matches_lp() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let fixtures = 200u64;
    for seed in 0..fixtures {
        let shape = FixtureShape {
            patients: 4 + (seed as usize % 12),
            specialties: 1 + (seed as usize % 4),
            rooms: 2,
            days: 1 + (seed as usize % 14),
            max_window: 4,
        };
        let mut inst = random_instance(10_000 + seed, shape);
        let sol = random_solution(&mut inst, seed);
        let scenarios = random_scenarios(&inst, seed, 1 + (seed as usize % 3));
        let plan = EvalPlan::new(&inst, &sol).map_err(|e| e.to_string())?;
        let mut total = 0.0;
        for sc in &scenarios {
            total += plan.recourse_cost(sc).map_err(|e| e.to_string())?;
        }
        let ours = total / scenarios.len() as f64;
        let lp = second_stage_lp(&inst, &sol, &scenarios).map_err(|e| e.to_string())?;
        let raw = HighsBackend
            .solve(&lp, &SolveLimits::default(), None)
            .map_err(|e| e.to_string())?;
        let theirs = raw.objective.ok_or("recourse LP returned no objective")?;
        let d = rel_diff(ours, theirs);
        worst = worst.max(d);
        if d > 1e-6 {
            return Err(format!("fixture {seed}: evaluator {ours} vs LP {theirs}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 120.0 {
        return Err(format!("took {secs:.1} s"));
    }
    Ok(format!("{fixtures} fixtures, max relative difference {worst:.2e}, {secs:.1} s"))
}

fn order_invariance() -> Outcome {
    let mut reshuffled = 0;
    for seed in 0..50u64 {
        let shape = FixtureShape {
            patients: 25,
            specialties: 2 + (seed as usize % 3),
            rooms: 2,
            days: 7,
            max_window: 4,
        };
        let mut inst = random_instance(20_000 + seed, shape);
        let sol = random_solution(&mut inst, seed);
        let scenario = random_scenarios(&inst, seed, 1).remove(0);
        let plan = EvalPlan::new(&inst, &sol).map_err(|e| e.to_string())?;
        let s = inst.specialty_count();
        let reference = plan
            .evaluate(&scenario, &SpecialtyOrder::identity(s))
            .map_err(|e| e.to_string())?;
        let mut moved = false;
        for k in 0..20u64 {
            let out = plan
                .evaluate(&scenario, &SpecialtyOrder::shuffled(s, seed * 100 + k))
                .map_err(|e| e.to_string())?;
            if out.recourse_cost.to_bits() != reference.recourse_cost.to_bits() {
                return Err(format!(
                    "fixture {seed}, order {k}: {} vs {}",
                    out.recourse_cost, reference.recourse_cost
                ));
            }
            moved |= out.shared_used != reference.shared_used;
        }
        reshuffled += moved as usize;
    }
    Ok(format!(
        "50 fixtures x 20 orders bit-identical; allocation changed with the order in {reshuffled} fixtures"
    ))
}

fn solver_matches_brute_force() -> Outcome {
    let start = Instant::now();
    let limits = SolveLimits::default();
    let mut checked = 0;
    let mut worst = 0.0f64;
    for seed in 0..200u64 {
        if checked == 24 {
            break;
        }
        let shape = FixtureShape::tiny(2 + (seed as usize % 4), 1 + (seed as usize % 2));
        let inst = random_instance(30_000 + seed, shape);
        let scenarios = random_scenarios(&inst, seed, 1 + (seed as usize % 3));
        let Ok((_, oracle)) = brute_force(&inst, &scenarios) else {
            continue;
        };
        let model = build_extensive(&inst, &scenarios).map_err(|e| e.to_string())?;
        let out = solve(&inst, &model, &HighsBackend, &limits, None).map_err(|e| format!("seed {seed}: {e}"))?;
        let d = rel_diff(out.objective, oracle);
        worst = worst.max(d);
        if d > limits.rel_gap.max(1e-6) {
            return Err(format!("seed {seed}: solver {} vs exhaustive {oracle}", out.objective));
        }
        checked += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    if checked < 20 {
        return Err(format!("only {checked} feasible tiny instances"));
    }
    if secs >= 300.0 {
        return Err(format!("took {secs:.1} s"));
    }
    Ok(format!("{checked} instances, max relative difference {worst:.2e}, {secs:.1} s"))
}

fn shared_allocation_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut cells = 0usize;
    let mut instance_seed = 40_000u64;
    while cells < 10_000 {
        let specialties = rng.random_range(1..=4);
        let days = rng.random_range(1..=3);
        let mut inst = random_instance(instance_seed, FixtureShape::tiny(1, specialties));
        instance_seed += 1;
        inst.horizon_days = days;
        inst.bed_stock = PerDownstream::new(rng.random_range(0..=20), rng.random_range(0..=20));
        let twentieths = PerDownstream::new(rng.random_range(0..=20u32), rng.random_range(0..=20u32));
        inst.shared_fraction = twentieths.map(|_, k| k as f64 / 20.0);
        let mut occupied = OccupancyTable::zeros(specialties, days);
        for s in 0..specialties {
            for unit in Downstream::ALL {
                for d in 0..days {
                    occupied.set(s, unit, d, rng.random_range(0..=12));
                }
            }
        }
        let mut split = vec![PerDownstream::splat(0u32); specialties];
        for unit in Downstream::ALL {
            let mut left = inst.nonshared_capacity(unit);
            for u in split.iter_mut() {
                u[unit] = rng.random_range(0..=left);
                left -= u[unit];
            }
        }
        let order = SpecialtyOrder::shuffled(specialties, instance_seed);
        let (q, v) = allocate_shared(&inst, &occupied, &split, &order);
        for unit in Downstream::ALL {
            let pool = twentieths[unit] * inst.bed_stock[unit] / 20;
            for d in 0..days {
                let overflow: u32 = (0..specialties)
                    .map(|s| occupied.get(s, unit, d).saturating_sub(split[s][unit]))
                    .sum();
                let surge: u32 = (0..specialties).map(|s| v.get(s, unit, d)).sum();
                let shared: u32 = (0..specialties).map(|s| q.get(s, unit, d)).sum();
                if surge != overflow.saturating_sub(pool) || shared != overflow.min(pool) {
                    return Err(format!(
                        "{} day {d}: overflow {overflow}, pool {pool}, shared {shared}, surge {surge}",
                        unit.as_str()
                    ));
                }
                cells += 1;
            }
        }
    }
    Ok(format!("{cells} cells exact"))
}

fn pooling_monotone() -> Outcome {
    let limits = SolveLimits::default();
    let policies = [0.0, 0.5, 1.0];
    let mut mid = Vec::new();
    let mut full = Vec::new();
    for seed in POOLING_SEEDS {
        let inst = desk_instance(seed);
        let bundle = sample_bundle(&inst, SamplerConfig::with_seed(seed), 30).map_err(|e| e.to_string())?;
        let cmp = compare_policies(&inst, &bundle, &policies, &HighsBackend, &limits).map_err(|e| e.to_string())?;
        let slack = |k: usize| {
            let p = &cmp.rows[k].plan;
            p.bound.map_or(f64::INFINITY, |b| p.solver_objective - b).max(0.0)
        };
        for k in 1..policies.len() {
            let (lo, hi) = (&cmp.rows[k - 1].plan, &cmp.rows[k].plan);
            let tol = slack(k - 1) + slack(k) + 1e-9 * lo.solver_objective.abs();
            if hi.solver_objective > lo.solver_objective + tol {
                return Err(format!(
                    "instance {seed}: alpha {} costs {} > alpha {} at {}",
                    policies[k], hi.solver_objective, policies[k - 1], lo.solver_objective
                ));
            }
        }
        mid.push(cmp.rows[1].imp_percent);
        full.push(cmp.rows[2].imp_percent);
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m, f) = (avg(&mid), avg(&full));
    if !(m > 0.0) {
        return Err(format!("mean improvement of half pooling is {m:.3}%"));
    }
    Ok(format!(
        "{} instances monotone; mean improvement vs no pooling: half {m:.2}% (reference 11.29%), full {f:.2}% (reference 12.38%)",
        mid.len()
    ))
}

fn saa_reports() -> Result<Vec<SaaReport>, String> {
    DESK_SEEDS
        .iter()
        .map(|&seed| {
            let config = SaaConfig {
                seed,
                sampler: SamplerConfig::with_seed(seed),
                ..SaaConfig::small()
            };
            run_saa(&desk_instance(seed), &config, &HighsBackend).map_err(|e| format!("instance {seed}: {e}"))
        })
        .collect()
}

fn saa_gap(reports: &[SaaReport]) -> Outcome {
    let mut gaps = Vec::new();
    for (seed, r) in DESK_SEEDS.iter().zip(reports) {
        let noise = 2.0 * (r.lb_std_error().unwrap_or(0.0) + r.ub_std_error().unwrap_or(0.0));
        let floor = -100.0 * noise / r.lower_bound.mean;
        let g = r.gap_percent;
        if !g.is_finite() || g < floor || g > 5.0 {
            return Err(format!("instance {seed}: gap {g:.4}% outside [{floor:.4}%, 5%]"));
        }
        gaps.push(format!("{g:.3}"));
    }
    Ok(format!("gaps (%): {} (reference average 0.26%)", gaps.join(", ")))
}

fn saa_vss(reports: &[SaaReport]) -> Outcome {
    let mut values = Vec::new();
    for (seed, r) in DESK_SEEDS.iter().zip(reports) {
        let vss = r.vss_percent.ok_or(format!("instance {seed}: no VSS"))?;
        let floor = if r.all_optimal() { 0.0 } else { -0.5 };
        if vss < floor {
            return Err(format!("instance {seed}: VSS {vss:.4}% below {floor}%"));
        }
        values.push(format!("{vss:.3}"));
    }
    Ok(format!("VSS (%): {} (reference average 17.43%)", values.join(", ")))
}

fn duration_law() -> Outcome {
    let inst = generate(&GeneratorConfig {
        n_specialties: 1,
        patients_per_week: 50,
        ..GeneratorConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let mu = inst.specialties[0].mean_duration;
    let bundle = sample_bundle(&inst, SamplerConfig::with_seed(8), 1000).map_err(|e| e.to_string())?;
    let draws: Vec<f64> = bundle.iter().flat_map(|s| s.durations.iter().copied()).collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let (lo, hi) = draws.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let report = format!("{} draws, mean {mean:.2}, sd {sd:.2}, range [{lo:.1}, {hi:.1}]", draws.len());
    if draws.len() < 100_000 {
        return Err(report);
    }
    if rel_diff(mean, 150.95) > 0.02 || (sd - 25.16).abs() / 25.16 > 0.03 || lo < 0.5 * mu || hi > 1.5 * mu {
        return Err(report);
    }
    Ok(report)
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).expect("readable output dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = fs::read(&path).expect("readable output");
                files.insert(path.strip_prefix(dir).expect("inside dir").to_path_buf(), bytes);
            }
        }
    }
    files
}

fn cli_runs() -> Vec<Vec<&'static str>> {
    let base = ["--instance", "inst.json"];
    let with = |rest: &[&'static str]| -> Vec<&'static str> { base.iter().chain(rest).copied().collect() };
    let mut runs = vec![
        vec![
            "generate",
            "--weeks",
            "2",
            "--specialties",
            "2",
            "--patients-per-week",
            "4",
            "--seed",
            "3",
            "-o",
            "inst.json",
        ],
        vec!["generate", "--grid", "--patients-per-week", "2", "--out-dir", "grid"],
    ];
    let mut tail: Vec<Vec<&'static str>> = vec![
        ["sample"].into_iter().chain(with(&["--count", "4", "--seed", "2", "-o", "bundle.jsonl"])).collect(),
        ["solve"].into_iter().chain(with(&["--scenarios", "bundle.jsonl", "--lp", "model.lp", "-o", "solve.json"])).collect(),
        ["solve"].into_iter().chain(with(&["--count", "4", "--evp", "-o", "evp.json"])).collect(),
        ["evaluate"]
            .into_iter()
            .chain(with(&["--solution", "solve.json", "--count", "4", "--occupancy-csv", "occ.csv", "-o", "eval.json"]))
            .collect(),
        ["saa"]
            .into_iter()
            .chain(with(&["--n", "3", "--m", "2", "--p", "100", "--csv", "saa.csv", "-o", "saa.json"]))
            .collect(),
        ["compare"].into_iter().chain(with(&["--count", "3", "--json", "cmp.json", "-o", "cmp.csv"])).collect(),
        ["sensitivity"]
            .into_iter()
            .chain(with(&["--param", "overtime", "--multipliers", "1,2", "--count", "3", "-o", "sens.csv"]))
            .collect(),
        ["tune"]
            .into_iter()
            .chain(with(&["--n-values", "2,3", "--m-values", "2", "--p-values", "50", "-o", "tune.json"]))
            .collect(),
        ["series"].into_iter().chain(with(&["--solution", "solve.json", "--count", "3", "-o", "series.csv"])).collect(),
    ];
    runs.append(&mut tail);
    runs
}

fn cli_deterministic() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        for args in cli_runs() {
            let out = Command::new(env!("CARGO_BIN_EXE_orpool"))
                .args(&args)
                .current_dir(dir.path())
                .env_remove("ORPOOL_SOLVER")
                .output()
                .map_err(|e| e.to_string())?;
            if !out.status.success() {
                return Err(format!("`orpool {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
            }
        }
        snapshots.push(snapshot(dir.path()));
    }
    let (a, b) = (&snapshots[0], &snapshots[1]);
    if a.keys().ne(b.keys()) {
        return Err("the two runs wrote different file sets".into());
    }
    if let Some((path, _)) = a.iter().find(|(p, bytes)| b[*p] != **bytes) {
        return Err(format!("{} differs between runs", path.display()));
    }
    Ok(format!("{} subcommand runs, {} files byte-identical", cli_runs().len(), a.len()))
}

fn sensitivity_identity() -> Outcome {
    let limits = SolveLimits::default();
    let inst = desk_instance(1);
    let sampler = SamplerConfig::with_seed(1);
    let count = 10;
    let base = sensitivity_baseline(&inst, sampler, count, &HighsBackend, &limits).map_err(|e| e.to_string())?;
    if base.status != SolveStatus::Optimal {
        return Err(format!("baseline solve ended {:?}", base.status));
    }
    for param in SensitivityParam::ALL {
        let rows = sensitivity_sweep(&inst, sampler, count, param, &[1.0], &HighsBackend, &limits)
            .map_err(|e| e.to_string())?;
        if rows[0].metrics() != base.metrics() {
            return Err(format!("{param} at 1x differs from the baseline"));
        }
    }
    let ks = [1.0, 3.0, 5.0, 7.0, 10.0];
    let overtime = sensitivity_sweep(&inst, sampler, count, SensitivityParam::Overtime, &ks, &HighsBackend, &limits)
        .map_err(|e| e.to_string())?;
    let surge = sensitivity_sweep(&inst, sampler, count, SensitivityParam::Surge, &ks, &HighsBackend, &limits)
        .map_err(|e| e.to_string())?;
    let minutes: Vec<String> = overtime.iter().map(|r| format!("{:.1}", r.overtime_minutes)).collect();
    let postponed: Vec<String> = surge.iter().map(|r| r.postponed.to_string()).collect();
    let falls = overtime.windows(2).all(|w| w[1].overtime_minutes <= w[0].overtime_minutes + 1e-9);
    let rises = surge.windows(2).all(|w| w[1].postponed >= w[0].postponed);
    Ok(format!(
        "all {} parameters match at 1x; overtime minutes over 1,3,5,7,10x: [{}] (non-increasing: {falls}); \
         postponements under surge cost: [{}] (non-decreasing: {rises})",
        SensitivityParam::ALL.len(),
        minutes.join(", "),
        postponed.join(", ")
    ))
}

fn report(number: usize, name: &str, check: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {number} ({name}): {tag} [{secs:.1} s] {detail}");
    outcome.is_ok()
}

fn main() {
    let mut ok = true;
    ok &= report(1, "evaluator equals recourse LP", evaluator_matches_lp);
    ok &= report(2, "recourse independent of specialty order", order_invariance);
    ok &= report(3, "MILP equals exhaustive search", solver_matches_brute_force);
    ok &= report(4, "shared-bed allocation formula", shared_allocation_formula);
    ok &= report(5, "pooling never hurts", pooling_monotone);
    let reports = OnceCell::new();
    let shared = || reports.get_or_init(saa_reports).as_ref().map_err(Clone::clone);
    ok &= report(6, "SAA optimality gap", || saa_gap(shared()?));
    ok &= report(7, "value of the stochastic solution", || saa_vss(shared()?));
    ok &= report(8, "surgery duration distribution", duration_law);
    ok &= report(9, "CLI outputs are deterministic", cli_deterministic);
    ok &= report(10, "sensitivity at multiplier 1", sensitivity_identity);
    if !ok {
        std::process::exit(1);
    }
}
