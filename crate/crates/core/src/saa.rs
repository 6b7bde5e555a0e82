//! Sample average approximation: repeated lower-bound solves over small
//! scenario sets, upper-bound evaluation of every candidate on one large
//! shared bundle, optimality gap and value of the stochastic solution.

use crate::domain::{first_stage_breakdown, CostBreakdown, FirstStageSolution, Instance};
use crate::evaluator::{EvalError, EvalPlan};
use crate::milp::{build_evp, build_extensive, solve, SolveLimits, SolveStatus, SolverBackend, SolverError};
use crate::sampling::{sample_bundle, SamplerConfig, SamplerError, Scenario};
use crate::seed::{derive, lower_bound_seed, Stream};
use crate::stats::{mean, Estimate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaaConfig {
    /// Scenarios per lower-bound problem.
    pub n_lb: usize,
    /// Number of lower-bound problems.
    pub m_iter: usize,
    /// Scenarios in the shared upper-bound bundle.
    pub p_ub: usize,
    pub seed: u64,
    pub limits: SolveLimits,
    /// Worker threads for solves and evaluation; 0 lets rayon decide.
    pub jobs: usize,
    /// Sampler settings other than the seed, which is derived per stream.
    pub sampler: SamplerConfig,
    /// Also solve the expected value problem and report VSS.
    pub with_vss: bool,
    /// Record wall-clock timings. Off by default so reports are reproducible
    /// byte for byte.
    pub record_timing: bool,
}

impl Default for SaaConfig {
    fn default() -> Self {
        Self {
            n_lb: 30,
            m_iter: 25,
            p_ub: 6000,
            seed: 0,
            limits: SolveLimits::default(),
            jobs: 0,
            sampler: SamplerConfig::default(),
            with_vss: true,
            record_timing: false,
        }
    }
}

impl SaaConfig {
    /// Desk-scale profile: N = 10, M = 5, P = 1000.
    pub fn small() -> Self {
        Self {
            n_lb: 10,
            m_iter: 5,
            p_ub: 1000,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<(), SaaError> {
        if self.n_lb == 0 || self.m_iter == 0 || self.p_ub == 0 {
            return Err(SaaError::Config("scenario and iteration counts must be at least 1".into()));
        }
        self.sampler.check()?;
        Ok(())
    }

    fn sampler_with(&self, seed: u64) -> SamplerConfig {
        SamplerConfig { seed, ..self.sampler }
    }
}

#[derive(Debug, Error)]
pub enum SaaError {
    #[error("invalid SAA configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("every lower-bound iteration failed; first error: {0}")]
    NoLowerBound(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// One solved lower-bound problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRun {
    pub iteration: usize,
    pub seed: u64,
    pub status: SolveStatus,
    /// Optimal value of the sampled problem.
    pub objective: f64,
    pub bound: Option<f64>,
    pub solution: FirstStageSolution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationFailure {
    pub iteration: usize,
    pub message: String,
}

/// Estimated expected cost of a fixed first stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub estimate: Estimate,
    /// First-stage components plus mean recourse components.
    pub breakdown: CostBreakdown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvpResult {
    pub status: SolveStatus,
    pub objective: f64,
    pub upper_bound: UpperBound,
    pub solution: FirstStageSolution,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub lower_bound_seconds: f64,
    pub upper_bound_seconds: f64,
    pub evp_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaaReport {
    pub config: SaaConfig,
    pub backend: String,
    pub lower_bound: Estimate,
    pub iterations: Vec<LowerBoundRun>,
    pub failures: Vec<IterationFailure>,
    /// Upper bound of each successful iteration's solution, in iteration order.
    pub candidates: Vec<UpperBound>,
    /// Index into `iterations` and `candidates` of the best upper bound.
    pub best: usize,
    pub best_ub: f64,
    pub best_ub_var_of_mean: Option<f64>,
    pub best_solution: FirstStageSolution,
    pub gap_percent: f64,
    pub evp: Option<EvpResult>,
    pub vss_percent: Option<f64>,
    pub cost_breakdown: CostBreakdown,
    pub timing: Option<Timing>,
}

pub fn gap_percent(best_ub: f64, lb_mean: f64) -> f64 {
    100.0 * (best_ub - lb_mean) / lb_mean
}

pub fn vss_percent(ub_evp: f64, ub: f64) -> f64 {
    100.0 * (ub_evp - ub) / ub_evp
}

impl SaaReport {
    pub fn lb_std_error(&self) -> Option<f64> {
        self.lower_bound.std_error()
    }

    pub fn ub_std_error(&self) -> Option<f64> {
        self.best_ub_var_of_mean.map(f64::sqrt)
    }

    /// Relative standard deviation of the lower bound.
    pub fn rsd(&self) -> Option<f64> {
        self.lb_std_error().map(|sd| sd / self.lower_bound.mean)
    }

    /// True when every solve behind the gap and VSS reached the configured
    /// relative gap.
    pub fn all_optimal(&self) -> bool {
        self.iterations.iter().all(|r| r.status == SolveStatus::Optimal)
            && self.evp.as_ref().map_or(true, |e| e.status == SolveStatus::Optimal)
    }

    pub const CSV_HEADER: [&'static str; 15] = [
        "instance",
        "lb",
        "sd_lb",
        "ub",
        "sd_ub",
        "gap_percent",
        "vss_percent",
        "waiting_percent",
        "postponement_percent",
        "or_fixed_percent",
        "overtime_percent",
        "surge_percent",
        "lb_seconds",
        "ub_seconds",
        "evp_seconds",
    ];

    /// One summary row; cost components are shares of the best solution's
    /// expected total.
    pub fn csv_record(&self, instance: &str) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let b = &self.cost_breakdown;
        let mut row = vec![
            instance.to_string(),
            self.lower_bound.mean.to_string(),
            opt(self.lb_std_error()),
            self.best_ub.to_string(),
            opt(self.ub_std_error()),
            self.gap_percent.to_string(),
            opt(self.vss_percent),
        ];
        row.extend(b.components().iter().map(|c| (100.0 * c / b.total).to_string()));
        row.push(opt(self.timing.map(|t| t.lower_bound_seconds)));
        row.push(opt(self.timing.map(|t| t.upper_bound_seconds)));
        row.push(opt(self.timing.map(|t| t.evp_seconds)));
        row
    }
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, SaaError> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SaaError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Scenario set of lower-bound iteration `m`.
pub fn lower_bound_scenarios(instance: &Instance, config: &SaaConfig, m: usize) -> Result<Vec<Scenario>, SaaError> {
    Ok(sample_bundle(instance, config.sampler_with(lower_bound_seed(config.seed, m)), config.n_lb)?)
}

/// The bundle every candidate is evaluated on.
pub fn upper_bound_bundle(instance: &Instance, config: &SaaConfig) -> Result<Vec<Scenario>, SaaError> {
    Ok(sample_bundle(instance, config.sampler_with(derive(config.seed, Stream::UpperBound, 0)), config.p_ub)?)
}

fn lower_bound_iteration(
    instance: &Instance,
    config: &SaaConfig,
    backend: &dyn SolverBackend,
    m: usize,
) -> Result<LowerBoundRun, SaaError> {
    let scenarios = lower_bound_scenarios(instance, config, m)?;
    let model = build_extensive(instance, &scenarios).map_err(SolverError::from)?;
    let out = solve(instance, &model, backend, &config.limits, None)?;
    Ok(LowerBoundRun {
        iteration: m,
        seed: lower_bound_seed(config.seed, m),
        status: out.status,
        objective: out.objective,
        bound: out.bound,
        solution: out.solution,
    })
}

/// Solves the M sampled problems. Failed iterations are returned separately
/// and do not stop the others.
pub fn run_lower_bounds(
    instance: &Instance,
    config: &SaaConfig,
    backend: &dyn SolverBackend,
) -> Result<(Vec<LowerBoundRun>, Vec<IterationFailure>), SaaError> {
    config.check()?;
    let results: Vec<_> = in_pool(config.jobs, || {
        (0..config.m_iter)
            .into_par_iter()
            .map(|m| lower_bound_iteration(instance, config, backend, m))
            .collect()
    })?;
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (m, r) in results.into_iter().enumerate() {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => failures.push(IterationFailure {
                iteration: m,
                message: e.to_string(),
            }),
        }
    }
    Ok((runs, failures))
}

/// First-stage cost plus the mean recourse of `sol` over `bundle`, with the
/// variance of that mean. Uses the closed-form evaluator only.
pub fn evaluate_upper_bound(instance: &Instance, sol: &FirstStageSolution, bundle: &[Scenario]) -> Result<UpperBound, EvalError> {
    let plan = EvalPlan::new(instance, sol)?;
    let parts = bundle
        .par_iter()
        .map(|sc| plan.recourse_parts(sc))
        .collect::<Result<Vec<_>, _>>()?;
    let surge: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let overtime: Vec<f64> = parts.iter().map(|p| p.1).collect();
    let recourse: Vec<f64> = parts.iter().map(|p| p.0 + p.1).collect();
    let first = first_stage_breakdown(instance, sol);
    let recourse_est = Estimate::from_samples(&recourse).unwrap_or(Estimate {
        mean: 0.0,
        var_of_mean: None,
    });
    Ok(UpperBound {
        estimate: Estimate {
            mean: first.total + recourse_est.mean,
            var_of_mean: recourse_est.var_of_mean,
        },
        breakdown: first.with_recourse(mean(&overtime).unwrap_or(0.0), mean(&surge).unwrap_or(0.0)),
    })
}

/// Solves the expected value problem built from the mean of `bundle` and
/// evaluates its solution on the same bundle.
pub fn solve_evp(
    instance: &Instance,
    bundle: &[Scenario],
    backend: &dyn SolverBackend,
    limits: &SolveLimits,
) -> Result<EvpResult, SaaError> {
    let model = build_evp(instance, bundle).map_err(SolverError::from)?;
    let out = solve(instance, &model, backend, limits, None)?;
    let upper_bound = evaluate_upper_bound(instance, &out.solution, bundle)?;
    Ok(EvpResult {
        status: out.status,
        objective: out.objective,
        upper_bound,
        solution: out.solution,
    })
}

/// Value of the stochastic solution in percent, both solutions evaluated on
/// the shared upper-bound bundle.
pub fn compute_vss(
    instance: &Instance,
    config: &SaaConfig,
    backend: &dyn SolverBackend,
    sol: &FirstStageSolution,
) -> Result<f64, SaaError> {
    let bundle = upper_bound_bundle(instance, config)?;
    let ub = evaluate_upper_bound(instance, sol, &bundle)?;
    let evp = in_pool(config.jobs, || solve_evp(instance, &bundle, backend, &config.limits))??;
    Ok(vss_percent(evp.upper_bound.estimate.mean, ub.estimate.mean))
}

/// Full procedure: lower bounds, upper bounds of every candidate, gap and,
/// when configured, VSS.
pub fn run_saa(instance: &Instance, config: &SaaConfig, backend: &dyn SolverBackend) -> Result<SaaReport, SaaError> {
    config.check()?;
    let mut timing = Timing::default();
    let clock = Instant::now();
    let (iterations, failures) = run_lower_bounds(instance, config, backend)?;
    timing.lower_bound_seconds = clock.elapsed().as_secs_f64();
    if iterations.is_empty() {
        let first = failures.first().map(|f| f.message.clone()).unwrap_or_default();
        return Err(SaaError::NoLowerBound(first));
    }
    let objectives: Vec<f64> = iterations.iter().map(|r| r.objective).collect();
    let lower_bound = Estimate::from_samples(&objectives).expect("at least one iteration");

    let clock = Instant::now();
    let bundle = upper_bound_bundle(instance, config)?;
    let candidates = in_pool(config.jobs, || {
        iterations
            .iter()
            .map(|r| evaluate_upper_bound(instance, &r.solution, &bundle))
            .collect::<Result<Vec<_>, _>>()
    })??;
    timing.upper_bound_seconds = clock.elapsed().as_secs_f64();
    // Ties keep the earliest iteration.
    let best = candidates
        .iter()
        .enumerate()
        .fold(0, |b, (k, c)| if c.estimate.mean < candidates[b].estimate.mean { k } else { b });
    let best_ub = candidates[best].estimate.mean;

    let clock = Instant::now();
    let evp = if config.with_vss {
        Some(in_pool(config.jobs, || solve_evp(instance, &bundle, backend, &config.limits))??)
    } else {
        None
    };
    timing.evp_seconds = clock.elapsed().as_secs_f64();
    let vss = evp.as_ref().map(|e| vss_percent(e.upper_bound.estimate.mean, best_ub));

    Ok(SaaReport {
        config: *config,
        backend: backend.name().to_string(),
        lower_bound,
        best,
        best_ub,
        best_ub_var_of_mean: candidates[best].estimate.var_of_mean,
        best_solution: iterations[best].solution.clone(),
        gap_percent: gap_percent(best_ub, lower_bound.mean),
        vss_percent: vss,
        cost_breakdown: candidates[best].breakdown,
        evp,
        candidates,
        iterations,
        failures,
        timing: config.record_timing.then_some(timing),
    })
}

/// One cell of a tuning sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneCell {
    pub n_lb: usize,
    pub m_iter: usize,
    pub p_ub: usize,
    pub lb: f64,
    pub best_ub: f64,
    pub gap_percent: f64,
    pub rsd: Option<f64>,
    pub seconds: Option<f64>,
}

/// Runs SAA without VSS for every (N, M, P) combination of the given lists.
pub fn tune(
    instance: &Instance,
    base: &SaaConfig,
    n_values: &[usize],
    m_values: &[usize],
    p_values: &[usize],
    backend: &dyn SolverBackend,
) -> Result<Vec<TuneCell>, SaaError> {
    let mut cells = Vec::new();
    for &n_lb in n_values {
        for &m_iter in m_values {
            for &p_ub in p_values {
                let config = SaaConfig {
                    n_lb,
                    m_iter,
                    p_ub,
                    with_vss: false,
                    ..*base
                };
                let clock = Instant::now();
                let report = run_saa(instance, &config, backend)?;
                cells.push(TuneCell {
                    n_lb,
                    m_iter,
                    p_ub,
                    lb: report.lower_bound.mean,
                    best_ub: report.best_ub,
                    gap_percent: report.gap_percent,
                    rsd: report.rsd(),
                    seconds: base.record_timing.then(|| clock.elapsed().as_secs_f64()),
                });
            }
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures;
    use crate::domain::{Assignment, PerDownstream};
    use crate::milp::HighsBackend;

    fn tiny() -> Instance {
        let patients = (0..4).map(|i| fixtures::patient(i, i % 2, i % 3, 2 + (i % 2) * 7, 1 + i as u8)).collect();
        fixtures::instance(3, 2, patients)
    }

    fn quick() -> SaaConfig {
        SaaConfig {
            n_lb: 3,
            m_iter: 3,
            p_ub: 200,
            seed: 11,
            ..SaaConfig::default()
        }
    }

    #[test]
    fn gap_formula() {
        let g = gap_percent(37406.0, 37319.0);
        assert!((g - 0.2331).abs() < 1e-3);
        assert_eq!(format!("{g:.2}"), "0.23");
    }

    #[test]
    fn vss_formula() {
        assert_eq!(vss_percent(100.0, 90.0), 10.0);
        assert_eq!(vss_percent(100.0, 100.0), 0.0);
    }

    #[test]
    fn defaults_and_small_profile() {
        let d = SaaConfig::default();
        assert_eq!((d.n_lb, d.m_iter, d.p_ub), (30, 25, 6000));
        let s = SaaConfig::small();
        assert_eq!((s.n_lb, s.m_iter, s.p_ub), (10, 5, 1000));
        assert!(SaaConfig { m_iter: 0, ..d }.check().is_err());
    }

    #[test]
    fn zero_recourse_solution_has_zero_variance() {
        let mut inst = fixtures::instance(3, 1, vec![fixtures::patient(0, 0, 0, 2, 1)]);
        inst.bed_stock = PerDownstream::splat(1000);
        let sol = FirstStageSolution::from_assignments(
            &inst,
            vec![Assignment::Scheduled { room: 0, day: 0 }],
            vec![PerDownstream::splat(500)],
        );
        let bundle = upper_bound_bundle(&inst, &quick()).unwrap();
        let ub = evaluate_upper_bound(&inst, &sol, &bundle).unwrap();
        assert_eq!(ub.estimate.var_of_mean, Some(0.0));
        assert_eq!(ub.estimate.mean, 4437.0);
        assert_eq!(ub.breakdown.total, ub.estimate.mean);
    }

    #[test]
    fn lower_bound_streams_are_disjoint_and_repeatable() {
        let inst = tiny();
        let c = quick();
        let a = lower_bound_scenarios(&inst, &c, 0).unwrap();
        let b = lower_bound_scenarios(&inst, &c, 1).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, lower_bound_scenarios(&inst, &c, 0).unwrap());
    }

    #[test]
    fn saa_report_is_consistent_and_repeatable() {
        let inst = tiny();
        let c = quick();
        let r = run_saa(&inst, &c, &HighsBackend).unwrap();
        assert_eq!(r.iterations.len(), 3);
        assert!(r.failures.is_empty());
        assert_eq!(r.gap_percent, gap_percent(r.best_ub, r.lower_bound.mean));
        let min = r.candidates.iter().map(|c| c.estimate.mean).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_ub, min);
        assert!(r.timing.is_none());
        let again = run_saa(&inst, &c, &HighsBackend).unwrap();
        assert_eq!(serde_json::to_string(&r).unwrap(), serde_json::to_string(&again).unwrap());
        assert_eq!(r.csv_record("tiny").len(), SaaReport::CSV_HEADER.len());
    }

    #[test]
    fn candidate_is_optimal_on_its_own_scenarios() {
        // With the lower-bound scenarios as the bundle, the iteration's own
        // solution is the minimiser, so its upper bound equals f_N^m.
        let inst = tiny();
        let c = quick();
        let run = lower_bound_iteration(&inst, &c, &HighsBackend, 0).unwrap();
        let scenarios = lower_bound_scenarios(&inst, &c, 0).unwrap();
        let ub = evaluate_upper_bound(&inst, &run.solution, &scenarios).unwrap();
        assert!((ub.estimate.mean - run.objective).abs() <= 1e-6 * run.objective.abs().max(1.0));
    }
}
