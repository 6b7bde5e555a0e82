//! Experiment harness: pooling-policy comparison on a common scenario set,
//! one-at-a-time sensitivity sweeps and mean shared/surge bed series.

use crate::domain::{CostBreakdown, Downstream, FirstStageSolution, Instance, PerDownstream};
use crate::evaluator::{EvalError, EvalPlan, SpecialtyOrder};
use crate::milp::{build_extensive, solve, SolveLimits, SolveStatus, SolverBackend, SolverError};
use crate::saa::evaluate_upper_bound;
use crate::sampling::{sample_bundle, SamplerConfig, SamplerError, Scenario};
use crate::seed::{derive, Stream};
use crate::stats::mean;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Solution of one model over a fixed bundle, with its cost re-evaluated by
/// the closed-form recourse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolvedPlan {
    pub status: SolveStatus,
    pub solver_objective: f64,
    pub bound: Option<f64>,
    pub breakdown: CostBreakdown,
    pub solution: FirstStageSolution,
}

fn solve_on_bundle(
    instance: &Instance,
    bundle: &[Scenario],
    backend: &dyn SolverBackend,
    limits: &SolveLimits,
) -> Result<SolvedPlan, AnalysisError> {
    let model = build_extensive(instance, bundle).map_err(SolverError::from)?;
    let out = solve(instance, &model, backend, limits, None)?;
    let ub = evaluate_upper_bound(instance, &out.solution, bundle)?;
    Ok(SolvedPlan {
        status: out.status,
        solver_objective: out.objective,
        bound: out.bound,
        breakdown: ub.breakdown,
        solution: out.solution,
    })
}

pub fn with_shared_fraction(instance: &Instance, alpha: f64) -> Instance {
    Instance {
        shared_fraction: PerDownstream::splat(alpha),
        ..instance.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub shared_fraction: f64,
    pub plan: SolvedPlan,
    /// Improvement over no sharing, in percent of the no-sharing objective.
    pub imp_percent: f64,
    /// Contribution of each cost component to `imp_percent`, in the order
    /// waiting, postponement, OR, overtime, surge.
    pub component_imp: [f64; 5],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub baseline: SolvedPlan,
    pub rows: Vec<PolicyRow>,
}

impl PolicyComparison {
    pub const CSV_HEADER: [&'static str; 9] = [
        "shared_fraction",
        "objective",
        "status",
        "imp_percent",
        "waiting_imp",
        "postponement_imp",
        "or_imp",
        "overtime_imp",
        "surge_imp",
    ];

    pub fn csv_records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut rec = vec![
                    r.shared_fraction.to_string(),
                    r.plan.breakdown.total.to_string(),
                    status_name(r.plan.status).to_string(),
                    r.imp_percent.to_string(),
                ];
                rec.extend(r.component_imp.iter().map(f64::to_string));
                rec
            })
            .collect()
    }
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::FeasibleWithGap => "feasible_with_gap",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::TimeLimit => "time_limit",
    }
}

fn improvement(no: &CostBreakdown, policy: &CostBreakdown) -> (f64, [f64; 5]) {
    let base = no.total;
    let (a, b) = (no.components(), policy.components());
    let parts = std::array::from_fn(|k| 100.0 * (a[k] - b[k]) / base);
    (100.0 * (no.total - policy.total) / base, parts)
}

/// Solves the extensive form on `bundle` once per shared fraction (applied
/// to both units) and compares each against no sharing. The no-sharing
/// model is solved even when 0 is not among `policies`.
pub fn compare_policies(
    instance: &Instance,
    bundle: &[Scenario],
    policies: &[f64],
    backend: &dyn SolverBackend,
    limits: &SolveLimits,
) -> Result<PolicyComparison, AnalysisError> {
    if let Some(a) = policies.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(AnalysisError::Argument(format!("shared fraction {a} outside [0, 1]")));
    }
    let mut alphas = vec![0.0];
    alphas.extend(policies.iter().copied().filter(|&a| a != 0.0));
    let plans = alphas
        .par_iter()
        .map(|&a| solve_on_bundle(&with_shared_fraction(instance, a), bundle, backend, limits))
        .collect::<Result<Vec<_>, _>>()?;
    let baseline = plans[0].clone();
    let rows = policies
        .iter()
        .map(|&a| {
            let k = if a == 0.0 { 0 } else { alphas.iter().position(|&b| b == a).expect("solved above") };
            let (imp_percent, component_imp) = improvement(&baseline.breakdown, &plans[k].breakdown);
            PolicyRow {
                shared_fraction: a,
                plan: plans[k].clone(),
                imp_percent,
                component_imp,
            }
        })
        .collect();
    Ok(PolicyComparison { baseline, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityParam {
    Waiting,
    Or,
    Surge,
    Postpone,
    Overtime,
    Duration,
    Los,
}

impl SensitivityParam {
    pub const ALL: [SensitivityParam; 7] = [
        SensitivityParam::Waiting,
        SensitivityParam::Or,
        SensitivityParam::Surge,
        SensitivityParam::Postpone,
        SensitivityParam::Overtime,
        SensitivityParam::Duration,
        SensitivityParam::Los,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SensitivityParam::Waiting => "waiting",
            SensitivityParam::Or => "or",
            SensitivityParam::Surge => "surge",
            SensitivityParam::Postpone => "postpone",
            SensitivityParam::Overtime => "overtime",
            SensitivityParam::Duration => "duration",
            SensitivityParam::Los => "los",
        }
    }

    /// Copy of `instance` with this parameter multiplied by `k`. Duration
    /// scaling moves the mean and the worst case together; length-of-stay
    /// scaling moves mean and spread, so sampled stays scale before rounding.
    pub fn scale(self, instance: &Instance, k: f64) -> Instance {
        let mut inst = instance.clone();
        match self {
            SensitivityParam::Waiting => inst.patients.iter_mut().for_each(|p| p.waiting_cost_rate *= k),
            SensitivityParam::Postpone => inst.patients.iter_mut().for_each(|p| p.postpone_cost *= k),
            SensitivityParam::Or => inst.or_open_cost *= k,
            SensitivityParam::Overtime => inst.overtime_cost_rate *= k,
            SensitivityParam::Surge => inst.surge_cost = inst.surge_cost.map(|_, c| c * k),
            SensitivityParam::Duration => {
                for p in &mut inst.patients {
                    p.mean_duration *= k;
                    p.max_duration *= k;
                }
                for s in &mut inst.specialties {
                    s.mean_duration *= k;
                    s.sd_duration *= k;
                }
            }
            SensitivityParam::Los => {
                for p in &mut inst.patients {
                    p.mean_los_total *= k;
                    p.sd_los *= k;
                }
                for s in &mut inst.specialties {
                    s.mean_los_icu *= k;
                    s.mean_los_ward *= k;
                    s.sd_los *= k;
                }
            }
        }
        inst
    }
}

impl fmt::Display for SensitivityParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensitivityParam {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| AnalysisError::Argument(format!("unknown parameter {s:?}")))
    }
}

/// Operational summary of one solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    /// `None` for the unscaled baseline.
    pub param: Option<SensitivityParam>,
    pub multiplier: f64,
    pub status: SolveStatus,
    pub breakdown: CostBreakdown,
    pub waiting_days: i64,
    pub postponed: usize,
    pub open_rooms: usize,
    /// Mean total overtime minutes per scenario.
    pub overtime_minutes: f64,
}

impl SensitivityRow {
    pub const CSV_HEADER: [&'static str; 15] = [
        "param",
        "multiplier",
        "status",
        "total",
        "waiting_percent",
        "postponement_percent",
        "or_percent",
        "overtime_percent",
        "surge_percent",
        "waiting_days",
        "postponed",
        "open_rooms",
        "overtime_minutes",
        "surge_cost",
        "objective",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        let mut rec = vec![
            self.param.map_or("baseline", SensitivityParam::as_str).to_string(),
            self.multiplier.to_string(),
        ];
        rec.extend(self.metrics());
        rec
    }

    /// Every column after the parameter and multiplier.
    pub fn metrics(&self) -> Vec<String> {
        let b = &self.breakdown;
        let mut rec = vec![status_name(self.status).to_string(), b.total.to_string()];
        rec.extend(b.components().iter().map(|c| (100.0 * c / b.total).to_string()));
        rec.extend([
            self.waiting_days.to_string(),
            self.postponed.to_string(),
            self.open_rooms.to_string(),
            self.overtime_minutes.to_string(),
            b.surge.to_string(),
            b.total.to_string(),
        ]);
        rec
    }
}

fn mean_overtime_minutes(instance: &Instance, sol: &FirstStageSolution, bundle: &[Scenario]) -> Result<f64, EvalError> {
    let plan = EvalPlan::new(instance, sol)?;
    let totals = bundle
        .iter()
        .map(|sc| plan.overtime(sc).map(|o| o.iter().sum::<f64>()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(mean(&totals).unwrap_or(0.0))
}

fn sensitivity_row(
    instance: &Instance,
    sampler: SamplerConfig,
    scenarios: usize,
    param: Option<SensitivityParam>,
    multiplier: f64,
    backend: &dyn SolverBackend,
    limits: &SolveLimits,
) -> Result<SensitivityRow, AnalysisError> {
    let inst = match param {
        Some(p) => p.scale(instance, multiplier),
        None => instance.clone(),
    };
    let bundle = sample_bundle(&inst, sampler, scenarios)?;
    let plan = solve_on_bundle(&inst, &bundle, backend, limits)?;
    Ok(SensitivityRow {
        param,
        multiplier,
        status: plan.status,
        breakdown: plan.breakdown,
        waiting_days: plan.solution.waiting_days(&inst),
        postponed: plan.solution.postponed_count(),
        open_rooms: plan.solution.open_blocks(),
        overtime_minutes: mean_overtime_minutes(&inst, &plan.solution, &bundle)?,
    })
}

/// Unscaled reference row for a sweep.
pub fn sensitivity_baseline(
    instance: &Instance,
    sampler: SamplerConfig,
    scenarios: usize,
    backend: &dyn SolverBackend,
    limits: &SolveLimits,
) -> Result<SensitivityRow, AnalysisError> {
    sensitivity_row(instance, sampler, scenarios, None, 1.0, backend, limits)
}

/// Re-solves with `param` scaled by each multiplier. Scenarios are drawn
/// from the scaled instance with the same seed, so every multiplier sees
/// the same underlying random numbers.
pub fn sensitivity_sweep(
    instance: &Instance,
    sampler: SamplerConfig,
    scenarios: usize,
    param: SensitivityParam,
    multipliers: &[f64],
    backend: &dyn SolverBackend,
    limits: &SolveLimits,
) -> Result<Vec<SensitivityRow>, AnalysisError> {
    if let Some(k) = multipliers.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
        return Err(AnalysisError::Argument(format!("multiplier {k} must be positive")));
    }
    multipliers
        .par_iter()
        .map(|&k| sensitivity_row(instance, sampler, scenarios, Some(param), k, backend, limits))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub day: usize,
    pub downstream: Downstream,
    pub specialty: usize,
    pub mean_q: f64,
    pub mean_v: f64,
}

/// Mean pooled-bed and surge usage per day, unit and specialty over
/// `bundle`. Scenario `n` hands out pooled beds in the specialty order
/// seeded by `(order_seed, n)`.
pub fn occupancy_series(
    instance: &Instance,
    sol: &FirstStageSolution,
    bundle: &[Scenario],
    order_seed: u64,
) -> Result<Vec<SeriesPoint>, EvalError> {
    let plan = EvalPlan::new(instance, sol)?;
    let specs = instance.specialty_count();
    let outcomes = bundle
        .par_iter()
        .enumerate()
        .map(|(n, sc)| plan.evaluate(sc, &SpecialtyOrder::shuffled(specs, derive(order_seed, Stream::Order, n as u64))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut points = Vec::new();
    for day in 0..instance.horizon_days {
        for unit in Downstream::ALL {
            for s in 0..specs {
                let q: Vec<f64> = outcomes.iter().map(|o| o.shared_used.get(s, unit, day) as f64).collect();
                let v: Vec<f64> = outcomes.iter().map(|o| o.surge_used.get(s, unit, day) as f64).collect();
                points.push(SeriesPoint {
                    day,
                    downstream: unit,
                    specialty: s,
                    mean_q: mean(&q).unwrap_or(0.0),
                    mean_v: mean(&v).unwrap_or(0.0),
                });
            }
        }
    }
    Ok(points)
}

pub const SERIES_CSV_HEADER: [&str; 5] = ["day", "downstream", "specialty", "mean_q", "mean_v"];

pub fn series_record(p: &SeriesPoint) -> Vec<String> {
    vec![
        p.day.to_string(),
        p.downstream.to_string(),
        p.specialty.to_string(),
        p.mean_q.to_string(),
        p.mean_v.to_string(),
    ]
}
