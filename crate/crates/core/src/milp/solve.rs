use super::{first_stage_values, MilpModel, SolveLimits, SolveStatus, SolverBackend, SolverError};
use crate::domain::{first_stage_cost, Downstream, FirstStageSolution, Instance};
use crate::evaluator::{EvalError, EvalPlan, SpecialtyOrder};
use crate::stats::mean;
use serde::{Deserialize, Serialize};

/// Result of one MILP solve, with the objective recomputed from the
/// extracted first stage and the closed-form recourse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub backend: String,
    pub status: SolveStatus,
    pub solution: FirstStageSolution,
    /// Objective reported by the solver.
    pub objective: f64,
    /// Best proven lower bound, when the solver reports one.
    pub bound: Option<f64>,
    /// First-stage cost of `solution` plus its mean recourse cost over the
    /// model's scenarios.
    pub recomputed: f64,
}

impl SolveOutcome {
    /// Relative distance between objective and bound; zero for a proven
    /// optimum without a reported bound.
    pub fn gap(&self) -> f64 {
        match self.bound {
            Some(b) => ((self.objective - b) / self.objective.abs().max(1e-9)).max(0.0),
            None => 0.0,
        }
    }
}

/// Mean recourse cost of `sol` over `scenarios`.
pub(crate) fn mean_recourse(instance: &Instance, sol: &FirstStageSolution, scenarios: &[crate::sampling::Scenario]) -> Result<f64, EvalError> {
    let plan = EvalPlan::new(instance, sol)?;
    let costs = scenarios.iter().map(|s| plan.recourse_cost(s)).collect::<Result<Vec<_>, _>>()?;
    Ok(mean(&costs).unwrap_or(0.0))
}

/// Full column vector for `model` at first stage `sol`, with the optimal
/// recourse of every scenario filled in.
pub fn warm_start_values(instance: &Instance, model: &MilpModel, sol: &FirstStageSolution) -> Result<Vec<f64>, EvalError> {
    let idx = &model.index;
    let mut values = first_stage_values(idx, sol, model.num_vars());
    let plan = EvalPlan::new(instance, sol)?;
    let order = SpecialtyOrder::identity(idx.specialties);
    for (n, sc) in model.scenarios.iter().enumerate() {
        let out = plan.evaluate(sc, &order)?;
        for s in 0..idx.specialties {
            for unit in Downstream::ALL {
                for d in 0..idx.days {
                    values[idx.q_at(n, s, unit, d)] = out.shared_used.get(s, unit, d) as f64;
                    values[idx.v_at(n, s, unit, d)] = out.surge_used.get(s, unit, d) as f64;
                }
            }
        }
        for r in 0..idx.rooms {
            for d in 0..idx.days {
                values[idx.o_at(n, r, d)] = out.overtime[r * idx.days + d];
            }
        }
    }
    Ok(values)
}

/// Solves `model` and extracts a validated first-stage solution.
///
/// `warm_start` is offered to the backend only when it is feasible for the
/// model.
pub fn solve(
    instance: &Instance,
    model: &MilpModel,
    backend: &dyn SolverBackend,
    limits: &SolveLimits,
    warm_start: Option<&FirstStageSolution>,
) -> Result<SolveOutcome, SolverError> {
    let start = warm_start
        .filter(|_| backend.capabilities().warm_start)
        .and_then(|sol| warm_start_values(instance, model, sol).ok())
        .filter(|v| model.max_violation(v) <= 1e-6);
    let raw = backend.solve(model, limits, start.as_deref())?;
    match raw.status {
        SolveStatus::Infeasible => return Err(SolverError::Infeasible),
        SolveStatus::TimeLimit => return Err(SolverError::NoIncumbent(backend.name())),
        SolveStatus::Optimal | SolveStatus::FeasibleWithGap => {}
    }
    let values = raw.values.ok_or(SolverError::NoIncumbent(backend.name()))?;
    let solution = model.extract(instance, &values);
    let extraction = |message: String| SolverError::Backend {
        backend: backend.name(),
        message,
    };
    let first = first_stage_cost(instance, &solution).map_err(|e| extraction(e.to_string()))?;
    let recourse = mean_recourse(instance, &solution, &model.scenarios).map_err(|e| extraction(e.to_string()))?;
    let objective = raw.objective.unwrap_or_else(|| model.objective(&values));
    Ok(SolveOutcome {
        backend: backend.name().to_string(),
        status: raw.status,
        solution,
        objective,
        bound: raw.bound.map(|b| b.min(objective)),
        recomputed: first + recourse,
    })
}
