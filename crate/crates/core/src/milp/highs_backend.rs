use super::{Capabilities, MilpModel, RawSolution, SolveLimits, SolveStatus, SolverBackend, SolverError, VarKind};
use highs::{ColProblem, HighsModelStatus, HighsSolutionStatus, Sense};

/// HiGHS through its C API. Deterministic for a given model and option set.
#[derive(Clone, Copy, Debug, Default)]
pub struct HighsBackend;

fn fail(message: impl Into<String>) -> SolverError {
    SolverError::Backend {
        backend: "highs",
        message: message.into(),
    }
}

impl SolverBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            mip_gap_control: true,
            time_limit: true,
            warm_start: true,
        }
    }

    fn solve(&self, model: &MilpModel, limits: &SolveLimits, warm_start: Option<&[f64]>) -> Result<RawSolution, SolverError> {
        let mut pb = ColProblem::default();
        let rows: Vec<_> = model.rows.iter().map(|r| pb.add_row(r.lower..=r.upper)).collect();
        let mut columns: Vec<Vec<(highs::Row, f64)>> = vec![Vec::new(); model.vars.len()];
        for (row, r) in rows.iter().zip(&model.rows) {
            for &(c, a) in &r.terms {
                columns[c].push((*row, a));
            }
        }
        for (var, terms) in model.vars.iter().zip(columns) {
            let integer = var.kind != VarKind::Continuous;
            pb.add_column_with_integrality(var.cost, var.lower..=var.upper, terms, integer);
        }

        let mut solver = pb.try_optimise(Sense::Minimise).map_err(|e| fail(format!("{e:?}")))?;
        solver.make_quiet();
        solver
            .try_set_option("mip_rel_gap", limits.rel_gap)
            .and_then(|_| solver.try_set_option("time_limit", limits.time_limit))
            .and_then(|_| solver.try_set_option("threads", 1i32))
            .and_then(|_| solver.try_set_option("random_seed", 0i32))
            .map_err(|e| fail(format!("{e:?}")))?;
        if let Some(start) = warm_start {
            if start.len() == model.vars.len() && model.is_mip() {
                solver.try_set_solution(Some(start), None, None, None).map_err(|e| fail(format!("{e:?}")))?;
            }
        }
        let solved = solver.try_solve().map_err(|e| fail(format!("{e:?}")))?;

        let has_values = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let status = match solved.status() {
            HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit
            | HighsModelStatus::ReachedInterrupt
            | HighsModelStatus::ReachedMemoryLimit => {
                if has_values {
                    SolveStatus::FeasibleWithGap
                } else {
                    SolveStatus::TimeLimit
                }
            }
            other => return Err(fail(format!("model status {other:?}"))),
        };
        if status == SolveStatus::Infeasible {
            return Ok(RawSolution {
                status,
                values: None,
                objective: None,
                bound: None,
            });
        }
        let values = has_values.then(|| solved.get_solution().columns().to_vec());
        let objective = has_values.then(|| solved.objective_value());
        let bound = if model.is_mip() {
            solved.double_info_value(c"mip_dual_bound").ok().filter(|b| b.is_finite())
        } else {
            objective
        };
        Ok(RawSolution {
            status,
            values,
            objective,
            bound,
        })
    }
}
