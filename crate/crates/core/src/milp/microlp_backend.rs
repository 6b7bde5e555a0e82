use super::{Capabilities, MilpModel, RawSolution, SolveLimits, SolveStatus, SolverBackend, SolverError, VarKind};
use microlp::{ComparisonOp, OptimizationDirection, Problem, SolutionStatus, SolveOptions, TerminationReason};

/// Pure-Rust branch and bound. Slower than HiGHS; used as a second,
/// independent backend on small models.
#[derive(Clone, Copy, Debug, Default)]
pub struct MicrolpBackend;

fn fail(message: impl Into<String>) -> SolverError {
    SolverError::Backend {
        backend: "microlp",
        message: message.into(),
    }
}

fn int_bound(x: f64) -> i32 {
    x.clamp(i32::MIN as f64, i32::MAX as f64).round() as i32
}

impl SolverBackend for MicrolpBackend {
    fn name(&self) -> &'static str {
        "microlp"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            mip_gap_control: true,
            time_limit: true,
            warm_start: true,
        }
    }

    fn solve(&self, model: &MilpModel, limits: &SolveLimits, warm_start: Option<&[f64]>) -> Result<RawSolution, SolverError> {
        let mut pb = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = model
            .vars
            .iter()
            .map(|v| match v.kind {
                VarKind::Continuous => pb.add_var(v.cost, (v.lower, v.upper)),
                VarKind::Binary | VarKind::Integer => pb.add_integer_var(v.cost, (int_bound(v.lower), int_bound(v.upper))),
            })
            .collect();
        for r in &model.rows {
            let terms: Vec<_> = r.terms.iter().map(|&(c, a)| (vars[c], a)).collect();
            if r.lower == r.upper {
                pb.add_constraint(terms.as_slice(), ComparisonOp::Eq, r.upper);
                continue;
            }
            if r.lower.is_finite() {
                pb.add_constraint(terms.as_slice(), ComparisonOp::Ge, r.lower);
            }
            if r.upper.is_finite() {
                pb.add_constraint(terms.as_slice(), ComparisonOp::Le, r.upper);
            }
        }
        let mut options = SolveOptions::default();
        options.time_limit = Some(limits.duration());
        options.mip_gap = limits.rel_gap;
        options.warm_start = warm_start
            .filter(|s| s.len() == vars.len())
            .map(|s| vars.iter().copied().zip(s.iter().copied()).collect());
        let outcome = match pb.solve_with(options) {
            Ok(o) => o,
            Err(microlp::Error::Infeasible) => {
                return Ok(RawSolution {
                    status: SolveStatus::Infeasible,
                    values: None,
                    objective: None,
                    bound: None,
                })
            }
            Err(e) => return Err(fail(e.to_string())),
        };
        match outcome {
            microlp::SolveOutcome::Solution(sol) => {
                let proven = sol.status() == SolutionStatus::Optimal
                    || sol.termination_reason() == TerminationReason::MipGap;
                let status = if proven {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::FeasibleWithGap
                };
                let values = vars.iter().map(|&v| sol.var_value_raw(v)).collect();
                Ok(RawSolution {
                    status,
                    values: Some(values),
                    objective: Some(sol.objective()),
                    bound: sol.stats().best_bound,
                })
            }
            microlp::SolveOutcome::Interrupted(_) => Ok(RawSolution {
                status: SolveStatus::TimeLimit,
                values: None,
                objective: None,
                bound: None,
            }),
        }
    }
}
