use super::{MilpModel, VarIndex, VarKind};
use crate::domain::{ConstraintTag, Downstream, FirstStageSolution, Instance, PerDownstream};
use crate::sampling::Scenario;

const INF: f64 = f64::INFINITY;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum BuildError {
    #[error("at least one scenario is required")]
    NoScenarios,
    #[error("scenario {0} does not match the instance")]
    ScenarioShape(usize),
}

/// Extensive form over `scenarios`: first-stage cost plus the sample mean of
/// the recourse cost, with one copy of the recourse rows per scenario and the
/// worst-case room-time guard.
pub fn build_extensive(instance: &Instance, scenarios: &[Scenario]) -> Result<MilpModel, BuildError> {
    if scenarios.is_empty() {
        return Err(BuildError::NoScenarios);
    }
    let n_pat = instance.patients.len();
    let n_spec = instance.specialty_count();
    for (n, sc) in scenarios.iter().enumerate() {
        let carry_ok = sc
            .carryover
            .as_ref()
            .map_or(true, |t| t.has_shape(n_spec, instance.horizon_days));
        if sc.durations.len() != n_pat || sc.los.len() != n_pat || !carry_ok {
            return Err(BuildError::ScenarioShape(n));
        }
    }

    let days = instance.horizon_days;
    let rooms = instance.rooms;
    let n_scen = scenarios.len();
    let weight = 1.0 / n_scen as f64;
    let mut m = MilpModel::default();
    let mut idx = VarIndex {
        rooms,
        days,
        specialties: n_spec,
        scenarios: n_scen,
        ..VarIndex::default()
    };

    // First-stage columns.
    for (i, p) in instance.patients.iter().enumerate() {
        let mut placements = Vec::new();
        for d in p.operable_days(days) {
            for &r in &p.eligible_rooms {
                let c = m.add_var(format!("x_{i}_{r}_{d}"), VarKind::Binary, 0.0, 1.0, p.waiting_cost(d));
                placements.push((r, d, c));
            }
        }
        idx.x.push(placements);
        let postpone = (!p.is_mandatory(days))
            .then(|| m.add_var(format!("xp_{i}"), VarKind::Binary, 0.0, 1.0, p.postpone_cost));
        idx.postpone.push(postpone);
    }
    for r in 0..rooms {
        for d in 0..days {
            idx.y.push(m.add_var(format!("y_{r}_{d}"), VarKind::Binary, 0.0, 1.0, instance.or_open_cost));
        }
    }
    for s in 0..n_spec {
        for r in 0..rooms {
            for d in 0..days {
                idx.z.push(m.add_var(format!("z_{s}_{r}_{d}"), VarKind::Binary, 0.0, 1.0, 0.0));
            }
        }
    }
    for s in 0..n_spec {
        let cols = PerDownstream::splat(()).map(|unit, _| {
            let cap = instance.nonshared_capacity(unit) as f64;
            m.add_var(format!("u_{s}_{unit}"), VarKind::Integer, 0.0, cap, 0.0)
        });
        idx.u.push(cols);
    }
    idx.first_stage = m.vars.len();

    // Scenario columns.
    for n in 0..n_scen {
        for s in 0..n_spec {
            for unit in Downstream::ALL {
                for d in 0..days {
                    idx.q.push(m.add_var(format!("q_{n}_{s}_{unit}_{d}"), VarKind::Continuous, 0.0, INF, 0.0));
                    let cost = weight * instance.surge_cost[unit];
                    idx.v.push(m.add_var(format!("v_{n}_{s}_{unit}_{d}"), VarKind::Continuous, 0.0, INF, cost));
                }
            }
        }
        for r in 0..rooms {
            for d in 0..days {
                let cost = weight * instance.overtime_cost_rate;
                idx.o.push(m.add_var(format!("o_{n}_{r}_{d}"), VarKind::Continuous, 0.0, INF, cost));
            }
        }
    }
    m.index = idx;
    m.scenarios = scenarios.to_vec();
    let idx = m.index.clone();

    // Assignment.
    for (i, p) in instance.patients.iter().enumerate() {
        let mut terms: Vec<(usize, f64)> = idx.x[i].iter().map(|&(_, _, c)| (c, 1.0)).collect();
        match idx.postpone[i] {
            None => m.add_row(ConstraintTag::MandatoryAssignment, terms, 1.0, 1.0),
            Some(c) => {
                terms.push((c, 1.0));
                m.add_row(ConstraintTag::OptionalAssignment, terms, 1.0, 1.0);
            }
        }
        debug_assert_eq!(idx.postpone[i].is_none(), p.is_mandatory(days));
    }

    // Block logic.
    for r in 0..rooms {
        for d in 0..days {
            let mut terms: Vec<(usize, f64)> = (0..n_spec).map(|s| (idx.z_at(s, r, d), 1.0)).collect();
            terms.push((idx.y_at(r, d), -1.0));
            m.add_row(ConstraintTag::BlockOpening, terms, 0.0, 0.0);
        }
    }
    for (i, p) in instance.patients.iter().enumerate() {
        for &(r, d, c) in &idx.x[i] {
            let terms = vec![(c, 1.0), (idx.z_at(p.specialty, r, d), -1.0)];
            m.add_row(ConstraintTag::BlockSpecialty, terms, -INF, 0.0);
        }
    }
    for (s, bounds) in instance.block_bounds.iter().enumerate() {
        let terms: Vec<(usize, f64)> = (0..rooms)
            .flat_map(|r| (0..days).map(move |d| (r, d)))
            .map(|(r, d)| (idx.z_at(s, r, d), 1.0))
            .collect();
        m.add_row(ConstraintTag::BlockBounds, terms.clone(), bounds.min as f64, INF);
        m.add_row(ConstraintTag::BlockBounds, terms, -INF, bounds.max as f64);
    }
    for unit in Downstream::ALL {
        let terms = idx.u.iter().map(|cols| (cols[unit], 1.0)).collect();
        m.add_row(ConstraintTag::NonSharedBeds, terms, -INF, instance.nonshared_capacity(unit) as f64);
    }

    // Placements grouped by room-day, for the time rows.
    let mut by_cell: Vec<Vec<(usize, usize)>> = vec![Vec::new(); rooms * days];
    for (i, placements) in idx.x.iter().enumerate() {
        for &(r, d, c) in placements {
            by_cell[r * days + d].push((i, c));
        }
    }

    for (n, sc) in scenarios.iter().enumerate() {
        // Presence incidence: which placement columns put a patient of
        // specialty s in unit h on day d.
        let mut presence: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_spec * Downstream::COUNT * days];
        for (i, p) in instance.patients.iter().enumerate() {
            let los = sc.los[i];
            for &(_, start, c) in &idx.x[i] {
                let icu_end = start + los.icu as usize;
                let ward_end = icu_end + los.ward as usize;
                for d in start..icu_end.min(days) {
                    presence[(p.specialty * 2 + Downstream::Icu.index()) * days + d].push((c, 1.0));
                }
                for d in icu_end.min(days)..ward_end.min(days) {
                    presence[(p.specialty * 2 + Downstream::Ward.index()) * days + d].push((c, 1.0));
                }
            }
        }
        for s in 0..n_spec {
            for unit in Downstream::ALL {
                for d in 0..days {
                    let mut terms = std::mem::take(&mut presence[(s * 2 + unit.index()) * days + d]);
                    terms.push((idx.u[s][unit], -1.0));
                    terms.push((idx.q_at(n, s, unit, d), -1.0));
                    terms.push((idx.v_at(n, s, unit, d), -1.0));
                    let carried = sc.carryover_at(s, unit, d) as f64;
                    m.add_row(ConstraintTag::BedCoverage, terms, -INF, -carried);
                }
            }
        }
        for unit in Downstream::ALL {
            for d in 0..days {
                let terms = (0..n_spec).map(|s| (idx.q_at(n, s, unit, d), 1.0)).collect();
                m.add_row(ConstraintTag::SharedPool, terms, -INF, instance.shared_capacity(unit) as f64);
            }
        }
        for r in 0..rooms {
            for d in 0..days {
                let mut terms: Vec<(usize, f64)> = by_cell[r * days + d]
                    .iter()
                    .map(|&(i, c)| (c, sc.durations[i]))
                    .collect();
                terms.push((idx.o_at(n, r, d), -1.0));
                m.add_row(ConstraintTag::RoomTime, terms, -INF, instance.regular_time);
            }
        }
        for r in 0..rooms {
            for d in 0..days {
                m.add_row(ConstraintTag::OvertimeCap, vec![(idx.o_at(n, r, d), 1.0)], -INF, instance.max_overtime);
            }
        }
    }

    for r in 0..rooms {
        for d in 0..days {
            let terms = by_cell[r * days + d]
                .iter()
                .map(|&(i, c)| (c, instance.patients[i].max_duration))
                .collect();
            m.add_row(ConstraintTag::WorstCaseTime, terms, -INF, instance.room_capacity());
        }
    }
    Ok(m)
}

/// Deterministic model with every uncertain quantity replaced by its mean
/// over `scenarios`; stays are rounded to whole days.
pub fn build_evp(instance: &Instance, scenarios: &[Scenario]) -> Result<MilpModel, BuildError> {
    let mean = Scenario::mean_of(scenarios).ok_or(BuildError::NoScenarios)?;
    build_extensive(instance, &[mean])
}

/// Recourse LP of a fixed first stage: the extensive form with every
/// first-stage column fixed and costless, so the optimum is the mean recourse
/// cost over `scenarios`.
pub fn second_stage_lp(instance: &Instance, sol: &FirstStageSolution, scenarios: &[Scenario]) -> Result<MilpModel, BuildError> {
    let mut m = build_extensive(instance, scenarios)?;
    m.fix_first_stage(sol, true);
    Ok(m)
}
