//! Extensive-form MILP over a scenario sample, solver backends and an
//! exhaustive-search oracle for tiny instances.

mod backend;
mod brute;
mod build;
mod highs_backend;
mod lp_format;
mod microlp_backend;
mod solve;

pub use backend::{backend_from_env, backend_from_name, Capabilities, RawSolution, SolveLimits, SolveStatus, SolverBackend, SolverError, BACKEND_ENV};
pub use brute::{brute_force, BruteForceError, BRUTE_FORCE_LIMIT};
pub use build::{build_evp, build_extensive, second_stage_lp};
pub use highs_backend::HighsBackend;
pub use lp_format::write_lp;
pub use microlp_backend::MicrolpBackend;
pub use solve::{solve, warm_start_values, SolveOutcome};

use crate::domain::{Assignment, ConstraintTag, Downstream, FirstStageSolution, Instance, PerDownstream};
use crate::sampling::Scenario;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

/// `lower <= sum(coef * var) <= upper`; infinite bounds are absent sides.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub tag: ConstraintTag,
    pub terms: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

/// Column positions of each variable family.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VarIndex {
    pub rooms: usize,
    pub days: usize,
    pub specialties: usize,
    pub scenarios: usize,
    /// Per patient: (room, day, column) of every admissible placement.
    pub x: Vec<Vec<(usize, usize, usize)>>,
    /// Per patient: postponement column, optional patients only.
    pub postpone: Vec<Option<usize>>,
    /// Per room-day, row-major by room.
    pub y: Vec<usize>,
    /// Per (specialty, room, day).
    pub z: Vec<usize>,
    pub u: Vec<PerDownstream<usize>>,
    /// Per (scenario, specialty, unit, day).
    pub q: Vec<usize>,
    pub v: Vec<usize>,
    /// Per (scenario, room, day).
    pub o: Vec<usize>,
    pub first_stage: usize,
}

impl VarIndex {
    #[inline]
    pub fn y_at(&self, room: usize, day: usize) -> usize {
        self.y[room * self.days + day]
    }

    #[inline]
    pub fn z_at(&self, s: usize, room: usize, day: usize) -> usize {
        self.z[(s * self.rooms + room) * self.days + day]
    }

    #[inline]
    fn cell_offset(&self, n: usize, s: usize, unit: Downstream, day: usize) -> usize {
        ((n * self.specialties + s) * Downstream::COUNT + unit.index()) * self.days + day
    }

    #[inline]
    pub fn q_at(&self, n: usize, s: usize, unit: Downstream, day: usize) -> usize {
        self.q[self.cell_offset(n, s, unit, day)]
    }

    #[inline]
    pub fn v_at(&self, n: usize, s: usize, unit: Downstream, day: usize) -> usize {
        self.v[self.cell_offset(n, s, unit, day)]
    }

    #[inline]
    pub fn o_at(&self, n: usize, room: usize, day: usize) -> usize {
        self.o[(n * self.rooms + room) * self.days + day]
    }

    /// Number of first-stage columns; they come before all scenario columns.
    pub fn first_stage_len(&self) -> usize {
        self.first_stage
    }
}

/// A linear model with tagged rows and a minimisation objective.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpModel {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    pub index: VarIndex,
    /// Scenario data the recourse rows were built from.
    pub scenarios: Vec<Scenario>,
}

impl MilpModel {
    pub(crate) fn add_var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64, cost: f64) -> usize {
        self.vars.push(Variable {
            name,
            kind,
            lower,
            upper,
            cost,
        });
        self.vars.len() - 1
    }

    pub(crate) fn add_row(&mut self, tag: ConstraintTag, terms: Vec<(usize, f64)>, lower: f64, upper: f64) {
        self.rows.push(Row {
            tag,
            terms,
            lower,
            upper,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_scenarios(&self) -> usize {
        self.index.scenarios
    }

    pub fn is_mip(&self) -> bool {
        self.vars.iter().any(|v| v.kind != VarKind::Continuous)
    }

    /// Rows per constraint family.
    pub fn row_counts(&self) -> BTreeMap<ConstraintTag, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.rows {
            *counts.entry(r.tag).or_insert(0) += 1;
        }
        counts
    }

    pub fn objective(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.cost * x).sum()
    }

    /// Largest bound, row or integrality violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
            if v.kind != VarKind::Continuous {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for r in &self.rows {
            let lhs: f64 = r.terms.iter().map(|&(c, a)| a * values[c]).sum();
            worst = worst.max(r.lower - lhs).max(lhs - r.upper);
        }
        worst
    }

    /// Turns every first-stage column into a continuous column fixed at the
    /// value `sol` gives it, and drops its cost when `drop_cost` is set. What
    /// remains is the scenario recourse LP.
    pub fn fix_first_stage(&mut self, sol: &FirstStageSolution, drop_cost: bool) {
        let values = first_stage_values(&self.index, sol, self.vars.len());
        let len = self.index.first_stage_len();
        for (col, var) in self.vars.iter_mut().enumerate().take(len) {
            var.kind = VarKind::Continuous;
            var.lower = values[col];
            var.upper = values[col];
            if drop_cost {
                var.cost = 0.0;
            }
        }
    }

    /// Column vector with the first-stage values of `sol` and zero recourse.
    pub fn point_of(&self, sol: &FirstStageSolution) -> Vec<f64> {
        first_stage_values(&self.index, sol, self.vars.len())
    }

    /// Largest violation of first-stage bounds, integrality and rows.
    pub fn first_stage_violation(&self, values: &[f64]) -> f64 {
        let len = self.index.first_stage_len();
        let mut worst: f64 = 0.0;
        for (v, &x) in self.vars.iter().zip(values).take(len) {
            worst = worst.max(v.lower - x).max(x - v.upper);
            if v.kind != VarKind::Continuous {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for r in self.rows.iter().filter(|r| r.terms.iter().all(|&(c, _)| c < len)) {
            let lhs: f64 = r.terms.iter().map(|&(c, a)| a * values[c]).sum();
            worst = worst.max(r.lower - lhs).max(lhs - r.upper);
        }
        worst
    }

    /// Reads the first-stage decisions out of a solver vector.
    pub fn extract(&self, instance: &Instance, values: &[f64]) -> FirstStageSolution {
        let idx = &self.index;
        let mut sol = FirstStageSolution::empty(instance);
        for (i, placements) in idx.x.iter().enumerate() {
            let chosen = placements
                .iter()
                .filter(|&&(_, _, c)| values[c] > 0.5)
                .max_by(|a, b| values[a.2].total_cmp(&values[b.2]));
            sol.assignment[i] = match (chosen, idx.postpone[i]) {
                (Some(&(room, day, _)), _) => Assignment::Scheduled { room, day },
                (None, Some(c)) if values[c] > 0.5 => Assignment::Postponed,
                _ => Assignment::Unassigned,
            };
        }
        for room in 0..idx.rooms {
            for day in 0..idx.days {
                if values[idx.y_at(room, day)] > 0.5 {
                    let at = sol.cell(room, day);
                    sol.room_open[at] = true;
                    sol.block_specialty[at] = (0..idx.specialties)
                        .filter(|&s| values[idx.z_at(s, room, day)] > 0.5)
                        .max_by(|&a, &b| values[idx.z_at(a, room, day)].total_cmp(&values[idx.z_at(b, room, day)]));
                }
            }
        }
        for (s, cols) in idx.u.iter().enumerate() {
            sol.bed_split[s] = PerDownstream::new(
                values[cols.icu].round().max(0.0) as u32,
                values[cols.ward].round().max(0.0) as u32,
            );
        }
        sol
    }
}

/// Full-length vector holding the first-stage values of `sol`; scenario
/// columns are zero.
pub(crate) fn first_stage_values(idx: &VarIndex, sol: &FirstStageSolution, len: usize) -> Vec<f64> {
    let mut values = vec![0.0; len];
    for (i, placements) in idx.x.iter().enumerate() {
        match sol.assignment_of(i) {
            Assignment::Scheduled { room, day } => {
                if let Some(&(_, _, c)) = placements.iter().find(|&&(r, d, _)| r == room && d == day) {
                    values[c] = 1.0;
                }
            }
            Assignment::Postponed => {
                if let Some(c) = idx.postpone[i] {
                    values[c] = 1.0;
                }
            }
            Assignment::Unassigned => {}
        }
    }
    for room in 0..idx.rooms {
        for day in 0..idx.days {
            let at = room * idx.days + day;
            if sol.room_open.get(at).copied().unwrap_or(false) {
                values[idx.y_at(room, day)] = 1.0;
            }
            if let Some(Some(s)) = sol.block_specialty.get(at) {
                if *s < idx.specialties {
                    values[idx.z_at(*s, room, day)] = 1.0;
                }
            }
        }
    }
    for (s, cols) in idx.u.iter().enumerate() {
        if let Some(split) = sol.bed_split.get(s) {
            values[cols.icu] = split.icu as f64;
            values[cols.ward] = split.ward as f64;
        }
    }
    values
}

/// Expected rows per family for a model of `instance` with `scenarios`
/// scenarios, from the size of each index set alone.
pub fn expected_row_counts(instance: &Instance, scenarios: usize) -> BTreeMap<ConstraintTag, usize> {
    let days = instance.horizon_days;
    let rooms = instance.rooms;
    let specs = instance.specialty_count();
    let units = Downstream::COUNT;
    let mandatory = instance.mandatory_count();
    let optional = instance.patients.len() - mandatory;
    let placements: usize = instance
        .patients
        .iter()
        .map(|p| p.eligible_rooms.len() * p.operable_days(days).len())
        .sum();
    let mut m = BTreeMap::new();
    m.insert(ConstraintTag::MandatoryAssignment, mandatory);
    m.insert(ConstraintTag::OptionalAssignment, optional);
    m.insert(ConstraintTag::BlockOpening, rooms * days);
    m.insert(ConstraintTag::BlockSpecialty, placements);
    m.insert(ConstraintTag::BlockBounds, 2 * specs);
    m.insert(ConstraintTag::NonSharedBeds, units);
    m.insert(ConstraintTag::BedCoverage, scenarios * specs * units * days);
    m.insert(ConstraintTag::SharedPool, scenarios * units * days);
    m.insert(ConstraintTag::RoomTime, scenarios * rooms * days);
    m.insert(ConstraintTag::OvertimeCap, scenarios * rooms * days);
    m.insert(ConstraintTag::WorstCaseTime, rooms * days);
    m.retain(|_, &mut n| n > 0);
    m
}
