use crate::domain::{first_stage_cost, Assignment, Downstream, FirstStageSolution, Instance};
use crate::evaluator::{EvalError, EvalPlan};
use crate::sampling::Scenario;
use crate::stats::mean;
use thiserror::Error;

/// Largest number of patient placements the exhaustive search will visit.
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum BruteForceError {
    #[error("no scenarios given")]
    NoScenarios,
    #[error("search space of {0} placements exceeds the limit")]
    SpaceTooLarge(u64),
    #[error("no feasible first-stage solution")]
    Infeasible,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

struct Search<'a> {
    instance: &'a Instance,
    scenarios: &'a [Scenario],
    options: Vec<Vec<Assignment>>,
    current: Vec<Assignment>,
    cell_specialty: Vec<Option<usize>>,
    cell_minutes: Vec<f64>,
    blocks: Vec<usize>,
    best: Option<(f64, FirstStageSolution)>,
}

/// Optimal first stage over `scenarios` by enumerating every assignment of
/// patients to room-days, the cheapest way to meet block minimums, and every
/// bed split. Meant for instances with a handful of patients.
pub fn brute_force(instance: &Instance, scenarios: &[Scenario]) -> Result<(FirstStageSolution, f64), BruteForceError> {
    if scenarios.is_empty() {
        return Err(BruteForceError::NoScenarios);
    }
    let days = instance.horizon_days;
    let options: Vec<Vec<Assignment>> = instance
        .patients
        .iter()
        .map(|p| {
            let mut opts: Vec<Assignment> = p
                .eligible_rooms
                .iter()
                .filter(|&&r| r < instance.rooms)
                .flat_map(|&room| p.operable_days(days).map(move |day| Assignment::Scheduled { room, day }))
                .collect();
            if !p.is_mandatory(days) {
                opts.push(Assignment::Postponed);
            }
            opts
        })
        .collect();
    let size = options
        .iter()
        .try_fold(1u64, |acc, o| acc.checked_mul(o.len() as u64))
        .unwrap_or(u64::MAX);
    if size > BRUTE_FORCE_LIMIT {
        return Err(BruteForceError::SpaceTooLarge(size));
    }
    let mut search = Search {
        instance,
        scenarios,
        options,
        current: Vec::with_capacity(instance.patients.len()),
        cell_specialty: vec![None; instance.room_days()],
        cell_minutes: vec![0.0; instance.room_days()],
        blocks: vec![0; instance.specialty_count()],
        best: None,
    };
    search.visit()?;
    search.best.map(|(cost, sol)| (sol, cost)).ok_or(BruteForceError::Infeasible)
}

impl Search<'_> {
    fn visit(&mut self) -> Result<(), BruteForceError> {
        let i = self.current.len();
        if i == self.instance.patients.len() {
            return self.leaf();
        }
        let p = &self.instance.patients[i];
        for k in 0..self.options[i].len() {
            let a = self.options[i][k];
            match a {
                Assignment::Scheduled { room, day } => {
                    let at = room * self.instance.horizon_days + day;
                    let opened = self.cell_specialty[at].is_none();
                    if self.cell_specialty[at].is_some_and(|s| s != p.specialty) {
                        continue;
                    }
                    if opened && self.blocks[p.specialty] >= self.instance.block_bounds[p.specialty].max {
                        continue;
                    }
                    if self.cell_minutes[at] + p.max_duration > self.instance.room_capacity() + crate::domain::MINUTES_EPS {
                        continue;
                    }
                    if opened {
                        self.cell_specialty[at] = Some(p.specialty);
                        self.blocks[p.specialty] += 1;
                    }
                    self.cell_minutes[at] += p.max_duration;
                    self.current.push(a);
                    self.visit()?;
                    self.current.pop();
                    self.cell_minutes[at] -= p.max_duration;
                    if opened {
                        self.cell_specialty[at] = None;
                        self.blocks[p.specialty] -= 1;
                        self.cell_minutes[at] = 0.0;
                    }
                }
                _ => {
                    self.current.push(a);
                    self.visit()?;
                    self.current.pop();
                }
            }
        }
        Ok(())
    }

    fn leaf(&mut self) -> Result<(), BruteForceError> {
        let inst = self.instance;
        let days = inst.horizon_days;
        let mut sol = FirstStageSolution::empty(inst);
        sol.assignment = self.current.clone();
        for (at, s) in self.cell_specialty.iter().enumerate() {
            if let Some(s) = *s {
                sol.open_block(at / days, at % days, s);
            }
        }
        // Top up specialties below their minimum with empty blocks.
        let mut free = (0..inst.room_days()).filter(|&at| self.cell_specialty[at].is_none());
        for (s, bounds) in inst.block_bounds.iter().enumerate() {
            for _ in self.blocks[s]..bounds.min {
                match free.next() {
                    Some(at) => sol.open_block(at / days, at % days, s),
                    None => return Ok(()),
                }
            }
        }
        let plan = EvalPlan::new(inst, &sol)?;
        let mut overtime = Vec::with_capacity(self.scenarios.len());
        for sc in self.scenarios {
            overtime.push(plan.overtime(sc)?.iter().sum::<f64>());
        }
        let occupancy: Vec<_> = self.scenarios.iter().map(|sc| plan.occupancy(sc)).collect();
        let mut surge = 0.0;
        for unit in Downstream::ALL {
            let (split, cost) = best_split(inst, unit, &occupancy);
            for (s, u) in split.into_iter().enumerate() {
                sol.bed_split[s][unit] = u;
            }
            surge += cost;
        }
        let first = match first_stage_cost(inst, &sol) {
            Ok(c) => c,
            Err(_) => return Ok(()),
        };
        let total = first + inst.overtime_cost_rate * mean(&overtime).unwrap_or(0.0) + surge;
        if self.best.as_ref().map_or(true, |(c, _)| total < *c) {
            self.best = Some((total, sol));
        }
        Ok(())
    }
}

/// Bed split of `unit` minimising mean surge cost, and that cost. Only splits
/// that use the full reservable capacity are tried, since more reserved beds
/// never raise surge.
fn best_split(instance: &Instance, unit: Downstream, occupancy: &[crate::evaluator::OccupancyTable]) -> (Vec<u32>, f64) {
    let specs = instance.specialty_count();
    let cap = instance.nonshared_capacity(unit);
    let shared = instance.shared_capacity(unit) as i64;
    let days = instance.horizon_days;
    let rate = instance.surge_cost[unit];
    let mut split = vec![0u32; specs];
    let mut best: Option<(Vec<u32>, f64)> = None;
    loop {
        if split.iter().sum::<u32>() == cap || specs == 0 {
            let mut per_scenario = Vec::with_capacity(occupancy.len());
            for occ in occupancy {
                let mut days_surge = 0i64;
                for d in 0..days {
                    let overflow: i64 = (0..specs).map(|s| (occ.get(s, unit, d) as i64 - split[s] as i64).max(0)).sum();
                    days_surge += (overflow - shared).max(0);
                }
                per_scenario.push(rate * days_surge as f64);
            }
            let cost = mean(&per_scenario).unwrap_or(0.0);
            if best.as_ref().map_or(true, |(_, c)| cost < *c) {
                best = Some((split.clone(), cost));
            }
        }
        if !next_split(&mut split, cap) {
            break;
        }
    }
    best.unwrap_or((vec![0; specs], 0.0))
}

/// Advances to the next vector with entries summing to at most `cap`, in
/// odometer order. Returns false after the last one.
fn next_split(split: &mut [u32], cap: u32) -> bool {
    let mut sum: u32 = split.iter().sum();
    for x in split.iter_mut() {
        if sum < cap {
            *x += 1;
            return true;
        }
        sum -= *x;
        *x = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::{instance, patient};
    use crate::domain::{validate, PerDownstream};

    fn flat_scenario(n: usize, minutes: f64, icu: u32, ward: u32) -> Scenario {
        Scenario {
            durations: vec![minutes; n],
            los: vec![PerDownstream::new(icu, ward); n],
            carryover: None,
        }
    }

    #[test]
    fn odometer_visits_every_bounded_vector() {
        let mut v = vec![0u32; 3];
        let mut count = 1;
        while next_split(&mut v, 2) {
            assert!(v.iter().sum::<u32>() <= 2);
            count += 1;
        }
        // Vectors of three non-negative integers summing to at most two.
        assert_eq!(count, 10);
    }

    #[test]
    fn single_patient_goes_on_earliest_day() {
        let inst = instance(3, 1, vec![patient(0, 0, 0, 2, 2)]);
        let sc = flat_scenario(1, 120.0, 0, 0);
        let (sol, cost) = brute_force(&inst, &[sc]).unwrap();
        assert!(validate(&inst, &sol).is_empty());
        assert_eq!(sol.assignment[0], Assignment::Scheduled { room: 0, day: 0 });
        assert!((cost - 4437.0).abs() < 1e-9);
    }

    #[test]
    fn optional_patient_is_postponed_when_cheaper() {
        let mut p = patient(0, 0, 0, 9, 1);
        p.postpone_cost = 100.0;
        let inst = instance(3, 1, vec![p]);
        let (sol, cost) = brute_force(&inst, &[flat_scenario(1, 120.0, 0, 0)]).unwrap();
        assert_eq!(sol.assignment[0], Assignment::Postponed);
        assert_eq!(cost, 100.0);
    }

    #[test]
    fn block_minimum_opens_an_empty_block() {
        let mut inst = instance(2, 1, vec![]);
        inst.block_bounds[0].min = 1;
        let (sol, cost) = brute_force(&inst, &[flat_scenario(0, 0.0, 0, 0)]).unwrap();
        assert_eq!(sol.open_blocks(), 1);
        assert_eq!(cost, 4437.0);
    }

    #[test]
    fn oversized_space_is_refused() {
        let patients = (0..12).map(|i| patient(i, 0, 0, 4, 1)).collect();
        let inst = instance(5, 1, patients);
        assert!(matches!(
            brute_force(&inst, &[flat_scenario(12, 60.0, 0, 0)]),
            Err(BruteForceError::SpaceTooLarge(_))
        ));
    }
}
