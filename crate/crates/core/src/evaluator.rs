//! Closed-form second-stage recourse.
//!
//! For a fixed first stage and scenario the recourse problem decomposes by
//! unit and day for beds, and by room and day for overtime. Shared beds go to
//! whichever specialty overflows its reserved beds, in a given specialty order,
//! until the pool is empty; the rest is surge. Every unit of overflow costs the
//! same surge price whoever receives the shared bed, so the cost does not
//! depend on the order.

use crate::domain::{
    Assignment, Downstream, FirstStageSolution, Instance, PerDownstream, UnitDayTable, MINUTES_EPS,
};
use crate::sampling::Scenario;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Patients present per (specialty, unit, day).
pub type OccupancyTable = UnitDayTable<u32>;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EvalError {
    #[error(
        "room {room} day {day}: {minutes:.3} surgery minutes exceed regular time plus maximum overtime ({capacity:.3})"
    )]
    OvertimeOverflow {
        room: usize,
        day: usize,
        minutes: f64,
        capacity: f64,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Order in which specialties are offered shared beds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialtyOrder(Vec<usize>);

impl SpecialtyOrder {
    pub fn identity(specialties: usize) -> Self {
        Self((0..specialties).collect())
    }

    pub fn shuffled(specialties: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..specialties).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self(order)
    }

    /// `None` unless `order` is a permutation of `0..len`.
    pub fn new(order: Vec<usize>) -> Option<Self> {
        let mut seen = vec![false; order.len()];
        for &s in &order {
            if s >= order.len() || std::mem::replace(&mut seen[s], true) {
                return None;
            }
        }
        Some(Self(order))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Everything the evaluator needs from an instance and a first-stage
/// solution, laid out for repeated evaluation over many scenarios.
#[derive(Clone, Debug)]
pub struct EvalPlan {
    specialties: usize,
    days: usize,
    rooms: usize,
    /// (patient, specialty, day) of every scheduled surgery.
    scheduled: Vec<(usize, usize, usize)>,
    /// (room, day, patients) of every room-day holding surgeries, in
    /// room-major order.
    cells: Vec<(usize, usize, Vec<usize>)>,
    reserved: Vec<PerDownstream<u32>>,
    shared: PerDownstream<u32>,
    regular_time: f64,
    max_overtime: f64,
    overtime_cost_rate: f64,
    surge_cost: PerDownstream<f64>,
    patients: usize,
}

impl EvalPlan {
    pub fn new(instance: &Instance, sol: &FirstStageSolution) -> Result<Self, EvalError> {
        let n_spec = instance.specialty_count();
        if sol.bed_split.len() != n_spec {
            return Err(EvalError::Shape(format!(
                "bed split has {} rows for {n_spec} specialties",
                sol.bed_split.len()
            )));
        }
        if sol.rooms != instance.rooms || sol.days != instance.horizon_days {
            return Err(EvalError::Shape("room-day grid differs from the instance".into()));
        }
        let mut scheduled = Vec::new();
        for (i, a) in sol.assignment.iter().enumerate() {
            if let Assignment::Scheduled { room, day } = *a {
                if i >= instance.patients.len() || room >= instance.rooms || day >= instance.horizon_days {
                    return Err(EvalError::Shape(format!("patient {i} placed outside the instance")));
                }
                scheduled.push((i, instance.patients[i].specialty, day));
            }
        }
        let cells = sol
            .patients_by_cell()
            .into_iter()
            .enumerate()
            .filter(|(_, ps)| !ps.is_empty())
            .map(|(at, ps)| (at / sol.days, at % sol.days, ps))
            .collect();
        Ok(Self {
            specialties: n_spec,
            days: instance.horizon_days,
            rooms: instance.rooms,
            scheduled,
            cells,
            reserved: sol.bed_split.clone(),
            shared: PerDownstream::new(
                instance.shared_capacity(Downstream::Icu),
                instance.shared_capacity(Downstream::Ward),
            ),
            regular_time: instance.regular_time,
            max_overtime: instance.max_overtime,
            overtime_cost_rate: instance.overtime_cost_rate,
            surge_cost: instance.surge_cost,
            patients: instance.patients.len(),
        })
    }

    fn check_scenario(&self, scenario: &Scenario) -> Result<(), EvalError> {
        if scenario.durations.len() != self.patients || scenario.los.len() != self.patients {
            return Err(EvalError::Shape(format!(
                "scenario covers {} / {} patients, instance has {}",
                scenario.durations.len(),
                scenario.los.len(),
                self.patients
            )));
        }
        if let Some(t) = &scenario.carryover {
            if !t.has_shape(self.specialties, self.days) {
                return Err(EvalError::Shape("carry-over table shape".into()));
            }
        }
        Ok(())
    }

    /// Patients present per (specialty, unit, day), including carry-over.
    pub fn occupancy(&self, scenario: &Scenario) -> OccupancyTable {
        let mut table = match &scenario.carryover {
            Some(t) => t.clone(),
            None => UnitDayTable::zeros(self.specialties, self.days),
        };
        for &(i, s, start) in &self.scheduled {
            let los = scenario.los[i];
            let icu_end = start + los.icu as usize;
            let ward_end = icu_end + los.ward as usize;
            for d in start..icu_end.min(self.days) {
                *table.get_mut(s, Downstream::Icu, d) += 1;
            }
            for d in icu_end.min(self.days)..ward_end.min(self.days) {
                *table.get_mut(s, Downstream::Ward, d) += 1;
            }
        }
        table
    }

    /// Overtime minutes per room-day, row-major by room.
    pub fn overtime(&self, scenario: &Scenario) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.rooms * self.days];
        for (room, day, patients) in &self.cells {
            out[room * self.days + day] = self.cell_overtime(*room, *day, patients, scenario)?;
        }
        Ok(out)
    }

    fn cell_overtime(&self, room: usize, day: usize, patients: &[usize], scenario: &Scenario) -> Result<f64, EvalError> {
        let minutes: f64 = patients.iter().map(|&i| scenario.durations[i]).sum();
        let capacity = self.regular_time + self.max_overtime;
        if minutes > capacity + MINUTES_EPS {
            return Err(EvalError::OvertimeOverflow {
                room,
                day,
                minutes,
                capacity,
            });
        }
        Ok((minutes - self.regular_time).clamp(0.0, self.max_overtime))
    }

    fn total_overtime(&self, scenario: &Scenario) -> Result<f64, EvalError> {
        let mut total = 0.0;
        for (room, day, patients) in &self.cells {
            total += self.cell_overtime(*room, *day, patients, scenario)?;
        }
        Ok(total)
    }

    /// Surge patient-days per unit: the overflow above reserved beds that the
    /// shared pool cannot absorb, summed over days.
    fn surge_totals(&self, occupancy: &OccupancyTable) -> PerDownstream<u64> {
        let mut totals = PerDownstream::splat(0u64);
        for unit in Downstream::ALL {
            for d in 0..self.days {
                let overflow: u64 = (0..self.specialties)
                    .map(|s| occupancy.get(s, unit, d).saturating_sub(self.reserved[s][unit]) as u64)
                    .sum();
                totals[unit] += overflow.saturating_sub(self.shared[unit] as u64);
            }
        }
        totals
    }

    fn cost_from_totals(&self, surge: PerDownstream<u64>, overtime_minutes: f64) -> (f64, f64) {
        let surge_cost = self.surge_cost.icu * surge.icu as f64 + self.surge_cost.ward * surge.ward as f64;
        (surge_cost, self.overtime_cost_rate * overtime_minutes)
    }

    /// Optimal recourse cost without materialising the allocation.
    pub fn recourse_cost(&self, scenario: &Scenario) -> Result<f64, EvalError> {
        let (surge, ot) = self.recourse_parts(scenario)?;
        Ok(surge + ot)
    }

    /// Surge and overtime cost of the optimal recourse.
    pub fn recourse_parts(&self, scenario: &Scenario) -> Result<(f64, f64), EvalError> {
        self.check_scenario(scenario)?;
        let overtime = self.total_overtime(scenario)?;
        Ok(self.cost_from_totals(self.surge_totals(&self.occupancy(scenario)), overtime))
    }

    pub fn evaluate(&self, scenario: &Scenario, order: &SpecialtyOrder) -> Result<SecondStageOutcome, EvalError> {
        self.check_scenario(scenario)?;
        if order.len() != self.specialties {
            return Err(EvalError::Shape(format!(
                "order has {} entries for {} specialties",
                order.len(),
                self.specialties
            )));
        }
        let occupied = self.occupancy(scenario);
        let (shared_used, surge_used) = allocate(&occupied, &self.reserved, self.shared, order);
        let overtime = self.overtime(scenario)?;
        let overtime_minutes: f64 = overtime.iter().sum();
        let surge = self.surge_totals(&occupied);
        let (surge_cost, overtime_cost) = self.cost_from_totals(surge, overtime_minutes);
        Ok(SecondStageOutcome {
            occupied,
            shared_used,
            surge_used,
            overtime,
            surge_cost,
            overtime_cost,
            recourse_cost: surge_cost + overtime_cost,
        })
    }
}

/// Second-stage decisions and their cost for one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondStageOutcome {
    pub occupied: OccupancyTable,
    pub shared_used: UnitDayTable<u32>,
    pub surge_used: UnitDayTable<u32>,
    /// Minutes per room-day, row-major by room.
    pub overtime: Vec<f64>,
    pub surge_cost: f64,
    pub overtime_cost: f64,
    pub recourse_cost: f64,
}

impl SecondStageOutcome {
    /// One row per (day, specialty, unit).
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["day", "specialty", "downstream", "occupied", "shared_used", "surge_used"])?;
        for d in 0..self.occupied.days() {
            for s in 0..self.occupied.specialties() {
                for unit in Downstream::ALL {
                    w.write_record([
                        d.to_string(),
                        s.to_string(),
                        unit.to_string(),
                        self.occupied.get(s, unit, d).to_string(),
                        self.shared_used.get(s, unit, d).to_string(),
                        self.surge_used.get(s, unit, d).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn allocate(
    occupied: &OccupancyTable,
    reserved: &[PerDownstream<u32>],
    shared: PerDownstream<u32>,
    order: &SpecialtyOrder,
) -> (UnitDayTable<u32>, UnitDayTable<u32>) {
    let (specs, days) = (occupied.specialties(), occupied.days());
    let mut q = UnitDayTable::zeros(specs, days);
    let mut v = UnitDayTable::zeros(specs, days);
    for unit in Downstream::ALL {
        for d in 0..days {
            let mut remaining = shared[unit];
            for &s in order.as_slice() {
                let overflow = occupied.get(s, unit, d).saturating_sub(reserved[s][unit]);
                let granted = overflow.min(remaining);
                remaining -= granted;
                q.set(s, unit, d, granted);
                v.set(s, unit, d, overflow - granted);
            }
        }
    }
    (q, v)
}

/// Patients present per (specialty, unit, day).
pub fn occupancy(instance: &Instance, sol: &FirstStageSolution, scenario: &Scenario) -> Result<OccupancyTable, EvalError> {
    let plan = EvalPlan::new(instance, sol)?;
    plan.check_scenario(scenario)?;
    Ok(plan.occupancy(scenario))
}

/// Shared beds `q` and surge beds `v` per cell, handing the pool out in
/// `order`.
pub fn allocate_shared(
    instance: &Instance,
    occupied: &OccupancyTable,
    bed_split: &[PerDownstream<u32>],
    order: &SpecialtyOrder,
) -> (UnitDayTable<u32>, UnitDayTable<u32>) {
    let shared = PerDownstream::new(
        instance.shared_capacity(Downstream::Icu),
        instance.shared_capacity(Downstream::Ward),
    );
    allocate(occupied, bed_split, shared, order)
}

/// Overtime minutes per room-day.
pub fn overtime(instance: &Instance, sol: &FirstStageSolution, scenario: &Scenario) -> Result<Vec<f64>, EvalError> {
    let plan = EvalPlan::new(instance, sol)?;
    plan.check_scenario(scenario)?;
    plan.overtime(scenario)
}

pub fn evaluate(
    instance: &Instance,
    sol: &FirstStageSolution,
    scenario: &Scenario,
    order: &SpecialtyOrder,
) -> Result<SecondStageOutcome, EvalError> {
    EvalPlan::new(instance, sol)?.evaluate(scenario, order)
}
