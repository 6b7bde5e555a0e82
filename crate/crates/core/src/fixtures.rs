//! Small random instances and first-stage solutions for tests, oracles and
//! benchmarks. Everything is a pure function of the seed.

use crate::domain::{
    Assignment, BlockBounds, FirstStageSolution, Instance, Patient, PerDownstream, SCHEMA_VERSION,
};
use crate::generator::{
    reference_profile, MAX_OVERTIME_MINUTES, OR_OPEN_COST, OVERTIME_COST_PER_MINUTE, POSTPONE_COST_PER_PRIORITY,
    REGULAR_MINUTES, SURGE_COST_ICU, SURGE_COST_WARD, WAITING_COST_PER_PRIORITY,
};
use crate::sampling::{sample_bundle, CarryoverMode, SamplerConfig, Scenario};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape of a random fixture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixtureShape {
    pub patients: usize,
    pub specialties: usize,
    pub rooms: usize,
    pub days: usize,
    /// Longest admissible window; windows that run past the horizon make
    /// the patient optional.
    pub max_window: usize,
}

impl FixtureShape {
    /// At most five patients over two rooms and three days.
    pub fn tiny(patients: usize, specialties: usize) -> Self {
        Self {
            patients,
            specialties,
            rooms: 2,
            days: 3,
            max_window: 3,
        }
    }
}

const SHARED_FRACTIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Random instance with reference specialty profiles, durations between one
/// and three and a half hours, short stays and a handful of beds.
pub fn random_instance(seed: u64, shape: FixtureShape) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specialties: Vec<_> = (0..shape.specialties).map(reference_profile).collect();
    let patients = (0..shape.patients)
        .map(|id| {
            let specialty = rng.random_range(0..shape.specialties);
            let earliest_day = rng.random_range(0..shape.days);
            let window = rng.random_range(1..=shape.max_window.max(1));
            let priority: u8 = rng.random_range(1..=5);
            let mean_duration = rng.random_range(60.0..210.0);
            Patient {
                id,
                specialty,
                earliest_day,
                latest_day: earliest_day + window - 1,
                priority,
                mean_duration,
                max_duration: 1.5 * mean_duration,
                mean_los_total: rng.random_range(0.5..5.0),
                sd_los: rng.random_range(0.3..1.5),
                waiting_cost_rate: WAITING_COST_PER_PRIORITY * priority as f64,
                postpone_cost: POSTPONE_COST_PER_PRIORITY * priority as f64,
                eligible_rooms: (0..shape.rooms).collect(),
            }
        })
        .collect();
    Instance {
        schema_version: SCHEMA_VERSION,
        horizon_days: shape.days,
        rooms: shape.rooms,
        block_bounds: vec![
            BlockBounds {
                min: 0,
                max: shape.rooms * shape.days,
            };
            shape.specialties
        ],
        specialties,
        patients,
        regular_time: REGULAR_MINUTES,
        max_overtime: MAX_OVERTIME_MINUTES,
        bed_stock: PerDownstream::new(rng.random_range(0..=4), rng.random_range(0..=6)),
        shared_fraction: PerDownstream::new(
            *SHARED_FRACTIONS.choose(&mut rng).expect("non-empty"),
            *SHARED_FRACTIONS.choose(&mut rng).expect("non-empty"),
        ),
        or_open_cost: OR_OPEN_COST,
        overtime_cost_rate: OVERTIME_COST_PER_MINUTE,
        surge_cost: PerDownstream::new(SURGE_COST_ICU, SURGE_COST_WARD),
        provenance: None,
    }
}

/// Random feasible first stage. Patients are placed one by one on a random
/// admissible room-day that keeps block specialties consistent and the
/// worst-case time within capacity; optional patients are postponed at
/// random. A mandatory patient with no room left is made optional and
/// postponed, so the instance may be modified.
pub fn random_solution(instance: &mut Instance, seed: u64) -> FirstStageSolution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let days = instance.horizon_days;
    let cells = instance.room_days();
    let mut specialty: Vec<Option<usize>> = vec![None; cells];
    let mut minutes = vec![0.0; cells];
    let mut assignment = Vec::with_capacity(instance.patients.len());
    let capacity = instance.room_capacity();
    for p in instance.patients.iter_mut() {
        let options: Vec<usize> = p
            .eligible_rooms
            .iter()
            .flat_map(|&r| p.operable_days(days).map(move |d| r * days + d))
            .filter(|&at| specialty[at].map_or(true, |s| s == p.specialty))
            .filter(|&at| minutes[at] + p.max_duration <= capacity)
            .collect();
        let postpone = !p.is_mandatory(days) && rng.random_bool(0.25);
        match options.choose(&mut rng) {
            Some(&at) if !postpone => {
                specialty[at] = Some(p.specialty);
                minutes[at] += p.max_duration;
                assignment.push(Assignment::Scheduled {
                    room: at / days,
                    day: at % days,
                });
            }
            _ => {
                p.latest_day = p.latest_day.max(days);
                assignment.push(Assignment::Postponed);
            }
        }
    }
    let bed_split = (0..instance.specialty_count()).map(|_| PerDownstream::splat(0)).collect();
    let mut sol = FirstStageSolution::from_assignments(instance, assignment, bed_split);
    for unit in crate::domain::Downstream::ALL {
        let mut left = instance.nonshared_capacity(unit);
        for s in 0..instance.specialty_count() {
            let u = rng.random_range(0..=left);
            sol.bed_split[s][unit] = u;
            left -= u;
        }
    }
    sol
}

/// Scenarios for `instance`, with synthetic carry-over on odd seeds.
pub fn random_scenarios(instance: &Instance, seed: u64, count: usize) -> Vec<Scenario> {
    let carryover = if seed % 2 == 1 {
        CarryoverMode::Synthetic { fraction: 0.5 }
    } else {
        CarryoverMode::Zero
    };
    let config = SamplerConfig {
        carryover,
        ..SamplerConfig::with_seed(seed)
    };
    sample_bundle(instance, config, count).expect("valid sampler config")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate;

    #[test]
    fn random_solutions_validate() {
        for seed in 0..200 {
            let shape = FixtureShape {
                patients: 12,
                specialties: 1 + (seed as usize % 4),
                rooms: 2,
                days: 3 + (seed as usize % 12),
                max_window: 4,
            };
            let mut inst = random_instance(seed, shape);
            assert_eq!(inst.check(), Ok(()));
            let sol = random_solution(&mut inst, seed);
            assert!(validate(&inst, &sol).is_empty(), "seed {seed}: {:?}", validate(&inst, &sol));
        }
    }

    #[test]
    fn fixtures_are_deterministic() {
        let shape = FixtureShape::tiny(5, 2);
        assert_eq!(random_instance(7, shape), random_instance(7, shape));
        assert_ne!(random_instance(7, shape), random_instance(8, shape));
    }
}
