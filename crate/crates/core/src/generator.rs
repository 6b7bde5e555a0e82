//! Random benchmark instances.

use crate::domain::{BlockBounds, Instance, Patient, PerDownstream, SpecialtyProfile, SCHEMA_VERSION};
use crate::sampling::DURATION_CV;
use crate::seed::{derive, Stream};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const ROOMS: usize = 4;
pub const REGULAR_MINUTES: f64 = 480.0;
pub const MAX_OVERTIME_MINUTES: f64 = 180.0;
pub const OR_OPEN_COST: f64 = 4437.0;
pub const OVERTIME_COST_PER_MINUTE: f64 = 12.37;
pub const SURGE_COST_ICU: f64 = 109.58;
pub const SURGE_COST_WARD: f64 = 62.94;
pub const WAITING_COST_PER_PRIORITY: f64 = 1000.0;
pub const POSTPONE_COST_PER_PRIORITY: f64 = 15000.0;
pub const MAX_WINDOW_DAYS: usize = 7;
pub const ICU_SHARE: f64 = 0.4;
pub const PRESET_BEDS: PerDownstream<u32> = PerDownstream::new(35, 65);

/// Reference specialties: name, mean surgery minutes, sd of surgery minutes,
/// mean ward days, mean ICU days, sd of the total stay.
pub const REFERENCE_SPECIALTIES: [(&str, f64, f64, f64, f64, f64); 7] = [
    ("General", 150.95, 25.16, 3.10, 4.65, 4.48),
    ("Neurology", 135.06, 22.51, 2.89, 4.34, 5.19),
    ("Cardiovascular", 189.34, 31.56, 2.34, 3.50, 3.01),
    ("Orthopedic", 151.95, 25.33, 3.08, 4.61, 4.51),
    ("Urology", 94.0, 5.22, 6.27, 9.402, 3.68),
    ("Plastic and reconstructive", 157.72, 10.52, 15.77, 6.71, 4.54),
    ("Obstetrics and gynecology", 79.32, 5.29, 7.93, 5.22, 2.21),
];

/// Profile of reference specialty `s`. The duration sd is one sixth of the
/// mean, which is what the sampler draws from; the tabulated sd is kept in
/// [`REFERENCE_SPECIALTIES`] for comparison only.
pub fn reference_profile(s: usize) -> SpecialtyProfile {
    let (name, mean, _, ward, icu, sd_los) = REFERENCE_SPECIALTIES[s];
    SpecialtyProfile {
        id: s,
        name: name.to_string(),
        mean_duration: mean,
        sd_duration: DURATION_CV * mean,
        mean_los_ward: ward,
        mean_los_icu: icu,
        sd_los,
    }
}

/// How the bed stock is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BedRule {
    /// `M_h = round(factor * sum_i mu_i^{LOS,h} / |D|)`, with the per-unit
    /// mean stay split 40/60 between ICU and ward.
    Formula { factor: f64 },
    Preset { icu: u32, ward: u32 },
}

impl Default for BedRule {
    fn default() -> Self {
        BedRule::Formula { factor: 0.8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub weeks: usize,
    pub n_specialties: usize,
    pub seed: u64,
    pub bed_rule: BedRule,
    pub patients_per_week: usize,
    /// Pooled fraction applied to both units.
    pub shared_fraction: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            weeks: 2,
            n_specialties: 7,
            seed: 0,
            bed_rule: BedRule::default(),
            patients_per_week: 60,
            shared_fraction: 0.5,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeneratorError {
    #[error("weeks must be 2, 3 or 4, got {0}")]
    Weeks(usize),
    #[error("number of specialties must lie in 1..=7, got {0}")]
    Specialties(usize),
    #[error("patients_per_week must be positive")]
    Patients,
    #[error("shared fraction must lie in [0, 1], got {0}")]
    SharedFraction(f64),
    #[error("bed formula factor must be positive, got {0}")]
    BedFactor(f64),
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<(), GeneratorError> {
        if !(2..=4).contains(&self.weeks) {
            return Err(GeneratorError::Weeks(self.weeks));
        }
        if !(1..=REFERENCE_SPECIALTIES.len()).contains(&self.n_specialties) {
            return Err(GeneratorError::Specialties(self.n_specialties));
        }
        if self.patients_per_week == 0 {
            return Err(GeneratorError::Patients);
        }
        if !(0.0..=1.0).contains(&self.shared_fraction) {
            return Err(GeneratorError::SharedFraction(self.shared_fraction));
        }
        if let BedRule::Formula { factor } = self.bed_rule {
            if !(factor > 0.0) {
                return Err(GeneratorError::BedFactor(factor));
            }
        }
        Ok(())
    }

    pub fn horizon_days(&self) -> usize {
        7 * self.weeks
    }

    pub fn patient_count(&self) -> usize {
        self.weeks * self.patients_per_week
    }
}

/// Expected bed-days per day of each unit, before any scaling.
pub fn expected_daily_demand(patients: &[Patient], horizon_days: usize) -> PerDownstream<f64> {
    let total: f64 = patients.iter().map(|p| p.mean_los_total).sum();
    PerDownstream::new(
        ICU_SHARE * total / horizon_days as f64,
        (1.0 - ICU_SHARE) * total / horizon_days as f64,
    )
}

pub fn generate(config: &GeneratorConfig) -> Result<Instance, GeneratorError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let days = config.horizon_days();
    let specialties: Vec<_> = (0..config.n_specialties).map(reference_profile).collect();
    let patients: Vec<Patient> = (0..config.patient_count())
        .map(|id| {
            let specialty = rng.random_range(0..config.n_specialties);
            let profile = &specialties[specialty];
            let earliest_day = rng.random_range(0..days);
            let window = rng.random_range(1..=MAX_WINDOW_DAYS);
            let priority: u8 = rng.random_range(1..=5);
            let los_factor = rng.random_range(0.75..=1.25);
            Patient {
                id,
                specialty,
                earliest_day,
                latest_day: earliest_day + window - 1,
                priority,
                mean_duration: profile.mean_duration,
                max_duration: 1.5 * profile.mean_duration,
                mean_los_total: los_factor * profile.mean_los_total(),
                sd_los: profile.sd_los,
                waiting_cost_rate: WAITING_COST_PER_PRIORITY * priority as f64,
                postpone_cost: POSTPONE_COST_PER_PRIORITY * priority as f64,
                eligible_rooms: (0..ROOMS).collect(),
            }
        })
        .collect();
    let bed_stock = match config.bed_rule {
        BedRule::Formula { factor } => {
            expected_daily_demand(&patients, days).map(|_, d| (factor * d).round() as u32)
        }
        BedRule::Preset { icu, ward } => PerDownstream::new(icu, ward),
    };
    let instance = Instance {
        schema_version: SCHEMA_VERSION,
        horizon_days: days,
        rooms: ROOMS,
        block_bounds: vec![
            BlockBounds {
                min: 0,
                max: ROOMS * days,
            };
            specialties.len()
        ],
        specialties,
        patients,
        regular_time: REGULAR_MINUTES,
        max_overtime: MAX_OVERTIME_MINUTES,
        bed_stock,
        shared_fraction: PerDownstream::splat(config.shared_fraction),
        or_open_cost: OR_OPEN_COST,
        overtime_cost_rate: OVERTIME_COST_PER_MINUTE,
        surge_cost: PerDownstream::new(SURGE_COST_ICU, SURGE_COST_WARD),
        provenance: Some(serde_json::json!({ "generator": config })),
    };
    debug_assert_eq!(instance.check(), Ok(()));
    Ok(instance)
}

/// The week/specialty combinations of the benchmark grid, in grid order.
pub fn grid_combinations() -> Vec<(usize, usize)> {
    (2..=4)
        .flat_map(|w| (1..=REFERENCE_SPECIALTIES.len()).map(move |s| (w, s)))
        .collect()
}

/// Configurations of the benchmark grid: every combination repeated
/// `replications` times, each with its own derived seed.
pub fn grid_configs(base_seed: u64, replications: usize, template: &GeneratorConfig) -> Vec<GeneratorConfig> {
    let mut out = Vec::new();
    for (combo, (weeks, n_specialties)) in grid_combinations().into_iter().enumerate() {
        for rep in 0..replications {
            let index = (combo * replications + rep) as u64;
            out.push(GeneratorConfig {
                weeks,
                n_specialties,
                seed: derive(base_seed, Stream::Instance, index),
                ..*template
            });
        }
    }
    out
}

pub fn generate_grid(
    base_seed: u64,
    replications: usize,
    template: &GeneratorConfig,
) -> Result<Vec<(GeneratorConfig, Instance)>, GeneratorError> {
    grid_configs(base_seed, replications, template)
        .into_iter()
        .map(|c| generate(&c).map(|inst| (c, inst)))
        .collect()
}
