//! Seeded Monte Carlo draws of surgery durations, lengths of stay and
//! carried-over bed occupancy.

use crate::domain::{Downstream, Instance, Patient, PerDownstream, UnitDayTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{self, BufRead, Write};

/// Surgery-duration standard deviation as a fraction of the mean.
pub const DURATION_CV: f64 = 1.0 / 6.0;

/// Occupancy left over from before the horizon.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CarryoverMode {
    #[default]
    Zero,
    /// Each specialty starts with `fraction` of its share of the non-shared
    /// stock occupied, decaying by [`CARRYOVER_DECAY`] per day.
    Synthetic { fraction: f64 },
}

/// Daily survival factor of synthetic carry-over patients.
pub const CARRYOVER_DECAY: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Half-width of the duration window in standard deviations.
    pub truncation_sigmas: f64,
    /// Fraction of the total length of stay spent in the ICU.
    pub icu_share: f64,
    pub carryover: CarryoverMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            truncation_sigmas: 3.0,
            icu_share: 0.4,
            carryover: CarryoverMode::Zero,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SamplerError {
    #[error("truncation_sigmas must be positive, got {0}")]
    Truncation(f64),
    #[error("icu_share must lie in [0, 1], got {0}")]
    IcuShare(f64),
    #[error("carry-over fraction must lie in [0, 1], got {0}")]
    CarryoverFraction(f64),
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<(), SamplerError> {
        if !(self.truncation_sigmas > 0.0) {
            return Err(SamplerError::Truncation(self.truncation_sigmas));
        }
        if !(0.0..=1.0).contains(&self.icu_share) {
            return Err(SamplerError::IcuShare(self.icu_share));
        }
        if let CarryoverMode::Synthetic { fraction } = self.carryover {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(SamplerError::CarryoverFraction(fraction));
            }
        }
        Ok(())
    }
}

/// Bounds of the truncated duration distribution of `patient`. The upper end
/// never exceeds `max_duration`.
pub fn duration_bounds(patient: &Patient, truncation_sigmas: f64) -> (f64, f64) {
    let mu = patient.mean_duration;
    let half = truncation_sigmas * DURATION_CV * mu;
    ((mu - half).max(0.0), (mu + half).min(patient.max_duration))
}

/// One surgery duration from `N(mu, mu/6)` restricted to `mu +/- k sigma` by
/// rejection.
pub fn sample_duration<R: Rng + ?Sized>(patient: &Patient, truncation_sigmas: f64, rng: &mut R) -> f64 {
    let mu = patient.mean_duration;
    let sigma = DURATION_CV * mu;
    let (lo, hi) = duration_bounds(patient, truncation_sigmas);
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() > truncation_sigmas {
            continue;
        }
        let t = mu + sigma * z;
        if t > 0.0 && t >= lo && t <= hi {
            return t;
        }
    }
}

/// Splits a whole number of days into ICU and ward days.
pub fn split_los(total_days: u32, icu_share: f64) -> PerDownstream<u32> {
    let icu = ((icu_share * total_days as f64).round() as u32).min(total_days);
    PerDownstream::new(icu, total_days - icu)
}

/// Total length of stay drawn from `N(mu, sigma)`, clamped at zero, rounded
/// to whole days and split between ICU and ward.
pub fn sample_los<R: Rng + ?Sized>(patient: &Patient, icu_share: f64, rng: &mut R) -> PerDownstream<u32> {
    let z: f64 = rng.sample(StandardNormal);
    let total = (patient.mean_los_total + patient.sd_los * z).max(0.0).round();
    split_los(total as u32, icu_share)
}

/// One realisation of all uncertain data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Surgery minutes per patient.
    pub durations: Vec<f64>,
    /// Whole days per patient and downstream unit.
    pub los: Vec<PerDownstream<u32>>,
    /// Beds already occupied per (specialty, unit, day); `None` means zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carryover: Option<UnitDayTable<u32>>,
}

impl Scenario {
    /// Carried-over occupancy of a cell.
    #[inline]
    pub fn carryover_at(&self, specialty: usize, unit: Downstream, day: usize) -> u32 {
        self.carryover
            .as_ref()
            .map_or(0, |t| t.get(specialty, unit, day))
    }

    pub fn patient_count(&self) -> usize {
        self.durations.len()
    }

    /// Scenario of per-patient means over `bundle`; lengths of stay are
    /// averaged per unit and rounded to whole days, carry-over per cell.
    pub fn mean_of(bundle: &[Scenario]) -> Option<Scenario> {
        let first = bundle.first()?;
        let n = bundle.len() as f64;
        let patients = first.patient_count();
        let durations = (0..patients)
            .map(|i| crate::stats::pairwise_sum(&bundle.iter().map(|s| s.durations[i]).collect::<Vec<_>>()) / n)
            .collect();
        let los = (0..patients)
            .map(|i| {
                PerDownstream::splat(0u32).map(|unit, _| {
                    let total: u64 = bundle.iter().map(|s| s.los[i][unit] as u64).sum();
                    (total as f64 / n).round() as u32
                })
            })
            .collect();
        let carryover = if bundle.iter().all(|s| s.carryover.is_none()) {
            None
        } else {
            let (specs, days) = bundle
                .iter()
                .find_map(|s| s.carryover.as_ref().map(|t| (t.specialties(), t.days())))
                .expect("some scenario has carry-over");
            let mut table = UnitDayTable::zeros(specs, days);
            for s in 0..specs {
                for unit in Downstream::ALL {
                    for d in 0..days {
                        let total: u64 = bundle.iter().map(|sc| sc.carryover_at(s, unit, d) as u64).sum();
                        table.set(s, unit, d, (total as f64 / n).round() as u32);
                    }
                }
            }
            Some(table)
        };
        Some(Scenario {
            durations,
            los,
            carryover,
        })
    }
}

/// Deterministic carry-over table for [`CarryoverMode::Synthetic`].
///
/// Specialty `s` receives the non-shared stock in proportion to the expected
/// bed-days of its patients.
pub fn synthetic_carryover(instance: &Instance, fraction: f64) -> UnitDayTable<u32> {
    let n_spec = instance.specialty_count();
    let days = instance.horizon_days;
    let mut demand = vec![0.0; n_spec];
    for p in &instance.patients {
        demand[p.specialty] += p.mean_los_total;
    }
    let total: f64 = demand.iter().sum();
    let weights: Vec<f64> = if total > 0.0 {
        demand.iter().map(|d| d / total).collect()
    } else {
        vec![1.0 / n_spec as f64; n_spec]
    };
    let mut table = UnitDayTable::zeros(n_spec, days);
    for unit in Downstream::ALL {
        let stock = instance.nonshared_capacity(unit) as f64;
        for (s, w) in weights.iter().enumerate() {
            let start = fraction * w * stock;
            for d in 0..days {
                let beds = (start * CARRYOVER_DECAY.powi(d as i32)).round() as u32;
                table.set(s, unit, d, beds);
            }
        }
    }
    table
}

/// A seeded scenario stream.
#[derive(Clone, Debug)]
pub struct ScenarioSampler {
    config: SamplerConfig,
    rng: ChaCha8Rng,
}

impl ScenarioSampler {
    pub fn new(config: SamplerConfig) -> Result<Self, SamplerError> {
        config.check()?;
        Ok(Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Draws every patient's duration, then its length of stay, in patient
    /// order.
    pub fn sample(&mut self, instance: &Instance) -> Scenario {
        let mut durations = Vec::with_capacity(instance.patients.len());
        let mut los = Vec::with_capacity(instance.patients.len());
        for p in &instance.patients {
            durations.push(sample_duration(p, self.config.truncation_sigmas, &mut self.rng));
            los.push(sample_los(p, self.config.icu_share, &mut self.rng));
        }
        let carryover = match self.config.carryover {
            CarryoverMode::Zero => None,
            CarryoverMode::Synthetic { fraction } => Some(synthetic_carryover(instance, fraction)),
        };
        Scenario {
            durations,
            los,
            carryover,
        }
    }

    pub fn bundle(&mut self, instance: &Instance, count: usize) -> Vec<Scenario> {
        (0..count).map(|_| self.sample(instance)).collect()
    }
}

/// Convenience: `count` scenarios from a fresh stream.
pub fn sample_bundle(instance: &Instance, config: SamplerConfig, count: usize) -> Result<Vec<Scenario>, SamplerError> {
    Ok(ScenarioSampler::new(config)?.bundle(instance, count))
}

/// Writes one compact JSON document per line.
pub fn write_jsonl<W: Write>(mut out: W, bundle: &[Scenario]) -> io::Result<()> {
    for scenario in bundle {
        serde_json::to_writer(&mut out, scenario)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl<R: BufRead>(input: R) -> io::Result<Vec<Scenario>> {
    let mut bundle = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        bundle.push(serde_json::from_str(&line)?);
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures;
    use proptest::prelude::*;

    fn general() -> Patient {
        let mut p = fixtures::patient(0, 0, 0, 3, 1);
        p.mean_duration = 150.95;
        p.max_duration = 1.5 * 150.95;
        p
    }

    #[test]
    fn truncation_bounds_for_general_mean() {
        let (lo, hi) = duration_bounds(&general(), 3.0);
        assert!((lo - 75.475).abs() < 1e-9);
        assert!((hi - 226.425).abs() < 1e-9);
    }

    #[test]
    fn los_split_examples() {
        assert_eq!(split_los(5, 0.4), PerDownstream::new(2, 3));
        assert_eq!(split_los(0, 0.4), PerDownstream::new(0, 0));
        assert_eq!(split_los(1, 0.4), PerDownstream::new(0, 1));
    }

    #[test]
    fn equal_seeds_give_identical_streams() {
        let inst = fixtures::instance(5, 2, (0..6).map(|i| fixtures::patient(i, i % 2, 0, 4, 1)).collect());
        let a = sample_bundle(&inst, SamplerConfig::with_seed(42), 3).unwrap();
        let b = sample_bundle(&inst, SamplerConfig::with_seed(42), 3).unwrap();
        assert_eq!(a, b);
        let c = sample_bundle(&inst, SamplerConfig::with_seed(43), 3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn scenario_shape_and_zero_carryover() {
        let inst = fixtures::instance(5, 2, (0..120).map(|i| fixtures::patient(i, i % 2, 0, 4, 1)).collect());
        let s = ScenarioSampler::new(SamplerConfig::with_seed(1)).unwrap().sample(&inst);
        assert_eq!(s.durations.len(), 120);
        assert_eq!(s.los.len(), 120);
        assert!(s.carryover.is_none());
        assert_eq!(s.carryover_at(1, Downstream::Ward, 4), 0);
    }

    #[test]
    fn synthetic_carryover_decays() {
        let mut inst = fixtures::instance(6, 2, (0..4).map(|i| fixtures::patient(i, i % 2, 0, 4, 1)).collect());
        inst.bed_stock = PerDownstream::new(20, 40);
        let config = SamplerConfig {
            carryover: CarryoverMode::Synthetic { fraction: 0.5 },
            ..SamplerConfig::with_seed(3)
        };
        let s = ScenarioSampler::new(config).unwrap().sample(&inst);
        let t = s.carryover.unwrap();
        // Equal demand weights; non-shared stock is 10 ICU and 20 ward beds.
        assert_eq!(t.get(0, Downstream::Icu, 0), 3);
        assert_eq!(t.get(0, Downstream::Ward, 0), 5);
        for s in 0..2 {
            for unit in Downstream::ALL {
                for d in 1..6 {
                    assert!(t.get(s, unit, d) <= t.get(s, unit, d - 1));
                }
            }
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = SamplerConfig {
            icu_share: 1.5,
            ..SamplerConfig::default()
        };
        assert_eq!(bad.check(), Err(SamplerError::IcuShare(1.5)));
        let bad = SamplerConfig {
            truncation_sigmas: 0.0,
            ..SamplerConfig::default()
        };
        assert!(ScenarioSampler::new(bad).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let inst = fixtures::instance(5, 2, (0..5).map(|i| fixtures::patient(i, i % 2, 0, 4, 1)).collect());
        let config = SamplerConfig {
            carryover: CarryoverMode::Synthetic { fraction: 0.3 },
            ..SamplerConfig::with_seed(9)
        };
        let bundle = sample_bundle(&inst, config, 4).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &bundle).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 4);
        assert_eq!(read_jsonl(&buf[..]).unwrap(), bundle);
    }

    #[test]
    fn mean_scenario_of_two() {
        let a = Scenario {
            durations: vec![100.0],
            los: vec![PerDownstream::new(2, 3)],
            carryover: None,
        };
        let b = Scenario {
            durations: vec![140.0],
            los: vec![PerDownstream::new(3, 6)],
            carryover: None,
        };
        let m = Scenario::mean_of(&[a.clone(), b]).unwrap();
        assert_eq!(m.durations, vec![120.0]);
        assert_eq!(m.los, vec![PerDownstream::new(3, 5)]);
        assert_eq!(Scenario::mean_of(&[a.clone(), a.clone()]).unwrap(), a);
    }

    #[test]
    fn total_los_mean_matches_truncated_normal() {
        // The clamp at zero shifts the mean up; compare against the exact
        // mean of max(N(mu, sigma), 0) before rounding.
        let mut p = fixtures::patient(0, 0, 0, 3, 1);
        p.mean_los_total = 7.75;
        p.sd_los = 4.48;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let sum: u64 = (0..n)
            .map(|_| {
                let l = sample_los(&p, 0.4, &mut rng);
                (l.icu + l.ward) as u64
            })
            .sum();
        let empirical = sum as f64 / n as f64;
        let a = p.mean_los_total / p.sd_los;
        let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let cdf = 0.5 * (1.0 + erf(a / std::f64::consts::SQRT_2));
        let clamped_mean = p.mean_los_total * cdf + p.sd_los * phi;
        assert!((empirical - clamped_mean).abs() / clamped_mean < 0.03, "{empirical} vs {clamped_mean}");
        assert!((empirical - p.mean_los_total).abs() / p.mean_los_total < 0.03);
    }

    // Abramowitz-Stegun 7.1.26, absolute error below 1.5e-7.
    fn erf(x: f64) -> f64 {
        let t = 1.0 / (1.0 + 0.327_591_1 * x.abs());
        let y = 1.0
            - (((((1.061_405_429 * t - 1.453_152_027) * t) + 1.421_413_741) * t - 0.284_496_736) * t + 0.254_829_592)
                * t
                * (-x * x).exp();
        y.copysign(x)
    }

    proptest! {
        #[test]
        fn durations_stay_in_window(mu in 10.0f64..400.0, seed in any::<u64>()) {
            let mut p = general();
            p.mean_duration = mu;
            p.max_duration = 1.5 * mu;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..200 {
                let t = sample_duration(&p, 3.0, &mut rng);
                prop_assert!(t >= 0.5 * mu - 1e-9 && t <= p.max_duration);
                prop_assert!(t > 0.0);
            }
        }

        #[test]
        fn los_split_loses_no_days(mu in 0.0f64..20.0, sd in 0.1f64..6.0, seed in any::<u64>()) {
            let mut p = general();
            p.mean_los_total = mu;
            p.sd_los = sd;
            let mut a = ChaCha8Rng::seed_from_u64(seed);
            let mut b = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                let l = sample_los(&p, 0.4, &mut a);
                let z: f64 = rand::Rng::sample(&mut b, StandardNormal);
                let total = (mu + sd * z).max(0.0).round() as u32;
                prop_assert_eq!(l.icu + l.ward, total);
            }
        }
    }
}
