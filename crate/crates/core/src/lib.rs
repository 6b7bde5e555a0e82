//! Operating-room planning with pooled ICU and ward beds, modelled as a
//! two-stage stochastic program.
//!
//! The first stage assigns surgeries to (room, day) blocks, decides which
//! blocks open and for which specialty, and reserves non-shared downstream
//! beds per specialty. The second stage, once durations and lengths of stay
//! are revealed, hands out the shared bed pool day by day, buys surge
//! capacity for whatever is left over and pays for operating-room overtime.
//!
//! Module map:
//!
//! * [`domain`]: instances, solutions, validation and first-stage cost.
//! * [`sampling`]: seeded scenario generation and JSON-lines bundles.
//! * [`generator`]: random benchmark instances.
//! * [`evaluator`]: closed-form optimal recourse for a fixed first stage.
//! * [`fixtures`]: small random instances for tests and benchmarks.
//! * [`milp`]: extensive-form model, solver backends and an enumeration oracle.
//! * [`saa`]: sample average approximation bounds, gap and VSS.
//! * [`analysis`]: pooling-policy comparison, sensitivity sweeps and
//!   occupancy series.

pub mod analysis;
pub mod domain;
pub mod evaluator;
pub mod fixtures;
pub mod generator;
pub mod milp;
pub mod saa;
pub mod sampling;
pub mod seed;
pub mod stats;

pub use domain::{
    Assignment, BlockBounds, ConstraintTag, CostBreakdown, Downstream, FirstStageSolution,
    Instance, Patient, PerDownstream, SpecialtyProfile, UnitDayTable, ValidationError, Violation,
};
pub use evaluator::{EvalError, SecondStageOutcome, SpecialtyOrder};
pub use generator::{BedRule, GeneratorConfig};
pub use milp::{MilpModel, SolveLimits, SolveStatus, SolverBackend};
pub use saa::{SaaConfig, SaaReport};
pub use sampling::{CarryoverMode, SamplerConfig, Scenario, ScenarioSampler};
