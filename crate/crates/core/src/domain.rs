//! Problem data, first-stage decisions and the first-stage cost model.
//!
//! Units: money in dollars, surgery time in minutes, lengths of stay in whole
//! days. Days are zero-based: day `0` is the first day of the horizon and the
//! last operable day is `horizon_days - 1`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Index, IndexMut};

/// Version tag written into every serialized instance and solution.
pub const SCHEMA_VERSION: u32 = 1;

/// Absolute slack used when comparing accumulated surgery minutes against a
/// room's capacity.
pub const MINUTES_EPS: f64 = 1e-6;

/// Post-surgical recovery unit. Patients visit the ICU first, then the ward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Downstream {
    Icu,
    Ward,
}

impl Downstream {
    /// Units in visiting order.
    pub const ALL: [Downstream; 2] = [Downstream::Icu, Downstream::Ward];
    pub const COUNT: usize = 2;

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Downstream::Icu => 0,
            Downstream::Ward => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Downstream::Icu => "icu",
            Downstream::Ward => "ward",
        }
    }
}

impl fmt::Display for Downstream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One value per downstream unit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PerDownstream<T> {
    pub icu: T,
    pub ward: T,
}

impl<T> PerDownstream<T> {
    pub const fn new(icu: T, ward: T) -> Self {
        Self { icu, ward }
    }

    pub fn map<U>(self, mut f: impl FnMut(Downstream, T) -> U) -> PerDownstream<U> {
        PerDownstream {
            icu: f(Downstream::Icu, self.icu),
            ward: f(Downstream::Ward, self.ward),
        }
    }
}

impl<T: Copy> PerDownstream<T> {
    pub const fn splat(value: T) -> Self {
        Self {
            icu: value,
            ward: value,
        }
    }
}

impl<T> Index<Downstream> for PerDownstream<T> {
    type Output = T;

    #[inline]
    fn index(&self, unit: Downstream) -> &T {
        match unit {
            Downstream::Icu => &self.icu,
            Downstream::Ward => &self.ward,
        }
    }
}

impl<T> IndexMut<Downstream> for PerDownstream<T> {
    #[inline]
    fn index_mut(&mut self, unit: Downstream) -> &mut T {
        match unit {
            Downstream::Icu => &mut self.icu,
            Downstream::Ward => &mut self.ward,
        }
    }
}

/// Dense table indexed by (specialty, downstream unit, day).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitDayTable<T> {
    specialties: usize,
    days: usize,
    values: Vec<T>,
}

impl<T: Copy + Default> UnitDayTable<T> {
    pub fn zeros(specialties: usize, days: usize) -> Self {
        Self {
            specialties,
            days,
            values: vec![T::default(); specialties * Downstream::COUNT * days],
        }
    }
}

impl<T: Copy> UnitDayTable<T> {
    #[inline]
    fn offset(&self, specialty: usize, unit: Downstream, day: usize) -> usize {
        debug_assert!(specialty < self.specialties && day < self.days);
        (specialty * Downstream::COUNT + unit.index()) * self.days + day
    }

    #[inline]
    pub fn get(&self, specialty: usize, unit: Downstream, day: usize) -> T {
        self.values[self.offset(specialty, unit, day)]
    }

    #[inline]
    pub fn set(&mut self, specialty: usize, unit: Downstream, day: usize, value: T) {
        let at = self.offset(specialty, unit, day);
        self.values[at] = value;
    }

    #[inline]
    pub fn get_mut(&mut self, specialty: usize, unit: Downstream, day: usize) -> &mut T {
        let at = self.offset(specialty, unit, day);
        &mut self.values[at]
    }

    pub fn specialties(&self) -> usize {
        self.specialties
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn has_shape(&self, specialties: usize, days: usize) -> bool {
        self.specialties == specialties
            && self.days == days
            && self.values.len() == specialties * Downstream::COUNT * days
    }
}

/// Per-specialty statistics used to draw patients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecialtyProfile {
    pub id: usize,
    pub name: String,
    /// Mean surgery duration, minutes.
    pub mean_duration: f64,
    /// Standard deviation of the surgery duration, minutes.
    pub sd_duration: f64,
    pub mean_los_ward: f64,
    pub mean_los_icu: f64,
    /// Standard deviation of the total length of stay, days.
    pub sd_los: f64,
}

impl SpecialtyProfile {
    /// Expected total length of stay over ICU and ward.
    pub fn mean_los_total(&self) -> f64 {
        self.mean_los_ward + self.mean_los_icu
    }
}

/// An elective surgery request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patient {
    pub id: usize,
    pub specialty: usize,
    pub earliest_day: usize,
    /// Deadline; may lie beyond the horizon, in which case the patient is
    /// optional and may be postponed.
    pub latest_day: usize,
    /// Urgency level in `1..=5`.
    pub priority: u8,
    pub mean_duration: f64,
    /// Largest duration any scenario may realise.
    pub max_duration: f64,
    pub mean_los_total: f64,
    pub sd_los: f64,
    /// Waiting cost per day between `earliest_day` and the surgery day.
    pub waiting_cost_rate: f64,
    pub postpone_cost: f64,
    pub eligible_rooms: Vec<usize>,
}

impl Patient {
    /// Deadline falls inside the horizon.
    #[inline]
    pub fn is_mandatory(&self, horizon_days: usize) -> bool {
        self.latest_day < horizon_days
    }

    /// Days on which the surgery may take place inside the horizon. Empty when
    /// the window opens after the horizon ends.
    pub fn operable_days(&self, horizon_days: usize) -> std::ops::Range<usize> {
        let end = self.latest_day.min(horizon_days.saturating_sub(1)) + 1;
        self.earliest_day..end.max(self.earliest_day)
    }

    pub fn can_use_room(&self, room: usize) -> bool {
        self.eligible_rooms.contains(&room)
    }

    /// Cost of operating on `day`; linear in the days waited past the
    /// earliest day.
    #[inline]
    pub fn waiting_cost(&self, day: usize) -> f64 {
        self.waiting_cost_rate * (day as f64 - self.earliest_day as f64)
    }
}

/// Lower and upper bound on the number of blocks a specialty receives over
/// the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockBounds {
    pub min: usize,
    pub max: usize,
}

/// Static problem data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub schema_version: u32,
    pub horizon_days: usize,
    pub rooms: usize,
    pub specialties: Vec<SpecialtyProfile>,
    pub patients: Vec<Patient>,
    /// Regular time per room and day, minutes.
    pub regular_time: f64,
    /// Overtime cap per room and day, minutes.
    pub max_overtime: f64,
    /// Total beds per unit.
    pub bed_stock: PerDownstream<u32>,
    /// Fraction of each unit's beds that is pooled across specialties.
    pub shared_fraction: PerDownstream<f64>,
    pub or_open_cost: f64,
    /// Overtime cost per minute.
    pub overtime_cost_rate: f64,
    /// Cost of one surge patient-day per unit.
    pub surge_cost: PerDownstream<f64>,
    pub block_bounds: Vec<BlockBounds>,
    /// Free-form record of how the instance was produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum InstanceError {
    #[error("instance schema version {0} is not supported (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("instance needs at least one day, one room and one specialty")]
    Empty,
    #[error("specialty {0}: means and standard deviations must be strictly positive")]
    SpecialtyStats(usize),
    #[error("patient {0}: {1}")]
    Patient(usize, String),
    #[error("shared fraction for {0} must lie in [0, 1]")]
    SharedFraction(Downstream),
    #[error("block bounds: {0}")]
    BlockBounds(String),
    #[error("{0} must be non-negative")]
    Negative(&'static str),
}

/// Rounds `x` up, treating values within 1e-9 of an integer as that integer.
pub(crate) fn robust_ceil(x: f64) -> u32 {
    (x - 1e-9).ceil().max(0.0) as u32
}

/// Rounds `x` down, treating values within 1e-9 of an integer as that integer.
pub(crate) fn robust_floor(x: f64) -> u32 {
    (x + 1e-9).floor().max(0.0) as u32
}

impl Instance {
    pub fn specialty_count(&self) -> usize {
        self.specialties.len()
    }

    pub fn room_days(&self) -> usize {
        self.rooms * self.horizon_days
    }

    /// Beds of `unit` that can be reserved for individual specialties:
    /// `ceil((1 - alpha) * M)`.
    pub fn nonshared_capacity(&self, unit: Downstream) -> u32 {
        let stock = self.bed_stock[unit] as f64;
        robust_ceil((1.0 - self.shared_fraction[unit]) * stock)
    }

    /// Beds of `unit` pooled across specialties: `floor(alpha * M)`.
    pub fn shared_capacity(&self, unit: Downstream) -> u32 {
        let stock = self.bed_stock[unit] as f64;
        robust_floor(self.shared_fraction[unit] * stock)
    }

    /// Daily capacity of a room including the overtime cap.
    pub fn room_capacity(&self) -> f64 {
        self.regular_time + self.max_overtime
    }

    pub fn is_mandatory(&self, patient: usize) -> bool {
        self.patients[patient].is_mandatory(self.horizon_days)
    }

    pub fn mandatory_count(&self) -> usize {
        (0..self.patients.len()).filter(|&i| self.is_mandatory(i)).count()
    }

    /// Checks the structural invariants of the data.
    pub fn check(&self) -> Result<(), InstanceError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(InstanceError::SchemaVersion(self.schema_version));
        }
        if self.horizon_days == 0 || self.rooms == 0 || self.specialties.is_empty() {
            return Err(InstanceError::Empty);
        }
        for (s, profile) in self.specialties.iter().enumerate() {
            let stats = [
                profile.mean_duration,
                profile.sd_duration,
                profile.mean_los_ward,
                profile.mean_los_icu,
                profile.sd_los,
            ];
            if stats.iter().any(|v| !(*v > 0.0)) {
                return Err(InstanceError::SpecialtyStats(s));
            }
        }
        for (i, p) in self.patients.iter().enumerate() {
            let fail = |msg: &str| Err(InstanceError::Patient(i, msg.to_string()));
            if p.id != i {
                return fail("id does not match its position");
            }
            if p.specialty >= self.specialties.len() {
                return fail("unknown specialty");
            }
            if p.earliest_day > p.latest_day {
                return fail("earliest day after latest day");
            }
            if p.earliest_day >= self.horizon_days && p.is_mandatory(self.horizon_days) {
                return fail("mandatory patient without an operable day");
            }
            if !(p.mean_duration > 0.0) || p.max_duration < p.mean_duration {
                return fail("durations must satisfy 0 < mean <= max");
            }
            if p.mean_los_total < 0.0 || p.sd_los < 0.0 {
                return fail("negative length-of-stay statistics");
            }
            if p.eligible_rooms.is_empty() || p.eligible_rooms.iter().any(|&r| r >= self.rooms) {
                return fail("eligible rooms must be a non-empty subset of the rooms");
            }
        }
        for unit in Downstream::ALL {
            let alpha = self.shared_fraction[unit];
            if !(0.0..=1.0).contains(&alpha) {
                return Err(InstanceError::SharedFraction(unit));
            }
            debug_assert!(
                self.nonshared_capacity(unit) + self.shared_capacity(unit) >= self.bed_stock[unit]
            );
        }
        if self.block_bounds.len() != self.specialties.len() {
            return Err(InstanceError::BlockBounds(
                "one entry per specialty required".to_string(),
            ));
        }
        let min_total: usize = self.block_bounds.iter().map(|b| b.min).sum();
        if min_total > self.room_days() {
            return Err(InstanceError::BlockBounds(format!(
                "minimum blocks {min_total} exceed the {} available room-days",
                self.room_days()
            )));
        }
        let costs = [
            ("regular_time", self.regular_time),
            ("max_overtime", self.max_overtime),
            ("or_open_cost", self.or_open_cost),
            ("overtime_cost_rate", self.overtime_cost_rate),
            ("surge_cost.icu", self.surge_cost.icu),
            ("surge_cost.ward", self.surge_cost.ward),
        ];
        for (name, value) in costs {
            if value < 0.0 {
                return Err(InstanceError::Negative(name));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Where a surgery ends up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Assignment {
    #[default]
    Unassigned,
    Postponed,
    Scheduled {
        room: usize,
        day: usize,
    },
}

/// First-stage decisions: surgery placement, block openings with their
/// specialty, and the non-shared bed reservation per specialty.
///
/// Room-day grids are stored row-major by room: index `room * days + day`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirstStageSolution {
    pub schema_version: u32,
    pub rooms: usize,
    pub days: usize,
    /// One entry per patient; missing trailing entries count as unassigned.
    pub assignment: Vec<Assignment>,
    pub room_open: Vec<bool>,
    pub block_specialty: Vec<Option<usize>>,
    /// Non-shared beds per specialty.
    pub bed_split: Vec<PerDownstream<u32>>,
}

impl FirstStageSolution {
    /// Nothing scheduled, nothing open, no reserved beds.
    pub fn empty(instance: &Instance) -> Self {
        let cells = instance.room_days();
        Self {
            schema_version: SCHEMA_VERSION,
            rooms: instance.rooms,
            days: instance.horizon_days,
            assignment: vec![Assignment::Unassigned; instance.patients.len()],
            room_open: vec![false; cells],
            block_specialty: vec![None; cells],
            bed_split: vec![PerDownstream::splat(0); instance.specialties.len()],
        }
    }

    /// Builds a solution from placements alone: every block holding a
    /// surgery is opened for that surgery's specialty. Conflicting
    /// specialties in one block are left for [`validate`] to report.
    pub fn from_assignments(
        instance: &Instance,
        assignment: Vec<Assignment>,
        bed_split: Vec<PerDownstream<u32>>,
    ) -> Self {
        let mut sol = Self::empty(instance);
        for (i, a) in assignment.iter().enumerate() {
            if let Assignment::Scheduled { room, day } = *a {
                if room < sol.rooms && day < sol.days && i < instance.patients.len() {
                    let at = sol.cell(room, day);
                    if sol.block_specialty[at].is_none() {
                        sol.room_open[at] = true;
                        sol.block_specialty[at] = Some(instance.patients[i].specialty);
                    }
                }
            }
        }
        sol.assignment = assignment;
        sol.bed_split = bed_split;
        sol
    }

    #[inline]
    pub fn cell(&self, room: usize, day: usize) -> usize {
        room * self.days + day
    }

    pub fn assignment_of(&self, patient: usize) -> Assignment {
        self.assignment.get(patient).copied().unwrap_or_default()
    }

    pub fn open_block(&mut self, room: usize, day: usize, specialty: usize) {
        let at = self.cell(room, day);
        self.room_open[at] = true;
        self.block_specialty[at] = Some(specialty);
    }

    pub fn open_blocks(&self) -> usize {
        self.room_open.iter().filter(|&&o| o).count()
    }

    /// Patients scheduled in each room-day cell.
    pub fn patients_by_cell(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.rooms * self.days];
        for (i, a) in self.assignment.iter().enumerate() {
            if let Assignment::Scheduled { room, day } = *a {
                if room < self.rooms && day < self.days {
                    cells[self.cell(room, day)].push(i);
                }
            }
        }
        cells
    }

    pub fn postponed_count(&self) -> usize {
        self.assignment
            .iter()
            .filter(|a| matches!(a, Assignment::Postponed))
            .count()
    }

    /// Total days waited by scheduled patients.
    pub fn waiting_days(&self, instance: &Instance) -> i64 {
        self.assignment
            .iter()
            .zip(&instance.patients)
            .filter_map(|(a, p)| match *a {
                Assignment::Scheduled { day, .. } => Some(day as i64 - p.earliest_day as i64),
                _ => None,
            })
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Constraint families of the planning model. Each family carries the row
/// number it has in the standard numbering of the formulation, where one
/// exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintTag {
    /// Every mandatory surgery is scheduled exactly once.
    MandatoryAssignment,
    /// Every optional surgery is scheduled once or postponed.
    OptionalAssignment,
    /// An open block has exactly one specialty.
    BlockOpening,
    /// A surgery only goes to a block of its own specialty.
    BlockSpecialty,
    /// Blocks per specialty stay within their bounds.
    BlockBounds,
    /// Reserved beds fit in the non-shared part of each unit.
    NonSharedBeds,
    /// Patients present per specialty, unit and day are covered by reserved,
    /// shared or surge beds.
    BedCoverage,
    /// Shared beds handed out per unit and day fit in the pool.
    SharedPool,
    /// Surgery minutes per block fit in regular time plus overtime.
    RoomTime,
    /// Overtime stays below its cap.
    OvertimeCap,
    /// Worst-case surgery minutes per block fit in regular time plus the
    /// overtime cap, so every scenario has a feasible recourse.
    WorstCaseTime,
    /// Surgery day outside the time window or room not eligible.
    Domain,
    /// Malformed solution (wrong grid shape, unknown indices).
    Shape,
}

impl ConstraintTag {
    pub const MODEL_ROWS: [ConstraintTag; 11] = [
        ConstraintTag::MandatoryAssignment,
        ConstraintTag::OptionalAssignment,
        ConstraintTag::BlockOpening,
        ConstraintTag::BlockSpecialty,
        ConstraintTag::BlockBounds,
        ConstraintTag::NonSharedBeds,
        ConstraintTag::BedCoverage,
        ConstraintTag::SharedPool,
        ConstraintTag::RoomTime,
        ConstraintTag::OvertimeCap,
        ConstraintTag::WorstCaseTime,
    ];

    /// Row number in the standard numbering of the formulation.
    pub fn number(self) -> Option<u8> {
        match self {
            ConstraintTag::MandatoryAssignment => Some(2),
            ConstraintTag::OptionalAssignment => Some(3),
            ConstraintTag::BlockOpening => Some(4),
            ConstraintTag::BlockSpecialty => Some(5),
            ConstraintTag::BlockBounds => Some(6),
            ConstraintTag::NonSharedBeds => Some(7),
            ConstraintTag::BedCoverage => Some(14),
            ConstraintTag::SharedPool => Some(15),
            ConstraintTag::RoomTime => Some(16),
            ConstraintTag::OvertimeCap => Some(17),
            ConstraintTag::WorstCaseTime
            | ConstraintTag::Domain
            | ConstraintTag::Shape => None,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            ConstraintTag::MandatoryAssignment => "mandatory",
            ConstraintTag::OptionalAssignment => "optional",
            ConstraintTag::BlockOpening => "open",
            ConstraintTag::BlockSpecialty => "blockspec",
            ConstraintTag::BlockBounds => "blockbounds",
            ConstraintTag::NonSharedBeds => "nonshared",
            ConstraintTag::BedCoverage => "beds",
            ConstraintTag::SharedPool => "pool",
            ConstraintTag::RoomTime => "time",
            ConstraintTag::OvertimeCap => "otcap",
            ConstraintTag::WorstCaseTime => "guard",
            ConstraintTag::Domain => "domain",
            ConstraintTag::Shape => "shape",
        }
    }
}

impl ConstraintTag {
    fn describe(self) -> &'static str {
        match self {
            ConstraintTag::MandatoryAssignment => "mandatory assignment",
            ConstraintTag::OptionalAssignment => "optional assignment or postponement",
            ConstraintTag::BlockOpening => "one specialty per open block",
            ConstraintTag::BlockSpecialty => "block specialty match",
            ConstraintTag::BlockBounds => "blocks per specialty",
            ConstraintTag::NonSharedBeds => "non-shared bed split",
            ConstraintTag::BedCoverage => "bed coverage",
            ConstraintTag::SharedPool => "shared pool capacity",
            ConstraintTag::RoomTime => "room time",
            ConstraintTag::OvertimeCap => "overtime cap",
            ConstraintTag::WorstCaseTime => "worst-case time guard",
            ConstraintTag::Domain => "D_i/R_i domain",
            ConstraintTag::Shape => "solution shape",
        }
    }
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.number() {
            Some(n) => write!(f, "({n}) {}", self.describe()),
            None => f.write_str(self.describe()),
        }
    }
}

/// A violated first-stage requirement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintTag,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.constraint, self.detail)
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("infeasible first-stage solution: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

/// Lists every violated first-stage requirement; empty iff the solution is
/// feasible for the first-stage model including the worst-case time guard.
pub fn validate(instance: &Instance, sol: &FirstStageSolution) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |constraint, detail: String| out.push(Violation { constraint, detail });

    let cells = instance.room_days();
    let n_spec = instance.specialties.len();
    if sol.rooms != instance.rooms
        || sol.days != instance.horizon_days
        || sol.room_open.len() != cells
        || sol.block_specialty.len() != cells
    {
        push(
            ConstraintTag::Shape,
            format!(
                "grid is {}x{} with {}/{} cells, instance needs {}x{}",
                sol.rooms,
                sol.days,
                sol.room_open.len(),
                sol.block_specialty.len(),
                instance.rooms,
                instance.horizon_days
            ),
        );
        return out;
    }
    if sol.assignment.len() > instance.patients.len() {
        push(
            ConstraintTag::Shape,
            format!(
                "{} assignments for {} patients",
                sol.assignment.len(),
                instance.patients.len()
            ),
        );
    }
    if sol.bed_split.len() != n_spec {
        push(
            ConstraintTag::Shape,
            format!("bed split has {} rows for {n_spec} specialties", sol.bed_split.len()),
        );
    }

    let mut worst_minutes = vec![0.0_f64; cells];
    for (i, patient) in instance.patients.iter().enumerate() {
        let mandatory = patient.is_mandatory(instance.horizon_days);
        match sol.assignment_of(i) {
            Assignment::Unassigned if mandatory => push(
                ConstraintTag::MandatoryAssignment,
                format!("mandatory patient {i} is not scheduled"),
            ),
            Assignment::Unassigned => push(
                ConstraintTag::OptionalAssignment,
                format!("optional patient {i} is neither scheduled nor postponed"),
            ),
            Assignment::Postponed if mandatory => push(
                ConstraintTag::MandatoryAssignment,
                format!("mandatory patient {i} cannot be postponed"),
            ),
            Assignment::Postponed => {}
            Assignment::Scheduled { room, day } => {
                if room >= instance.rooms || day >= instance.horizon_days {
                    push(
                        ConstraintTag::Domain,
                        format!("patient {i} placed in nonexistent block (room {room}, day {day})"),
                    );
                    continue;
                }
                if !patient.operable_days(instance.horizon_days).contains(&day)
                    || !patient.can_use_room(room)
                {
                    push(
                        ConstraintTag::Domain,
                        format!("patient {i} may not use room {room} on day {day}"),
                    );
                }
                let at = sol.cell(room, day);
                if sol.block_specialty[at] != Some(patient.specialty) {
                    push(
                        ConstraintTag::BlockSpecialty,
                        format!(
                            "patient {i} (specialty {}) in block room {room} day {day} assigned to {:?}",
                            patient.specialty, sol.block_specialty[at]
                        ),
                    );
                }
                worst_minutes[at] += patient.max_duration;
            }
        }
    }

    let mut blocks = vec![0usize; n_spec];
    for room in 0..sol.rooms {
        for day in 0..sol.days {
            let at = sol.cell(room, day);
            match (sol.room_open[at], sol.block_specialty[at]) {
                (true, Some(s)) if s < n_spec => blocks[s] += 1,
                (true, Some(s)) => push(
                    ConstraintTag::Shape,
                    format!("block room {room} day {day} has unknown specialty {s}"),
                ),
                (false, None) => {}
                (open, spec) => push(
                    ConstraintTag::BlockOpening,
                    format!("room {room} day {day}: open={open} but specialty {spec:?}"),
                ),
            }
            if worst_minutes[at] > instance.room_capacity() + MINUTES_EPS {
                push(
                    ConstraintTag::WorstCaseTime,
                    format!(
                        "room {room} day {day}: worst-case {:.3} min exceeds {:.3}",
                        worst_minutes[at],
                        instance.room_capacity()
                    ),
                );
            }
        }
    }

    for (s, (count, bounds)) in blocks.iter().zip(&instance.block_bounds).enumerate() {
        if *count < bounds.min || *count > bounds.max {
            push(
                ConstraintTag::BlockBounds,
                format!(
                    "specialty {s} has {count} blocks, allowed [{}, {}]",
                    bounds.min, bounds.max
                ),
            );
        }
    }

    for unit in Downstream::ALL {
        let reserved: u64 = sol.bed_split.iter().map(|b| b[unit] as u64).sum();
        let cap = instance.nonshared_capacity(unit) as u64;
        if reserved > cap {
            push(
                ConstraintTag::NonSharedBeds,
                format!("{reserved} {unit} beds reserved, only {cap} non-shared"),
            );
        }
    }
    out
}

/// Cost split into the five components of the objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub waiting: f64,
    pub postponement: f64,
    pub or_fixed: f64,
    pub overtime: f64,
    pub surge: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(waiting: f64, postponement: f64, or_fixed: f64, overtime: f64, surge: f64) -> Self {
        Self {
            waiting,
            postponement,
            or_fixed,
            overtime,
            surge,
            total: waiting + postponement + or_fixed + overtime + surge,
        }
    }

    pub fn first_stage(&self) -> f64 {
        self.waiting + self.postponement + self.or_fixed
    }

    pub fn recourse(&self) -> f64 {
        self.overtime + self.surge
    }

    /// Components in reporting order: waiting, postponement, OR, overtime,
    /// surge.
    pub fn components(&self) -> [f64; 5] {
        [
            self.waiting,
            self.postponement,
            self.or_fixed,
            self.overtime,
            self.surge,
        ]
    }

    pub fn with_recourse(self, overtime: f64, surge: f64) -> Self {
        Self::new(self.waiting, self.postponement, self.or_fixed, overtime, surge)
    }
}

/// First-stage cost components of `sol` without any feasibility check.
/// Additive over disjoint partial solutions.
pub fn first_stage_breakdown(instance: &Instance, sol: &FirstStageSolution) -> CostBreakdown {
    let mut waiting = 0.0;
    let mut postponement = 0.0;
    for (a, patient) in sol.assignment.iter().zip(&instance.patients) {
        match *a {
            Assignment::Scheduled { day, .. } => waiting += patient.waiting_cost(day),
            Assignment::Postponed => postponement += patient.postpone_cost,
            Assignment::Unassigned => {}
        }
    }
    let or_fixed = instance.or_open_cost * sol.open_blocks() as f64;
    CostBreakdown::new(waiting, postponement, or_fixed, 0.0, 0.0)
}

/// Waiting plus postponement plus block-opening cost of a feasible solution.
pub fn first_stage_cost(instance: &Instance, sol: &FirstStageSolution) -> Result<f64, ValidationError> {
    let violations = validate(instance, sol);
    if !violations.is_empty() {
        return Err(ValidationError { violations });
    }
    Ok(first_stage_breakdown(instance, sol).total)
}
