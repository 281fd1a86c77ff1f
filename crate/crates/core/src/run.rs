//! The time loop shared by every model: CFL-limited steps clipped onto the
//! requested snapshot times, a running mass ledger, and phase timings.

use std::time::{Duration, Instant};

use crate::analysis::MassLedger;
use crate::error::{FlowError, Result};
use crate::grid::ScalarField;
use crate::problem::Problem;
use crate::scenario::Scenario;

/// Mass crossing the inflow (`x = 0`) and outflow (`x = 1`) boundaries per
/// unit time, positive when entering respectively leaving the domain.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BoundaryFlux {
    pub inflow: f64,
    pub outflow: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    /// Velocity reconstruction, including any pressure solve.
    pub velocity: Duration,
    /// Saturation update, including implicit pseudo-parabolic solves.
    pub transport: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverStats {
    pub steps: usize,
    pub pressure_solves: usize,
    pub pressure_iterations: usize,
    pub max_pressure_iterations: usize,
    pub helmholtz_solves: usize,
    pub helmholtz_iterations: usize,
    /// Largest `|v - V|` seen when recovering Brinkman velocities.
    pub max_brinkman_correction: f64,
}

impl SolverStats {
    pub(crate) fn record_pressure(&mut self, iterations: usize) {
        self.pressure_solves += 1;
        self.pressure_iterations += iterations;
        self.max_pressure_iterations = self.max_pressure_iterations.max(iterations);
    }

    pub(crate) fn record_helmholtz(&mut self, iterations: usize) {
        self.helmholtz_solves += 1;
        self.helmholtz_iterations += iterations;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: ScalarField,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub scenario: Scenario,
    pub snapshots: Vec<Snapshot>,
    pub ledger: MassLedger,
    pub timings: Timings,
    pub stats: SolverStats,
}

impl RunResult {
    /// The state at the end time.
    pub fn final_field(&self) -> &ScalarField {
        &self.snapshots.last().expect("a run always stores its end state").field
    }

    pub fn snapshot_at(&self, time: f64) -> Option<&ScalarField> {
        self.snapshots.iter().find(|s| s.time == time).map(|s| &s.field)
    }
}

/// One model's explicit-in-time saturation update.
pub trait Stepper {
    fn saturation(&self) -> &[f64];

    /// Computes velocities for the current state and returns the largest
    /// stable step.
    fn prepare(&mut self, stats: &mut SolverStats) -> Result<f64>;

    /// Advances by `dt` using the velocities from the last [`Stepper::prepare`].
    fn advance(&mut self, dt: f64, stats: &mut SolverStats) -> Result<BoundaryFlux>;
}

/// Sorted, deduplicated snapshot times with the end time appended.
pub fn snapshot_schedule(requested: &[f64], end_time: f64) -> Result<Vec<f64>> {
    let mut times: Vec<f64> = requested.to_vec();
    if let Some(&t) = times.iter().find(|&&t| !(0.0..=end_time).contains(&t)) {
        return Err(FlowError::Validation {
            field: "snapshots".into(),
            message: format!("time {t} is outside [0, {end_time}]"),
        });
    }
    times.push(end_time);
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    Ok(times)
}

pub(crate) fn integrate(
    scenario: &Scenario,
    problem: &Problem,
    stepper: &mut impl Stepper,
) -> Result<RunResult> {
    let started = Instant::now();
    let grid = problem.grid;
    let schedule = snapshot_schedule(&scenario.snapshots, scenario.end_time)?;
    let mut ledger = MassLedger::new(problem.mass(stepper.saturation()));
    let mut stats = SolverStats::default();
    let mut timings = Timings::default();
    let mut snapshots = Vec::with_capacity(schedule.len());
    let mut t = 0.0;

    for &target in &schedule {
        while t < target {
            let clock = Instant::now();
            let limit = stepper.prepare(&mut stats)?;
            timings.velocity += clock.elapsed();
            if !(limit > 0.0) {
                return Err(FlowError::CflViolation { dt: 0.0, limit });
            }
            let remaining = target - t;
            let (dt, lands) = if remaining <= limit {
                (remaining, true)
            } else {
                (limit, false)
            };
            let clock = Instant::now();
            let flux = stepper.advance(dt, &mut stats)?;
            timings.transport += clock.elapsed();
            ledger.record(dt, flux);
            stats.steps += 1;
            t = if lands { target } else { t + dt };
        }
        snapshots.push(Snapshot {
            time: target,
            field: ScalarField::from_values(grid, stepper.saturation().to_vec())?,
        });
    }
    ledger.current_mass = problem.mass(stepper.saturation());
    timings.total = started.elapsed();
    Ok(RunResult {
        scenario: scenario.clone(),
        snapshots,
        ledger,
        timings,
        stats,
    })
}
