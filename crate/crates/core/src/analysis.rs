//! Post-processing: field distances, the mass ledger, front positions,
//! overshoot and timing tables.

use std::fmt::Write as _;
use std::time::Duration;

use crate::error::{FlowError, Result};
use crate::grid::ScalarField;
use crate::run::{BoundaryFlux, RunResult};

/// Threshold used for front positions unless stated otherwise.
pub const DEFAULT_FRONT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MassLedger {
    pub initial_mass: f64,
    /// Time-integrated inflow through `x = 0`.
    pub injected: f64,
    /// Time-integrated outflow through `x = 1`.
    pub escaped: f64,
    pub current_mass: f64,
}

impl MassLedger {
    pub fn new(initial_mass: f64) -> Self {
        MassLedger {
            initial_mass,
            injected: 0.0,
            escaped: 0.0,
            current_mass: initial_mass,
        }
    }

    pub fn record(&mut self, dt: f64, flux: BoundaryFlux) {
        self.injected += dt * flux.inflow;
        self.escaped += dt * flux.outflow;
    }

    pub fn expected_mass(&self) -> f64 {
        self.initial_mass + self.injected - self.escaped
    }

    /// `|current - expected| / max(1, current)`.
    pub fn relative_defect(&self) -> f64 {
        (self.current_mass - self.expected_mass()).abs() / self.current_mass.abs().max(1.0)
    }

    pub fn closes(&self, tol: f64) -> bool {
        self.relative_defect() <= tol
    }
}

/// `dx dz sum |a - b|`.
pub fn l1_distance(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.grid.ensure_same(&b.grid)?;
    let sum: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum();
    Ok(a.grid.cell_area() * sum)
}

/// `max |a - b|`.
pub fn linf_distance(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.grid.ensure_same(&b.grid)?;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs())))
}

/// Furthest `x` where the piecewise-linear interpolant through the cell
/// centres of `profile` crosses `threshold`.
///
/// Returns 0 when no value reaches the threshold and 1 when the last cell is
/// still at or above it.
pub fn profile_front(profile: &[f64], threshold: f64) -> f64 {
    let n = profile.len();
    if n == 0 {
        return 0.0;
    }
    let dx = 1.0 / n as f64;
    let centre = |i: usize| (i as f64 + 0.5) * dx;
    let Some(last) = profile.iter().rposition(|&s| s >= threshold) else {
        return 0.0;
    };
    if last + 1 == n {
        return 1.0;
    }
    let (a, b) = (profile[last], profile[last + 1]);
    let t = (a - threshold) / (a - b);
    centre(last) + t * dx
}

pub fn front_position(s: &ScalarField, layer: usize, threshold: f64) -> Result<f64> {
    check_threshold(threshold)?;
    if layer >= s.grid.nz {
        return Err(FlowError::Dimension(format!(
            "layer {layer} of {} layers",
            s.grid.nz
        )));
    }
    Ok(profile_front(s.layer(layer), threshold))
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(FlowError::Domain {
            name: "threshold",
            value: threshold,
            domain: "(0, 1)",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontReport {
    pub threshold: f64,
    pub time: f64,
    pub layers: Vec<f64>,
    /// Front of the column-averaged saturation.
    pub aggregate: f64,
}

impl FrontReport {
    pub fn new(s: &ScalarField, time: f64, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        let layers = (0..s.grid.nz)
            .map(|j| profile_front(s.layer(j), threshold))
            .collect();
        Ok(FrontReport {
            threshold,
            time,
            layers,
            aggregate: profile_front(&s.column_average(), threshold),
        })
    }

    /// `position / time` of a layer.
    pub fn speed(&self, layer: usize) -> f64 {
        self.layers[layer] / self.time
    }

    pub fn aggregate_speed(&self) -> f64 {
        self.aggregate / self.time
    }
}

/// `max(0, max(s) - inflow_max)`.
pub fn overshoot(s: &ScalarField, inflow_max: f64) -> f64 {
    (s.max() - inflow_max).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub label: String,
    pub nx: usize,
    pub nz: usize,
    pub velocity: Duration,
    pub transport: Duration,
    pub total: Duration,
    pub steps: usize,
}

/// Ratio of the first run's wall clock on a grid to another run's.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRatio {
    pub nx: usize,
    pub nz: usize,
    pub numerator: String,
    pub denominator: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    pub ratios: Vec<TimingRatio>,
}

impl TimingRow {
    pub fn from_result(result: &RunResult) -> Self {
        let sc = &result.scenario;
        TimingRow {
            label: sc.label(),
            nx: sc.nx,
            nz: sc.nz,
            velocity: result.timings.velocity,
            transport: result.timings.transport,
            total: result.timings.total,
            steps: result.stats.steps,
        }
    }
}

pub fn timing_report(results: &[RunResult]) -> Result<TimingReport> {
    timing_report_from_rows(results.iter().map(TimingRow::from_result).collect())
}

/// Groups rows by grid in order of first appearance; on every grid the first
/// row is divided by each later one.
pub fn timing_report_from_rows(rows: Vec<TimingRow>) -> Result<TimingReport> {
    if rows.is_empty() {
        return Err(FlowError::Validation {
            field: "results".into(),
            message: "timing report needs at least one run".into(),
        });
    }
    let mut grids: Vec<(usize, usize)> = Vec::new();
    for r in &rows {
        if !grids.contains(&(r.nx, r.nz)) {
            grids.push((r.nx, r.nz));
        }
    }
    let mut ratios = Vec::new();
    for (nx, nz) in grids {
        let mut same = rows.iter().filter(|r| r.nx == nx && r.nz == nz);
        let first = same.next().unwrap();
        for other in same {
            ratios.push(TimingRatio {
                nx,
                nz,
                numerator: first.label.clone(),
                denominator: other.label.clone(),
                ratio: first.total.as_secs_f64() / other.total.as_secs_f64(),
            });
        }
    }
    Ok(TimingReport { rows, ratios })
}

impl TimingReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>6} {:>8} {:>12} {:>12} {:>12}",
            "model", "nx", "nz", "steps", "velocity_s", "transport_s", "total_s"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<12} {:>6} {:>6} {:>8} {:>12.6} {:>12.6} {:>12.6}",
                r.label,
                r.nx,
                r.nz,
                r.steps,
                r.velocity.as_secs_f64(),
                r.transport.as_secs_f64(),
                r.total.as_secs_f64()
            );
        }
        if !self.ratios.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "{:>6} {:>6} {:<25} {:>10}", "nx", "nz", "ratio", "value");
            for q in &self.ratios {
                let _ = writeln!(
                    out,
                    "{:>6} {:>6} {:<25} {:>10.3}",
                    q.nx,
                    q.nz,
                    format!("{}/{}", q.numerator, q.denominator),
                    q.ratio
                );
            }
        }
        out
    }

    /// Machine-readable rows: `kind,model,nx,nz,steps,velocity_s,transport_s,total_s,ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,model,nx,nz,steps,velocity_s,transport_s,total_s,ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "run,{},{},{},{},{:.9},{:.9},{:.9},",
                r.label,
                r.nx,
                r.nz,
                r.steps,
                r.velocity.as_secs_f64(),
                r.transport.as_secs_f64(),
                r.total.as_secs_f64()
            );
        }
        for q in &self.ratios {
            let _ = writeln!(
                out,
                "ratio,{}/{},{},{},,,,,{:.9}",
                q.numerator, q.denominator, q.nx, q.nz, q.ratio
            );
        }
        out
    }
}

/// Median of a non-empty sample.
pub fn median_duration(mut samples: Vec<Duration>) -> Duration {
    samples.sort();
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2
    }
}
