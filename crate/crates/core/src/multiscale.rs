//! Asymptotic multiscale solver: a coarse one-dimensional pressure equation
//! on column mobilities, a `z`-independent fine pressure reconstructed from
//! it, and Darcy velocities from the reconstructed gradient.

use crate::error::{FlowError, Result};
use crate::grid::{EdgeField, Grid, ScalarField};
use crate::linalg::tridiag_solve;
use crate::physics::FluidModel;
use crate::problem::Problem;
use crate::run::{integrate, BoundaryFlux, RunResult, SolverStats, Stepper};
use crate::scenario::Scenario;
use crate::ve::{advective_dt_limit, edges_from_cell_velocity, explicit_update, FluxScratch};

/// Solution of the coarse pressure equation `d/dx(Lambda dp/dx) = 0` with
/// `p = 1` at `x = 0` and `p = 0` at `x = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarsePressure {
    /// Column-centre pressures.
    pub cell: Vec<f64>,
    /// Flux-continuous pressures on the `nx + 1` column interfaces.
    pub interface: Vec<f64>,
    /// Column mobilities `Lambda_i = dz sum_j lambda kappa`.
    pub column_mobility: Vec<f64>,
    /// Total horizontal flux.
    pub rate: f64,
}

impl CoarsePressure {
    /// `dp/dx` across column `i`.
    pub fn gradient(&self, i: usize, dx: f64) -> f64 {
        (self.interface[i + 1] - self.interface[i]) / dx
    }
}

fn column_mobility(grid: Grid, s: &[f64], kappa: &[f64], fluid: &FluidModel, out: &mut Vec<f64>) {
    out.clear();
    out.resize(grid.nx, 0.0);
    for (k, (&s, &kap)) in s.iter().zip(kappa).enumerate() {
        out[k % grid.nx] += fluid.mobility(s) * kap;
    }
    out.iter_mut().for_each(|c| *c *= grid.dz);
}

fn solve_columns(grid: Grid, lam: Vec<f64>) -> Result<CoarsePressure> {
    let nx = grid.nx;
    let dx = grid.dx;
    // Half-cell transmissibilities combine harmonically across interfaces.
    let t_in = 2.0 * lam[0] / dx;
    let t_out = 2.0 * lam[nx - 1] / dx;
    let t_mid: Vec<f64> = (0..nx.saturating_sub(1))
        .map(|i| 2.0 * lam[i] * lam[i + 1] / (dx * (lam[i] + lam[i + 1])))
        .collect();
    let mut lower = vec![0.0; nx];
    let mut diag = vec![0.0; nx];
    let mut upper = vec![0.0; nx];
    let mut rhs = vec![0.0; nx];
    for i in 0..nx {
        let left = if i == 0 { t_in } else { t_mid[i - 1] };
        let right = if i + 1 == nx { t_out } else { t_mid[i] };
        diag[i] = left + right;
        if i > 0 {
            lower[i] = -left;
        }
        if i + 1 < nx {
            upper[i] = -right;
        }
    }
    rhs[0] = t_in;
    let cell = tridiag_solve(&lower, &diag, &upper, &rhs)?;
    let mut interface = vec![0.0; nx + 1];
    interface[0] = 1.0;
    for i in 1..nx {
        let (a, b) = (lam[i - 1], lam[i]);
        interface[i] = (a * cell[i - 1] + b * cell[i]) / (a + b);
    }
    interface[nx] = 0.0;
    let rate = t_in * (1.0 - cell[0]);
    Ok(CoarsePressure {
        cell,
        interface,
        column_mobility: lam,
        rate,
    })
}

pub fn coarse_pressure_solve(
    s: &ScalarField,
    kappa: &ScalarField,
    model: &FluidModel,
) -> Result<CoarsePressure> {
    let grid = s.grid;
    grid.ensure_same(&kappa.grid)?;
    if let Some(&k) = kappa.values.iter().find(|&&k| !(k > 0.0)) {
        return Err(FlowError::Domain {
            name: "kappa",
            value: k,
            domain: "(0, inf)",
        });
    }
    let mut lam = Vec::new();
    column_mobility(grid, &s.values, &kappa.values, model, &mut lam);
    solve_columns(grid, lam)
}

/// Cell-centred horizontal velocity `-lambda kappa dp/dx / q`.
fn cell_velocities(
    grid: Grid,
    s: &[f64],
    kappa: &[f64],
    fluid: &FluidModel,
    coarse: &CoarsePressure,
    out: &mut Vec<f64>,
) {
    out.clear();
    out.resize(grid.cells(), 0.0);
    let scale: Vec<f64> = (0..grid.nx)
        .map(|i| -coarse.gradient(i, grid.dx) / coarse.rate)
        .collect();
    for (k, (&s, &kap)) in s.iter().zip(kappa).enumerate() {
        out[k] = fluid.mobility(s) * kap * scale[k % grid.nx];
    }
}

/// Normalized velocities of the multiscale model.
pub fn multiscale_velocity(
    s: &ScalarField,
    kappa: &ScalarField,
    model: &FluidModel,
) -> Result<(EdgeField, CoarsePressure)> {
    let coarse = coarse_pressure_solve(s, kappa, model)?;
    let mut cell_u = Vec::new();
    cell_velocities(s.grid, &s.values, &kappa.values, model, &coarse, &mut cell_u);
    let mut edges = EdgeField::zeros(s.grid);
    edges_from_cell_velocity(s.grid, &cell_u, &mut edges);
    Ok((edges, coarse))
}

/// One multiscale step: coarse solve, velocity reconstruction, upwind update.
pub fn ms_step(s: &ScalarField, dt: f64, problem: &Problem) -> Result<(ScalarField, BoundaryFlux)> {
    let (vel, _) = multiscale_velocity(s, &problem.kappa, &problem.fluid)?;
    let limit = advective_dt_limit(problem.grid, &vel, problem.fluid.slope_bound(), problem.cfl);
    if !(dt >= 0.0) || dt > limit {
        return Err(FlowError::CflViolation { dt, limit });
    }
    let mut next = s.values.clone();
    let flux = explicit_update(
        problem,
        &mut next,
        &vel,
        dt,
        &mut Vec::new(),
        &mut FluxScratch::default(),
    );
    Ok((ScalarField::from_values(problem.grid, next)?, flux))
}

pub struct MsStepper<'a> {
    problem: &'a Problem,
    s: Vec<f64>,
    velocity: EdgeField,
    slope_bound: f64,
    lam: Vec<f64>,
    cell_u: Vec<f64>,
    residual: Vec<f64>,
    scratch: FluxScratch,
}

impl<'a> MsStepper<'a> {
    pub fn new(problem: &'a Problem, initial: Vec<f64>) -> Result<Self> {
        if initial.len() != problem.grid.cells() {
            return Err(FlowError::Dimension("initial state size".into()));
        }
        Ok(MsStepper {
            problem,
            s: initial,
            velocity: EdgeField::zeros(problem.grid),
            slope_bound: problem.fluid.slope_bound(),
            lam: Vec::new(),
            cell_u: Vec::new(),
            residual: Vec::new(),
            scratch: FluxScratch::default(),
        })
    }
}

impl Stepper for MsStepper<'_> {
    fn saturation(&self) -> &[f64] {
        &self.s
    }

    fn prepare(&mut self, stats: &mut SolverStats) -> Result<f64> {
        let p = self.problem;
        let grid = p.grid;
        column_mobility(grid, &self.s, &p.kappa.values, &p.fluid, &mut self.lam);
        let coarse = solve_columns(grid, std::mem::take(&mut self.lam))?;
        stats.record_pressure(1);
        cell_velocities(grid, &self.s, &p.kappa.values, &p.fluid, &coarse, &mut self.cell_u);
        self.lam = coarse.column_mobility;
        edges_from_cell_velocity(grid, &self.cell_u, &mut self.velocity);
        Ok(advective_dt_limit(grid, &self.velocity, self.slope_bound, p.cfl))
    }

    fn advance(&mut self, dt: f64, _stats: &mut SolverStats) -> Result<BoundaryFlux> {
        Ok(explicit_update(
            self.problem,
            &mut self.s,
            &self.velocity,
            dt,
            &mut self.residual,
            &mut self.scratch,
        ))
    }
}

pub fn run_multiscale(scenario: &Scenario) -> Result<RunResult> {
    let problem = Problem::from_scenario(scenario)?;
    let initial = crate::scenario::initial_state(scenario, &problem);
    let mut stepper = MsStepper::new(&problem, initial)?;
    integrate(scenario, &problem, &mut stepper)
}
