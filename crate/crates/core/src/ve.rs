//! Vertical-equilibrium transport: the nonlocal velocity closure built from
//! column-integrated mobility, and the first-order upwind update shared by
//! every model.

use crate::error::{FlowError, Result};
use crate::grid::{EdgeField, Grid, ScalarField};
use crate::physics::FluidModel;
use crate::problem::Problem;
use crate::run::{integrate, BoundaryFlux, RunResult, SolverStats, Stepper};
use crate::scenario::Scenario;

/// Velocities reconstructed from a saturation state.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalVelocity {
    pub edges: EdgeField,
    /// `Lambda_i = dz sum_j lambda(S_ij) kappa_ij` of every column.
    pub column_mobility: Vec<f64>,
}

impl NonlocalVelocity {
    pub fn zeros(grid: Grid) -> Self {
        NonlocalVelocity {
            edges: EdgeField::zeros(grid),
            column_mobility: vec![0.0; grid.nx],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VeState {
    pub saturation: ScalarField,
    pub time: f64,
}

/// Builds `u` on vertical edges from cell-centred horizontal velocities and
/// `w` on horizontal edges by telescoping discrete incompressibility upward
/// from the impermeable bottom.
///
/// Interior edges average the two neighbouring cells; the inflow and outflow
/// edges take the value of the adjacent boundary column.
pub(crate) fn edges_from_cell_velocity(grid: Grid, cell_u: &[f64], out: &mut EdgeField) {
    let (nx, nz) = (grid.nx, grid.nz);
    for j in 0..nz {
        let row = &cell_u[j * nx..(j + 1) * nx];
        let base = grid.x_edge(0, j);
        let edges = &mut out.x_edges[base..base + nx + 1];
        edges[0] = row[0];
        for i in 1..nx {
            edges[i] = 0.5 * (row[i - 1] + row[i]);
        }
        edges[nx] = row[nx - 1];
    }
    let ratio = grid.dz / grid.dx;
    for i in 0..nx {
        out.z_edges[grid.z_edge(i, 0)] = 0.0;
        let mut acc = 0.0;
        for j in 0..nz {
            acc += out.x_edges[grid.x_edge(i + 1, j)] - out.x_edges[grid.x_edge(i, j)];
            out.z_edges[grid.z_edge(i, j + 1)] = -ratio * acc;
        }
        // The column sum of u-differences vanishes up to round-off.
        out.z_edges[grid.z_edge(i, nz)] = 0.0;
    }
}

/// Fills `cell_u` with `lambda kappa / Lambda_i` and returns the column
/// mobilities through `columns`.
fn normalized_mobility(
    grid: Grid,
    s: &[f64],
    kappa: &[f64],
    fluid: &FluidModel,
    cell_u: &mut [f64],
    columns: &mut [f64],
) {
    let nx = grid.nx;
    columns.iter_mut().for_each(|c| *c = 0.0);
    for (k, (&s, &kap)) in s.iter().zip(kappa).enumerate() {
        let a = fluid.mobility(s) * kap;
        cell_u[k] = a;
        columns[k % nx] += a;
    }
    columns.iter_mut().for_each(|c| *c *= grid.dz);
    for (k, v) in cell_u.iter_mut().enumerate() {
        *v /= columns[k % nx];
    }
}

pub(crate) fn reconstruct_into(
    grid: Grid,
    s: &[f64],
    kappa: &[f64],
    fluid: &FluidModel,
    out: &mut NonlocalVelocity,
    scratch: &mut Vec<f64>,
) {
    scratch.resize(grid.cells(), 0.0);
    normalized_mobility(grid, s, kappa, fluid, scratch, &mut out.column_mobility);
    edges_from_cell_velocity(grid, scratch, &mut out.edges);
}

/// Nonlocal velocity of a saturation state with unit total inflow.
pub fn reconstruct_velocity(
    s: &ScalarField,
    kappa: &ScalarField,
    model: &FluidModel,
) -> Result<NonlocalVelocity> {
    s.grid.ensure_same(&kappa.grid)?;
    if let Some(&k) = kappa.values.iter().find(|&&k| !(k > 0.0)) {
        return Err(FlowError::Domain {
            name: "kappa",
            value: k,
            domain: "(0, inf)",
        });
    }
    let mut out = NonlocalVelocity::zeros(s.grid);
    let mut scratch = Vec::new();
    reconstruct_into(s.grid, &s.values, &kappa.values, model, &mut out, &mut scratch);
    Ok(out)
}

/// Upwind flux through an edge of length `len` with normal velocity `v`,
/// where `v > 0` points from the `s_in` side to the `s_out` side.
#[inline]
pub fn upwind_flux(v: f64, s_in: f64, s_out: f64, len: f64, model: &FluidModel) -> f64 {
    flux_from_fractions(v, model.frac_flow(s_in), model.frac_flow(s_out), len)
}

#[inline]
fn flux_from_fractions(v: f64, f_in: f64, f_out: f64, len: f64) -> f64 {
    len * (v.max(0.0) * f_in + v.min(0.0) * f_out)
}

/// Largest advective step for `vel` under the given Courant number.
pub fn advective_dt_limit(grid: Grid, vel: &EdgeField, slope_bound: f64, cfl: f64) -> f64 {
    let u = vel.max_abs_u() * slope_bound;
    let w = vel.max_abs_w() * slope_bound;
    let mut limit = f64::INFINITY;
    if u > 0.0 {
        limit = limit.min(grid.dx / u);
    }
    if w > 0.0 {
        limit = limit.min(grid.dz / w);
    }
    cfl * limit
}

/// Scratch space for [`advective_residual`].
#[derive(Debug, Clone, Default)]
pub(crate) struct FluxScratch {
    frac: Vec<f64>,
}

/// Accumulates the net outward upwind flux of every cell into `residual`.
///
/// Every edge flux is evaluated once and added to one side, subtracted from
/// the other, so the interior contributions cancel exactly in the sum.
pub(crate) fn advective_residual(
    problem: &Problem,
    s: &[f64],
    vel: &EdgeField,
    residual: &mut [f64],
    scratch: &mut FluxScratch,
) -> BoundaryFlux {
    let grid = problem.grid;
    let fluid = &problem.fluid;
    let (nx, nz) = (grid.nx, grid.nz);
    scratch.frac.clear();
    scratch.frac.extend(s.iter().map(|&s| fluid.frac_flow(s)));
    let frac = &scratch.frac;
    residual.iter_mut().for_each(|r| *r = 0.0);
    let mut flux = BoundaryFlux::default();

    for j in 0..nz {
        let base = j * nx;
        let ue = &vel.x_edges[grid.x_edge(0, j)..grid.x_edge(0, j) + nx + 1];
        // Inflow ghost carries the prescribed inflow saturation.
        let f_ghost = fluid.frac_flow(problem.inflow[j]);
        let fin = flux_from_fractions(ue[0], f_ghost, frac[base], grid.dz);
        residual[base] -= fin;
        flux.inflow += fin;
        for i in 0..nx - 1 {
            let f = flux_from_fractions(ue[i + 1], frac[base + i], frac[base + i + 1], grid.dz);
            residual[base + i] += f;
            residual[base + i + 1] -= f;
        }
        // Outflow ghost copies the last cell.
        let last = frac[base + nx - 1];
        let fout = flux_from_fractions(ue[nx], last, last, grid.dz);
        residual[base + nx - 1] += fout;
        flux.outflow += fout;
    }
    for j in 1..nz {
        for i in 0..nx {
            let lo = grid.idx(i, j - 1);
            let hi = grid.idx(i, j);
            let f = flux_from_fractions(vel.z_edges[grid.z_edge(i, j)], frac[lo], frac[hi], grid.dx);
            residual[lo] += f;
            residual[hi] -= f;
        }
    }
    // Bottom and top walls carry no flux.
    flux
}

/// Explicit upwind update `S <- S - dt/(dx dz phi) R`.
pub(crate) fn explicit_update(
    problem: &Problem,
    s: &mut [f64],
    vel: &EdgeField,
    dt: f64,
    residual: &mut Vec<f64>,
    scratch: &mut FluxScratch,
) -> BoundaryFlux {
    residual.resize(s.len(), 0.0);
    let flux = advective_residual(problem, s, vel, residual, scratch);
    let coef = dt / problem.grid.cell_area();
    for ((s, r), phi) in s.iter_mut().zip(residual.iter()).zip(&problem.porosity.values) {
        *s -= coef * r / phi;
    }
    flux
}

/// One explicit VE step. Rejects `dt` above the CFL limit of `velocity`
/// without touching the state.
pub fn ve_step(
    state: &VeState,
    velocity: &NonlocalVelocity,
    dt: f64,
    problem: &Problem,
) -> Result<(VeState, BoundaryFlux)> {
    problem.grid.ensure_same(&state.saturation.grid)?;
    problem.grid.ensure_same(&velocity.edges.grid)?;
    let limit = advective_dt_limit(
        problem.grid,
        &velocity.edges,
        problem.fluid.slope_bound(),
        problem.cfl,
    );
    if !(dt >= 0.0) || dt > limit {
        return Err(FlowError::CflViolation { dt, limit });
    }
    let mut s = state.saturation.values.clone();
    let flux = explicit_update(
        problem,
        &mut s,
        &velocity.edges,
        dt,
        &mut Vec::new(),
        &mut FluxScratch::default(),
    );
    Ok((
        VeState {
            saturation: ScalarField::from_values(problem.grid, s)?,
            time: state.time + dt,
        },
        flux,
    ))
}

/// Stepper for the vertical-equilibrium model.
pub struct VeStepper<'a> {
    problem: &'a Problem,
    s: Vec<f64>,
    velocity: NonlocalVelocity,
    slope_bound: f64,
    cell_u: Vec<f64>,
    residual: Vec<f64>,
    scratch: FluxScratch,
}

impl<'a> VeStepper<'a> {
    pub fn new(problem: &'a Problem, initial: Vec<f64>) -> Result<Self> {
        if initial.len() != problem.grid.cells() {
            return Err(FlowError::Dimension(format!(
                "initial state of {} values on {} cells",
                initial.len(),
                problem.grid.cells()
            )));
        }
        Ok(VeStepper {
            problem,
            s: initial,
            velocity: NonlocalVelocity::zeros(problem.grid),
            slope_bound: problem.fluid.slope_bound(),
            cell_u: Vec::new(),
            residual: Vec::new(),
            scratch: FluxScratch::default(),
        })
    }

    pub fn velocity(&self) -> &NonlocalVelocity {
        &self.velocity
    }
}

impl Stepper for VeStepper<'_> {
    fn saturation(&self) -> &[f64] {
        &self.s
    }

    fn prepare(&mut self, _stats: &mut SolverStats) -> Result<f64> {
        let p = self.problem;
        reconstruct_into(
            p.grid,
            &self.s,
            &p.kappa.values,
            &p.fluid,
            &mut self.velocity,
            &mut self.cell_u,
        );
        Ok(advective_dt_limit(
            p.grid,
            &self.velocity.edges,
            self.slope_bound,
            p.cfl,
        ))
    }

    fn advance(&mut self, dt: f64, _stats: &mut SolverStats) -> Result<BoundaryFlux> {
        Ok(explicit_update(
            self.problem,
            &mut self.s,
            &self.velocity.edges,
            dt,
            &mut self.residual,
            &mut self.scratch,
        ))
    }
}

/// Runs the VE model from the scenario's initial state.
pub fn run_ve(scenario: &Scenario) -> Result<RunResult> {
    let problem = Problem::from_scenario(scenario)?;
    let initial = crate::scenario::initial_state(scenario, &problem);
    let mut stepper = VeStepper::new(&problem, initial)?;
    integrate(scenario, &problem, &mut stepper)
}
