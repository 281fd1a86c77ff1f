//! Full two-dimensional two-phase flow with an IMPES split: an elliptic
//! pressure solve on the scaled domain, then the shared upwind transport
//! with Darcy velocities normalized to unit total inflow.

use crate::error::{FlowError, Result};
use crate::grid::{EdgeField, Grid, ScalarField};
use crate::linalg::{pcg_solve, CgSolution, LinePreconditioner, StencilMatrix};
use crate::physics::FluidModel;
use crate::problem::Problem;
use crate::run::{integrate, BoundaryFlux, RunResult, SolverStats, Stepper};
use crate::scenario::Scenario;
use crate::ve::{advective_dt_limit, explicit_update, FluxScratch};

pub const DEFAULT_PRESSURE_TOL: f64 = 1e-10;

/// Two-point pressure system with `p = 1` at `x = 0`, `p = 0` at `x = 1` and
/// no-flow top and bottom. The Dirichlet values enter through half-cell
/// transmissibilities of the boundary columns, so every cell stays an unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureSystem {
    pub matrix: StencilMatrix,
    pub rhs: Vec<f64>,
    /// Cells whose row carries a Dirichlet contribution.
    pub dirichlet_mask: Vec<bool>,
}

fn check_aspect(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(FlowError::Domain {
            name: "gamma",
            value: gamma,
            domain: "(0, inf)",
        })
    }
}

fn cell_mobility(s: &[f64], kappa: &[f64], fluid: &FluidModel, out: &mut Vec<f64>) {
    out.clear();
    out.extend(s.iter().zip(kappa).map(|(&s, &k)| fluid.mobility(s) * k));
}

fn assemble_from_mobility(grid: Grid, mob: &[f64], gamma: f64, sys: &mut PressureSystem) {
    let (nx, nz) = (grid.nx, grid.nz);
    let tx = grid.dz / grid.dx;
    let tz = grid.dx / (gamma * gamma * grid.dz);
    let m = &mut sys.matrix;
    m.diag.iter_mut().for_each(|d| *d = 0.0);
    m.east.iter_mut().for_each(|d| *d = 0.0);
    m.north.iter_mut().for_each(|d| *d = 0.0);
    sys.rhs.iter_mut().for_each(|r| *r = 0.0);
    for j in 0..nz {
        for i in 0..nx {
            let k = grid.idx(i, j);
            if i + 1 < nx {
                let t = tx * 0.5 * (mob[k] + mob[k + 1]);
                m.diag[k] += t;
                m.diag[k + 1] += t;
                m.east[k] = -t;
            }
            if j + 1 < nz {
                let up = k + nx;
                let t = tz * 0.5 * (mob[k] + mob[up]);
                m.diag[k] += t;
                m.diag[up] += t;
                m.north[k] = -t;
            }
        }
        let first = grid.idx(0, j);
        let last = grid.idx(nx - 1, j);
        let t_in = 2.0 * tx * mob[first];
        m.diag[first] += t_in;
        sys.rhs[first] += t_in;
        m.diag[last] += 2.0 * tx * mob[last];
    }
}

pub fn assemble_pressure(
    s: &ScalarField,
    kappa: &ScalarField,
    gamma: f64,
    model: &FluidModel,
) -> Result<PressureSystem> {
    let grid = s.grid;
    grid.ensure_same(&kappa.grid)?;
    check_aspect(gamma)?;
    let mut sys = empty_system(grid);
    let mut mob = Vec::new();
    cell_mobility(&s.values, &kappa.values, model, &mut mob);
    assemble_from_mobility(grid, &mob, gamma, &mut sys);
    Ok(sys)
}

fn empty_system(grid: Grid) -> PressureSystem {
    PressureSystem {
        matrix: StencilMatrix::zeros(grid.nx, grid.nz, false),
        rhs: vec![0.0; grid.cells()],
        dirichlet_mask: (0..grid.cells())
            .map(|k| {
                let i = k % grid.nx;
                i == 0 || i + 1 == grid.nx
            })
            .collect(),
    }
}

pub fn solve_pressure(sys: &PressureSystem, tol: f64, warm_start: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = sys.rhs.len();
    let zeros;
    let x0 = match warm_start {
        Some(x) => x,
        None => {
            zeros = vec![0.0; n];
            &zeros
        }
    };
    Ok(pressure_cg(&sys.matrix, &sys.rhs, x0, tol)?.x)
}

fn pressure_cg(matrix: &StencilMatrix, rhs: &[f64], x0: &[f64], tol: f64) -> Result<CgSolution> {
    let m = LinePreconditioner::new(matrix)?;
    pcg_solve(matrix, &m, rhs, x0, tol, max_iterations(rhs.len()), |_| {})
}

fn max_iterations(n: usize) -> usize {
    20 * n + 1000
}

/// Darcy velocities on the scaled domain: `u` on vertical edges and the
/// physical vertical velocity `w = -lambda kappa dp/dz / gamma` on horizontal
/// edges. Walls carry zero velocity.
pub fn darcy_velocities(
    p: &[f64],
    s: &ScalarField,
    kappa: &ScalarField,
    gamma: f64,
    model: &FluidModel,
) -> Result<EdgeField> {
    let grid = s.grid;
    grid.ensure_same(&kappa.grid)?;
    check_aspect(gamma)?;
    if p.len() != grid.cells() {
        return Err(FlowError::Dimension(format!(
            "pressure of length {} on {} cells",
            p.len(),
            grid.cells()
        )));
    }
    let mut mob = Vec::new();
    cell_mobility(&s.values, &kappa.values, model, &mut mob);
    let mut out = EdgeField::zeros(grid);
    fill_velocities(grid, p, &mob, gamma, &mut out);
    Ok(out)
}

fn fill_velocities(grid: Grid, p: &[f64], mob: &[f64], gamma: f64, out: &mut EdgeField) {
    let (nx, nz) = (grid.nx, grid.nz);
    let half = 0.5 * grid.dx;
    for j in 0..nz {
        let first = grid.idx(0, j);
        let last = grid.idx(nx - 1, j);
        out.x_edges[grid.x_edge(0, j)] = -mob[first] * (p[first] - 1.0) / half;
        for i in 1..nx {
            let (l, r) = (grid.idx(i - 1, j), grid.idx(i, j));
            out.x_edges[grid.x_edge(i, j)] = -0.5 * (mob[l] + mob[r]) * (p[r] - p[l]) / grid.dx;
        }
        out.x_edges[grid.x_edge(nx, j)] = mob[last] * p[last] / half;
    }
    let scale = gamma * grid.dz;
    for i in 0..nx {
        out.z_edges[grid.z_edge(i, 0)] = 0.0;
        out.z_edges[grid.z_edge(i, nz)] = 0.0;
        for j in 1..nz {
            let (lo, hi) = (grid.idx(i, j - 1), grid.idx(i, j));
            out.z_edges[grid.z_edge(i, j)] = -0.5 * (mob[lo] + mob[hi]) * (p[hi] - p[lo]) / scale;
        }
    }
}

/// Rescales `u` on every vertical interface so it carries exactly the unit
/// total flux. The pressure solve leaves interface totals off by its residual;
/// this removes that drift without changing the profile.
fn balance_columns(grid: Grid, x_edges: &mut [f64]) -> Result<()> {
    for i in 0..=grid.nx {
        let total: f64 = (0..grid.nz).map(|j| grid.dz * x_edges[grid.x_edge(i, j)]).sum();
        if !(total > 0.0) {
            return Err(FlowError::Validation {
                field: "pressure".into(),
                message: format!("nonpositive flux {total} through interface {i}"),
            });
        }
        for j in 0..grid.nz {
            x_edges[grid.x_edge(i, j)] /= total;
        }
    }
    Ok(())
}

/// Vertical transport velocities that make every cell exactly
/// divergence-free, integrated upward from the bottom wall.
fn telescope_vertical(grid: Grid, x_edges: &[f64], z_edges: &mut [f64]) {
    let ratio = grid.dz / grid.dx;
    for i in 0..grid.nx {
        let mut w = 0.0;
        z_edges[grid.z_edge(i, 0)] = 0.0;
        for j in 0..grid.nz - 1 {
            w -= ratio * (x_edges[grid.x_edge(i + 1, j)] - x_edges[grid.x_edge(i, j)]);
            z_edges[grid.z_edge(i, j + 1)] = w;
        }
        z_edges[grid.z_edge(i, grid.nz)] = 0.0;
    }
}

/// Pressure state carried between steps, producing normalized transport
/// velocities `(u, w/gamma) / q` where `q` is the total inflow. Interface
/// totals are balanced and `w` is integrated from `u`, so the transport field
/// is discretely incompressible to round-off rather than to the solver
/// tolerance.
#[derive(Debug, Clone)]
pub(crate) struct DarcyVelocity {
    pub gamma: f64,
    pub tol: f64,
    pub pressure: Vec<f64>,
    /// Normalized Darcy field with physical vertical velocity.
    pub darcy: EdgeField,
    /// Normalized field driving transport on the scaled domain.
    pub transport: EdgeField,
    pub inflow_rate: f64,
    system: PressureSystem,
    mob: Vec<f64>,
}

impl DarcyVelocity {
    pub fn new(grid: Grid, gamma: f64, tol: f64) -> Result<Self> {
        check_aspect(gamma)?;
        Ok(DarcyVelocity {
            gamma,
            tol,
            pressure: vec![0.0; grid.cells()],
            darcy: EdgeField::zeros(grid),
            transport: EdgeField::zeros(grid),
            inflow_rate: 0.0,
            system: empty_system(grid),
            mob: Vec::new(),
        })
    }

    pub fn update(&mut self, problem: &Problem, s: &[f64], stats: &mut SolverStats) -> Result<()> {
        let grid = problem.grid;
        cell_mobility(s, &problem.kappa.values, &problem.fluid, &mut self.mob);
        assemble_from_mobility(grid, &self.mob, self.gamma, &mut self.system);
        let sol = pressure_cg(&self.system.matrix, &self.system.rhs, &self.pressure, self.tol)?;
        stats.record_pressure(sol.iterations);
        self.pressure = sol.x;
        fill_velocities(grid, &self.pressure, &self.mob, self.gamma, &mut self.darcy);
        let q = self.darcy.inflow_rate();
        if !(q > 0.0) {
            return Err(FlowError::Validation {
                field: "pressure".into(),
                message: format!("nonpositive total inflow {q}"),
            });
        }
        self.inflow_rate = q;
        self.darcy.scale(1.0 / q);
        balance_columns(grid, &mut self.darcy.x_edges)?;
        self.transport.x_edges.copy_from_slice(&self.darcy.x_edges);
        telescope_vertical(grid, &self.transport.x_edges, &mut self.transport.z_edges);
        for (w, t) in self.darcy.z_edges.iter_mut().zip(&self.transport.z_edges) {
            *w = t * self.gamma;
        }
        Ok(())
    }
}

pub struct TpStepper<'a> {
    problem: &'a Problem,
    s: Vec<f64>,
    velocity: DarcyVelocity,
    slope_bound: f64,
    residual: Vec<f64>,
    scratch: FluxScratch,
}

impl<'a> TpStepper<'a> {
    pub fn new(problem: &'a Problem, initial: Vec<f64>, gamma: f64, tol: f64) -> Result<Self> {
        if initial.len() != problem.grid.cells() {
            return Err(FlowError::Dimension("initial state size".into()));
        }
        Ok(TpStepper {
            problem,
            s: initial,
            velocity: DarcyVelocity::new(problem.grid, gamma, tol)?,
            slope_bound: problem.fluid.slope_bound(),
            residual: Vec::new(),
            scratch: FluxScratch::default(),
        })
    }

    /// Normalized transport velocities from the last pressure solve.
    pub fn transport_velocity(&self) -> &EdgeField {
        &self.velocity.transport
    }

    pub fn pressure(&self) -> &[f64] {
        &self.velocity.pressure
    }
}

impl Stepper for TpStepper<'_> {
    fn saturation(&self) -> &[f64] {
        &self.s
    }

    fn prepare(&mut self, stats: &mut SolverStats) -> Result<f64> {
        self.velocity.update(self.problem, &self.s, stats)?;
        Ok(advective_dt_limit(
            self.problem.grid,
            &self.velocity.transport,
            self.slope_bound,
            self.problem.cfl,
        ))
    }

    fn advance(&mut self, dt: f64, _stats: &mut SolverStats) -> Result<BoundaryFlux> {
        Ok(explicit_update(
            self.problem,
            &mut self.s,
            &self.velocity.transport,
            dt,
            &mut self.residual,
            &mut self.scratch,
        ))
    }
}

/// Runs the two-phase model with aspect ratio `scenario.gamma`.
pub fn run_tp(scenario: &Scenario) -> Result<RunResult> {
    let problem = Problem::from_scenario(scenario)?;
    let initial = crate::scenario::initial_state(scenario, &problem);
    let gamma = scenario.gamma.ok_or_else(|| FlowError::Missing("gamma".into()))?;
    let mut stepper = TpStepper::new(&problem, initial, gamma, scenario.pressure_tol)?;
    integrate(scenario, &problem, &mut stepper)
}
