//! Brinkman-regularized models: the pseudo-parabolic vertical-equilibrium
//! model (BVE) and the Brinkman two-phase model (BTP), both advanced with an
//! IMEX step whose implicit part is a Helmholtz solve for the increment.

use crate::error::{FlowError, Result};
use crate::grid::{EdgeField, Grid, ScalarField};
use crate::linalg::{pcg_solve, LinePreconditioner, SpdOperator, StencilMatrix};
use crate::problem::Problem;
use crate::run::{integrate, BoundaryFlux, RunResult, SolverStats, Stepper};
use crate::scenario::Scenario;
use crate::tp::DarcyVelocity;
use crate::ve::{
    advective_dt_limit, advective_residual, reconstruct_into, FluxScratch, NonlocalVelocity,
    VeState,
};

pub const DEFAULT_HELMHOLTZ_TOL: f64 = 1e-12;
/// Courant number of the explicit nonlinear diffusion.
const DIFFUSION_CFL: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrinkmanParams {
    pub beta_x: f64,
    pub beta_z: f64,
    pub eps_x: f64,
    pub eps_z: f64,
    pub gamma: Option<f64>,
    pub mu_e: Option<f64>,
}

fn nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(FlowError::Domain {
            name,
            value,
            domain: "[0, inf)",
        })
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(FlowError::Domain {
            name,
            value,
            domain: "(0, inf)",
        })
    }
}

impl BrinkmanParams {
    pub fn new(beta_x: f64, beta_z: f64, eps_x: f64, eps_z: f64) -> Result<Self> {
        nonnegative("beta_x", beta_x)?;
        nonnegative("beta_z", beta_z)?;
        nonnegative("eps_x", eps_x)?;
        nonnegative("eps_z", eps_z)?;
        Ok(BrinkmanParams {
            beta_x,
            beta_z,
            eps_x,
            eps_z,
            gamma: None,
            mu_e: None,
        })
    }

    /// `beta_x = mu_e / L^2`, `beta_z = mu_e / H^2` and `eps = sqrt(beta)`.
    pub fn from_viscosity(mu_e: f64, height: f64, length: f64) -> Result<Self> {
        nonnegative("mu_e", mu_e)?;
        positive("height", height)?;
        positive("length", length)?;
        let beta_x = mu_e / (length * length);
        let beta_z = mu_e / (height * height);
        let mut p = Self::new(beta_x, beta_z, beta_x.sqrt(), beta_z.sqrt())?;
        p.mu_e = Some(mu_e);
        Ok(p)
    }

    /// Equal regularization in both directions with `eps = sqrt(beta)`.
    pub fn isotropic(beta: f64) -> Result<Self> {
        nonnegative("beta", beta)?;
        Self::new(beta, beta, beta.sqrt(), beta.sqrt())
    }

    pub fn zero() -> Self {
        BrinkmanParams {
            beta_x: 0.0,
            beta_z: 0.0,
            eps_x: 0.0,
            eps_z: 0.0,
            gamma: None,
            mu_e: None,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        positive("gamma", gamma)?;
        self.gamma = Some(gamma);
        Ok(self)
    }
}

/// `I - (beta_x/dx^2) D_xx - (beta_z/dz^2) D_zz` with mirror closure in `x`
/// and periodic wrap in `z`, applied in difference form so constants are
/// reproduced exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelmholtzOperator {
    pub nx: usize,
    pub nz: usize,
    /// Coupling weight between horizontal neighbours.
    pub cx: f64,
    /// Coupling weight between vertical neighbours.
    pub cz: f64,
}

pub fn assemble_helmholtz(params: &BrinkmanParams, grid: Grid) -> HelmholtzOperator {
    HelmholtzOperator {
        nx: grid.nx,
        nz: grid.nz,
        cx: if grid.nx > 1 { params.beta_x / (grid.dx * grid.dx) } else { 0.0 },
        cz: if grid.nz > 1 { params.beta_z / (grid.dz * grid.dz) } else { 0.0 },
    }
}

impl HelmholtzOperator {
    pub fn is_identity(&self) -> bool {
        self.cx == 0.0 && self.cz == 0.0
    }

    /// The same operator as an explicit five-point matrix.
    pub fn to_stencil(&self) -> StencilMatrix {
        let (nx, nz) = (self.nx, self.nz);
        let mut m = StencilMatrix::zeros(nx, nz, nz > 1);
        for j in 0..nz {
            for i in 0..nx {
                let k = j * nx + i;
                let deg_x = (i > 0) as u8 + (i + 1 < nx) as u8;
                let deg_z = if nz > 1 { 2.0 } else { 0.0 };
                m.diag[k] = 1.0 + self.cx * deg_x as f64 + self.cz * deg_z;
                if i + 1 < nx {
                    m.east[k] = -self.cx;
                }
                if nz > 1 {
                    m.north[k] = -self.cz;
                }
            }
        }
        m
    }

    /// Solves `A x = rhs` by preconditioned CG, returning the iteration count.
    pub fn solve(&self, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, usize)> {
        if self.is_identity() {
            return Ok((rhs.to_vec(), 0));
        }
        let n = self.dim();
        let m = LinePreconditioner::rows(&self.to_stencil())?;
        let sol = pcg_solve(self, &m, rhs, rhs, tol, 20 * n + 1000, |_| {})?;
        Ok((sol.x, sol.iterations))
    }
}

impl SpdOperator for HelmholtzOperator {
    fn dim(&self) -> usize {
        self.nx * self.nz
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (nx, nz) = (self.nx, self.nz);
        for j in 0..nz {
            let row = j * nx;
            let up = if j + 1 < nz { row + nx } else { 0 };
            let down = if j > 0 { row - nx } else { (nz - 1) * nx };
            for i in 0..nx {
                let k = row + i;
                let xk = x[k];
                let mut acc = 0.0;
                if i > 0 {
                    acc += xk - x[k - 1];
                }
                if i + 1 < nx {
                    acc += xk - x[k + 1];
                }
                let mut vert = 0.0;
                if nz > 1 {
                    vert = (xk - x[up + i]) + (xk - x[down + i]);
                }
                y[k] = xk + self.cx * acc + self.cz * vert;
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.to_stencil().diag
    }
}

/// Smooth decay from the inflow values at `x = 0` towards zero.
pub fn bve_initial_condition(inflow: &[f64], grid: Grid) -> Result<ScalarField> {
    if inflow.len() != grid.nz {
        return Err(FlowError::Dimension(format!(
            "{} inflow values for {} layers",
            inflow.len(),
            grid.nz
        )));
    }
    if let Some(&s) = inflow.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(FlowError::Domain {
            name: "inflow",
            value: s,
            domain: "[0, 1]",
        });
    }
    Ok(ScalarField::from_fn(grid, |i, j| {
        let x = i as f64 * grid.dx;
        let r = (1.0 - x) * (1.0 - x);
        r * inflow[j] / (1e5 * x * x + r)
    }))
}

/// Largest stable step for the explicit nonlinear diffusion.
pub fn diffusion_dt_limit(grid: Grid, params: &BrinkmanParams, h_max: f64) -> f64 {
    let mut limit = f64::INFINITY;
    if params.eps_x > 0.0 && h_max > 0.0 {
        limit = limit.min(grid.dx * grid.dx / (params.eps_x * h_max));
    }
    if params.eps_z > 0.0 && h_max > 0.0 {
        limit = limit.min(grid.dz * grid.dz / (params.eps_z * h_max));
    }
    DIFFUSION_CFL * limit
}

/// Adds the dissipative term `eps d/dx(H dS/dx) + eps d/dz(H dS/dz)` with
/// zero flux on every boundary to `out`.
fn add_diffusion(problem: &Problem, params: &BrinkmanParams, s: &[f64], out: &mut [f64]) {
    let grid = problem.grid;
    let fluid = &problem.fluid;
    let kappa = &problem.kappa.values;
    let (nx, nz) = (grid.nx, grid.nz);
    if params.eps_x > 0.0 {
        let c = params.eps_x / (grid.dx * grid.dx);
        for j in 0..nz {
            for i in 0..nx - 1 {
                let (l, r) = (grid.idx(i, j), grid.idx(i + 1, j));
                let h = fluid.diffusion(0.5 * (s[l] + s[r]), 0.5 * (kappa[l] + kappa[r]));
                let g = c * h * (s[r] - s[l]);
                out[l] += g;
                out[r] -= g;
            }
        }
    }
    if params.eps_z > 0.0 {
        let c = params.eps_z / (grid.dz * grid.dz);
        for j in 0..nz - 1 {
            for i in 0..nx {
                let (lo, hi) = (grid.idx(i, j), grid.idx(i, j + 1));
                let h = fluid.diffusion(0.5 * (s[lo] + s[hi]), 0.5 * (kappa[lo] + kappa[hi]));
                let g = c * h * (s[hi] - s[lo]);
                out[lo] += g;
                out[hi] -= g;
            }
        }
    }
}

/// Workspace of the IMEX update shared by BVE and BTP.
#[derive(Debug, Clone)]
pub(crate) struct Imex {
    pub params: BrinkmanParams,
    pub helmholtz: HelmholtzOperator,
    pub tol: f64,
    pub h_max: f64,
    residual: Vec<f64>,
    diffusion: Vec<f64>,
    increment: Vec<f64>,
    scratch: FluxScratch,
}

impl Imex {
    pub fn new(problem: &Problem, params: BrinkmanParams, tol: f64) -> Self {
        Imex {
            params,
            helmholtz: assemble_helmholtz(&params, problem.grid),
            tol,
            h_max: problem.fluid.diffusion_bound() * problem.max_kappa(),
            residual: Vec::new(),
            diffusion: Vec::new(),
            increment: Vec::new(),
            scratch: FluxScratch::default(),
        }
    }

    pub fn dt_limit(&self, problem: &Problem, vel: &EdgeField, slope_bound: f64) -> f64 {
        advective_dt_limit(problem.grid, vel, slope_bound, problem.cfl).min(diffusion_dt_limit(
            problem.grid,
            &self.params,
            self.h_max,
        ))
    }

    /// `(I - beta Lap) (S_new - S) = dt (explicit terms)`.
    pub fn update(
        &mut self,
        problem: &Problem,
        s: &mut [f64],
        vel: &EdgeField,
        dt: f64,
        stats: &mut SolverStats,
    ) -> Result<BoundaryFlux> {
        let n = s.len();
        self.residual.resize(n, 0.0);
        let flux = advective_residual(problem, s, vel, &mut self.residual, &mut self.scratch);
        let coef = dt / problem.grid.cell_area();
        let phi = &problem.porosity.values;
        self.increment.clear();
        if self.params.eps_x > 0.0 || self.params.eps_z > 0.0 {
            self.diffusion.clear();
            self.diffusion.resize(n, 0.0);
            add_diffusion(problem, &self.params, s, &mut self.diffusion);
            self.increment.extend(
                (0..n).map(|k| (-(coef * self.residual[k]) + dt * self.diffusion[k]) / phi[k]),
            );
        } else {
            self.increment
                .extend((0..n).map(|k| -(coef * self.residual[k]) / phi[k]));
        }
        if self.helmholtz.is_identity() {
            for (s, d) in s.iter_mut().zip(&self.increment) {
                *s += d;
            }
        } else {
            let (delta, iterations) = self.helmholtz.solve(&self.increment, self.tol)?;
            stats.record_helmholtz(iterations);
            // The operator preserves sums, so the increment must carry the
            // same mass as the right-hand side. A uniform shift, which the
            // operator maps to itself, removes the solver's residual mass.
            let shift = (self.increment.iter().sum::<f64>() - delta.iter().sum::<f64>()) / n as f64;
            for (s, d) in s.iter_mut().zip(&delta) {
                *s += d + shift;
            }
        }
        Ok(flux)
    }
}

/// One BVE step from `state`. Rejects steps above the combined advective and
/// diffusive limit without touching the state.
pub fn bve_step(
    state: &VeState,
    params: &BrinkmanParams,
    dt: f64,
    problem: &Problem,
) -> Result<(VeState, BoundaryFlux)> {
    let grid = problem.grid;
    grid.ensure_same(&state.saturation.grid)?;
    let mut velocity = NonlocalVelocity::zeros(grid);
    reconstruct_into(
        grid,
        &state.saturation.values,
        &problem.kappa.values,
        &problem.fluid,
        &mut velocity,
        &mut Vec::new(),
    );
    let mut imex = Imex::new(problem, *params, DEFAULT_HELMHOLTZ_TOL);
    let limit = imex.dt_limit(problem, &velocity.edges, problem.fluid.slope_bound());
    if !(dt >= 0.0) || dt > limit {
        return Err(FlowError::CflViolation { dt, limit });
    }
    let mut s = state.saturation.values.clone();
    let flux = imex.update(problem, &mut s, &velocity.edges, dt, &mut SolverStats::default())?;
    Ok((
        VeState {
            saturation: ScalarField::from_values(grid, s)?,
            time: state.time + dt,
        },
        flux,
    ))
}

pub struct BveStepper<'a> {
    problem: &'a Problem,
    s: Vec<f64>,
    velocity: NonlocalVelocity,
    imex: Imex,
    slope_bound: f64,
    cell_u: Vec<f64>,
}

impl<'a> BveStepper<'a> {
    pub fn new(problem: &'a Problem, initial: Vec<f64>, params: BrinkmanParams, tol: f64) -> Result<Self> {
        if initial.len() != problem.grid.cells() {
            return Err(FlowError::Dimension("initial state size".into()));
        }
        Ok(BveStepper {
            problem,
            s: initial,
            velocity: NonlocalVelocity::zeros(problem.grid),
            imex: Imex::new(problem, params, tol),
            slope_bound: problem.fluid.slope_bound(),
            cell_u: Vec::new(),
        })
    }
}

impl Stepper for BveStepper<'_> {
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
        Ok(self.imex.dt_limit(p, &self.velocity.edges, self.slope_bound))
    }

    fn advance(&mut self, dt: f64, stats: &mut SolverStats) -> Result<BoundaryFlux> {
        self.imex
            .update(self.problem, &mut self.s, &self.velocity.edges, dt, stats)
    }
}

/// Cell-centred Brinkman velocities `v` recovered from the Darcy field by
/// one Helmholtz solve per component.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredVelocity {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn recover_brinkman_velocity(
    darcy: &EdgeField,
    helmholtz: &HelmholtzOperator,
    tol: f64,
    stats: &mut SolverStats,
) -> Result<RecoveredVelocity> {
    let grid = darcy.grid;
    let n = grid.cells();
    let mut uc = vec![0.0; n];
    let mut wc = vec![0.0; n];
    for j in 0..grid.nz {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            uc[k] = 0.5 * (darcy.u(i, j) + darcy.u(i + 1, j));
            wc[k] = 0.5 * (darcy.w(i, j) + darcy.w(i, j + 1));
        }
    }
    let (u, iu) = helmholtz.solve(&uc, tol)?;
    let (w, iw) = helmholtz.solve(&wc, tol)?;
    if !helmholtz.is_identity() {
        stats.record_helmholtz(iu);
        stats.record_helmholtz(iw);
    }
    let correction = u
        .iter()
        .zip(&uc)
        .chain(w.iter().zip(&wc))
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    stats.max_brinkman_correction = stats.max_brinkman_correction.max(correction);
    Ok(RecoveredVelocity { u, w })
}

pub struct BtpStepper<'a> {
    problem: &'a Problem,
    s: Vec<f64>,
    velocity: DarcyVelocity,
    imex: Imex,
    slope_bound: f64,
    recovered: Option<RecoveredVelocity>,
}

impl<'a> BtpStepper<'a> {
    pub fn new(
        problem: &'a Problem,
        initial: Vec<f64>,
        params: BrinkmanParams,
        pressure_tol: f64,
        helmholtz_tol: f64,
    ) -> Result<Self> {
        if initial.len() != problem.grid.cells() {
            return Err(FlowError::Dimension("initial state size".into()));
        }
        let gamma = params.gamma.ok_or_else(|| FlowError::Missing("gamma".into()))?;
        Ok(BtpStepper {
            problem,
            s: initial,
            velocity: DarcyVelocity::new(problem.grid, gamma, pressure_tol)?,
            imex: Imex::new(problem, params, helmholtz_tol),
            slope_bound: problem.fluid.slope_bound(),
            recovered: None,
        })
    }

    /// Normalized Darcy velocities driving transport, from the last
    /// [`Stepper::prepare`].
    pub fn transport_velocity(&self) -> &EdgeField {
        &self.velocity.transport
    }

    /// Brinkman velocities from the last pressure solve.
    pub fn recovered_velocity(&self) -> Option<&RecoveredVelocity> {
        self.recovered.as_ref()
    }
}

impl Stepper for BtpStepper<'_> {
    fn saturation(&self) -> &[f64] {
        &self.s
    }

    fn prepare(&mut self, stats: &mut SolverStats) -> Result<f64> {
        self.velocity.update(self.problem, &self.s, stats)?;
        self.recovered = Some(recover_brinkman_velocity(
            &self.velocity.darcy,
            &self.imex.helmholtz,
            self.imex.tol,
            stats,
        )?);
        Ok(self
            .imex
            .dt_limit(self.problem, &self.velocity.transport, self.slope_bound))
    }

    fn advance(&mut self, dt: f64, stats: &mut SolverStats) -> Result<BoundaryFlux> {
        self.imex
            .update(self.problem, &mut self.s, &self.velocity.transport, dt, stats)
    }
}

pub fn run_bve(scenario: &Scenario) -> Result<RunResult> {
    let problem = Problem::from_scenario(scenario)?;
    let params = scenario.brinkman_params()?;
    let initial = crate::scenario::initial_state(scenario, &problem);
    let mut stepper = BveStepper::new(&problem, initial, params, scenario.helmholtz_tol)?;
    integrate(scenario, &problem, &mut stepper)
}

pub fn run_btp(scenario: &Scenario) -> Result<RunResult> {
    let problem = Problem::from_scenario(scenario)?;
    let params = scenario.brinkman_params()?;
    let initial = crate::scenario::initial_state(scenario, &problem);
    let mut stepper = BtpStepper::new(
        &problem,
        initial,
        params,
        scenario.pressure_tol,
        scenario.helmholtz_tol,
    )?;
    integrate(scenario, &problem, &mut stepper)
}
