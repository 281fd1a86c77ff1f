//! A scenario discretized onto its grid: cell permeabilities, porosity,
//! layer-averaged inflow saturations and the fluid model.

use crate::error::{FlowError, Result};
use crate::grid::{layer_average, Grid, ScalarField};
use crate::physics::FluidModel;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub grid: Grid,
    pub fluid: FluidModel,
    pub kappa: ScalarField,
    pub porosity: ScalarField,
    /// Inflow saturation of each layer at `x = 0`.
    pub inflow: Vec<f64>,
    pub cfl: f64,
}

impl Problem {
    pub fn new(
        grid: Grid,
        fluid: FluidModel,
        kappa: ScalarField,
        porosity: ScalarField,
        inflow: Vec<f64>,
        cfl: f64,
    ) -> Result<Self> {
        grid.ensure_same(&kappa.grid)?;
        grid.ensure_same(&porosity.grid)?;
        if inflow.len() != grid.nz {
            return Err(FlowError::Dimension(format!(
                "{} inflow values for {} layers",
                inflow.len(),
                grid.nz
            )));
        }
        if let Some(&k) = kappa.values.iter().find(|&&k| !(k > 0.0)) {
            return Err(FlowError::Domain {
                name: "kappa",
                value: k,
                domain: "(0, inf)",
            });
        }
        if let Some(&p) = porosity.values.iter().find(|&&p| !(p > 0.0)) {
            return Err(FlowError::Domain {
                name: "porosity",
                value: p,
                domain: "(0, inf)",
            });
        }
        if let Some(&s) = inflow.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(FlowError::Domain {
                name: "inflow",
                value: s,
                domain: "[0, 1]",
            });
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(FlowError::Domain {
                name: "cfl",
                value: cfl,
                domain: "(0, 1]",
            });
        }
        Ok(Problem {
            grid,
            fluid,
            kappa,
            porosity,
            inflow,
            cfl,
        })
    }

    /// Uniform medium (`kappa = 1`, `phi = 1`) with the given layer inflow.
    pub fn uniform(grid: Grid, fluid: FluidModel, inflow: Vec<f64>) -> Result<Self> {
        Self::new(
            grid,
            fluid,
            ScalarField::constant(grid, 1.0),
            ScalarField::constant(grid, 1.0),
            inflow,
            crate::DEFAULT_CFL,
        )
    }

    pub fn from_scenario(sc: &Scenario) -> Result<Self> {
        let grid = Grid::new(sc.nx, sc.nz)?;
        let fluid = FluidModel::new(sc.viscosity_ratio)?;
        Self::new(
            grid,
            fluid,
            sc.permeability.cell_averages(grid),
            ScalarField::constant(grid, sc.porosity),
            layer_average(&sc.inflow, grid.nz),
            sc.cfl,
        )
    }

    /// Total pore volume weighted mass `dx dz sum(phi S)`.
    pub fn mass(&self, s: &[f64]) -> f64 {
        self.grid.cell_area()
            * s.iter()
                .zip(&self.porosity.values)
                .map(|(s, p)| s * p)
                .sum::<f64>()
    }

    pub fn max_kappa(&self) -> f64 {
        self.kappa.max()
    }
}
